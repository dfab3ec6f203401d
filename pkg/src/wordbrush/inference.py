"""Single-object inference: bundle a vocabulary, text encoder, and generator
behind image-in/image-out calls (manipulate, reconstruct, interpolate,
attention export). All calls are deterministic and side-effect free."""

from pathlib import Path

import torch

from .errors import InvalidDescription, ShapeError
from .text import DEFAULT_MAX_LENGTH, TextEncoder, Vocabulary, batch_tokens, tokenize, tokens_to_words


class Manipulator:
    """A loaded model ready to edit images from descriptions."""

    def __init__(self, text_encoder: TextEncoder, generator, vocab: Vocabulary,
                 max_length: int = DEFAULT_MAX_LENGTH, manifest: dict | None = None):
        self.text_encoder = text_encoder
        self.generator = generator
        self.vocab = vocab
        self.max_length = max_length
        self.manifest = dict(manifest or {})
        self.text_encoder.eval()
        self.generator.eval()

    @classmethod
    def from_checkpoint(cls, path, vocab: Vocabulary) -> "Manipulator":
        from .checkpoint import load_checkpoint, load_for_inference

        payload = load_checkpoint(path) if not isinstance(path, dict) else path
        text_encoder, generator, manifest = load_for_inference(payload, vocab)
        max_length = payload["config"].get("max_length", DEFAULT_MAX_LENGTH)
        return cls(text_encoder, generator, vocab, max_length, manifest)

    @property
    def checkpoint_id(self) -> str:
        return self.manifest.get("checkpoint_id", "unloaded")

    @property
    def resolution(self) -> int | None:
        return self.manifest.get("resolution")

    @property
    def mode(self) -> str | None:
        return self.manifest.get("mode")

    # -- helpers ----------------------------------------------------------

    def _check_image(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 3 or image.size(0) != 3:
            raise ShapeError(f"expected a (3, S, S) image, got {tuple(image.shape)}")
        return image.float()

    def _encode(self, descriptions: list[str]):
        seqs = [tokenize(d, self.vocab, self.max_length) for d in descriptions]
        tokens, lengths = batch_tokens(seqs)
        words = self.text_encoder(tokens, lengths)
        return words, lengths, seqs

    # -- operations -------------------------------------------------------

    def manipulate_batch(self, images: torch.Tensor, descriptions: list[str]) -> torch.Tensor:
        if images.dim() != 4 or images.size(0) != len(descriptions):
            raise ShapeError("need one description per image")
        with torch.no_grad():
            words, lengths, _ = self._encode(descriptions)
            return self.generator(images, words, lengths)

    def manipulate(self, image: torch.Tensor, description: str) -> torch.Tensor:
        image = self._check_image(image)
        return self.manipulate_batch(image.unsqueeze(0), [description])[0]

    def reconstruct(self, image: torch.Tensor, caption: str) -> torch.Tensor:
        """Same forward pass; named for the matched-description case."""
        return self.manipulate(image, caption)

    def attention(self, image: torch.Tensor, description: str):
        """(output image, attention maps deepest-first, word strings)."""
        image = self._check_image(image)
        with torch.no_grad():
            words, lengths, seqs = self._encode([description])
            out, alphas = self.generator(
                image.unsqueeze(0), words, lengths, return_attention=True
            )
        return out[0], [a[0] for a in alphas], tokens_to_words(seqs[0], self.vocab)

    def interpolate(self, image: torch.Tensor, description_a: str, description_b: str,
                    steps: int) -> list[torch.Tensor]:
        """Generate along the linear path between the two descriptions' word
        feature matrices; endpoints equal direct generation exactly."""
        if steps < 2:
            raise ValueError("steps must be at least 2")
        image = self._check_image(image)
        with torch.no_grad():
            words, lengths, seqs = self._encode([description_a, description_b])
            if seqs[0].length != seqs[1].length:
                raise InvalidDescription(
                    f"interpolation needs equal lengths, got "
                    f"{seqs[0].length} and {seqs[1].length}"
                )
            w_a, w_b = words[0:1], words[1:2]
            length = lengths[0:1]
            batch = image.unsqueeze(0)
            frames = []
            for k in range(steps):
                lam = k / (steps - 1)
                if k == 0:
                    blended = w_a
                elif k == steps - 1:
                    blended = w_b
                else:
                    blended = (1.0 - lam) * w_a + lam * w_b
                frames.append(self.generator(batch, blended, length)[0])
        return frames


def load_manipulator(checkpoint_path, vocab_path) -> Manipulator:
    vocab = Vocabulary.load(Path(vocab_path))
    return Manipulator.from_checkpoint(checkpoint_path, vocab)
