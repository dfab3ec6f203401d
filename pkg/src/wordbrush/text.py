"""Description handling: vocabulary, tokenization, and the recurrent word encoder.

A description is encoded as a matrix with one column per word; each column is
the concatenation of the forward and backward recurrent hidden states at that
word, so every column sees the whole sequence.
"""

import hashlib
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .errors import InvalidDescription

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_INDEX = 0
UNK_INDEX = 1

_TOKEN_RE = re.compile(r"[^a-z0-9' ]+")
DEFAULT_MAX_LENGTH = 20


@dataclass
class Vocabulary:
    """Token/index bijection with reserved pad (0) and unknown (1) slots."""

    itos: list[str] = field(default_factory=lambda: [PAD_TOKEN, UNK_TOKEN])
    stoi: dict[str, int] = field(init=False)

    def __post_init__(self):
        if self.itos[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ValueError("vocabulary must reserve index 0 for pad and 1 for unknown")
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, UNK_INDEX)

    def token(self, index: int) -> str:
        return self.itos[index]

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        """Collect every token appearing in ``texts``; order is alphabetical
        so the same corpus always yields the same file and hash."""
        seen = set()
        for text in texts:
            seen.update(_clean(text).split())
        return cls(itos=[PAD_TOKEN, UNK_TOKEN] + sorted(seen))

    def save(self, path):
        Path(path).write_text("\n".join(self.itos) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(itos=lines)

    def content_hash(self) -> str:
        """Stable hash of the token list; checkpoints record it so inference
        can refuse a mismatched vocabulary."""
        digest = hashlib.sha256("\n".join(self.itos).encode("utf-8"))
        return digest.hexdigest()


@dataclass
class TokenSequence:
    """Indices of one tokenized description. ``length`` counts real tokens
    before any padding."""

    indices: list[int]

    def __post_init__(self):
        if len(self.indices) < 1:
            raise InvalidDescription("token sequence must contain at least one token")
        if PAD_INDEX in self.indices:
            raise InvalidDescription("pad index inside a live token sequence")

    @property
    def length(self) -> int:
        return len(self.indices)

    def padded(self, total: int) -> list[int]:
        if total < self.length:
            raise ValueError("pad target shorter than sequence")
        return self.indices + [PAD_INDEX] * (total - self.length)


def _clean(text: str) -> str:
    return _TOKEN_RE.sub(" ", text.lower()).strip()


def tokenize(text: str, vocab: Vocabulary, max_length: int = DEFAULT_MAX_LENGTH) -> TokenSequence:
    """Lowercase, strip punctuation, split on whitespace, map to indices.

    Unseen tokens map to the unknown index. Raises InvalidDescription when
    nothing survives normalization.
    """
    cleaned = _clean(text)
    if not cleaned:
        raise InvalidDescription(f"description is empty after normalization: {text!r}")
    words = cleaned.split()
    if len(words) > max_length:
        logger.warning(
            "description truncated from %d to %d tokens: %r", len(words), max_length, text
        )
        words = words[:max_length]
    return TokenSequence(indices=[vocab.index(w) for w in words])


def tokens_to_words(tokens: TokenSequence, vocab: Vocabulary) -> list[str]:
    return [vocab.token(i) for i in tokens.indices]


class TextEncoder(nn.Module):
    """Bidirectional LSTM over word embeddings.

    Output is (batch, width, L) where width = 2 * hidden_size: column j holds
    the forward hidden state at step j stacked on the backward hidden state at
    step j. Columns past each sequence's length are zero.
    """

    def __init__(self, vocab_size: int, embed_dim: int = 300, hidden_size: int = 128):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD_INDEX)
        self.lstm = nn.LSTM(embed_dim, hidden_size, batch_first=True, bidirectional=True)
        self.embedding.weight.data.uniform_(-0.1, 0.1)
        self.embedding.weight.data[PAD_INDEX].zero_()

    @property
    def width(self) -> int:
        return 2 * self.lstm.hidden_size

    def load_pretrained_vectors(self, path, vocab: Vocabulary):
        """Overwrite embedding rows with vectors from a word-vector text file
        (``token v1 ... vd`` per line, optional count/dim header). Tokens not
        present in the file keep their random initialization."""
        n_loaded = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                parts = line.rstrip().split(" ")
                if lineno == 0 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue  # header line of the word2vec text format
                token, values = parts[0], parts[1:]
                if token not in vocab:
                    continue
                if len(values) != self.embedding.embedding_dim:
                    raise ValueError(
                        f"vector width {len(values)} != embedding dim "
                        f"{self.embedding.embedding_dim} for token {token!r}"
                    )
                vec = torch.tensor([float(v) for v in values], dtype=self.embedding.weight.dtype)
                with torch.no_grad():
                    self.embedding.weight[vocab.index(token)] = vec
                n_loaded += 1
        logger.info("loaded %d pretrained vectors from %s", n_loaded, path)
        return n_loaded

    def forward(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """tokens: (B, Lmax) long, lengths: (B,) long -> (B, width, Lmax)."""
        emb = self.embedding(tokens)  # (B, Lmax, E)
        packed = pack_padded_sequence(
            emb, lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        out, _ = self.lstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=tokens.size(1))
        return out.transpose(1, 2)  # (B, 2H, Lmax)


def encode_words(tokens: TokenSequence, encoder: TextEncoder) -> torch.Tensor:
    """Encode a single sequence to the (width, L) word-feature matrix."""
    device = next(encoder.parameters()).device
    batch = torch.tensor([tokens.indices], dtype=torch.long, device=device)
    lengths = torch.tensor([tokens.length], dtype=torch.long)
    return encoder(batch, lengths)[0]


def batch_tokens(sequences: list[TokenSequence], device=None):
    """Pad a list of sequences to a (B, Lmax) index tensor plus lengths."""
    lmax = max(s.length for s in sequences)
    tokens = torch.tensor([s.padded(lmax) for s in sequences], dtype=torch.long, device=device)
    lengths = torch.tensor([s.length for s in sequences], dtype=torch.long)
    return tokens, lengths
