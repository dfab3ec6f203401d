import math

import numpy as np
import pytest
import torch

from wordbrush.attention import (WordAttention, attention_weights, load_attention_map,
                                 project_words, save_attention_map, word_context_features)
from wordbrush.errors import ShapeError


def softmax_rows_oracle(logits):
    """Straight scalar-arithmetic softmax over the last axis."""
    out = np.zeros_like(logits)
    for i in range(logits.shape[0]):
        shifted = [logits[i, j] - max(logits[i]) for j in range(logits.shape[1])]
        denom = sum(math.exp(v) for v in shifted)
        for j in range(logits.shape[1]):
            out[i, j] = math.exp(shifted[j]) / denom
    return out


def test_identity_projection_returns_words_unchanged():
    words = torch.randn(4, 6)
    assert torch.equal(project_words(words, torch.eye(4)), words)


def test_zero_projection_annihilates():
    words = torch.randn(4, 6)
    assert torch.all(project_words(words, torch.zeros(3, 4)) == 0)


def test_projection_matches_triple_loop_product():
    rng = np.random.default_rng(5)
    proj = rng.normal(size=(3, 2))
    words = rng.normal(size=(2, 4))
    expected = np.zeros((3, 4))
    for i in range(3):
        for j in range(4):
            for k in range(2):
                expected[i, j] += proj[i, k] * words[k, j]
    got = project_words(torch.from_numpy(words), torch.from_numpy(proj))
    np.testing.assert_allclose(got.numpy(), expected, atol=1e-12)


def test_projection_rejects_width_mismatch():
    with pytest.raises(ShapeError):
        project_words(torch.zeros(3, 4), torch.zeros(5, 99))


def test_equal_logits_give_uniform_weights():
    features = torch.ones(4, 5)
    projected = torch.ones(4, 3)
    alpha = attention_weights(features, projected)
    assert torch.allclose(alpha, torch.full((5, 3), 1.0 / 3.0), atol=1e-7)


def test_single_word_gets_all_attention():
    alpha = attention_weights(torch.randn(4, 6), torch.randn(4, 1))
    assert torch.allclose(alpha, torch.ones(6, 1))


def test_weights_match_scalar_oracle():
    rng = np.random.default_rng(7)
    features = rng.normal(size=(3, 2))
    projected = rng.normal(size=(3, 3))
    logits = features.T @ projected
    expected = softmax_rows_oracle(logits)
    got = attention_weights(torch.from_numpy(features), torch.from_numpy(projected))
    np.testing.assert_allclose(got.numpy(), expected, atol=1e-12)


def test_rows_are_distributions():
    rng = np.random.default_rng(11)
    for _ in range(50):
        n, l, m = rng.integers(1, 9, size=3)
        alpha = attention_weights(
            torch.from_numpy(rng.normal(size=(m, n)) * 5),
            torch.from_numpy(rng.normal(size=(m, l)) * 5),
        )
        assert torch.all(alpha >= 0)
        np.testing.assert_allclose(alpha.sum(dim=1).numpy(), np.ones(n), atol=1e-6)


def test_weights_survive_large_logits():
    features = torch.full((2, 3), 500.0, dtype=torch.float64)
    projected = torch.full((2, 2), 500.0, dtype=torch.float64)
    alpha = attention_weights(features, projected)
    assert torch.isfinite(alpha).all()
    np.testing.assert_allclose(alpha.sum(dim=1).numpy(), np.ones(3), atol=1e-12)


def test_weights_are_shift_invariant():
    rng = np.random.default_rng(13)
    features = rng.normal(size=(4, 5))
    projected = rng.normal(size=(4, 3))
    logits = features.T @ projected
    plain = softmax_rows_oracle(logits)
    shifted = softmax_rows_oracle(logits + 123.456)
    got = attention_weights(torch.from_numpy(features), torch.from_numpy(projected)).numpy()
    np.testing.assert_allclose(plain, shifted, atol=1e-9)
    np.testing.assert_allclose(got, plain, atol=1e-9)


def test_context_features_match_scalar_loop():
    rng = np.random.default_rng(17)
    features = rng.normal(size=(3, 4))
    words = rng.normal(size=(5, 2))
    proj = rng.normal(size=(3, 5))
    projected = proj @ words
    alpha = softmax_rows_oracle(features.T @ projected)
    expected = np.zeros((3, 4))
    for i in range(4):
        for j in range(2):
            expected[:, i] += alpha[i, j] * projected[:, j]
    got = word_context_features(
        torch.from_numpy(features), torch.from_numpy(words), torch.from_numpy(proj)
    )
    np.testing.assert_allclose(got.numpy(), expected, atol=1e-10)


def test_context_is_invariant_to_word_order():
    rng = np.random.default_rng(19)
    features = torch.from_numpy(rng.normal(size=(3, 4)))
    words = torch.from_numpy(rng.normal(size=(5, 3)))
    proj = torch.from_numpy(rng.normal(size=(3, 5)))
    perm = torch.tensor([2, 0, 1])
    base = word_context_features(features, words, proj)
    permuted = word_context_features(features, words[:, perm], proj)
    assert torch.allclose(base, permuted, atol=1e-10)


def test_attention_module_shapes_and_row_sums():
    torch.manual_seed(3)
    attn = WordAttention(channels=6, word_width=8)
    features = torch.randn(2, 6, 4, 4)
    words = torch.randn(2, 8, 5)
    context, alpha = attn(features, words)
    assert context.shape == (2, 6, 4, 4)
    assert alpha.shape == (2, 16, 5)
    assert torch.allclose(alpha.sum(dim=2), torch.ones(2, 16), atol=1e-6)


def test_attention_module_masks_padded_words():
    torch.manual_seed(4)
    attn = WordAttention(channels=6, word_width=8)
    features = torch.randn(2, 6, 2, 2)
    words = torch.randn(2, 8, 5)
    lengths = torch.tensor([5, 2])
    _, alpha = attn(features, words, lengths)
    assert torch.all(alpha[1, :, 2:] == 0)
    assert torch.allclose(alpha[1].sum(dim=1), torch.ones(4), atol=1e-6)


def test_masked_attention_ignores_padding_content():
    torch.manual_seed(5)
    attn = WordAttention(channels=6, word_width=8)
    features = torch.randn(1, 6, 2, 2)
    words = torch.randn(1, 8, 5)
    lengths = torch.tensor([3])
    garbage = words.clone()
    garbage[:, :, 3:] = 99.0
    ctx_a, alpha_a = attn(features, words, lengths)
    ctx_b, alpha_b = attn(features, garbage, lengths)
    assert torch.allclose(ctx_a, ctx_b, atol=1e-6)
    assert torch.allclose(alpha_a, alpha_b, atol=1e-6)


def test_attention_module_validates_shapes():
    attn = WordAttention(channels=6, word_width=8)
    with pytest.raises(ShapeError):
        attn(torch.randn(1, 5, 2, 2), torch.randn(1, 8, 3))
    with pytest.raises(ShapeError):
        attn(torch.randn(1, 6, 2, 2), torch.randn(1, 7, 3))
    with pytest.raises(ShapeError):
        attn(torch.randn(2, 6, 2, 2), torch.randn(1, 8, 3))


def test_attention_map_file_round_trip(tmp_path):
    rng = np.random.default_rng(23)
    alpha = rng.random((12, 5)).astype(np.float32)
    path = tmp_path / "alpha.bin"
    save_attention_map(alpha, 3, 4, path)
    loaded, h, w = load_attention_map(path)
    assert (h, w) == (3, 4)
    np.testing.assert_array_equal(loaded, alpha)


def test_attention_map_file_layout_is_header_plus_row_major_float32(tmp_path):
    alpha = np.arange(6, dtype=np.float32).reshape(3, 2)
    path = tmp_path / "alpha.bin"
    save_attention_map(alpha, 3, 1, path)
    raw = path.read_bytes()
    n, l, h, w = np.frombuffer(raw[:16], dtype=np.uint32)
    assert (n, l, h, w) == (3, 2, 3, 1)
    np.testing.assert_array_equal(
        np.frombuffer(raw[16:], dtype=np.float32), alpha.reshape(-1)
    )


def test_attention_map_save_rejects_bad_grid(tmp_path):
    with pytest.raises(ShapeError):
        save_attention_map(np.zeros((5, 2), dtype=np.float32), 2, 2, tmp_path / "x.bin")


def central_difference(fn, tensor, indices, eps=1e-6):
    grads = []
    for idx in indices:
        orig = tensor[idx].item()
        tensor[idx] = orig + eps
        hi = fn()
        tensor[idx] = orig - eps
        lo = fn()
        tensor[idx] = orig
        grads.append((hi - lo) / (2 * eps))
    return torch.tensor(grads, dtype=torch.float64)


def test_attention_chain_gradients_match_finite_differences():
    for seed in range(5):
        torch.manual_seed(seed)
        features = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
        words = torch.randn(5, 2, dtype=torch.float64, requires_grad=True)
        proj = torch.randn(3, 5, dtype=torch.float64, requires_grad=True)
        direction = torch.randn(3, 4, dtype=torch.float64)

        def objective():
            return float((word_context_features(features, words, proj) * direction).sum())

        loss = (word_context_features(features, words, proj) * direction).sum()
        loss.backward()
        for tensor in (features, words, proj):
            flat = [tuple(ix) for ix in np.ndindex(*tensor.shape)]
            with torch.no_grad():
                fd = central_difference(objective, tensor, flat)
            analytic = tensor.grad.reshape(-1)
            denom = torch.clamp(fd.abs() + analytic.abs(), min=1e-8)
            rel = ((analytic - fd).abs() / denom).max()
            assert rel < 1e-4, f"seed {seed}: rel error {rel}"
