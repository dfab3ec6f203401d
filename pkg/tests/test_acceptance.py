"""Full-system acceptance checks.

Each test verifies one system-level property at its stated tolerance and
prints a PASS/FAIL line with the measured numbers. The toy-model tests share
a session fixture that trains both generator modes on three seeds each on a
fixed synthetic corpus; everything else is standalone and runs in seconds.
"""

import math
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest
import scipy.stats
import torch

from wordbrush.attention import (WordAttention, attention_weights, project_words,
                                 word_context_features)
from wordbrush.data import COLOR_NAMES, build_vocabulary, synth_generate
from wordbrush.discriminator import Discriminator, ScorePair, score
from wordbrush.evaluate import (attention_heatmaps, chi_square_independence,
                                interpolate_text, label_entropy_probe, mask_contrast,
                                masked_l1, train_label_classifier)
from wordbrush.inference import Manipulator
from wordbrush.losses import (LossWeights, discriminator_loss, generator_loss,
                              reconstruction_loss)
from wordbrush.training import TrainingConfig, read_loss_log, run_training

CORPUS_SEED = 11
SEEDS = (4, 0, 3)
TOY = dict(resolution=64, channels=(16, 32, 64, 128), embed_dim=32, text_hidden=16,
           epochs=30, batch_size=32, max_length=10, lr=2e-3, match_gain=3.0)
TOY_BUDGET_SECONDS = 3 * 3600


def report(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# attention properties
# ---------------------------------------------------------------------------

def test_attention_rows_normalized_and_invariant():
    t0 = time.time()
    rng = np.random.default_rng(0)
    worst_sum = worst_perm = worst_shift = 0.0
    for trial in range(1000):
        m = int(rng.integers(2, 12))
        n = int(rng.integers(1, 24))
        l = int(rng.integers(1, 9))
        d = int(rng.integers(1, 9))
        features = torch.tensor(rng.standard_normal((m, n)))
        words = torch.tensor(rng.standard_normal((d, l)))
        proj = torch.tensor(rng.standard_normal((m, d)))

        projected = project_words(words, proj)
        alpha = attention_weights(features, projected)
        assert (alpha >= 0).all()
        worst_sum = max(worst_sum, float((alpha.sum(dim=1) - 1).abs().max()))

        # reordering the word set must not change the context features
        perm = torch.tensor(rng.permutation(l))
        ctx = word_context_features(features, words, proj)
        ctx_perm = word_context_features(features, words[:, perm], proj)
        worst_perm = max(worst_perm, float((ctx - ctx_perm).abs().max()))

        # adding a per-region constant to the logits must not change the
        # weights; the reference softmax is computed without any shift
        logits = features.t() @ projected
        shift = torch.tensor(rng.standard_normal((n, 1))) * 40.0
        raw = torch.exp(logits + shift)
        reference = raw / raw.sum(dim=1, keepdim=True)
        worst_shift = max(worst_shift, float((alpha - reference).abs().max()))

        # the batched module with padding masks obeys the same row law
        if trial % 10 == 0:
            with torch.no_grad():
                block = WordAttention(m, d).double()
                feats4 = torch.tensor(rng.standard_normal((2, m, 3, 2)))
                words3 = torch.tensor(rng.standard_normal((2, d, l)))
                lengths = torch.tensor([l, int(rng.integers(1, l + 1))])
                _, balpha = block(feats4, words3, lengths)
            worst_sum = max(worst_sum, float((balpha.sum(dim=2) - 1).abs().max()))
            assert (balpha >= 0).all()

    elapsed = time.time() - t0
    ok = worst_sum < 1e-6 and worst_perm < 1e-6 and worst_shift < 1e-6 and elapsed < 60
    report("attention normalization and invariances", ok,
           f"worst row-sum err {worst_sum:.2e}, permutation err {worst_perm:.2e}, "
           f"shift err {worst_shift:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------

def _relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    scale = max(float(analytic.norm()), float(numeric.norm()), 1e-12)
    return float((analytic - numeric).norm()) / scale


def test_gradients_match_central_differences():
    t0 = time.time()
    eps = 1e-6
    worst_chain = worst_pixels = 0.0
    for seed in range(50):
        torch.manual_seed(seed)

        # (a) projection -> softmax -> context chain, all three inputs
        features = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
        words = torch.randn(2, 3, dtype=torch.float64, requires_grad=True)
        proj = torch.randn(3, 2, dtype=torch.float64, requires_grad=True)
        probe = torch.randn(3, 4, dtype=torch.float64)

        def chain():
            return (word_context_features(features, words, proj) * probe).sum()

        chain().backward()
        for leaf in (features, words, proj):
            analytic = leaf.grad.detach().clone()
            numeric = torch.zeros_like(analytic)
            flat = leaf.data.reshape(-1)
            num_flat = numeric.reshape(-1)
            with torch.no_grad():
                for i in range(flat.numel()):
                    keep = float(flat[i])
                    flat[i] = keep + eps
                    hi = float(chain())
                    flat[i] = keep - eps
                    lo = float(chain())
                    flat[i] = keep
                    num_flat[i] = (hi - lo) / (2 * eps)
            worst_chain = max(worst_chain, _relative_error(analytic, numeric))

        # (b) full generator objective as a function of the generated pixels
        disc = Discriminator(6, channels=(4, 6, 8, 10)).double().eval()
        image = torch.randn(1, 3, 16, 16, dtype=torch.float64, requires_grad=True)
        desc = torch.randn(1, 6, 3, dtype=torch.float64)
        lengths = torch.tensor([3])
        target = torch.randn(1, 3, 16, 16, dtype=torch.float64)
        weights = LossWeights(gamma1=10.0, gamma2=3.0)

        def objective():
            pair = score(disc, image, desc, lengths)
            return generator_loss(pair, reconstruction_loss(image, target), weights)

        objective().backward()
        picks = torch.randperm(image.numel())[:8]
        analytic = image.grad.detach().reshape(-1)[picks].clone()
        numeric = torch.zeros_like(analytic)
        flat = image.data.reshape(-1)
        with torch.no_grad():
            for slot, i in enumerate(picks):
                keep = float(flat[i])
                flat[i] = keep + eps
                hi = float(objective())
                flat[i] = keep - eps
                lo = float(objective())
                flat[i] = keep
                numeric[slot] = (hi - lo) / (2 * eps)
        worst_pixels = max(worst_pixels, _relative_error(analytic, numeric))

    elapsed = time.time() - t0
    ok = worst_chain < 1e-4 and worst_pixels < 1e-4 and elapsed < 120
    report("analytic gradients vs central differences", ok,
           f"attention chain {worst_chain:.2e}, generator objective {worst_pixels:.2e} "
           f"over 50 seeds, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# objective values against scalar loops
# ---------------------------------------------------------------------------

def test_objectives_match_scalar_loops():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        b = int(rng.integers(1, 9))
        ru, fu, rc, fc = (rng.uniform(0.02, 0.98, size=b) for _ in range(4))
        recon = float(rng.uniform(0.0, 0.6))
        g1 = float(rng.uniform(0.0, 12.0))
        g2 = float(rng.uniform(0.0, 5.0))
        weights = LossWeights(gamma1=g1, gamma2=g2)
        real = ScorePair(uncond=torch.tensor(ru), cond=torch.tensor(rc))
        fake = ScorePair(uncond=torch.tensor(fu), cond=torch.tensor(fc))

        d_value = float(discriminator_loss(real, fake, weights))
        g_value = float(generator_loss(fake, torch.tensor(recon, dtype=torch.float64), weights))

        d_ref = 0.0
        for v in ru:
            d_ref += math.log(v) / b
        for v in fu:
            d_ref += math.log1p(-v) / b
        for v in rc:
            d_ref += g1 * math.log(v) / b
        for v in fc:
            d_ref += g1 * math.log1p(-v) / b
        d_ref = -d_ref

        g_ref = 0.0
        for v in fu:
            g_ref += math.log(v) / b
        for v in fc:
            g_ref += g1 * math.log(v) / b
        g_ref = -g_ref + g2 * recon

        worst = max(worst, abs(d_value - d_ref), abs(g_value - g_ref))

    # both objectives are affine in their weights
    rng = np.random.default_rng(8)
    ru, fu, rc, fc = (torch.tensor(rng.uniform(0.1, 0.9, size=4)) for _ in range(4))
    real, fake = ScorePair(ru, rc), ScorePair(fu, fc)
    recon = torch.tensor(0.37, dtype=torch.float64)
    for gamma in (0.5, math.pi, 9.25):
        d0 = float(discriminator_loss(real, fake, LossWeights(gamma1=0.0, gamma2=1.0)))
        d1 = float(discriminator_loss(real, fake, LossWeights(gamma1=1.0, gamma2=1.0)))
        dg = float(discriminator_loss(real, fake, LossWeights(gamma1=gamma, gamma2=1.0)))
        worst = max(worst, abs(dg - (d0 + gamma * (d1 - d0))))
        g0 = float(generator_loss(fake, recon, LossWeights(gamma1=0.0, gamma2=0.0)))
        g1_ = float(generator_loss(fake, recon, LossWeights(gamma1=1.0, gamma2=0.0)))
        gg = float(generator_loss(fake, recon, LossWeights(gamma1=gamma, gamma2=0.0)))
        worst = max(worst, abs(gg - (g0 + gamma * (g1_ - g0))))
        r1 = float(generator_loss(fake, recon, LossWeights(gamma1=1.0, gamma2=gamma)))
        worst = max(worst, abs(r1 - (g1_ + gamma * float(recon))))

    ok = worst < 1e-10
    report("objective values vs scalar loops", ok,
           f"worst absolute deviation {worst:.2e} over 100 batches, affinity included")


# ---------------------------------------------------------------------------
# chi-square closed forms
# ---------------------------------------------------------------------------

def test_chi_square_closed_forms():
    diag = chi_square_independence([[10, 0], [0, 10]])
    # for one degree of freedom the upper tail is erfc(sqrt(x/2))
    p_ref = math.erfc(math.sqrt(10.0))
    assert abs(p_ref - float(scipy.stats.chi2.sf(20.0, 1))) <= p_ref * 1e-10
    stat_err = abs(diag.statistic - 20.0) / 20.0
    p_err = abs(diag.p_value - p_ref) / p_ref
    uniform = chi_square_independence([[5, 5], [5, 5]])
    ok = (stat_err <= 1e-8 and p_err <= 1e-8
          and uniform.statistic == 0.0 and uniform.p_value == 1.0)
    report("chi-square closed forms", ok,
           f"diagonal stat rel err {stat_err:.2e}, p rel err {p_err:.2e}, "
           f"uniform p {uniform.p_value}")


# ---------------------------------------------------------------------------
# reproducibility
# ---------------------------------------------------------------------------

def test_reproducible_and_resumable_training(tmp_path):
    items, _ = synth_generate(24, seed=9)
    vocab = build_vocabulary(items)
    base = dict(mode="multi", resolution=64, channels=(4, 6, 8, 10), embed_dim=8,
                text_hidden=4, max_length=10, batch_size=8, seed=5, checkpoint_every=1)

    first = run_training(TrainingConfig(epochs=1, **base), items, tmp_path / "a", vocab)
    run_training(TrainingConfig(epochs=1, **base), items, tmp_path / "b", vocab)
    log_a = read_loss_log(tmp_path / "a" / "losses.jsonl")
    log_b = read_loss_log(tmp_path / "b" / "losses.jsonl")
    same_logs = log_a == log_b

    straight = run_training(TrainingConfig(epochs=2, **base), items, tmp_path / "c", vocab)
    resumed = run_training(TrainingConfig(epochs=2, **base), items, tmp_path / "d", vocab,
                           resume=first[-1])
    log_c = [r for r in read_loss_log(tmp_path / "c" / "losses.jsonl") if r["epoch"] == 2]
    log_d = read_loss_log(tmp_path / "d" / "losses.jsonl")
    same_tail = log_c == log_d

    final_c = Manipulator.from_checkpoint(straight[-1], vocab)
    final_d = Manipulator.from_checkpoint(resumed[-1], vocab)
    same_params = all(
        torch.equal(a, b)
        for mod_c, mod_d in ((final_c.generator, final_d.generator),
                             (final_c.text_encoder, final_d.text_encoder))
        for (_, a), (_, b) in zip(mod_c.state_dict().items(), mod_d.state_dict().items())
    )

    ok = same_logs and same_tail and same_params
    report("reproducible and resumable training", ok,
           f"identical epoch-1 logs {same_logs}, resume matches uninterrupted "
           f"logs {same_tail} and parameters {same_params}")


# ---------------------------------------------------------------------------
# toy end-to-end fixture
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def toy(tmp_path_factory):
    t0 = time.time()
    items, oracle = synth_generate(500, seed=CORPUS_SEED)
    vocab = build_vocabulary(items)
    train = [it for it in items if it.split == "train"]
    held = [it for it in items if it.split == "test"]
    assert len(held) == 100

    runs = {}
    for mode in ("multi", "single"):
        for seed in SEEDS:
            out = Path(tmp_path_factory.mktemp(f"toy-{mode}-{seed}"))
            config = TrainingConfig(mode=mode, seed=seed, **TOY)
            last = run_training(config, train, out, vocab)[-1]
            manipulator = Manipulator.from_checkpoint(last, vocab)

            hits, backgrounds, edits = 0, [], []
            for i, it in enumerate(held):
                choices = [c for c in COLOR_NAMES if c != it.color]
                want = choices[i % len(choices)]
                edit = manipulator.manipulate(it.image, f"the {it.shape} is {want}")
                hits += oracle(edit, it.mask) == want
                backgrounds.append(masked_l1(edit, it.image, it.mask, outside=True))
                edits.append(edit)
            runs[(mode, seed)] = SimpleNamespace(
                manipulator=manipulator,
                out_dir=out,
                transfer=hits / len(held),
                background=float(np.mean(backgrounds)),
                edited=torch.stack(edits),
            )

    return SimpleNamespace(train=train, held=held, oracle=oracle, runs=runs,
                           elapsed=time.time() - t0)


def test_toy_reconstruction_improves(toy):
    log = read_loss_log(toy.runs[("multi", SEEDS[0])].out_dir / "losses.jsonl")

    def epoch_mean(epoch):
        values = [r["recon"] / 2.0 for r in log if r["epoch"] == epoch]
        return sum(values) / len(values)

    first, last = epoch_mean(1), epoch_mean(TOY["epochs"])
    ok = last < 0.08 and last < first and toy.elapsed < TOY_BUDGET_SECONDS
    report("toy positive-pair reconstruction", ok,
           f"display L1 epoch 1 {first:.4f} -> epoch {TOY['epochs']} {last:.4f}, "
           f"all six runs in {toy.elapsed:.0f}s")


def test_toy_attribute_transfer(toy):
    transfer = toy.runs[("multi", SEEDS[0])].transfer
    report("toy attribute transfer", transfer >= 0.70,
           f"requested color realized on {transfer:.0%} of 100 held-out manipulations")


def test_toy_background_preservation(toy):
    background = toy.runs[("multi", SEEDS[0])].background
    report("toy background preservation", background < 0.05,
           f"mean outside-mask L1 {background:.4f}")


def test_toy_multi_vs_single_ordering(toy):
    multi = float(np.mean([toy.runs[("multi", s)].background for s in SEEDS]))
    single = float(np.mean([toy.runs[("single", s)].background for s in SEEDS]))
    report("multi vs single background ordering", multi <= single,
           f"multi {multi:.4f} <= single {single:.4f} over {len(SEEDS)} seeds")


def test_heatmap_localization(toy):
    run = toy.runs[("multi", SEEDS[0])]
    contrasts = []
    for it in toy.held[:20]:
        maps = attention_heatmaps(run.manipulator, it.image, f"the {it.shape} is {it.color}")
        contrasts.append(mask_contrast(maps.maps[maps.words.index(it.color)], it.mask))
    mean = float(np.mean(contrasts))
    report("heatmap localization", mean >= 1.2,
           f"color-word mask contrast {mean:.2f} averaged over 20 samples")


def test_interpolation_endpoints_and_sweep(toy):
    manipulator = toy.runs[("multi", SEEDS[0])].manipulator
    exact, monotone = 0, 0
    for it in toy.held[:20]:
        source = f"the {it.shape} is red"
        target = f"the {it.shape} is blue"
        frames = interpolate_text(manipulator, it.image, source, target, 5)
        exact += (torch.equal(frames[0], manipulator.manipulate(it.image, source))
                  and torch.equal(frames[-1], manipulator.manipulate(it.image, target)))
        region = torch.from_numpy(it.mask)
        reds = [float(((frame[0][region] + 1) / 2).mean()) for frame in frames]
        monotone += all(reds[i + 1] <= reds[i] + 1e-6 for i in range(len(reds) - 1))
    ok = exact == 20 and monotone >= 16
    report("interpolation endpoints and sweep", ok,
           f"endpoints bit-exact {exact}/20, red channel monotone {monotone}/20")


def test_label_entropy_probe(toy):
    run = toy.runs[("multi", SEEDS[0])]
    classifier = train_label_classifier(toy.train)
    recons = torch.stack([run.manipulator.reconstruct(it.image, it.captions[0])
                          for it in toy.held])
    probe_recon = label_entropy_probe(classifier, recons)
    probe_edit = label_entropy_probe(classifier, run.edited)
    ok = probe_edit.mean_entropy > probe_recon.mean_entropy
    report("label entropy probe", ok,
           f"manipulated {probe_edit.mean_entropy:.3f} nats > "
           f"reconstructed {probe_recon.mean_entropy:.3f} nats")
