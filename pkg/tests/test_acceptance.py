"""Acceptance gate: seven criteria, one printed pass/fail line each.

Run with `pytest tests/test_acceptance.py -s` to see the lines live.
"""

import json
import time

import numpy as np
import pytest

from maskaug import tensor as T
from maskaug.augment import AugmentationPolicy, augment_dataset, augment_sentence, sample_replacement
from maskaug.classify import CnnConfig, ab_experiment, format_table, predict_proba, save_classifier, train_cnn
from maskaug.cli import EXIT_CHECKPOINT, EXIT_MISSING_FILE, EXIT_OK, EXIT_PARSE, EXIT_USAGE, main
from maskaug.encoder import EncoderConfig, batch_from_examples, forward, init_params, load_encoder, mlm_distribution, save_encoder
from maskaug.gradcheck import check_gradients, gradient_disagreement, numeric_gradient
from maskaug.seeding import derive_rng
from maskaug.styletransfer import transfer_style
from maskaug.synthetic import NEGATIVE_WORDS, POSITIVE_WORDS, SENT_SLOT, sentiment_rows, with_label_noise, write_rows_tsv
from maskaug.tensor import Tensor
from maskaug.text import CLS_ID, NUM_SPECIALS, build_vocab, load_tsv, tokenize
from maskaug.training import IGNORE_ID, MaskPolicy, SkipExample, TrainConfig, finetune_cmlm, mask_tokens, pretrain_mlm

TOY = dict(layers=2, hidden=64, heads=2, ff=256, max_len=64, num_conditions=2, dropout=0.1)


def report(line: str) -> None:
    print(f"\n{line}")


# ---------------------------------------------------------------------------
# shared trained bundle (AC-3, AC-4, AC-6)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    rows = sentiment_rows(200, seed=0)
    write_rows_tsv(rows, root / "train.tsv")
    vocab = build_vocab([tokenize(text) for _, text in rows])
    assert len(vocab) < 100
    dataset = load_tsv(root / "train.tsv", vocab, max_len=64, val_fraction=0.1, seed=42)
    return root, vocab, dataset


@pytest.fixture(scope="session")
def trained(corpus):
    root, vocab, dataset = corpus
    config = EncoderConfig(vocab_size=len(vocab), **TOY)
    pretrain_cfg = TrainConfig(epochs=10, batch_size=32, lr=1e-3, patience=3, seed=42)
    params, _ = pretrain_mlm(dataset, config, MaskPolicy(mode="ratio", ratio=0.15), pretrain_cfg)
    finetune_cfg = TrainConfig(epochs=10, batch_size=16, lr=1e-3, patience=3, seed=42)
    tuned, tuned_config, _ = finetune_cmlm(
        dataset, params, config, MaskPolicy(mode="ratio", ratio=0.3), finetune_cfg
    )
    return params, config, tuned, tuned_config


def word_ids(vocab, words):
    return [vocab.id_of(w) for w in words]


# ---------------------------------------------------------------------------
# AC-1: gradient suite
# ---------------------------------------------------------------------------


def _op_cases(rng):
    """(name, shapes, builder) for every differentiable op; 5 instances each."""

    def dims(*ranges):
        return tuple(int(rng.integers(lo, hi + 1)) for lo, hi in ranges)

    cases = []
    for _ in range(5):
        m, k, n = dims((2, 5), (2, 5), (2, 5))
        cases.append((f"matmul {m}x{k}@{k}x{n}", [(m, k), (k, n)], lambda xs: T.matmul(xs[0], xs[1])))
        b = int(rng.integers(2, 4))
        cases.append((f"matmul batched", [(b, m, k), (k, n)], lambda xs: T.matmul(xs[0], xs[1])))
        r, c = dims((2, 6), (2, 9))
        cases.append(("softmax", [(r, c)], lambda xs: T.softmax(xs[0])))
        cases.append(("log_softmax", [(r, c)], lambda xs: T.log_softmax(xs[0])))
        h = int(rng.integers(2, 8))
        cases.append(
            ("layer_norm", [(r, h), (h,), (h,)], lambda xs: T.layer_norm(xs[0], xs[1], xs[2]))
        )
        cases.append(("gelu", [(r, c)], lambda xs: T.gelu(xs[0])))
        cases.append(("relu", [(r, c)], lambda xs: T.relu(xs[0])))
        cases.append(("tanh", [(r, c)], lambda xs: T.tanh(xs[0])))
        cases.append(("sigmoid", [(r, c)], lambda xs: T.sigmoid(xs[0])))
        cases.append(("add", [(r, c), (c,)], lambda xs: T.add(xs[0], xs[1])))
        cases.append(("mul", [(r, c), (r, c)], lambda xs: T.mul(xs[0], xs[1])))
        cases.append(("scale", [(r, c)], lambda xs: T.scale(xs[0], -1.7)))
        v, e, ni = dims((3, 8), (2, 5), (2, 6))
        ids = rng.integers(0, v, size=ni)
        cases.append(
            ("embedding_lookup", [(v, e)], lambda xs, ids=ids: T.embedding_lookup(xs[0], ids))
        )
        seed = int(rng.integers(1 << 30))
        cases.append(
            (
                "dropout",
                [(r, c)],
                lambda xs, s=seed: T.dropout(xs[0], 0.4, np.random.default_rng(s), train=True),
            )
        )
        t, w = dims((3, 7), (2, 3))
        cases.append(
            ("unfold_windows", [(2, t, e)], lambda xs, w=w: T.unfold_windows(xs[0], w))
        )
        cases.append(("reduce_max", [(r, c)], lambda xs: T.reduce_max(xs[0], axis=1)))
        cases.append(("reduce_sum", [(r, c)], lambda xs: T.reduce_sum(xs[0], axis=0)))
        cases.append(("reduce_mean", [(r, c)], lambda xs: T.reduce_mean(xs[0])))
        cases.append(
            ("concat", [(r, 2), (r, 3)], lambda xs: T.concat([xs[0], xs[1]], axis=-1))
        )
        cases.append(("slice_axis", [(r, 5)], lambda xs: T.slice_axis(xs[0], 1, 1, 4)))
        cases.append(("transpose", [(2, r, c)], lambda xs: T.transpose(xs[0], (1, 0, 2))))
        cases.append(("reshape", [(r, 4)], lambda xs, r=r: T.reshape(xs[0], (r * 2, 2))))
        nr, nv = dims((2, 6), (3, 9))
        targets = rng.integers(0, nv, size=nr)
        targets[0] = -1
        cases.append(
            (
                "cross_entropy",
                [(nr, nv)],
                lambda xs, t=targets: T.cross_entropy(xs[0], t, ignore_index=-1)[0],
            )
        )
    return cases


def test_ac1_gradient_suite():
    start = time.time()
    rng = np.random.default_rng(2024)
    worst_op, worst_err = "", 0.0
    for name, shapes, builder in _op_cases(rng):
        arrays = [rng.normal(size=s) for s in shapes]
        probe = builder([Tensor(a) for a in arrays])
        weights = rng.normal(size=probe.data.shape)
        err = check_gradients(
            lambda xs, b=builder, w=weights: T.reduce_sum(T.mul(b(xs), Tensor(w))), arrays
        )
        if err > worst_err:
            worst_op, worst_err = name, err
    assert worst_err < 1e-4, f"op gradient check failed at {worst_op}: {worst_err}"

    # full model: 2-layer, H=8 encoder forward + masked-LM loss, 5 instances
    config = EncoderConfig(
        vocab_size=13, layers=2, hidden=8, heads=2, ff=16, max_len=8,
        num_conditions=2, dropout=0.0,
    )
    full_worst = 0.0
    for instance in range(5):
        inst_rng = np.random.default_rng(100 + instance)
        params = init_params(config, inst_rng)
        names = list(params)
        length = int(inst_rng.integers(3, 7))
        tokens = [CLS_ID] + inst_rng.integers(NUM_SPECIALS, 13, size=length).tolist()
        batch = batch_from_examples([tokens], [int(inst_rng.integers(2))])
        targets = np.full(batch.token_ids.shape, IGNORE_ID)
        pos = int(inst_rng.integers(1, length + 1))
        targets[0, pos] = int(inst_rng.integers(NUM_SPECIALS, 13))
        flat_targets = targets.reshape(-1)

        def loss_value(arrays):
            ps = dict(zip(names, (Tensor(a) for a in arrays)))
            logits = forward(ps, config, batch)
            b, t, v = logits.data.shape
            return float(
                T.cross_entropy(T.reshape(logits, (b * t, v)), flat_targets, ignore_index=IGNORE_ID)[0].data
            )

        logits = forward(params, config, batch)
        b, t, v = logits.data.shape
        loss, _ = T.cross_entropy(
            T.reshape(logits, (b * t, v)), flat_targets, ignore_index=IGNORE_ID
        )
        loss.backward()
        arrays = [p.data for p in params.values()]
        for i, name in enumerate(names):
            numeric = numeric_gradient(loss_value, arrays, i)
            analytic = params[name].grad
            if analytic is None:
                analytic = np.zeros_like(arrays[i])
            full_worst = max(full_worst, gradient_disagreement(analytic, numeric))
    elapsed = time.time() - start
    assert full_worst < 1e-3, f"full-model gradient check failed: {full_worst}"
    assert elapsed < 60.0, f"AC-1 exceeded its 1-minute budget: {elapsed:.1f}s"
    report(
        f"AC-1 PASS: op gradients < 1e-4 (worst {worst_err:.2e} at {worst_op}), "
        f"full model < 1e-3 (worst {full_worst:.2e}), {elapsed:.1f}s"
    )


# ---------------------------------------------------------------------------
# AC-2: masking / augmentation invariants
# ---------------------------------------------------------------------------


def test_ac2_masking_invariants():
    start = time.time()
    rng = np.random.default_rng(7)
    trials = 0

    # 9,000 masking trials over random sentences and policies
    from maskaug.text import LabeledExample

    for _ in range(9_000):
        n_words = int(rng.integers(1, 12))
        tokens = (CLS_ID,) + tuple(rng.integers(NUM_SPECIALS, 40, size=n_words).tolist())
        example = LabeledExample(tokens, int(rng.integers(2)))
        if rng.random() < 0.5:
            k = int(rng.integers(1, 4))
            policy = MaskPolicy(mode="fixed_k", k=k)
        else:
            k = None
            policy = MaskPolicy(mode="ratio", ratio=float(rng.uniform(0.05, 0.6)))
        try:
            corrupted, targets = mask_tokens(example, policy, 40, rng)
        except SkipExample:
            assert k is not None and n_words < k
            trials += 1
            continue
        scored = [i for i, t in enumerate(targets) if t != IGNORE_ID]
        assert all(i != 0 for i in scored), "CLS position was masked"
        assert all(tokens[i] >= NUM_SPECIALS for i in scored), "special was masked"
        assert len(corrupted) == len(tokens), "masking changed the length"
        if k is not None:
            assert len(scored) == k, "fixed_k did not mask exactly k"
        else:
            assert len(scored) >= 1
        trials += 1

    # uniformity: k=1 over a 10-word sentence, 10,000 draws, within +-15%
    sentence = LabeledExample((CLS_ID,) + tuple(range(NUM_SPECIALS, NUM_SPECIALS + 10)), 0)
    policy = MaskPolicy(mode="fixed_k", k=1)
    counts = np.zeros(11)
    uniform_rng = np.random.default_rng(99)
    for _ in range(10_000):
        _, targets = mask_tokens(sentence, policy, 40, uniform_rng)
        counts[next(i for i, t in enumerate(targets) if t != IGNORE_ID)] += 1
        trials += 1
    assert counts[0] == 0
    assert np.all(np.abs(counts[1:] - 1000) <= 150), f"mask positions not uniform: {counts[1:]}"

    # substitution-only contract and determinism through a real model
    config = EncoderConfig(
        vocab_size=24, layers=1, hidden=8, heads=2, ff=16, max_len=16,
        num_conditions=2, dropout=0.0,
    )
    params = init_params(config, np.random.default_rng(1))
    aug_policy = AugmentationPolicy(k=(1, 2), sampler="top_k", top_k=8)
    for i in range(200):
        n_words = int(rng.integers(2, 10))
        tokens = (CLS_ID,) + tuple(rng.integers(NUM_SPECIALS, 24, size=n_words).tolist())
        example = LabeledExample(tokens, int(rng.integers(2)))
        out_a = augment_sentence(params, config, example, aug_policy, np.random.default_rng(i))
        out_b = augment_sentence(params, config, example, aug_policy, np.random.default_rng(i))
        assert out_a == out_b, "augmentation not deterministic under seed"
        assert len(out_a.tokens) == len(example.tokens), "augmentation changed the length"
        assert out_a.label == example.label
        assert all(t >= NUM_SPECIALS for t in out_a.tokens[1:]), "special leaked into output"
        trials += 1

    elapsed = time.time() - start
    assert trials >= 10_000
    assert elapsed < 60.0, f"AC-2 exceeded its 1-minute budget: {elapsed:.1f}s"
    report(f"AC-2 PASS: {trials} randomized masking/augmentation trials, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# AC-3: conditioning oracle
# ---------------------------------------------------------------------------


def test_ac3_conditioning(corpus, trained):
    start = time.time()
    _, vocab, dataset = corpus
    _, _, tuned, tuned_config = trained
    pos = word_ids(vocab, POSITIVE_WORDS)
    neg = word_ids(vocab, NEGATIVE_WORDS)
    min_mass = 1.0
    cases = 0
    for example in dataset.train + dataset.val:
        for cond, correct in ((1, pos), (0, neg)):
            probs = mlm_distribution(tuned, tuned_config, example.tokens, [SENT_SLOT], cond)[0]
            assert int(np.argmax(probs)) in correct, (
                f"argmax under condition {cond} fell outside the label-{cond} word set"
            )
            mass = float(probs[correct].sum())
            min_mass = min(min_mass, mass)
            cases += 1
    elapsed = time.time() - start
    assert min_mass >= 0.8, f"correct-set probability mass {min_mass:.3f} < 0.8"
    assert elapsed < 300.0, f"AC-3 exceeded its 5-minute budget: {elapsed:.1f}s"
    report(
        f"AC-3 PASS: {cases} slot distributions, argmax always in the right set, "
        f"min correct-set mass {min_mass:.3f} (>= 0.8), {elapsed:.1f}s"
    )


# ---------------------------------------------------------------------------
# AC-4: label-compatibility gap
# ---------------------------------------------------------------------------


def test_ac4_label_compatibility_gap(corpus, trained):
    start = time.time()
    _, vocab, dataset = corpus
    pretrained, config, tuned, tuned_config = trained
    neg = set(word_ids(vocab, NEGATIVE_WORDS))
    policy = AugmentationPolicy(k=1, sampler="top_k", top_k=10, temperature=1.0, exclude_original=True)
    label1 = [ex for ex in dataset.train if ex.label == 1]
    lines = []
    for seed in (1, 2, 3):
        fraction = {}
        for arm, (params, cfg, cond) in (
            ("cbert", (tuned, tuned_config, 1)),
            ("bert", (pretrained, config, 0)),
        ):
            rng = derive_rng(seed, "ac4", arm)
            bad = 0
            for example in label1:
                probs = mlm_distribution(params, cfg, example.tokens, [SENT_SLOT], cond)[0]
                filled = sample_replacement(probs, example.tokens[SENT_SLOT], policy, rng)
                bad += int(filled in neg)
            fraction[arm] = bad / len(label1)
        lines.append(f"seed {seed}: cbert {fraction['cbert']:.3f}, bert {fraction['bert']:.3f}")
        assert fraction["cbert"] <= 0.05, (
            f"seed {seed}: conditional augmenter filled a label-0 word in "
            f"{fraction['cbert']:.3f} of label-1 slots (> 0.05)"
        )
        assert fraction["bert"] >= 0.20, (
            f"seed {seed}: unconditional augmenter label-0 fill rate "
            f"{fraction['bert']:.3f} fell below 0.20"
        )
    elapsed = time.time() - start
    assert elapsed < 300.0, f"AC-4 exceeded its 5-minute budget: {elapsed:.1f}s"
    report(f"AC-4 PASS: {'; '.join(lines)} (cbert <= 0.05, bert >= 0.20), {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# AC-5: downstream A/B
# ---------------------------------------------------------------------------


def test_ac5_downstream_ab(tmp_path):
    start = time.time()
    train_rows = with_label_noise(sentiment_rows(250, seed=0), 0.15, 2, seed=5)
    test_rows = sentiment_rows(100, seed=99)
    write_rows_tsv(train_rows, tmp_path / "train.tsv")
    write_rows_tsv(test_rows, tmp_path / "test.tsv")
    vocab = build_vocab([tokenize(text) for _, text in train_rows])
    dataset = load_tsv(
        tmp_path / "train.tsv", vocab, max_len=64, val_fraction=0.1, seed=42,
        test_path=tmp_path / "test.tsv",
    )
    assert len(dataset.train) + len(dataset.val) == 500

    config = EncoderConfig(vocab_size=len(vocab), **TOY)
    pretrained, _ = pretrain_mlm(
        dataset, config, MaskPolicy(mode="ratio", ratio=0.15),
        TrainConfig(epochs=10, batch_size=32, lr=1e-3, patience=3, seed=42),
    )
    tuned, tuned_config, _ = finetune_cmlm(
        dataset, pretrained, config, MaskPolicy(mode="ratio", ratio=0.3),
        TrainConfig(epochs=10, batch_size=16, lr=1e-3, patience=3, seed=42),
    )

    policy = AugmentationPolicy(k=(1, 2), sampler="top_k", top_k=10, multiplier=1)
    augmenters = {
        "none": None,
        "bert": lambda d, s: augment_dataset(pretrained, config, d, policy, unconditional=True, seed=s)[0],
        "cbert": lambda d, s: augment_dataset(tuned, tuned_config, d, policy, seed=s)[0],
    }
    records, summary = ab_experiment(
        dataset, augmenters, "cnn", seeds=(1, 2, 3, 4, 5),
        cfg=CnnConfig(max_epochs=20), vocab_size=len(vocab),
    )
    table = format_table(records, summary)
    elapsed = time.time() - start
    assert summary["cbert"] >= summary["none"], (
        f"cbert mean {summary['cbert']:.4f} < unaugmented mean {summary['none']:.4f}"
    )
    assert summary["cbert"] >= summary["bert"], (
        f"cbert mean {summary['cbert']:.4f} < unconditional mean {summary['bert']:.4f}"
    )
    assert elapsed < 900.0, f"AC-5 exceeded its 15-minute budget: {elapsed:.1f}s"
    report(f"AC-5 PASS ({elapsed:.1f}s): per-seed test accuracies\n{table}")


# ---------------------------------------------------------------------------
# AC-6: style transfer mechanism
# ---------------------------------------------------------------------------


def test_ac6_style_transfer(corpus, trained, tmp_path):
    start = time.time()
    root, vocab, dataset = corpus
    _, _, tuned, tuned_config = trained
    # a crisply fit classifier: dropout-free training sharpens deletion scores
    classifier, clf_report = train_cnn(
        dataset, CnnConfig(seed=7, max_epochs=20, dropout=0.0, lr=3e-3), vocab_size=len(vocab)
    )
    assert clf_report.accuracy["val"] == 1.0

    label1 = [ex for ex in dataset.train if ex.label == 1]
    flipped = 0
    restored = 0
    for example in label1:
        out = transfer_style(tuned, tuned_config, classifier, example, 0, top_m=1)
        diff = [i for i, (a, b) in enumerate(zip(example.tokens, out.tokens)) if a != b]
        assert len(diff) == 1, "transfer changed more than the attributed slot"
        assert out.label == 0
        flipped += int(np.argmax(predict_proba(classifier, out)) == 0)
        back = transfer_style(tuned, tuned_config, classifier, out, 1, top_m=1)
        restored += int(np.argmax(predict_proba(classifier, back)) == 1)
    flip_rate = flipped / len(label1)
    assert flip_rate >= 0.8, f"classifier agrees with the target label on only {flip_rate:.3f}"

    # CLI emits original/generated pairs in the two-column layout
    enc_path = tmp_path / "conditional.ckpt"
    save_encoder(tuned, tuned_config, enc_path)
    clf_path = tmp_path / "classifier.ckpt"
    save_classifier(classifier, clf_path)
    from maskaug.text import save_vocab

    vocab_path = tmp_path / "vocab.txt"
    save_vocab(vocab, vocab_path)
    out_dir = tmp_path / "style"
    code = main([
        "style-transfer", "--data", str(root / "train.tsv"), "--vocab", str(vocab_path),
        "--model", str(enc_path), "--classifier-ckpt", str(clf_path),
        "--limit", "10", "--out", str(out_dir),
    ])
    assert code == EXIT_OK
    lines = (out_dir / "pairs.tsv").read_text().splitlines()
    assert lines[0] == "# maskaug-style-pairs v1"
    body = lines[1:]
    assert body and len(body) % 2 == 0
    for i in range(0, len(body), 2):
        assert body[i].split("\t")[0] == "original"
        assert body[i + 1].split("\t")[0] == "generated"
    elapsed = time.time() - start
    assert elapsed < 120.0, f"AC-6 exceeded its 2-minute budget: {elapsed:.1f}s"
    report(
        f"AC-6 PASS: flip rate {flip_rate:.3f} (>= 0.8) over {len(label1)} rewrites, "
        f"round-trip restores the label in {restored / len(label1):.3f} (reported only), "
        f"pairs file in two-column layout, {elapsed:.1f}s"
    )


# ---------------------------------------------------------------------------
# AC-7: reproducibility and formats
# ---------------------------------------------------------------------------


def _run_pipeline(root, data, test_data, out):
    """Every subcommand once, seeded; returns the artifact paths."""
    flags = lambda *pairs: [x for pair in pairs for x in pair]
    steps = [
        ["build-vocab", "--data", str(data), "--out", str(out / "vocab")],
        [
            "pretrain", "--data", str(data), "--vocab", str(out / "vocab" / "vocab.txt"),
            "--layers", "1", "--hidden", "16", "--ff", "32", "--epochs", "2",
            "--out", str(out / "pre"), "--seed", "13",
        ],
        [
            "finetune", "--data", str(data), "--vocab", str(out / "vocab" / "vocab.txt"),
            "--init", str(out / "pre" / "encoder.ckpt"), "--epochs", "2",
            "--batch-size", "16", "--mask-ratio", "0.3",
            "--out", str(out / "ft"), "--seed", "13",
        ],
        [
            "augment", "--data", str(data), "--vocab", str(out / "vocab" / "vocab.txt"),
            "--model", str(out / "ft" / "conditional.ckpt"), "--augmenter", "cbert",
            "--k", "1", "--out", str(out / "aug"), "--seed", "13",
        ],
        [
            "train-classifier", "--data", str(out / "aug" / "augmented.tsv"),
            "--test", str(test_data), "--vocab", str(out / "vocab" / "vocab.txt"),
            "--classifier", "cnn", "--epochs", "3", "--out", str(out / "clf"), "--seed", "13",
        ],
        [
            "eval", "--data", str(test_data), "--vocab", str(out / "vocab" / "vocab.txt"),
            "--classifier-ckpt", str(out / "clf" / "classifier.ckpt"),
            "--out", str(out / "ev"),
        ],
        [
            "ab-experiment", "--data", str(data), "--test", str(test_data),
            "--vocab", str(out / "vocab" / "vocab.txt"),
            "--model", str(out / "ft" / "conditional.ckpt"),
            "--pretrained", str(out / "pre" / "encoder.ckpt"),
            "--arms", "none,bert,cbert", "--seeds", "1", "--epochs", "2",
            "--out", str(out / "ab"), "--seed", "13",
        ],
        [
            "style-transfer", "--data", str(test_data),
            "--vocab", str(out / "vocab" / "vocab.txt"),
            "--model", str(out / "ft" / "conditional.ckpt"),
            "--classifier-ckpt", str(out / "clf" / "classifier.ckpt"),
            "--limit", "5", "--out", str(out / "style"), "--seed", "13",
        ],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, f"pipeline step failed: {argv[0]}"
    return [
        out / "vocab" / "vocab.txt",
        out / "pre" / "encoder.ckpt",
        out / "pre" / "metrics.tsv",
        out / "ft" / "conditional.ckpt",
        out / "ft" / "metrics.tsv",
        out / "aug" / "augmented.tsv",
        out / "aug" / "report.json",
        out / "clf" / "classifier.ckpt",
        out / "clf" / "report.json",
        out / "ev" / "eval.json",
        out / "ab" / "records.tsv",
        out / "ab" / "table.txt",
        out / "style" / "pairs.tsv",
    ]


def test_ac7_reproducibility_and_formats(tmp_path):
    start = time.time()
    write_rows_tsv(sentiment_rows(30, seed=3), tmp_path / "train.tsv")
    write_rows_tsv(sentiment_rows(10, seed=4), tmp_path / "test.tsv")

    first = _run_pipeline(tmp_path, tmp_path / "train.tsv", tmp_path / "test.tsv", tmp_path / "run1")
    second = _run_pipeline(tmp_path, tmp_path / "train.tsv", tmp_path / "test.tsv", tmp_path / "run2")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes(), f"artifact differs across runs: {a.name}"

    # checkpoint save -> load -> save is byte-exact
    params, config = load_encoder(tmp_path / "run1" / "ft" / "conditional.ckpt")
    save_encoder(params, config, tmp_path / "resaved.ckpt")
    assert (
        (tmp_path / "resaved.ckpt").read_bytes()
        == (tmp_path / "run1" / "ft" / "conditional.ckpt").read_bytes()
    )

    # malformed inputs fail with categorized exits, never tracebacks
    bad_tsv = tmp_path / "bad.tsv"
    bad_tsv.write_text("no label here\n")
    checks = [
        (EXIT_MISSING_FILE, ["build-vocab", "--data", str(tmp_path / "ghost.tsv"), "--out", str(tmp_path / "x1")]),
        (EXIT_PARSE, ["build-vocab", "--data", str(bad_tsv), "--out", str(tmp_path / "x2")]),
        (EXIT_USAGE, ["pretrain", "--out", str(tmp_path / "x3")]),
    ]
    clipped = tmp_path / "clipped.ckpt"
    source = tmp_path / "run1" / "pre" / "encoder.ckpt"
    clipped.write_bytes(source.read_bytes()[:50])
    (tmp_path / "clipped.ckpt.json").write_text((tmp_path / "run1" / "pre" / "encoder.ckpt.json").read_text())
    checks.append(
        (
            EXIT_CHECKPOINT,
            [
                "finetune", "--data", str(tmp_path / "train.tsv"),
                "--vocab", str(tmp_path / "run1" / "vocab" / "vocab.txt"),
                "--init", str(clipped), "--epochs", "1", "--out", str(tmp_path / "x4"),
            ],
        )
    )
    for expected, argv in checks:
        assert main(argv) == expected, f"{argv[0]} returned the wrong exit category"

    elapsed = time.time() - start
    assert elapsed < 600.0, f"AC-7 exceeded its 10-minute budget: {elapsed:.1f}s"
    report(
        f"AC-7 PASS: twin pipelines byte-identical across {len(first)} artifacts, "
        f"checkpoint round-trip exact, categorized errors, {elapsed:.1f}s"
    )
