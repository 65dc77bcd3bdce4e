"""Downstream sentence classifiers and the augmentation A/B harness.

Two evaluators measure what an augmented training set buys: a convolutional
classifier (filter widths over word embeddings, max-over-time pooling, a
two-layer ReLU head, softmax) and a recurrent one (single-layer LSTM whose
final state feeds an affine layer with softmax). Both train with Adam and
dropout and stop early on validation accuracy.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tensor as T
from .checkpoint import CheckpointError, load_arrays, save_arrays
from .optim import adam_step, clip_by_global_norm, init_adam
from .seeding import derive_rng
from .tensor import Tensor
from .text import Dataset, LabeledExample, PAD_ID

RECORDS_FORMAT = "# maskaug-ab-records v1"
CLF_CONFIG_FORMAT = "maskaug-classifier-config v1"


@dataclass(frozen=True)
class CnnConfig:
    filter_widths: tuple[int, ...] = (3, 4, 5)
    num_filters: int = 32
    emb_dim: int = 32
    hidden_dim: int = 64
    dropout: float = 0.5
    lr: float = 1e-3
    seed: int = 0
    max_epochs: int = 30
    batch_size: int = 32
    patience: int = 5

    def __post_init__(self):
        if not self.filter_widths or any(w < 1 for w in self.filter_widths):
            raise ValueError(f"filter widths must be positive, got {self.filter_widths}")
        for name in ("num_filters", "emb_dim", "hidden_dim", "max_epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class RnnConfig:
    emb_dim: int = 32
    state_dim: int = 64
    dropout: float = 0.3
    lr: float = 1e-3
    seed: int = 0
    max_epochs: int = 30
    batch_size: int = 32
    patience: int = 5

    def __post_init__(self):
        for name in ("emb_dim", "state_dim", "max_epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class EvalReport:
    """Per-split accuracies and confusion counts for one trained model."""

    accuracy: dict[str, float]
    confusion: dict[str, np.ndarray]
    epochs_used: int
    seed: int


@dataclass
class Classifier:
    kind: str  # "cnn" | "rnn"
    params: dict[str, Tensor]
    config: "CnnConfig | RnnConfig"
    vocab_size: int
    num_labels: int
    epochs_used: int = 0


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------


def _pad_batch(
    examples: Sequence[LabeledExample], min_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = max(max(len(ex.tokens) for ex in examples), min_len)
    b = len(examples)
    token_ids = np.full((b, t), PAD_ID, dtype=np.int64)
    lengths = np.zeros(b, dtype=np.int64)
    labels = np.zeros(b, dtype=np.int64)
    for i, ex in enumerate(examples):
        token_ids[i, : len(ex.tokens)] = ex.tokens
        lengths[i] = len(ex.tokens)
        labels[i] = ex.label
    return token_ids, lengths, labels


# ---------------------------------------------------------------------------
# CNN
# ---------------------------------------------------------------------------


def _init_cnn(cfg: CnnConfig, vocab_size: int, num_labels: int, rng) -> dict[str, Tensor]:
    def normal(*shape, std):
        return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)

    params = {"emb": normal(vocab_size, cfg.emb_dim, std=0.1)}
    for w in cfg.filter_widths:
        fan_in = w * cfg.emb_dim
        params[f"conv{w}_w"] = normal(fan_in, cfg.num_filters, std=1.0 / np.sqrt(fan_in))
        params[f"conv{w}_b"] = Tensor(np.zeros(cfg.num_filters), requires_grad=True)
    total = cfg.num_filters * len(cfg.filter_widths)
    params["fc1_w"] = normal(total, cfg.hidden_dim, std=1.0 / np.sqrt(total))
    params["fc1_b"] = Tensor(np.zeros(cfg.hidden_dim), requires_grad=True)
    params["fc2_w"] = normal(cfg.hidden_dim, num_labels, std=1.0 / np.sqrt(cfg.hidden_dim))
    params["fc2_b"] = Tensor(np.zeros(num_labels), requires_grad=True)
    return params


def _cnn_logits(
    params: dict[str, Tensor],
    cfg: CnnConfig,
    token_ids: np.ndarray,
    lengths: np.ndarray,
    train: bool,
    rng,
) -> Tensor:
    b, t = token_ids.shape
    emb = T.embedding_lookup(params["emb"], token_ids)  # (B, T, E)
    pooled = []
    for w in cfg.filter_widths:
        windows = T.unfold_windows(emb, w)  # (B, L, w*E)
        feat = T.relu(T.add(T.matmul(windows, params[f"conv{w}_w"]), params[f"conv{w}_b"]))
        n = t - w + 1
        # windows that start beyond a sentence's own span never win the max;
        # sentences shorter than the filter keep their first (padded-up) window
        n_valid = np.maximum(lengths - w + 1, 1)
        invalid = np.arange(n)[None, :] >= n_valid[:, None]
        feat = T.add(feat, Tensor(np.where(invalid, -1e30, 0.0)[:, :, None]))
        pooled.append(T.reduce_max(feat, axis=1))  # (B, F)
    x = T.concat(pooled, axis=-1)
    x = T.dropout(x, cfg.dropout, rng, train)
    x = T.relu(T.add(T.matmul(x, params["fc1_w"]), params["fc1_b"]))
    x = T.dropout(x, cfg.dropout, rng, train)
    return T.add(T.matmul(x, params["fc2_w"]), params["fc2_b"])


# ---------------------------------------------------------------------------
# LSTM
# ---------------------------------------------------------------------------


def _init_rnn(cfg: RnnConfig, vocab_size: int, num_labels: int, rng) -> dict[str, Tensor]:
    def normal(*shape, std):
        return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)

    h = cfg.state_dim
    bias = np.zeros(4 * h)
    bias[h : 2 * h] = 1.0  # forget gate opens at init
    return {
        "emb": normal(vocab_size, cfg.emb_dim, std=0.1),
        "w_ih": normal(cfg.emb_dim, 4 * h, std=1.0 / np.sqrt(cfg.emb_dim)),
        "w_hh": normal(h, 4 * h, std=1.0 / np.sqrt(h)),
        "b": Tensor(bias, requires_grad=True),
        "out_w": normal(h, num_labels, std=1.0 / np.sqrt(h)),
        "out_b": Tensor(np.zeros(num_labels), requires_grad=True),
    }


def lstm_states(
    params: dict[str, Tensor],
    state_dim: int,
    token_ids: np.ndarray,
    lengths: np.ndarray,
) -> Tensor:
    """Final hidden state (B, H) of the LSTM over right-padded sequences.

    The state freezes once a row runs out of real tokens, so the result is
    each row's last-real-step state regardless of padding.
    """
    b, t = token_ids.shape
    h = Tensor(np.zeros((b, state_dim)))
    c = Tensor(np.zeros((b, state_dim)))
    d = state_dim
    for step in range(t):
        x_t = T.embedding_lookup(params["emb"], token_ids[:, step])
        z = T.add(
            T.add(T.matmul(x_t, params["w_ih"]), T.matmul(h, params["w_hh"])), params["b"]
        )
        gate_i = T.sigmoid(T.slice_axis(z, 1, 0, d))
        gate_f = T.sigmoid(T.slice_axis(z, 1, d, 2 * d))
        gate_g = T.tanh(T.slice_axis(z, 1, 2 * d, 3 * d))
        gate_o = T.sigmoid(T.slice_axis(z, 1, 3 * d, 4 * d))
        c_new = T.add(T.mul(gate_f, c), T.mul(gate_i, gate_g))
        h_new = T.mul(gate_o, T.tanh(c_new))
        live = (lengths > step).astype(np.float64)[:, None]
        keep = Tensor(live)
        hold = Tensor(1.0 - live)
        c = T.add(T.mul(keep, c_new), T.mul(hold, c))
        h = T.add(T.mul(keep, h_new), T.mul(hold, h))
    return h


def _rnn_logits(
    params: dict[str, Tensor],
    cfg: RnnConfig,
    token_ids: np.ndarray,
    lengths: np.ndarray,
    train: bool,
    rng,
) -> Tensor:
    h = lstm_states(params, cfg.state_dim, token_ids, lengths)
    h = T.dropout(h, cfg.dropout, rng, train)
    return T.add(T.matmul(h, params["out_w"]), params["out_b"])


# ---------------------------------------------------------------------------
# shared training / evaluation
# ---------------------------------------------------------------------------


def _logits_fn(clf: Classifier) -> Callable:
    return _cnn_logits if clf.kind == "cnn" else _rnn_logits


def _min_len(clf: Classifier) -> int:
    if clf.kind == "cnn":
        return max(clf.config.filter_widths)
    return 1


def _check_vocab(clf: Classifier, examples: Sequence[LabeledExample]) -> None:
    top = max(max(ex.tokens) for ex in examples)
    if top >= clf.vocab_size:
        raise ValueError(
            f"vocabulary mismatch: example id {top} >= classifier vocab {clf.vocab_size}"
        )


def predict_logits(clf: Classifier, examples: Sequence[LabeledExample]) -> np.ndarray:
    _check_vocab(clf, examples)
    token_ids, lengths, _ = _pad_batch(examples, _min_len(clf))
    logits = _logits_fn(clf)(clf.params, clf.config, token_ids, lengths, False, None)
    return logits.data


def predict_proba(clf: Classifier, example: LabeledExample) -> np.ndarray:
    """Class distribution for one example (eval mode, deterministic)."""
    logits = predict_logits(clf, [example])[0]
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def evaluate(clf: Classifier, examples: Sequence[LabeledExample], split: str = "test") -> EvalReport:
    """Accuracy and confusion counts over a split, in eval mode."""
    if not examples:
        raise ValueError(f"cannot evaluate an empty {split} split")
    _check_vocab(clf, examples)
    correct = 0
    confusion = np.zeros((clf.num_labels, clf.num_labels), dtype=np.int64)
    batch = 64
    for start in range(0, len(examples), batch):
        chunk = examples[start : start + batch]
        preds = predict_logits(clf, chunk).argmax(axis=1)
        for ex, pred in zip(chunk, preds):
            confusion[ex.label, pred] += 1
            correct += int(pred == ex.label)
    return EvalReport(
        accuracy={split: correct / len(examples)},
        confusion={split: confusion},
        epochs_used=clf.epochs_used,
        seed=clf.config.seed,
    )


def _data_vocab_size(dataset: Dataset) -> int:
    return 1 + max(
        max(ex.tokens)
        for split in (dataset.train, dataset.val, dataset.test)
        if split
        for ex in split
    )


def _train_classifier(
    dataset: Dataset, cfg, kind: str, vocab_size: int | None = None
) -> tuple[Classifier, EvalReport]:
    if not dataset.train:
        raise ValueError("training split is empty")
    if not dataset.val:
        raise ValueError("a validation split is required for early stopping")
    if vocab_size is None:
        vocab_size = _data_vocab_size(dataset)
    init_rng = derive_rng(cfg.seed, kind, "init")
    shuffle_rng = derive_rng(cfg.seed, kind, "shuffle")
    drop_rng = derive_rng(cfg.seed, kind, "dropout")
    if kind == "cnn":
        params = _init_cnn(cfg, vocab_size, dataset.num_labels, init_rng)
        logits_fn = _cnn_logits
        min_len = max(cfg.filter_widths)
    else:
        params = _init_rnn(cfg, vocab_size, dataset.num_labels, init_rng)
        logits_fn = _rnn_logits
        min_len = 1
    state = init_adam(params, lr=cfg.lr)

    clf = Classifier(kind, params, cfg, vocab_size, dataset.num_labels)
    best_acc = -1.0
    best_params = {k: Tensor(p.data.copy(), requires_grad=True) for k, p in params.items()}
    best_epoch = 0
    since_best = 0
    train_examples = dataset.train

    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_examples))
        for start in range(0, len(order), cfg.batch_size):
            chunk = [train_examples[i] for i in order[start : start + cfg.batch_size]]
            token_ids, lengths, labels = _pad_batch(chunk, min_len)
            logits = logits_fn(params, cfg, token_ids, lengths, True, drop_rng)
            loss, _ = T.cross_entropy(logits, labels)
            loss.backward()
            grads = {k: p.grad for k, p in params.items()}
            grads = clip_by_global_norm(grads, 5.0)
            params, state = adam_step(params, grads, state)
        clf.params = params
        val_acc = evaluate(clf, dataset.val, "val").accuracy["val"]
        if val_acc > best_acc:
            best_acc = val_acc
            best_params = {k: Tensor(p.data.copy(), requires_grad=True) for k, p in params.items()}
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    clf.params = best_params
    clf.epochs_used = best_epoch
    train_report = evaluate(clf, dataset.train, "train")
    val_report = evaluate(clf, dataset.val, "val")
    report = EvalReport(
        accuracy={**train_report.accuracy, **val_report.accuracy},
        confusion={**train_report.confusion, **val_report.confusion},
        epochs_used=best_epoch,
        seed=cfg.seed,
    )
    return clf, report


def train_cnn(
    dataset: Dataset, cfg: CnnConfig | None = None, vocab_size: int | None = None
) -> tuple[Classifier, EvalReport]:
    return _train_classifier(dataset, cfg or CnnConfig(), "cnn", vocab_size)


def train_rnn(
    dataset: Dataset, cfg: RnnConfig | None = None, vocab_size: int | None = None
) -> tuple[Classifier, EvalReport]:
    return _train_classifier(dataset, cfg or RnnConfig(), "rnn", vocab_size)


def cross_validate(
    examples: Sequence[LabeledExample],
    num_labels: int,
    kind: str = "cnn",
    cfg: "CnnConfig | RnnConfig | None" = None,
    folds: int = 10,
    vocab_size: int | None = None,
) -> tuple[float, list[float]]:
    """k-fold cross-validation accuracy; off the default path, for corpora
    without a standard test split. Fold assignment is deterministic in the
    config seed. Returns (mean accuracy, per-fold accuracies).
    """
    if folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    if len(examples) < folds:
        raise ValueError(f"{len(examples)} examples cannot fill {folds} folds")
    if cfg is None:
        cfg = CnnConfig() if kind == "cnn" else RnnConfig()
    train = train_cnn if kind == "cnn" else train_rnn
    order = derive_rng(cfg.seed, "cv-folds").permutation(len(examples))
    assignment = [order[i::folds].tolist() for i in range(folds)]
    scores: list[float] = []
    for fold, held_out in enumerate(assignment):
        held = set(held_out)
        rest = [examples[i] for i in range(len(examples)) if i not in held]
        cut = max(1, len(rest) // 10)
        fold_data = Dataset(
            train=rest[cut:], val=rest[:cut],
            test=[examples[i] for i in held_out], num_labels=num_labels,
        )
        clf, _ = train(fold_data, cfg, vocab_size)
        scores.append(evaluate(clf, fold_data.test, "test").accuracy["test"])
    return float(np.mean(scores)), scores


DEFAULT_GRID = {"lr": (1e-3, 3e-3), "dropout": (0.0, 0.3, 0.5)}


def grid_search(
    dataset: Dataset,
    kind: str = "cnn",
    cfg: "CnnConfig | RnnConfig | None" = None,
    grid: Mapping[str, Sequence] = DEFAULT_GRID,
    vocab_size: int | None = None,
) -> tuple["CnnConfig | RnnConfig", list[dict]]:
    """Pick the config with the best validation accuracy over a small grid.

    `grid` maps config field names to candidate values; all combinations are
    tried with everything else held at `cfg`. Returns (best config, trials).
    """
    if cfg is None:
        cfg = CnnConfig() if kind == "cnn" else RnnConfig()
    train = train_cnn if kind == "cnn" else train_rnn
    names = list(grid)
    combos: list[dict] = [{}]
    for name in names:
        combos = [{**combo, name: value} for combo in combos for value in grid[name]]
    trials: list[dict] = []
    best_cfg, best_acc = cfg, -1.0
    for combo in combos:
        candidate = replace(cfg, **combo)
        _, rep = train(dataset, candidate, vocab_size)
        acc = rep.accuracy["val"]
        trials.append({**combo, "val_accuracy": acc})
        if acc > best_acc:
            best_cfg, best_acc = candidate, acc
    return best_cfg, trials


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def save_classifier(clf: Classifier, path) -> None:
    save_arrays(clf.params, path)
    meta = {
        "format": CLF_CONFIG_FORMAT,
        "kind": clf.kind,
        "config": asdict(clf.config),
        "vocab_size": clf.vocab_size,
        "num_labels": clf.num_labels,
        "epochs_used": clf.epochs_used,
    }
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_classifier(path) -> Classifier:
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise CheckpointError(f"missing classifier sidecar: {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    if meta.get("format") != CLF_CONFIG_FORMAT:
        raise CheckpointError("classifier sidecar has an unknown format tag")
    raw = meta["config"]
    if meta["kind"] == "cnn":
        raw["filter_widths"] = tuple(raw["filter_widths"])
        cfg = CnnConfig(**raw)
    else:
        cfg = RnnConfig(**raw)
    params = {k: Tensor(v, requires_grad=True) for k, v in load_arrays(path).items()}
    return Classifier(
        meta["kind"], params, cfg, meta["vocab_size"], meta["num_labels"], meta["epochs_used"]
    )


# ---------------------------------------------------------------------------
# A/B experiment
# ---------------------------------------------------------------------------

Augmenter = Callable[[Dataset, int], Dataset]


def ab_experiment(
    dataset: Dataset,
    augmenters: Mapping[str, Augmenter | None],
    classifier: str = "cnn",
    seeds: Sequence[int] = (1, 2, 3),
    cfg: "CnnConfig | RnnConfig | None" = None,
    vocab_size: int | None = None,
) -> tuple[list[dict], dict[str, float]]:
    """Train one classifier per (augmentation arm x seed) and compare.

    Every arm of a seed shares the classifier config, seed, and embedding
    shape (pass `vocab_size`; augmenters may introduce ids unseen in the
    base data); only the augmented training split differs. `None` as an
    augmenter means the untouched dataset. Returns (per-run records,
    arm -> mean accuracy).
    """
    if not seeds:
        raise ValueError("need at least one seed")
    if classifier not in ("cnn", "rnn"):
        raise ValueError(f"unknown classifier kind {classifier!r}")
    if cfg is None:
        cfg = CnnConfig() if classifier == "cnn" else RnnConfig()
    if vocab_size is None:
        vocab_size = _data_vocab_size(dataset)
    train = train_cnn if classifier == "cnn" else train_rnn
    records: list[dict] = []
    for seed in seeds:
        for arm, fn in augmenters.items():
            arm_data = fn(dataset, seed) if fn is not None else dataset
            run_cfg = replace(cfg, seed=seed)
            clf, _ = train(arm_data, run_cfg, vocab_size)
            test_acc = evaluate(clf, arm_data.test, "test").accuracy["test"]
            records.append(
                {
                    "arm": arm,
                    "seed": seed,
                    "test_accuracy": test_acc,
                    "train_size": len(arm_data.train),
                    "epochs_used": clf.epochs_used,
                }
            )
    summary = {
        arm: float(np.mean([r["test_accuracy"] for r in records if r["arm"] == arm]))
        for arm in augmenters
    }
    return records, summary


def write_records(records: Sequence[dict], path) -> None:
    lines = [RECORDS_FORMAT, "# arm\tseed\ttest_accuracy\ttrain_size\tepochs_used"]
    for r in records:
        lines.append(
            f"{r['arm']}\t{r['seed']}\t{r['test_accuracy']!r}\t{r['train_size']}\t{r['epochs_used']}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path) -> list[dict]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        arm, seed, acc, size, epochs = line.split("\t")
        records.append(
            {
                "arm": arm,
                "seed": int(seed),
                "test_accuracy": float(acc),
                "train_size": int(size),
                "epochs_used": int(epochs),
            }
        )
    return records


def format_table(records: Sequence[dict], summary: Mapping[str, float]) -> str:
    """Aligned text table: one row per arm, one column per seed, then mean."""
    seeds = sorted({r["seed"] for r in records})
    header = ["arm"] + [f"seed {s}" for s in seeds] + ["mean"]
    rows = [header]
    for arm in summary:
        by_seed = {r["seed"]: r["test_accuracy"] for r in records if r["arm"] == arm}
        rows.append(
            [arm]
            + [f"{by_seed[s]:.4f}" if s in by_seed else "-" for s in seeds]
            + [f"{summary[arm]:.4f}"]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines)
