"""Masking policy and the two masked-LM training loops.

`pretrain_mlm` trains the encoder on corrupted sentences with condition id
0 everywhere; `finetune_cmlm` resizes the condition table to the label
count and trains with each sentence's label as its condition, which turns
the cloze distribution into a label-aware one. Both loops are bitwise
reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .encoder import (
    EncoderConfig,
    InputBatch,
    forward,
    init_params,
    swap_condition_table,
    with_num_conditions,
)
from .optim import adam_step, clip_by_global_norm, init_adam
from .seeding import derive_rng
from .tensor import Tensor
from .text import Dataset, LabeledExample, MASK_ID, NUM_SPECIALS, PAD_ID

IGNORE_ID = -1
METRICS_FORMAT = "# maskaug-metrics v1"


class TrainingError(RuntimeError):
    """Raised when a training run diverges or cannot proceed."""


class SkipExample(Exception):
    """Signal that an example has too few maskable tokens for the policy."""


@dataclass(frozen=True)
class MaskPolicy:
    """How positions are chosen and corrupted for masked-LM training.

    `ratio` mode draws Binomial(n, ratio) positions (at least one);
    `fixed_k` masks exactly k. Selected positions are corrupted to the
    mask id / a random content id / left alone per corrupt_split. The
    CLS anchor, padding, and other specials are never candidates.
    """

    mode: str = "ratio"
    ratio: float = 0.15
    k: int = 1
    corrupt_split: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.mode not in ("ratio", "fixed_k"):
            raise ValueError(f"unknown mask mode {self.mode!r}")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"mask ratio must lie in (0, 1], got {self.ratio}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.corrupt_split) != 3 or any(f < 0 for f in self.corrupt_split):
            raise ValueError("corrupt_split needs three non-negative fractions")
        if abs(sum(self.corrupt_split) - 1.0) > 1e-9:
            raise ValueError(f"corrupt_split must sum to 1, got {self.corrupt_split}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    patience: int = 3
    seed: int = 0
    clip_norm: float | None = 1.0

    def __post_init__(self):
        if not 1 <= self.epochs <= 50:
            raise ValueError(f"epochs must lie in [1, 50], got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class MaskedBatch:
    """A padded InputBatch plus per-position prediction targets."""

    token_ids: np.ndarray  # (B, T) corrupted ids
    cond_ids: np.ndarray  # (B, T)
    pad_mask: np.ndarray  # (B, T)
    targets: np.ndarray  # (B, T), original id at masked positions else IGNORE_ID

    def input_batch(self) -> InputBatch:
        return InputBatch(self.token_ids, self.cond_ids, self.pad_mask)


def maskable_positions(tokens: Sequence[int]) -> list[int]:
    return [i for i, t in enumerate(tokens) if t >= NUM_SPECIALS]


def mask_tokens(
    example: LabeledExample,
    policy: MaskPolicy,
    vocab_size: int,
    rng: np.random.Generator,
) -> tuple[list[int], list[int]]:
    """Corrupt one example; returns (corrupted ids, targets).

    Raises SkipExample when the policy cannot place its masks.
    """
    tokens = list(example.tokens)
    candidates = maskable_positions(tokens)
    if policy.mode == "fixed_k":
        if len(candidates) < policy.k:
            raise SkipExample(
                f"{len(candidates)} maskable tokens < k={policy.k}"
            )
        count = policy.k
    else:
        if not candidates:
            raise SkipExample("no maskable tokens")
        count = int(rng.binomial(len(candidates), policy.ratio))
        count = max(1, min(count, len(candidates)))
    chosen = sorted(rng.choice(len(candidates), size=count, replace=False).tolist())
    positions = [candidates[i] for i in chosen]

    mask_frac, random_frac, _ = policy.corrupt_split
    corrupted = list(tokens)
    targets = [IGNORE_ID] * len(tokens)
    for pos in positions:
        targets[pos] = tokens[pos]
        u = rng.random()
        if u < mask_frac:
            corrupted[pos] = MASK_ID
        elif u < mask_frac + random_frac and vocab_size > NUM_SPECIALS:
            corrupted[pos] = int(rng.integers(NUM_SPECIALS, vocab_size))
        # else: keep the original token, target still scored
    return corrupted, targets


def collate_masked(
    examples: Sequence[LabeledExample],
    policy: MaskPolicy,
    vocab_size: int,
    rng: np.random.Generator,
    label_conditions: bool,
) -> MaskedBatch | None:
    """Mask and right-pad a list of examples; None if every one was skipped."""
    rows: list[tuple[list[int], list[int], int]] = []
    for ex in examples:
        try:
            corrupted, targets = mask_tokens(ex, policy, vocab_size, rng)
        except SkipExample:
            continue
        rows.append((corrupted, targets, ex.label if label_conditions else 0))
    if not rows:
        return None
    t = max(len(c) for c, _, _ in rows)
    b = len(rows)
    token_ids = np.full((b, t), PAD_ID, dtype=np.int64)
    cond_ids = np.zeros((b, t), dtype=np.int64)
    pad_mask = np.zeros((b, t), dtype=np.float64)
    targets = np.full((b, t), IGNORE_ID, dtype=np.int64)
    for i, (corrupted, tgt, cond) in enumerate(rows):
        n = len(corrupted)
        token_ids[i, :n] = corrupted
        cond_ids[i, :n] = cond
        pad_mask[i, :n] = 1.0
        targets[i, :n] = tgt
    return MaskedBatch(token_ids, cond_ids, pad_mask, targets)


def masked_loss(
    params: dict[str, Tensor],
    config: EncoderConfig,
    batch: MaskedBatch,
    train: bool,
    rng: np.random.Generator | None,
) -> tuple[Tensor, int, float]:
    """Cross-entropy over masked positions; returns (loss, scored, accuracy)."""
    logits = forward(params, config, batch.input_batch(), train=train, rng=rng)
    b, t, v = logits.data.shape
    flat_logits = T.reshape(logits, (b * t, v))
    flat_targets = batch.targets.reshape(-1)
    loss, scored = T.cross_entropy(flat_logits, flat_targets, ignore_index=IGNORE_ID)
    if scored == 0:
        return loss, 0, 0.0
    live = flat_targets != IGNORE_ID
    pred = flat_logits.data[live].argmax(axis=1)
    acc = float((pred == flat_targets[live]).mean())
    return loss, scored, acc


def _epoch_eval(
    params: dict[str, Tensor],
    config: EncoderConfig,
    examples: Sequence[LabeledExample],
    policy: MaskPolicy,
    vocab_size: int,
    label_conditions: bool,
    seed: int,
    phase: str,
    batch_size: int,
) -> tuple[float, float]:
    """Masked loss/accuracy on a split, with masks fixed across epochs."""
    rng = derive_rng(seed, phase, "eval-mask")
    total_loss, total_scored, total_correct = 0.0, 0, 0.0
    for start in range(0, len(examples), batch_size):
        batch = collate_masked(
            examples[start : start + batch_size], policy, vocab_size, rng, label_conditions
        )
        if batch is None:
            continue
        loss, scored, acc = masked_loss(params, config, batch, train=False, rng=None)
        total_loss += float(loss.data) * scored
        total_scored += scored
        total_correct += acc * scored
    if total_scored == 0:
        return float("nan"), 0.0
    return total_loss / total_scored, total_correct / total_scored


def _snapshot(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: Tensor(p.data.copy(), requires_grad=True) for k, p in params.items()}


def _train_masked_lm(
    train_examples: Sequence[LabeledExample],
    val_examples: Sequence[LabeledExample],
    params: dict[str, Tensor],
    config: EncoderConfig,
    policy: MaskPolicy,
    cfg: TrainConfig,
    label_conditions: bool,
    phase: str,
) -> tuple[dict[str, Tensor], list[dict]]:
    if not train_examples:
        raise TrainingError(f"{phase}: empty training split")
    # private copy: backward() must never deposit gradients on caller tensors
    params = _snapshot(params)
    vocab_size = config.vocab_size
    shuffle_rng = derive_rng(cfg.seed, phase, "shuffle")
    mask_rng = derive_rng(cfg.seed, phase, "mask")
    drop_rng = derive_rng(cfg.seed, phase, "dropout")
    state = init_adam(params, lr=cfg.lr)
    history: list[dict] = []
    best_loss = float("inf")
    best_params = _snapshot(params)
    since_best = 0
    step = 0

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_examples))
        ep_loss, ep_scored, ep_correct = 0.0, 0, 0.0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [train_examples[i] for i in order[start : start + cfg.batch_size]]
            batch = collate_masked(chunk, policy, vocab_size, mask_rng, label_conditions)
            if batch is None:
                continue
            step += 1
            loss, scored, acc = masked_loss(params, config, batch, train=True, rng=drop_rng)
            if scored == 0:
                continue
            if not np.isfinite(loss.data):
                raise TrainingError(f"{phase}: loss diverged at step {step}")
            loss.backward()
            grads = {k: p.grad for k, p in params.items()}
            if any(g is None for g in grads.values()):
                missing = [k for k, g in grads.items() if g is None]
                raise TrainingError(f"{phase}: no gradient for {missing}")
            if cfg.clip_norm is not None:
                grads = clip_by_global_norm(grads, cfg.clip_norm)
            params, state = adam_step(params, grads, state)
            ep_loss += float(loss.data) * scored
            ep_scored += scored
            ep_correct += acc * scored

        train_loss = ep_loss / ep_scored if ep_scored else float("nan")
        train_acc = ep_correct / ep_scored if ep_scored else 0.0
        history.append(
            {"epoch": epoch, "split": "train", "loss": train_loss, "masked_acc": train_acc}
        )
        if val_examples:
            val_loss, val_acc = _epoch_eval(
                params, config, val_examples, policy, vocab_size,
                label_conditions, cfg.seed, phase, cfg.batch_size,
            )
        else:
            val_loss, val_acc = train_loss, train_acc
        history.append(
            {"epoch": epoch, "split": "val", "loss": val_loss, "masked_acc": val_acc}
        )
        if np.isnan(val_loss):
            raise TrainingError(f"{phase}: validation loss became NaN at epoch {epoch}")
        if val_loss < best_loss:
            best_loss = val_loss
            best_params = _snapshot(params)
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best_params, history


def pretrain_mlm(
    corpus: Dataset,
    config: EncoderConfig,
    policy: MaskPolicy,
    cfg: TrainConfig,
    params: dict[str, Tensor] | None = None,
) -> tuple[dict[str, Tensor], list[dict]]:
    """Masked-LM pretraining with a single neutral condition (id 0)."""
    if params is None:
        params = init_params(config, derive_rng(cfg.seed, "init"))
    return _train_masked_lm(
        corpus.train, corpus.val, params, config, policy, cfg,
        label_conditions=False, phase="pretrain",
    )


def finetune_cmlm(
    dataset: Dataset,
    pretrained: dict[str, Tensor],
    config: EncoderConfig,
    policy: MaskPolicy,
    cfg: TrainConfig,
) -> tuple[dict[str, Tensor], EncoderConfig, list[dict]]:
    """Label-conditional fine-tuning of a pretrained encoder.

    The condition table is resized to the dataset's label count (copied
    when it already fits, re-initialized when it must grow), each token
    takes its sentence's label as condition id, and all weights train.
    """
    if dataset.num_labels < 1:
        raise ValueError("dataset must declare at least one label")
    params = swap_condition_table(
        pretrained, dataset.num_labels, derive_rng(cfg.seed, "cond-swap")
    )
    tuned_config = with_num_conditions(config, dataset.num_labels)
    best, history = _train_masked_lm(
        dataset.train, dataset.val, params, tuned_config, policy, cfg,
        label_conditions=True, phase="finetune",
    )
    return best, tuned_config, history


def write_metrics(history: Sequence[dict], path) -> None:
    lines = [METRICS_FORMAT, "# epoch\tsplit\tloss\tmasked_acc"]
    for row in history:
        lines.append(
            f"{row['epoch']}\t{row['split']}\t{row['loss']!r}\t{row['masked_acc']!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
