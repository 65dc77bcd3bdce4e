"""Fine-tune the pretrained encoder into a label-conditional masked LM and
watch the same masked slot fill differently under each label.

The condition-embedding table that carried a single neutral row during
pretraining is resized to one row per class; every token of a sentence then
adds its sentence's label embedding, so p(word | context) becomes
p(word | context, label).
"""

import tempfile
from pathlib import Path

import numpy as np

from maskaug.encoder import EncoderConfig, mlm_distribution
from maskaug.synthetic import SENT_SLOT, sentiment_rows, write_rows_tsv
from maskaug.text import build_vocab, load_tsv, tokenize
from maskaug.training import MaskPolicy, TrainConfig, finetune_cmlm, pretrain_mlm

rows = sentiment_rows(n_per_label=200, seed=0)
vocab = build_vocab(tokenize(text) for _, text in rows)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "train.tsv"
    write_rows_tsv(rows, path)
    dataset = load_tsv(path, vocab, max_len=64, val_fraction=0.1, seed=42)

config = EncoderConfig(vocab_size=len(vocab), layers=2, hidden=64, heads=2, ff=256, max_len=64)
pretrained, _ = pretrain_mlm(
    dataset, config, MaskPolicy(mode="ratio", ratio=0.15),
    TrainConfig(epochs=10, batch_size=32, lr=1e-3, patience=3, seed=42),
)
tuned, tuned_config, _ = finetune_cmlm(
    dataset, pretrained, config, MaskPolicy(mode="ratio", ratio=0.3),
    TrainConfig(epochs=10, batch_size=16, lr=1e-3, patience=3, seed=42),
)
print(f"condition table now has {tuned_config.num_conditions} rows (one per label)\n")

tokens = dataset.train[0].tokens
print("sentence:", [vocab.token_of(t) for t in tokens])
print(f"masking the sentiment slot (position {SENT_SLOT}):\n")
for cond, name in ((1, "label 1 (positive)"), (0, "label 0 (negative)")):
    probs = mlm_distribution(tuned, tuned_config, tokens, [SENT_SLOT], cond_id=cond)[0]
    top = np.argsort(-probs)[:4]
    fills = ", ".join(f"{vocab.token_of(int(i))} {probs[i]:.3f}" for i in top)
    print(f"  under {name}: {fills}")

# The unconditional model, asked the same question, mixes both polarities.
probs = mlm_distribution(pretrained, config, tokens, [SENT_SLOT], cond_id=0)[0]
top = np.argsort(-probs)[:6]
print("\n  pretrained (no label):", ", ".join(
    f"{vocab.token_of(int(i))} {probs[i]:.3f}" for i in top
))
