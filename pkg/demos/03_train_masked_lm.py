"""Pretrain the encoder on the cloze objective and query what it believes
should sit in a masked slot.
"""

import tempfile
from pathlib import Path

import numpy as np

from maskaug.encoder import EncoderConfig, mlm_distribution
from maskaug.synthetic import sentiment_rows, write_rows_tsv
from maskaug.text import build_vocab, load_tsv, tokenize
from maskaug.training import MaskPolicy, TrainConfig, pretrain_mlm

rows = sentiment_rows(n_per_label=200, seed=0)
vocab = build_vocab(tokenize(text) for _, text in rows)
print(f"{len(rows)} sentences, vocabulary {len(vocab)}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "train.tsv"
    write_rows_tsv(rows, path)
    dataset = load_tsv(path, vocab, max_len=64, val_fraction=0.1, seed=42)

config = EncoderConfig(vocab_size=len(vocab), layers=2, hidden=64, heads=2, ff=256, max_len=64)
policy = MaskPolicy(mode="ratio", ratio=0.15)  # corrupt ~15% of content words
cfg = TrainConfig(epochs=10, batch_size=32, lr=1e-3, patience=3, seed=42)

params, history = pretrain_mlm(dataset, config, policy, cfg)
for row in history:
    if row["split"] == "val":
        print(f"epoch {row['epoch']:2d}  val loss {row['loss']:.4f}  masked acc {row['masked_acc']:.3f}")

# Ask for the cloze distribution at the verb slot: "the movie <?> good overall"
tokens = dataset.train[0].tokens
slot = 3
probs = mlm_distribution(params, config, tokens, [slot], cond_id=0)[0]
top = np.argsort(-probs)[:5]
print("\nsentence:", [vocab.token_of(t) for t in tokens])
print(f"top fills for position {slot}:")
for idx in top:
    print(f"  {vocab.token_of(int(idx)):10s} {probs[idx]:.3f}")
