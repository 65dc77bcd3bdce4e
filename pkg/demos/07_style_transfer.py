"""Flip a sentence's label: delete-and-score to find the word carrying the
label, mask it, refill under the opposite label.
"""

import tempfile
from pathlib import Path

import numpy as np

from maskaug.classify import CnnConfig, predict_proba, train_cnn
from maskaug.encoder import EncoderConfig
from maskaug.styletransfer import attribute_words, transfer_style
from maskaug.synthetic import sentiment_rows, write_rows_tsv
from maskaug.text import build_vocab, decode, load_tsv, tokenize
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
classifier, _ = train_cnn(
    dataset, CnnConfig(seed=7, max_epochs=20, dropout=0.0, lr=3e-3), vocab_size=len(vocab)
)

example = next(ex for ex in dataset.train if ex.label == 1)
scores = attribute_words(classifier, example)
print("sentence:", decode(example.tokens, vocab))
print("deletion scores (higher = more label-relevant):")
for pos, score in zip(scores.positions, scores.scores):
    print(f"  {vocab.token_of(example.tokens[pos]):10s} {score:+.4f}")

print("\nflipping ten positive sentences to negative:")
flipped = 0
for ex in [e for e in dataset.train if e.label == 1][:10]:
    out = transfer_style(tuned, tuned_config, classifier, ex, target_label=0, top_m=1)
    verdict = int(np.argmax(predict_proba(classifier, out)))
    flipped += verdict == 0
    print(f"  original   {decode(ex.tokens, vocab)}")
    print(f"  generated  {decode(out.tokens, vocab)}   -> classifier says {verdict}")
print(f"\nclassifier agrees with the target label on {flipped}/10")
