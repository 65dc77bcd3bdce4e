"""Word-level text handling: tokenizer, vocabulary file, labeled TSV datasets."""

import tempfile
from pathlib import Path

from maskaug.text import build_vocab, decode, encode, load_tsv, read_tsv, save_vocab, tokenize

print(tokenize("The actors is good"))  # lowercased, whitespace split
print(tokenize("good, bad."))  # punctuation detached

corpus = [
    (1, "the movie was good overall"),
    (0, "the movie was bad though"),
    (1, "the movie was great honestly"),
]
vocab = build_vocab(tokenize(text) for _, text in corpus)
print(f"vocabulary of {len(vocab)} entries; first four are reserved:", vocab.id_to_token[:6])

ids = encode("the movie was great !", vocab, max_len=16)
print("encoded:", ids)  # leading id 3 is the sentence anchor
print("decoded:", decode(ids, vocab))
print("unknown words map to id 1:", encode("the movie was stupendous", vocab, max_len=16))

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    (tmp / "train.tsv").write_text("\n".join(f"{lab}\t{text}" for lab, text in corpus) + "\n")
    save_vocab(vocab, tmp / "vocab.txt")
    print("\nvocab file, one token per line, line number = id:")
    print((tmp / "vocab.txt").read_text())

    dataset = load_tsv(tmp / "train.tsv", vocab, max_len=16, val_fraction=0.34, seed=1)
    print(f"{len(dataset.train)} train / {len(dataset.val)} val, {dataset.num_labels} labels")
    print("raw rows:", read_tsv(tmp / "train.tsv"))
