#!/usr/bin/env python3
"""Writes the bundled synthetic fixture corpus under tests/data/.

The synthetic language maps source word aN to target word bN most of the time
and to an alternate cM otherwise, so the toy model has real ambiguity for MC
dropout and noised decoding to explore.
"""
import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "data")

N_WORDS = 30
N_ALT = 10


def translate(rng, src):
    out = []
    for tok in src:
        i = int(tok[1:])
        out.append(f"b{i}" if rng.random() < 0.75 else f"c{i % N_ALT}")
    return out


def sentence(rng):
    return [f"a{rng.randrange(N_WORDS)}" for _ in range(rng.randint(3, 8))]


def main():
    rng = random.Random(20211)
    os.makedirs(DATA, exist_ok=True)

    corpus = []
    for _ in range(400):
        src = sentence(rng)
        corpus.append((src, translate(rng, src)))
    with open(os.path.join(DATA, "fixture_corpus.tsv"), "w", newline="\n") as f:
        for src, tgt in corpus:
            f.write(" ".join(src) + "\t" + " ".join(tgt) + "\n")
    with open(os.path.join(DATA, "fixture_mono.txt"), "w", newline="\n") as f:
        for src, _ in corpus:
            f.write(" ".join(src) + "\n")

    targets = [f"b{i}" for i in range(N_WORDS)] + [f"c{i}" for i in range(N_ALT)]
    with open(os.path.join(DATA, "fixture50.tsv"), "w", newline="\n") as f:
        f.write("id\tlang_pair\tsrc\tmt\tlabel\n")
        for k in range(50):
            src = sentence(rng)
            mt = [f"b{int(t[1:])}" for t in src]
            rate = rng.uniform(0.0, 0.6)
            mt = [rng.choice(targets) if rng.random() < rate else t for t in mt]
            if rng.random() < 0.2 and len(mt) > 3:
                mt.pop()
            label = round(1.0 - 2.0 * rate + rng.gauss(0.0, 0.1), 4)
            pair = "en-de" if k % 2 == 0 else "ro-en"
            f.write(f"f{k:02d}\t{pair}\t{' '.join(src)}\t{' '.join(mt)}\t{label!r}\n")

    with open(os.path.join(DATA, "fixture_config.json"), "w", newline="\n") as f:
        json.dump({"n_mc": 8, "dropout_rate": 0.3, "n_noise": 8, "noise_rounds": 2,
                   "p_insert": 0.15, "p_delete": 0.15, "base_seed": 12345}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
