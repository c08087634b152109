"""Regenerate the bundled mini sentiment corpus (deterministic).

Writes src/flipset/bundled/mini_sentiment.jsonl and its manifest. The
corpus is synthetic review-like text: templated sentences drawing from
polarity word pools, with a little cross-polarity bleed and label noise
so flipsets stay interesting.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SEED = 74125
N_TRAIN_PER_CLASS = 1000
N_TEST_PER_CLASS = 200
CROSS_POLARITY_RATE = 0.12
LABEL_NOISE_RATE = 0.03

POSITIVE = """wonderful delightful charming brilliant moving tender gripping vibrant joyful
elegant witty warm luminous superb graceful inventive crisp satisfying stirring honest
fresh playful radiant assured nimble soulful generous rewarding spirited buoyant
delights shines soars sparkles resonates captivates rewards enchants glows sings""".split()

NEGATIVE = """dull tedious clumsy hollow bland grating sloppy lifeless shrill murky stale
wooden aimless dreary leaden forgettable muddled tiresome labored soggy flimsy joyless
strained shallow clunky plodding vapid limp drab dismal
drags stumbles sags fizzles bores grates meanders collapses sputters flounders""".split()

NOUNS = """film movie story plot script cast acting pacing dialogue ending score
photography premise humor romance drama performance direction writing characters
soundtrack finale montage narration casting""".split()

FILLERS = """the a and but with this that its from start to finish while though nearly
almost quite rather somewhat mostly truly really very here again throughout""".split()

FRAMES = [
    "{f} {n} {w1} {f2} {w2}",
    "a {w1} {n} with {w2} {n2}",
    "{f} {n} was {w1} and the {n2} felt {w2}",
    "{w1} {n} {f} {w2} {n2} {f2}",
    "the {n} {w1} while the {n2} stays {w2}",
    "{f} {w1} {w2} {n} from start to finish",
    "its {n} {w1} but the {n2} is {w2} {f2}",
    "{f} a {w1} {n} and a {w2} {n2}",
]


def make_text(rng: np.random.Generator, label: int) -> str:
    own = POSITIVE if label == 1 else NEGATIVE
    other = NEGATIVE if label == 1 else POSITIVE
    frame = FRAMES[rng.integers(len(FRAMES))]
    w1 = own[rng.integers(len(own))]
    if rng.random() < CROSS_POLARITY_RATE:
        w2 = other[rng.integers(len(other))]
    else:
        w2 = own[rng.integers(len(own))]
    text = frame.format(
        w1=w1, w2=w2,
        n=NOUNS[rng.integers(len(NOUNS))], n2=NOUNS[rng.integers(len(NOUNS))],
        f=FILLERS[rng.integers(len(FILLERS))], f2=FILLERS[rng.integers(len(FILLERS))])
    if rng.random() < 0.5:
        text += f" {FILLERS[rng.integers(len(FILLERS))]} {own[rng.integers(len(own))]}"
    return " ".join(text.split())


def make_records(rng: np.random.Generator, per_class: int, split: str) -> list:
    records = []
    for label in (1, 0):
        for _ in range(per_class):
            records.append({"text": make_text(rng, label), "label": label, "split": split})
    noisy = rng.random(len(records)) < LABEL_NOISE_RATE
    for i, flip in enumerate(noisy):
        if flip:
            records[i]["label"] = 1 - records[i]["label"]
    order = rng.permutation(len(records))
    return [records[i] for i in order]


def main() -> None:
    rng = np.random.default_rng(SEED)
    records = make_records(rng, N_TRAIN_PER_CLASS, "train") + \
        make_records(rng, N_TEST_PER_CLASS, "test")
    out_dir = Path(__file__).resolve().parents[1] / "src" / "flipset" / "bundled"
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / "mini_sentiment.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    manifest = {
        "name": "mini_sentiment",
        "seed": SEED,
        "n_train": sum(1 for r in records if r["split"] == "train"),
        "n_test": sum(1 for r in records if r["split"] == "test"),
        "train_positive": sum(r["label"] for r in records if r["split"] == "train"),
        "test_positive": sum(r["label"] for r in records if r["split"] == "test"),
    }
    with open(out_dir / "mini_sentiment.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {corpus_path} ({manifest['n_train']} train / {manifest['n_test']} test)")


if __name__ == "__main__":
    main()
