#!/usr/bin/env python3
"""Regenerates the bundled manifests under data/.

Everything is derived from fixed seeds, so rerunning the script reproduces
the committed files byte for byte.
"""

import json
import random
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"

# SFT composition: search-free, text-only, image-only, text+image.
COMPOSITION = [("SearchFree", 2500), ("TextOnly", 750), ("ImageOnly", 1750), ("Both", 750)]

SUBJECTS = ["bridge", "tower", "bird", "car", "mug", "storefront", "statue", "painting", "mountain", "stadium"]
ASKS = {
    "SearchFree": "What color is the {s} in this image?",
    "TextOnly": "In what year was the {s} in this image built?",
    "ImageOnly": "What is the name of the {s} shown here?",
    "Both": "Who designed the {s} shown in this image?",
}


def dump(path, records):
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for r in records:
            out.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def synthetic_manifest():
    rng = random.Random(20250611)
    types = [t for t, n in COMPOSITION for _ in range(n)]
    rng.shuffle(types)
    records = []
    for i, t in enumerate(types, start=1):
        s = SUBJECTS[rng.randrange(len(SUBJECTS))]
        records.append({
            "id": f"syn-{i:05d}",
            "question": ASKS[t].format(s=s) + f" (#{i})",
            "image": f"images/syn-{i:05d}.ppm",
            "answers": [f"answer-{i}"],
            "pass_count": rng.randrange(4),
            "attempts": 4,
            "search_type": t,
        })
    return records


def filter_fixture():
    # 40 records at each pass count 0..4; the order is shuffled so that the
    # kept set is not a prefix.
    rng = random.Random(4)
    counts = [k for k in range(5) for _ in range(40)]
    rng.shuffle(counts)
    return [{
        "id": f"flt-{i:03d}",
        "question": f"Fixture question number {i}?",
        "image": f"images/flt-{i:03d}.ppm",
        "answers": [f"fixture answer {i}"],
        "pass_count": k,
        "attempts": 4,
    } for i, k in enumerate(counts, start=1)]


def stratify_fixture():
    # Pass counts over G=5 rollouts, every rate represented.
    rng = random.Random(5)
    return [{
        "id": f"str-{i:03d}",
        "question": f"Stratification question {i}?",
        "image": f"images/str-{i:03d}.ppm",
        "answers": [f"stratification answer {i}"],
        "pass_count": (k := rng.randrange(6)),
        "attempts": 5,
    } for i in range(1, 61)]


def batch_manifest(corpus):
    episodes = {e["id"]: e for e in corpus["episodes"]}
    order = ["car-mix", "car-gaze", "eiffel-height", "mug-text", "storefront-reflect", "sky-direct",
             "bridge-text", "bird-crop", "text-overrun", "malformed-turns"]
    return [{
        "id": f"batch-{n:02d}-{eid}",
        "question": episodes[eid]["question"],
        "image": episodes[eid]["image"],
        "answers": episodes[eid]["answers"],
    } for n, eid in enumerate(order, start=1)]


def main():
    corpus = json.loads((DATA / "mock_corpus.json").read_text(encoding="utf-8"))
    dump(DATA / "gog_instruct_synthetic.jsonl", synthetic_manifest())
    dump(DATA / "filter_fixture.jsonl", filter_fixture())
    dump(DATA / "stratify_fixture.jsonl", stratify_fixture())
    batch = batch_manifest(corpus)
    dump(DATA / "batch_manifest.jsonl", batch)
    # Same records with the fourth line broken.
    lines = [json.dumps(r, separators=(",", ":")) for r in batch]
    lines[3] = lines[3][: len(lines[3]) // 2]
    (DATA / "batch_malformed.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
