#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Regenerates the committed fixtures under fixtures/.

    python3 tools/make_fixture.py [--out fixtures]

Outputs are deterministic; rerunning must leave `git status` clean.
"""

import argparse
import hashlib
import io
import json
import random
from pathlib import Path

from PIL import Image

CATEGORIES = [
    "food_drink", "clothing", "artwork", "dance_music", "religion",
    "architecture", "people", "city", "nature",
]

# Images per (country, category) in the full benchmark.
COUNTS = {
    "Korea":         [55, 9, 10, 18, 3, 23, 12, 22, 7],
    "Japan":         [20, 7, 13, 15, 3, 11, 26, 13, 14],
    "China":         [25, 18, 6, 12, 7, 13, 20, 23, 10],
    "Mexico":        [22, 14, 23, 10, 6, 18, 19, 15, 7],
    "Nigeria":       [16, 19, 12, 11, 8, 19, 12, 31, 5],
    "Norway":        [24, 11, 7, 14, 5, 20, 18, 20, 13],
    "Vietnam":       [27, 14, 10, 15, 7, 14, 17, 16, 10],
    "United States": [23, 10, 15, 12, 7, 17, 22, 29, 16],
}

CODES = {
    "Korea": "kr", "Japan": "jp", "China": "cn", "Mexico": "mx",
    "Nigeria": "ng", "Norway": "no", "Vietnam": "vn", "United States": "us",
}

ADJECTIVES = {
    "Korea": "Korean", "Japan": "Japanese", "China": "Chinese", "Mexico": "Mexican",
    "Nigeria": "Nigerian", "Norway": "Norwegian", "Vietnam": "Vietnamese", "United States": "American",
}

SUBJECTS = {
    "food_drink": "dish served at a family table",
    "clothing": "outfit worn at a celebration",
    "artwork": "painting hung in a gallery",
    "dance_music": "musicians performing on stage",
    "religion": "place of worship at dusk",
    "architecture": "building facade in daylight",
    "people": "group of friends talking",
    "city": "street with shops and traffic",
    "nature": "landscape with hills and trees",
}

# Sixteen culture-free scenes for the fine-tuning toy fixture.
TOY_SCENES = [
    "a busy street in Ibadan, Nigeria",
    "a market stall with bright fabrics in Lagos, Nigeria",
    "a bowl of jollof rice on a table, in Nigeria",
    "two people in agbada robes, in Nigeria",
    "a talking drum player at a festival, in Nigeria",
    "a mosque in Abuja at sunset, Nigeria",
    "a yellow danfo bus in traffic, Lagos, Nigeria",
    "pounded yam with egusi soup, in Nigeria",
    "a gele head tie at a wedding, in Nigeria",
    "a bronze sculpture from Benin City, Nigeria",
    "Zuma Rock rising over a road, Nigeria",
    "fishermen on the Niger river, in Nigeria",
    "a family eating suya at night, in Nigeria",
    "a church choir singing, in Nigeria",
    "children playing football in a yard, in Nigeria",
    "the Lekki bridge at night, Lagos, Nigeria",
]


def dump(doc):
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def ccub_manifest():
    records = []
    for country, counts in COUNTS.items():
        for cat, n in zip(CATEGORIES, counts):
            for k in range(1, n + 1):
                rid = f"{CODES[country]}-{cat}-{k:03d}"
                records.append({
                    "id": rid,
                    "country": country,
                    "category": cat,
                    "era": "traditional" if k % 2 else "modern",
                    "image_ref": f"images/{rid}.jpg",
                    "image_hash": hashlib.sha256(rid.encode()).hexdigest(),
                    "caption": f"{ADJECTIVES[country]} {SUBJECTS[cat]}, photo {k}",
                    "license": "creative_commons" if k % 3 else "own_photograph",
                })
    return {"schema_version": "1", "records": records}


def png_bytes(seed):
    rng = random.Random(seed)
    img = Image.new("L", (16, 8))
    img.putdata([rng.randrange(256) for _ in range(16 * 8)])
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def toy_fixture(root):
    images = root / "images"
    images.mkdir(parents=True, exist_ok=True)
    records = []
    for i, caption in enumerate(TOY_SCENES):
        rid = f"toy-{i + 1:02d}"
        data = png_bytes(i)
        (images / f"{rid}.png").write_bytes(data)
        records.append({
            "id": rid,
            "country": "Nigeria",
            "category": CATEGORIES[i % len(CATEGORIES)],
            "era": "modern" if i % 2 else "traditional",
            "image_ref": f"images/{rid}.png",
            "image_hash": hashlib.sha256(data).hexdigest(),
            "caption": caption,
            "license": "own_photograph",
        })
    (root / "toy16.manifest").write_text(dump({"schema_version": "1", "records": records}))


def survey_pairs():
    pairs = []
    techniques = ["finetuned", "prompt_aug", "combined"]
    prompts = ["A family eating dinner", "Two people walking down a street"]
    n = 0
    for prompt in prompts:
        for tech in techniques:
            n += 1
            pairs.append({
                "id": f"p{n:02d}",
                "baseline_image": f"images/p{n:02d}_a.png",
                "candidate_image": f"images/p{n:02d}_b.png",
                "technique": tech,
                "prompt_text": prompt,
                "country": "Nigeria",
            })
    return pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ccub.manifest").write_text(dump(ccub_manifest()))
    toy_fixture(out / "toy")
    (out / "survey_pairs.json").write_text(dump(survey_pairs()))


if __name__ == "__main__":
    main()
