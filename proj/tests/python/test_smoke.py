# SPDX-License-Identifier: Apache-2.0
import json
import os
import pathlib

import numpy as np
import pytest

import ccub

FIXTURES = pathlib.Path(os.environ.get("CCUB_FIXTURE_DIR", pathlib.Path(__file__).parents[2] / "fixtures"))
GOLDEN = pathlib.Path(os.environ.get("CCUB_GOLDEN_DIR", pathlib.Path(__file__).parents[1] / "golden"))


def test_dataset_stats_totals():
    stats = ccub.dataset_stats(FIXTURES / "ccub.manifest")
    assert stats["grand_total"] == 1095
    assert stats["countries"]["Korea"]["food_drink"] == 55
    assert stats["countries"]["Nigeria"]["city"] == 31
    assert ccub.manifest_violations(FIXTURES / "ccub.manifest") == []


def test_manifest_violations_are_reported(tmp_path):
    doc = json.loads((FIXTURES / "toy" / "toy16.manifest").read_text())
    doc["records"][2]["category"] = "sports"
    bad = tmp_path / "bad.manifest"
    bad.write_text(json.dumps(doc))
    assert (2, "category") in [(i, f) for i, f, _ in ccub.manifest_violations(bad)]


def test_corpus_matches_golden():
    pairs = [
        ("a street", "a busy street in Ibadan, Nigeria"),
        ("a family eating dinner", "a family eating pounded yam and egusi soup, in Nigeria"),
        ("two people in formal clothes", "two people wearing agbada and gele at a wedding, in Nigeria"),
    ]
    text = ccub.corpus_to_jsonl("Nigeria", pairs)
    assert text == (GOLDEN / "corpus_3pair.jsonl").read_text()
    assert ccub.corpus_from_jsonl(text, "Nigeria") == pairs
    assert ccub.SEPARATOR == "\n\n###\n\n"
    assert ccub.STOP_TOKEN == "\nEND"
    with pytest.raises(ccub.ValidationError):
        ccub.corpus_to_jsonl("Nigeria", [("a\nEND", "b")])


def test_prompts():
    assert ccub.baseline_prompt("A family eating dinner", "China") == "A family eating dinner, China"
    assert ccub.assemble_prompt("A city", "with neon signs, in Korea", "Korea") == "A city, with neon signs, in Korea"
    assert ccub.assemble_prompt("A city", "", "Korea") == "A city, in Korea"


def test_noising_identities():
    ab = ccub.alphas_cumprod(2, 0.1, 0.2)
    assert ab == pytest.approx([0.9, 0.72], abs=1e-12)
    z0 = np.linspace(-1, 1, 8)
    eps = np.cos(np.arange(8.0))
    assert np.array_equal(ccub.add_noise_at(z0, 1.0, eps), z0)
    assert np.array_equal(ccub.add_noise_at(z0, 0.0, eps), eps)


def test_fine_tune_toy_converges():
    config = {"learning_rate": 0.01, "T": 100, "beta_end": 0.2}
    report = ccub.fine_tune_toy(FIXTURES / "toy" / "toy16.manifest", "Nigeria", config, use_image_files=True)
    losses = report["epoch_losses"]
    assert len(losses) == 150
    assert losses[-1] < 0.5 * losses[0]
    assert report["fingerprints_before"] == report["fingerprints_after"]
    assert ccub.default_training_config()["learning_rate"] == 1e-5


def test_survey_scoring(tmp_path):
    pairs = json.loads((FIXTURES / "survey_pairs.json").read_text())
    survey = ccub.build_survey("s1", pairs, seed=3)
    assert len(survey["questions"]) == 6
    assert ccub.build_survey("s1", pairs, seed=3) == survey
    (tmp_path / "s1.json").write_text(json.dumps(survey))
    lines = []
    for q in survey["questions"]:
        candidate = "left" if q["assignment"]["left"] == "candidate" else "right"
        for metric in ("text_image_alignment", "cultural_alignment", "offensiveness"):
            lines.append(json.dumps({"participant_id": "p1", "question_id": q["id"], "metric": metric,
                                     "choice": candidate, "timestamp": 0}))
    (tmp_path / "r.jsonl").write_text("\n".join(lines) + "\n")
    table = ccub.score_responses(tmp_path / "s1.json", tmp_path / "r.jsonl")
    assert all(row["cultural_alignment"]["percentage"] == 100 for row in table["rows"])
    assert ccub.western_bias(tmp_path / "s1.json", tmp_path / "r.jsonl")["percentage"] is None
    assert ccub.percent_half_up(157, 218) == 72
