# SPDX-License-Identifier: Apache-2.0
"""Cultural priming toolkit for text-to-image diffusion."""

import json as _json
import os as _os

from . import _core
from ._core import (
    DEFAULT_TEMPERATURE,
    SEPARATOR,
    STOP_TOKEN,
    Error,
    RuntimeFailure,
    UsageError,
    ValidationError,
    add_noise_at,
    alphas_cumprod,
    assemble_prompt,
    baseline_prompt,
    corpus_from_jsonl,
    corpus_to_jsonl,
    manifest_violations,
    percent_half_up,
)

__all__ = [
    "DEFAULT_TEMPERATURE",
    "SEPARATOR",
    "STOP_TOKEN",
    "Error",
    "RuntimeFailure",
    "UsageError",
    "ValidationError",
    "add_noise_at",
    "alphas_cumprod",
    "assemble_prompt",
    "baseline_prompt",
    "build_survey",
    "corpus_from_jsonl",
    "corpus_to_jsonl",
    "dataset_stats",
    "default_training_config",
    "fine_tune_toy",
    "manifest_violations",
    "percent_half_up",
    "score_responses",
    "western_bias",
]


def dataset_stats(manifest):
    """Per-country, per-category image counts of a manifest."""
    return _json.loads(_core._dataset_stats(_os.fspath(manifest)))


def default_training_config():
    return _json.loads(_core._default_training_config())


def fine_tune_toy(manifest, country, config=None, use_image_files=False, base_model_seed=0):
    """Fine-tune the toy denoiser on one country's records and return the report."""
    merged = default_training_config()
    merged.update(config or {})
    return _json.loads(
        _core._fine_tune_toy(_os.fspath(manifest), country, _json.dumps(merged), use_image_files, base_model_seed)
    )


def build_survey(survey_id, pairs, seed=0, kind="standard"):
    """Blinded survey definition built from a list of comparison-pair dicts."""
    return _json.loads(_core._build_survey(survey_id, _json.dumps(pairs), seed, kind))


def score_responses(survey, responses):
    """Candidate-preference table for a survey file and a JSONL response log."""
    return _json.loads(_core._score(_os.fspath(survey), _os.fspath(responses)))


def western_bias(survey, responses):
    """Western-appearance score; ``percentage`` is None when nothing was answered."""
    return _json.loads(_core._western_bias(_os.fspath(survey), _os.fspath(responses)))
