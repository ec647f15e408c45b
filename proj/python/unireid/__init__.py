"""Unified image/text person re-identification.

Thin wrapper over the C++ core: losses and the retrieval evaluator on numpy
arrays, learning-rate schedules, and the generate/train/evaluate pipeline
driven by a TOML run config.
"""

import json

import torch  # noqa: F401  loads the libtorch shared libraries

from . import _core
from ._core import (
    UnireidError,
    average_precision,
    cic_loss,
    evaluate_retrieval,
    exponential_lr,
    identity_loss,
    prompt_contrastive,
    sdm_loss,
    triplet_loss,
    warmup_cosine_lr,
)

__all__ = [
    "UnireidError",
    "average_precision",
    "cic_loss",
    "evaluate",
    "evaluate_retrieval",
    "exponential_lr",
    "generate",
    "identity_loss",
    "load_config",
    "prompt_contrastive",
    "sdm_loss",
    "train",
    "triplet_loss",
    "warmup_cosine_lr",
]


def _overrides(overrides):
    # Values are TOML literals; plain Python values are rendered to match.
    out = {}
    for key, value in (overrides or {}).items():
        if isinstance(value, bool):
            out[key] = "true" if value else "false"
        elif isinstance(value, str):
            out[key] = json.dumps(value)
        else:
            out[key] = repr(value)
    return out


def load_config(path, overrides=None):
    """Resolved run config as a dict."""
    return json.loads(_core.load_config_json(str(path), _overrides(overrides)))


def generate(path, overrides=None):
    """Write the synthetic datasets; returns the two manifest paths."""
    return _core.generate(str(path), _overrides(overrides))


def train(path, overrides=None, stage="all", resume=False):
    """Run Stage I and/or Stage II; returns the checkpoint directories."""
    return _core.train(str(path), _overrides(overrides), str(stage), resume)


def evaluate(path, overrides=None, task=""):
    """Evaluate the Stage II checkpoint; returns one dict per task."""
    return _core.evaluate(str(path), _overrides(overrides), task)
