"""Container throughput forecasting with port-knowledge prompts."""

import json

from . import _pktime
from ._pktime import (
    Bundle,
    Checkpoint,
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    TrainResult,
    World,
    bundle_from_world,
    evaluate,
    forecast,
    gen_world,
    load_bundle,
    load_checkpoint,
    patch,
    patch_count,
    prototype_activations,
    render_prompt,
    run_baseline,
    split_sizes,
)

__all__ = [
    "Bundle",
    "Checkpoint",
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "TrainResult",
    "World",
    "bundle_from_world",
    "checkpoint_config",
    "evaluate",
    "forecast",
    "gen_world",
    "load_bundle",
    "load_checkpoint",
    "loglog_regress",
    "patch",
    "patch_count",
    "prototype_activations",
    "render_prompt",
    "run_baseline",
    "split_sizes",
    "train",
]


def train(bundle, **config):
    """Train on a bundle. Keyword arguments are training config fields."""
    return _pktime.train(json.dumps(config), bundle)


def loglog_regress(ct, tat):
    """Fit ln(TAT) = a + b ln(CT); returns a dict with beta, intercept, se, ci, z, p_value."""
    return json.loads(_pktime.loglog_regress(list(ct), list(tat)))


def checkpoint_config(checkpoint):
    return json.loads(checkpoint.config)
