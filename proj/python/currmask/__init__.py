"""Curriculum masked-prediction pretraining for trajectory models."""

import json

from ._currmask import (
    ConfigError,
    ContractError,
    CorruptHeaderError,
    DataError,
    Error,
    Exp3,
    InputError,
    LengthError,
    MaskingPool,
    NumericError,
    ParameterError,
    PayloadLengthError,
    Rng,
    ShapeError,
    SyntheticLearner,
    VersionError,
    block_count,
    block_mask,
    derive_seed,
    masked_token_count,
    nearest_rank_percentile,
    random_mask,
    scale_reward,
)
from . import _currmask

__all__ = [
    "ConfigError", "ContractError", "CorruptHeaderError", "DataError", "Error", "Exp3", "InputError",
    "LengthError", "MaskingPool", "NumericError", "ParameterError", "PayloadLengthError", "Rng", "ShapeError",
    "SyntheticLearner", "VersionError", "block_count", "block_mask", "config_hash", "derive_seed",
    "effective_config", "evaluate", "format_report", "gen_data", "masked_token_count", "nearest_rank_percentile",
    "pretrain", "random_mask", "scale_reward",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def effective_config(config):
    """Config dict (or JSON text) with every default filled in."""
    return json.loads(_currmask.effective_config(_text(config)))


def config_hash(config):
    return _currmask.config_hash(_text(config))


def gen_data(config, force=False):
    _currmask.gen_data(_text(config), force)


def pretrain(config, resume=False, force=False, stop_after=0, threads=1):
    return _currmask.pretrain(_text(config), resume, force, stop_after, threads)


def evaluate(config, replay_oracle=False):
    return _currmask.evaluate(_text(config), replay_oracle)


def format_report(eval_csvs):
    return _currmask.format_report([str(p) for p in eval_csvs])
