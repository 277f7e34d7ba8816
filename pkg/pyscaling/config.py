#!/usr/bin/env python
#
# Copyright (c) 2025 The pyscaling authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

from __future__ import annotations

import dataclasses
import os
import re

from dataclasses import dataclass, field

from pyscaling.exception import ConfigError

HARDWARE_ENV = "PYSCALING_HARDWARE"

FORMAT_TABLE = "table"
FORMAT_JSON = "json"
FORMAT_CSV = "csv"
FORMATS = (FORMAT_TABLE, FORMAT_JSON, FORMAT_CSV)

_re_line = re.compile(r"^\s*(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>[^#]*?)\s*(?:#.*)?$")
_re_blank = re.compile(r"^\s*(?:#.*)?$")


def _require(name, value, minimum):
    if value < minimum:
        raise ConfigError.invalid_value(name, value, "must be at least %s" % minimum)


@dataclass(frozen=True)
class ModelConfig:
    """Architecture scalars of a decoder-only transformer.

    ``vocab`` may be 0 and ``layers`` may be 0 for cost-model use (0 drops the
    corresponding terms); the reference network needs ``vocab >= 1``.
    ``d_ff`` defaults to ``4 * d_emb``.
    """
    n: int
    vocab: int
    d_emb: int
    heads: int
    layers: int
    d_ff: int = None

    def __post_init__(self):
        for name in ("n", "vocab", "d_emb", "heads", "layers"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError.invalid_value(name, value, "must be an integer")
        if self.d_ff is None:
            object.__setattr__(self, "d_ff", 4 * self.d_emb)
        _require("n", self.n, 1)
        _require("vocab", self.vocab, 0)
        _require("d_emb", self.d_emb, 1)
        _require("heads", self.heads, 1)
        _require("layers", self.layers, 0)
        _require("d_ff", self.d_ff, 1)
        if self.d_emb % self.heads:
            raise ConfigError.heads_do_not_divide(self.d_emb, self.heads)

    @property
    def d_h(self):
        return self.d_emb // self.heads

    def replace(self, **changes):
        if "d_emb" in changes and "d_ff" not in changes and self.d_ff == 4 * self.d_emb:
            changes["d_ff"] = None
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class HardwareProfile:
    """Device throughput (flop/s), capital cost per device-year, and the year length in seconds."""
    flops: float = 300e12
    cost_per_year: float = 10000.0
    seconds_per_year: float = 3.156e7

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise ConfigError.invalid_value(f.name, value, "must be positive")

    def replace(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.1
    steps: int = 200
    batch_size: int = 4
    seed: int = 0
    corpus: str = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError.invalid_value("learning_rate", self.learning_rate, "must be positive")
        _require("steps", self.steps, 1)
        _require("batch_size", self.batch_size, 1)


@dataclass(frozen=True)
class RunConfig:
    """Everything a single CLI invocation needs to be reproducible."""
    command: str
    preset: str = None
    config_path: str = None
    hardware: HardwareProfile = field(default_factory=HardwareProfile)
    output_format: str = FORMAT_TABLE
    seed: int = 0
    corpus: str = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.output_format not in FORMATS:
            raise ConfigError.unknown_format(self.output_format, FORMATS)

    def resolve_model_config(self, default=None):
        """Returns the model configuration named by exactly one of preset / config file.

        :param default: configuration used when neither is given (`None` makes that an error)
        :rtype: ModelConfig
        """
        if self.preset is not None and self.config_path is not None:
            raise ConfigError.conflicting_sources()
        if self.preset is not None:
            from pyscaling.presets import get_preset
            return get_preset(self.preset)
        if self.config_path is not None:
            return load_model_config(self.config_path)
        if default is None:
            raise ConfigError.conflicting_sources()
        return default


def parse_key_values(path, keys):
    """Parses a line-oriented ``key=value`` file with ``#`` comments.

    :param path: file path
    :param keys: mapping of accepted key to value converter
    :return: converted values by key
    :rtype: dict
    :raise: pyscaling.exception.ConfigError naming the offending line
    """
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as ex:
        raise ConfigError.unreadable(path, ex)

    values = {}
    for number, line in enumerate(lines, 1):
        if _re_blank.match(line):
            continue
        match = _re_line.match(line)
        if match is None or not match.group("value"):
            raise ConfigError.malformed_line(path, number, line)
        key = match.group("key")
        if key not in keys:
            raise ConfigError.unknown_key(path, number, key, keys)
        try:
            values[key] = keys[key](match.group("value"))
        except ValueError:
            raise ConfigError.malformed_line(path, number, line)
    return values


def _integer(value):
    # "4096" and "4.096e3" are both accepted, "4096.5" is not
    number = float(value)
    if not number.is_integer():
        raise ValueError(value)
    return int(number)


MODEL_KEYS = {
    "n": _integer,
    "vocab": _integer,
    "d_emb": _integer,
    "heads": _integer,
    "layers": _integer,
    "d_ff": _integer
}

HARDWARE_KEYS = {
    "flops": float,
    "cost_per_year": float,
    "seconds_per_year": float
}


def load_model_config(path):
    values = parse_key_values(path, MODEL_KEYS)
    missing = set(MODEL_KEYS) - set(values) - {"d_ff"}
    if missing:
        raise ConfigError.missing_keys(path, missing)
    return ModelConfig(**values)


def load_hardware_profile(path):
    return HardwareProfile(**parse_key_values(path, HARDWARE_KEYS))


def default_hardware_profile():
    """Returns the profile named by the ``PYSCALING_HARDWARE`` variable, or the built-in default."""
    path = os.environ.get(HARDWARE_ENV)
    if path:
        return load_hardware_profile(path)
    return HardwareProfile()
