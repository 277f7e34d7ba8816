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

"""Versioned binary checkpoints of trained parameters.

Layout (little-endian): magic, format version, the six configuration integers,
the seed (-1 when unknown), the character vocabulary as UTF-8, then every
parameter matrix as raw float64 in canonical parameter order.
"""

from __future__ import annotations

import struct

import numpy as np

from pyscaling.config import ModelConfig
from pyscaling.exception import CheckpointError, ConfigError, ShapeError
from pyscaling.log import get_logger
from pyscaling.model import ParameterSet, parameter_shapes
from pyscaling.tensor import Matrix
from pyscaling.training import CharVocabulary

MAGIC = b"PYSCALE\x00"
VERSION = 1

_header = struct.Struct("<H7qBI")
_logger = get_logger("checkpoint")


def dump(path, params, vocabulary=None):
    """Writes parameters (and the vocabulary they were trained with) to ``path``."""
    cfg = params.get_config()
    seed = params.get_seed()
    symbols = "".join(vocabulary.get_symbols()).encode("utf-8") if vocabulary is not None else b""
    has_unknown = vocabulary.has_unknown() if vocabulary is not None else False

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_header.pack(VERSION, cfg.n, cfg.vocab, cfg.d_emb, cfg.heads, cfg.layers, cfg.d_ff,
                             -1 if seed is None else seed, int(has_unknown), len(symbols)))
        f.write(symbols)
        for name, _ in parameter_shapes(cfg):
            f.write(np.ascontiguousarray(params[name].data, dtype="<f8").tobytes())
    _logger.info("saved %d parameters to %s", params.count(), path)


def _read(f, size, path):
    data = f.read(size)
    if len(data) != size:
        raise CheckpointError.truncated(path)
    return data


def load(path):
    """Reads a checkpoint written by :func:`dump`.

    :return: parameter set and vocabulary (`None` if none was saved)
    :rtype: tuple
    :raise: pyscaling.exception.CheckpointError
    """
    try:
        f = open(path, "rb")
    except OSError as ex:
        raise CheckpointError("Cannot read checkpoint '%s': %s." % (path, ex))

    with f:
        if _read(f, len(MAGIC), path) != MAGIC:
            raise CheckpointError.bad_magic(path)
        version, n, vocab, d_emb, heads, layers, d_ff, seed, has_unknown, size = _header.unpack(
            _read(f, _header.size, path))
        if version != VERSION:
            raise CheckpointError.unsupported_version(path, version)
        try:
            symbols = _read(f, size, path).decode("utf-8")
            cfg = ModelConfig(n=n, vocab=vocab, d_emb=d_emb, heads=heads, layers=layers, d_ff=d_ff)
            vocabulary = CharVocabulary(symbols, bool(has_unknown)) if symbols or has_unknown else None
        except (UnicodeDecodeError, ConfigError) as ex:
            raise CheckpointError.corrupt(path, ex)
        if vocabulary is not None and len(vocabulary) != cfg.vocab:
            raise CheckpointError.corrupt(path, "vocabulary of %d symbols for %d token ids" % (
                len(vocabulary), cfg.vocab))

        matrices = {}
        for name, (rows, cols) in parameter_shapes(cfg):
            try:
                data = _read(f, rows * cols * 8, path)
                matrices[name] = Matrix._wrap(np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(rows, cols))
            except (ShapeError, ValueError, OverflowError, MemoryError) as ex:
                raise CheckpointError.corrupt(path, ex)
        if f.read(1):
            raise CheckpointError("Checkpoint '%s' has trailing data." % path)

    return ParameterSet(cfg, matrices, None if seed < 0 else seed), vocabulary
