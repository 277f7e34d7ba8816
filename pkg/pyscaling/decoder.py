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

"""Autoregressive generation with per-layer key/value caching.

Only the newest token is projected to Q, K and V at each step; its K and V
rows are appended to the cache and its single query row attends over every
cached row. A cache filled from a shared prefix (a system prompt, say) can be
forked and continued by several conversations.
"""

from __future__ import annotations

import numpy as np

from pyscaling.exception import WindowFullError
from pyscaling.log import get_logger
from pyscaling.model import check_tokens, forward, sample_next
from pyscaling.tensor import FlopLedger, Matrix

_logger = get_logger("decoder")


class _LayerSlot:
    def __init__(self, cache, index):
        self._cache = cache
        self._index = index

    def get_length(self):
        return self._cache.get_length()

    def append(self, keys, values):
        return self._cache._write(self._index, keys, values)


class KVCache:
    """Post-projection K and V rows of every layer for the tokens seen so far.

    Each layer holds a ``t x d_emb`` key buffer and value buffer (heads side by
    side in column blocks of ``d_h``). Buffers grow by doubling up to the
    context window ``n``.
    """

    def __init__(self, cfg):
        self._config = cfg
        self._length = 0
        self._keys = [np.zeros((0, cfg.d_emb)) for _ in range(cfg.layers)]
        self._values = [np.zeros((0, cfg.d_emb)) for _ in range(cfg.layers)]

    def __repr__(self):
        return "<%s.%s> t=%d/%d" % (self.__class__.__module__, self.__class__.__name__, self._length,
                                    self._config.n)

    def get_config(self):
        return self._config

    def get_length(self):
        """Returns the number of cached tokens ``t``."""
        return self._length

    def get_capacity(self):
        return self._keys[0].shape[0] if self._keys else 0

    def scalar_count(self):
        """Returns the number of cached scalars, ``2 * L * t * d_emb``."""
        return 2 * self._config.layers * self._length * self._config.d_emb

    def layer(self, index):
        return _LayerSlot(self, index)

    def keys(self, index):
        """Returns the cached keys of one layer as a ``t x d_emb`` matrix."""
        return Matrix(self._keys[index][:self._length])

    def values(self, index):
        return Matrix(self._values[index][:self._length])

    def fork(self):
        """Returns an independent copy, so a cached prefix can seed several generations."""
        other = KVCache(self._config)
        other._length = self._length
        other._keys = [k.copy() for k in self._keys]
        other._values = [v.copy() for v in self._values]
        return other

    def _reserve(self, index, rows):
        capacity = self._keys[index].shape[0]
        if rows <= capacity:
            return
        grown = min(self._config.n, max(rows, 2 * capacity, 1))
        for buffers in (self._keys, self._values):
            buffer = np.zeros((grown, self._config.d_emb))
            buffer[:capacity] = buffers[index]
            buffers[index] = buffer

    def _write(self, index, keys, values):
        t = self._length
        m = keys[0].rows
        if t + m > self._config.n:
            raise WindowFullError.overflow(t + m, self._config.n)

        self._reserve(index, t + m)
        d_h = self._config.d_h
        for h in range(len(keys)):
            columns = slice(h * d_h, (h + 1) * d_h)
            self._keys[index][t:t + m, columns] = keys[h].data
            self._values[index][t:t + m, columns] = values[h].data

        if t == 0:
            # nothing cached before: attend over the fresh rows exactly as an uncached pass does
            return keys, values

        cached_keys, cached_values = [], []
        for h in range(len(keys)):
            columns = slice(h * d_h, (h + 1) * d_h)
            cached_keys.append(Matrix._wrap(self._keys[index][:t + m, columns].copy()))
            cached_values.append(Matrix._wrap(self._values[index][:t + m, columns].copy()))
        return cached_keys, cached_values

    def _commit(self, count):
        self._length += count


def extend(cache, tokens, params, ledger):
    """Appends ``tokens`` to the cached sequence in one masked pass.

    :param cache: cache to extend (mutated)
    :param tokens: token ids continuing the cached sequence
    :param params: parameter set
    :param ledger: ledger to charge
    :return: logits for the appended tokens (len x vocab)
    :rtype: pyscaling.tensor.Matrix
    """
    logits = forward(tokens, params, ledger, cache=cache)
    cache._commit(logits.rows)
    return logits


def prefill(tokens, params, ledger):
    """Runs the prompt once, filling a fresh cache.

    :return: the cache and the logits row of the last prompt token
    :rtype: tuple
    """
    cache = KVCache(params.get_config())
    logits = extend(cache, tokens, params, ledger)
    _logger.debug("prefilled %d tokens", cache.get_length())
    return cache, logits.row(logits.rows - 1)


def decode_step(cache, token, params, ledger):
    """Feeds one new token through the cached model.

    :return: the logits row for the new token and the (same, grown) cache
    :rtype: tuple
    :raise: pyscaling.exception.WindowFullError if the window is already full
    """
    if cache.get_length() + 1 > cache.get_config().n:
        raise WindowFullError.overflow(cache.get_length() + 1, cache.get_config().n)
    logits = extend(cache, [token], params, ledger)
    return logits, cache


def _check_budget(cfg, used, steps):
    if used + steps > cfg.n:
        raise WindowFullError.overflow(used + steps, cfg.n)


def generate(prompt, steps, temperature, seed, params, ledger=None, prefix=None):
    """Generates ``steps`` tokens after ``prompt`` using the KV cache.

    The prompt is prefilled once; each sampled token except the last is then
    fed back through :func:`decode_step`.

    :param prompt: prompt token ids
    :param steps: number of tokens to generate
    :param temperature: sampling temperature (0 for greedy)
    :param seed: sampling seed
    :param params: parameter set
    :param ledger: ledger to charge, or `None`
    :param prefix: cached prefix (e.g. a system prompt) that ``prompt`` continues; it is forked, not modified
    :return: prompt followed by the generated tokens
    :rtype: tuple
    """
    cfg = params.get_config()
    offset = prefix.get_length() if prefix is not None else 0
    prompt = check_tokens(prompt, cfg, offset)
    _check_budget(cfg, offset + len(prompt), steps)
    if steps == 0:
        return prompt

    ledger = ledger if ledger is not None else FlopLedger()
    rng = np.random.default_rng(seed)

    if prefix is not None:
        cache = prefix.fork()
        logits = extend(cache, prompt, params, ledger)
        row = logits.row(logits.rows - 1)
    else:
        cache, row = prefill(prompt, params, ledger)

    generated = []
    for step in range(steps):
        token = sample_next(row, temperature, rng)
        generated.append(token)
        if step + 1 < steps:
            row, cache = decode_step(cache, token, params, ledger)
    _logger.debug("generated %d tokens after a %d token context", steps, offset + len(prompt))
    return prompt + tuple(generated)


def generate_reference(prompt, steps, temperature, seed, params, ledger=None):
    """Uncached generation: a full forward pass over the whole sequence for every token."""
    cfg = params.get_config()
    prompt = check_tokens(prompt, cfg)
    _check_budget(cfg, len(prompt), steps)

    ledger = ledger if ledger is not None else FlopLedger()
    rng = np.random.default_rng(seed)
    sequence = list(prompt)
    for _ in range(steps):
        logits = forward(sequence, params, ledger)
        sequence.append(sample_next(logits.row(logits.rows - 1), temperature, rng))
    return tuple(sequence)
