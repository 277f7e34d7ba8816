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

"""Instrumented reference decoder-only transformer.

Token embedding (lookup plus fixed sinusoidal positions), ``layers`` pre-norm
blocks of multi-head causal self-attention and a feed-forward network, each
wrapped in a skip connection, and an untied projection to vocabulary logits.
All multiply-adds are charged to a :class:`pyscaling.tensor.FlopLedger`.
"""

from __future__ import annotations

import math

from collections import namedtuple

import numpy as np

from pyscaling.cache import cached
from pyscaling.exception import ConfigError, NumericError, SequenceError, ShapeError, VocabularyError, \
    WindowFullError
from pyscaling.tensor import FlopLedger, Matrix, add, causal_mask, concat_cols, gelu, layer_norm, lookup_rows, \
    matmul, scale, softmax_rows, transpose

EMBEDDING = "E"
UNEMBEDDING = "U"

ROLE_E = "E"
ROLE_W_Q = "W_Q"
ROLE_W_K = "W_K"
ROLE_W_V = "W_V"
ROLE_O = "O"
ROLE_W1 = "W1"
ROLE_W2 = "W2"
ROLE_NORM = "norm"
ROLE_U = "U"
ROLES = (ROLE_E, ROLE_W_Q, ROLE_W_K, ROLE_W_V, ROLE_O, ROLE_W1, ROLE_W2, ROLE_NORM, ROLE_U)

LayerParams = namedtuple("LayerParams", (
    "w_q", "w_k", "w_v", "o", "w1", "w2", "norm1_gain", "norm1_bias", "norm2_gain", "norm2_bias"))


def parameter_shapes(cfg):
    """Yields ``(name, (rows, cols))`` for every parameter matrix, in canonical order."""
    d, d_h = cfg.d_emb, cfg.d_h
    yield EMBEDDING, (cfg.vocab, d)
    for i in range(cfg.layers):
        prefix = "layers.%d." % i
        for projection in ("w_q", "w_k", "w_v"):
            for h in range(cfg.heads):
                yield "%s%s.%d" % (prefix, projection, h), (d, d_h)
        yield prefix + "o", (d, d)
        yield prefix + "w1", (d, cfg.d_ff)
        yield prefix + "w2", (cfg.d_ff, d)
        for norm in ("norm1", "norm2"):
            yield prefix + norm + ".gain", (1, d)
            yield prefix + norm + ".bias", (1, d)
    yield UNEMBEDDING, (d, cfg.vocab)


def parameter_role(name):
    """Maps a parameter name such as ``layers.1.w_k.0`` to its role (``W_K``)."""
    if name in (EMBEDDING, UNEMBEDDING):
        return name
    kind = name.split(".")[2]
    if kind.startswith("norm"):
        return ROLE_NORM
    return {"w_q": ROLE_W_Q, "w_k": ROLE_W_K, "w_v": ROLE_W_V, "o": ROLE_O, "w1": ROLE_W1, "w2": ROLE_W2}[kind]


class ParameterSet:
    """Named, immutable collection of every learned matrix of the reference model.

    Names follow :func:`parameter_shapes`: ``E``, ``layers.<i>.w_q.<h>``,
    ``layers.<i>.w_k.<h>``, ``layers.<i>.w_v.<h>``, ``layers.<i>.o``,
    ``layers.<i>.w1``, ``layers.<i>.w2``, ``layers.<i>.norm<1|2>.<gain|bias>``, ``U``.
    """

    def __init__(self, cfg, matrices, seed=None):
        self._config = cfg
        self._seed = seed
        self._matrices = {}
        for name, shape in parameter_shapes(cfg):
            if name not in matrices:
                raise ShapeError("Parameter '%s' is missing." % name)
            matrix = matrices[name]
            if not isinstance(matrix, Matrix):
                matrix = Matrix(matrix)
            if matrix.shape != shape:
                raise ShapeError.not_congruent(name, shape, matrix.shape)
            self._matrices[name] = matrix
        self._layers = [self._build_layer(i) for i in range(cfg.layers)]

    def _build_layer(self, i):
        prefix = "layers.%d." % i
        heads = range(self._config.heads)
        return LayerParams(
            w_q=tuple(self._matrices["%sw_q.%d" % (prefix, h)] for h in heads),
            w_k=tuple(self._matrices["%sw_k.%d" % (prefix, h)] for h in heads),
            w_v=tuple(self._matrices["%sw_v.%d" % (prefix, h)] for h in heads),
            o=self._matrices[prefix + "o"],
            w1=self._matrices[prefix + "w1"],
            w2=self._matrices[prefix + "w2"],
            norm1_gain=self._matrices[prefix + "norm1.gain"],
            norm1_bias=self._matrices[prefix + "norm1.bias"],
            norm2_gain=self._matrices[prefix + "norm2.gain"],
            norm2_bias=self._matrices[prefix + "norm2.bias"])

    def __getitem__(self, name):
        return self._matrices[name]

    def __iter__(self):
        return iter(self._matrices)

    def __len__(self):
        return len(self._matrices)

    def get_config(self):
        return self._config

    def get_seed(self):
        return self._seed

    def names(self):
        return tuple(self._matrices)

    def named(self):
        return tuple(self._matrices.items())

    @property
    def embedding(self):
        return self._matrices[EMBEDDING]

    @property
    def unembedding(self):
        return self._matrices[UNEMBEDDING]

    def layer(self, i):
        return self._layers[i]

    def count(self):
        """Returns the total number of learned scalars."""
        return sum(m.size() for m in self._matrices.values())

    def replace(self, name, matrix):
        """Returns a copy with one matrix swapped out."""
        matrices = dict(self._matrices)
        if name not in matrices:
            raise KeyError(name)
        matrices[name] = matrix
        return ParameterSet(self._config, matrices, self._seed)

    def equals(self, other):
        """Checks bit-identity with another parameter set."""
        return self.names() == other.names() and all(
            np.array_equal(self[name].data, other[name].data) for name in self)


def init_params(cfg, seed):
    """Draws a deterministic parameter set.

    Weights are uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` (the embedding
    table uses ``fan_in = d_emb``); layer-norm gains are 1 and biases 0.

    :param cfg: model configuration
    :param seed: integer seed
    :return: parameter set
    :rtype: ParameterSet
    """
    if cfg.vocab < 1:
        raise ConfigError.invalid_value("vocab", cfg.vocab, "the reference network needs at least 1")

    rng = np.random.default_rng(seed)
    matrices = {}
    for name, (rows, cols) in parameter_shapes(cfg):
        if name.endswith(".gain"):
            matrices[name] = Matrix.ones(rows, cols)
        elif name.endswith(".bias"):
            matrices[name] = Matrix.zeros(rows, cols)
        else:
            fan_in = cfg.d_emb if name == EMBEDDING else rows
            bound = 1.0 / math.sqrt(fan_in)
            matrices[name] = Matrix._wrap(rng.uniform(-bound, bound, size=(rows, cols)))
    return ParameterSet(cfg, matrices, seed)


@cached
def _positional_table(offset, length, d_emb):
    positions = np.arange(offset, offset + length, dtype=np.float64)[:, None]
    columns = np.arange(d_emb)
    rates = np.power(10000.0, -(2 * (columns // 2)) / d_emb)
    angles = positions * rates[None, :]
    table = np.where(columns % 2 == 0, np.sin(angles), np.cos(angles))
    return Matrix._wrap(table)


def positional_encoding(length, d_emb, offset=0):
    """Fixed sinusoidal encoding of positions ``offset .. offset + length - 1``.

    :rtype: pyscaling.tensor.Matrix
    """
    return _positional_table(int(offset), int(length), int(d_emb))


def check_tokens(tokens, cfg, offset=0):
    """Validates a token sequence against the vocabulary and the context window.

    :param tokens: token ids
    :param cfg: model configuration
    :param offset: number of tokens already occupying the window
    :return: the tokens as a tuple of ints
    :rtype: tuple
    """
    tokens = tuple(int(t) for t in tokens)
    if not tokens:
        raise SequenceError.empty()
    if offset + len(tokens) > cfg.n:
        raise WindowFullError.overflow(offset + len(tokens), cfg.n)
    for token in tokens:
        if not 0 <= token < cfg.vocab:
            raise VocabularyError.out_of_range(token, cfg.vocab)
    return tokens


def embed(tokens, params, ledger, offset=0, tape=None):
    """Looks up token embeddings and adds positional encodings.

    A lookup costs no mult-adds, so the ledger is left unchanged.

    :param tokens: token ids
    :param params: parameter set
    :param ledger: ledger (unused by lookups, accepted for symmetry)
    :param offset: absolute position of the first token
    :param tape: gradient tape, or `None`
    :return: embedded rows (len x d_emb)
    :rtype: pyscaling.tensor.Matrix
    """
    cfg = params.get_config()
    tokens = check_tokens(tokens, cfg, offset)
    rows = lookup_rows(params.embedding, tokens, tape)
    return add(rows, positional_encoding(len(tokens), cfg.d_emb, offset), tape)


def _attend(x, layer, ledger, causal, tape, kv, weights):
    heads = len(layer.w_q)
    d_h = layer.w_q[0].cols
    offset = kv.get_length() if kv is not None else 0

    queries, keys, values = [], [], []
    for h in range(heads):
        queries.append(matmul(x, layer.w_q[h], ledger, FlopLedger.QKV_PROJECTION, tape=tape))
        keys.append(matmul(x, layer.w_k[h], ledger, FlopLedger.QKV_PROJECTION, tape=tape))
        values.append(matmul(x, layer.w_v[h], ledger, FlopLedger.QKV_PROJECTION, tape=tape))
    if kv is not None:
        keys, values = kv.append(keys, values)

    outputs = []
    factor = 1.0 / math.sqrt(d_h)
    for h in range(heads):
        scores = matmul(queries[h], transpose(keys[h], tape), ledger, FlopLedger.ATTENTION_SCORES, tape=tape)
        scores = scale(scores, factor, tape)
        if causal:
            scores = causal_mask(scores, offset, tape)
        probs = softmax_rows(scores, tape)
        if weights is not None:
            weights.append(probs)
        outputs.append(matmul(probs, values[h], ledger, FlopLedger.ATTENTION_VALUES, tape=tape))

    return matmul(concat_cols(outputs, tape), layer.o, ledger, FlopLedger.OUTPUT_PROJECTION, tape=tape)


def attention(x, layer, ledger, causal=True, tape=None, kv=None):
    """Multi-head scaled dot-product self-attention.

    Per head, ``Q, K, V = x W_Q^h, x W_K^h, x W_V^h``; scores ``Q K^T / sqrt(d_h)``
    with an additive causal mask; ``softmax(scores) V``. Head outputs are
    concatenated and projected by ``O``.

    :param x: input rows (m x d_emb)
    :param layer: layer parameters
    :param ledger: ledger to charge
    :param causal: apply the causal mask
    :param tape: gradient tape, or `None`
    :param kv: per-layer cache slot; new K/V rows are appended and attention runs over all cached rows
    :return: output rows (m x d_emb)
    :rtype: pyscaling.tensor.Matrix
    """
    return _attend(x, layer, ledger, causal, tape, kv, None)


def attention_weights(x, layer, ledger, causal=True):
    """Returns the per-head attention probability matrices for input ``x``."""
    weights = []
    _attend(x, layer, ledger, causal, None, None, weights)
    return weights


def feed_forward(x, layer, ledger, tape=None):
    """Row-wise expansion to d_ff, GELU, and contraction back to d_emb."""
    hidden = matmul(x, layer.w1, ledger, FlopLedger.FFN_EXPAND, tape=tape)
    return matmul(gelu(hidden, tape), layer.w2, ledger, FlopLedger.FFN_CONTRACT, tape=tape)


def transformer_layer(x, layer, ledger, tape=None, kv=None, causal=True):
    """Pre-norm block: ``x + attention(norm1(x))`` then ``+ feed_forward(norm2(.))``."""
    normed = layer_norm(x, layer.norm1_gain, layer.norm1_bias, ledger, tape=tape)
    x = add(x, attention(normed, layer, ledger, causal, tape, kv), tape)
    normed = layer_norm(x, layer.norm2_gain, layer.norm2_bias, ledger, tape=tape)
    return add(x, feed_forward(normed, layer, ledger, tape), tape)


def forward(tokens, params, ledger, tape=None, cache=None):
    """Full forward evaluation returning logits for every position.

    :param tokens: token ids, 1 <= len <= n
    :param params: parameter set
    :param ledger: ledger to charge
    :param tape: gradient tape, or `None`
    :param cache: KV cache to extend; the tokens then continue the cached sequence
    :return: logits (len x vocab)
    :rtype: pyscaling.tensor.Matrix
    """
    offset = cache.get_length() if cache is not None else 0
    x = embed(tokens, params, ledger, offset, tape)
    for i in range(params.get_config().layers):
        kv = cache.layer(i) if cache is not None else None
        x = transformer_layer(x, params.layer(i), ledger, tape, kv)
    return matmul(x, params.unembedding, ledger, FlopLedger.LOGIT_PROJECTION, tape=tape)


def greedy_next(logits):
    """Returns the argmax token of the last logits row."""
    return int(np.argmax(logits.data[-1]))


def sample_next(logits, temperature, seed):
    """Samples a token from ``softmax(logits / temperature)``.

    A temperature of 0 selects the argmax.

    :param logits: logits row (1 x V), or a matrix whose last row is used
    :param temperature: non-negative sampling temperature
    :param seed: integer seed or a ``numpy.random.Generator``
    :return: token id
    :rtype: int
    """
    row = np.asarray(logits.data[-1] if isinstance(logits, Matrix) else logits, dtype=np.float64)
    if not np.all(np.isfinite(row)):
        raise NumericError.non_finite("logits")
    if temperature < 0:
        raise ConfigError.invalid_value("temperature", temperature, "must not be negative")
    if temperature == 0:
        return int(np.argmax(row))

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    scaled = row / temperature
    e = np.exp(scaled - scaled.max())
    return int(rng.choice(row.size, p=e / e.sum()))
