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

"""Dense matrices with an exact, categorized multiply-add ledger.

Every multiply-add the reference transformer performs goes through
:func:`matmul` (or :func:`layer_norm`, which is tallied under the layer-norm
convention of ``d`` mult-adds per normalized row). Elementwise work such as
softmax, residual additions and activations is not tallied.

Operations accept an optional ``tape`` (see :mod:`pyscaling.autograd`); when
given, they record how to propagate gradients back to their inputs.
"""

from __future__ import annotations

import math

from collections import namedtuple

import numpy as np

from pyscaling.exception import NumericError, ShapeError

LAYER_NORM_EPSILON = 1e-5

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715


class Matrix:
    """Immutable dense 2-D array of doubles, stored row-major."""

    __slots__ = ("_data", )

    def __init__(self, data):
        array = np.array(data, dtype=np.float64, order="C")
        if array.ndim == 1:
            array = array.reshape(1, -1)
        if array.ndim != 2:
            raise ShapeError("Matrix data must be two-dimensional, got %d dimensions." % array.ndim)
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ShapeError.empty(*array.shape)
        array.setflags(write=False)
        self._data = array

    @classmethod
    def _wrap(cls, array):
        # takes ownership of a freshly computed array, no copy
        matrix = cls.__new__(cls)
        array = np.ascontiguousarray(array, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise ShapeError("Matrix data must be a non-empty two-dimensional array, got shape %s." %
                             (array.shape, ))
        array.setflags(write=False)
        matrix._data = array
        return matrix

    @classmethod
    def zeros(cls, rows, cols):
        return cls._wrap(np.zeros((rows, cols)))

    @classmethod
    def ones(cls, rows, cols):
        return cls._wrap(np.ones((rows, cols)))

    @classmethod
    def identity(cls, size):
        return cls._wrap(np.eye(size))

    def __repr__(self):
        return "<%s.%s> %dx%d" % (self.__class__.__module__, self.__class__.__name__, self.rows, self.cols)

    def __len__(self):
        return self.rows

    @property
    def rows(self):
        return self._data.shape[0]

    @property
    def cols(self):
        return self._data.shape[1]

    @property
    def shape(self):
        return self._data.shape

    @property
    def data(self):
        """Read-only view of the underlying row-major array."""
        return self._data

    @property
    def T(self):
        return Matrix._wrap(self._data.T.copy())

    def size(self):
        return self._data.size

    def row(self, index):
        return Matrix._wrap(self._data[index:index + 1].copy())

    def to_list(self):
        return self._data.tolist()

    def is_finite(self):
        return bool(np.all(np.isfinite(self._data)))


class FlopLedger:
    """Exact multiply-add counters per category and direction."""

    QKV_PROJECTION = "qkv_projection"
    ATTENTION_SCORES = "attention_scores"
    ATTENTION_VALUES = "attention_values"
    OUTPUT_PROJECTION = "output_projection"
    FFN_EXPAND = "ffn_expand"
    FFN_CONTRACT = "ffn_contract"
    LOGIT_PROJECTION = "logit_projection"
    LAYER_NORM = "layer_norm"
    OTHER = "other"

    CATEGORIES = (
        QKV_PROJECTION,
        ATTENTION_SCORES,
        ATTENTION_VALUES,
        OUTPUT_PROJECTION,
        FFN_EXPAND,
        FFN_CONTRACT,
        LOGIT_PROJECTION,
        LAYER_NORM,
        OTHER
    )
    MATMUL_CATEGORIES = (
        QKV_PROJECTION,
        ATTENTION_SCORES,
        ATTENTION_VALUES,
        OUTPUT_PROJECTION,
        FFN_EXPAND,
        FFN_CONTRACT,
        LOGIT_PROJECTION,
        OTHER
    )

    FORWARD = "forward"
    BACKWARD = "backward"
    DIRECTIONS = (FORWARD, BACKWARD)

    def __init__(self):
        self._counts = dict.fromkeys(((c, d) for c in self.CATEGORIES for d in self.DIRECTIONS), 0)

    def __repr__(self):
        return "<%s.%s> forward=%d backward=%d" % (
            self.__class__.__module__, self.__class__.__name__,
            self.total(self.FORWARD), self.total(self.BACKWARD))

    def _check(self, category, direction):
        if category not in self.CATEGORIES:
            raise ValueError("Unknown ledger category '%s'." % category)
        if direction is not None and direction not in self.DIRECTIONS:
            raise ValueError("Unknown ledger direction '%s'." % direction)

    def add(self, category, direction, count):
        self._check(category, direction)
        count = int(count)
        if count < 0:
            raise ValueError("Ledger counts must be non-negative, got %d." % count)
        self._counts[category, direction] += count

    def get(self, category, direction=None):
        self._check(category, direction)
        if direction is None:
            return sum(self._counts[category, d] for d in self.DIRECTIONS)
        return self._counts[category, direction]

    def total(self, direction=None):
        return sum(self.get(c, direction) for c in self.CATEGORIES)

    def matmul_total(self, direction=None):
        return sum(self.get(c, direction) for c in self.MATMUL_CATEGORIES)

    def reset(self):
        for key in self._counts:
            self._counts[key] = 0

    def merge(self, other):
        """Adds every count of ``other`` into this ledger."""
        for key, count in other._counts.items():
            self._counts[key] += count
        return self

    def snapshot(self):
        ledger = FlopLedger()
        ledger._counts = dict(self._counts)
        return ledger

    def since(self, snapshot):
        """Returns a new ledger holding the counts accumulated after ``snapshot`` was taken."""
        ledger = FlopLedger()
        ledger._counts = {key: count - snapshot._counts[key] for key, count in self._counts.items()}
        return ledger

    def as_dict(self, direction=None):
        return {c: self.get(c, direction) for c in self.CATEGORIES}


LedgerRow = namedtuple("LedgerRow", ("category", "forward", "backward", "total"))
LedgerReport = namedtuple("LedgerReport", ("rows", "forward", "backward", "total"))


def ledger_report(ledger):
    """Tabulates a ledger in the fixed category order.

    :param ledger: ledger to report
    :return: per-category rows and direction totals
    :rtype: LedgerReport
    """
    rows = tuple(
        LedgerRow(c, ledger.get(c, FlopLedger.FORWARD), ledger.get(c, FlopLedger.BACKWARD), ledger.get(c))
        for c in FlopLedger.CATEGORIES)
    return LedgerReport(rows, ledger.total(FlopLedger.FORWARD), ledger.total(FlopLedger.BACKWARD), ledger.total())


def _tally(ledger, category, direction, count):
    if ledger is not None:
        ledger.add(category, direction, count)


def matmul(a, b, ledger, category=FlopLedger.OTHER, direction=FlopLedger.FORWARD, tape=None):
    """Multiplies ``a`` (m x k) by ``b`` (k x p), charging m*k*p mult-adds to the ledger.

    :param a: left operand
    :param b: right operand
    :param ledger: ledger to charge, or `None`
    :param category: ledger category
    :param direction: ledger direction
    :param tape: gradient tape, or `None`
    :return: product matrix (m x p)
    :rtype: Matrix
    """
    if a.cols != b.rows:
        raise ShapeError.mismatch("multiply", a.shape, b.shape)

    out = Matrix._wrap(a.data @ b.data)
    _tally(ledger, category, direction, a.rows * a.cols * b.cols)

    if tape is not None:
        def backward(tape, ledger):
            grad = Matrix._wrap(tape.grad(out))
            tape.accumulate(a, matmul(grad, b.T, ledger, category, FlopLedger.BACKWARD).data)
            tape.accumulate(b, matmul(a.T, grad, ledger, category, FlopLedger.BACKWARD).data)
        tape.record(backward)
    return out


def transpose(a, tape=None):
    out = a.T
    if tape is not None:
        def backward(tape, ledger):
            tape.accumulate(a, tape.grad(out).T)
        tape.record(backward)
    return out


def add(a, b, tape=None):
    """Elementwise sum; ``b`` may also be a single row broadcast over the rows of ``a``."""
    if a.shape != b.shape and not (b.rows == 1 and b.cols == a.cols):
        raise ShapeError.mismatch("add", a.shape, b.shape)

    out = Matrix._wrap(a.data + b.data)
    if tape is not None:
        def backward(tape, ledger):
            grad = tape.grad(out)
            tape.accumulate(a, grad)
            tape.accumulate(b, grad if b.shape == a.shape else grad.sum(axis=0, keepdims=True))
        tape.record(backward)
    return out


def scale(a, factor, tape=None):
    out = Matrix._wrap(a.data * factor)
    if tape is not None:
        def backward(tape, ledger):
            tape.accumulate(a, tape.grad(out) * factor)
        tape.record(backward)
    return out


def causal_mask(scores, offset=0, tape=None):
    """Adds -inf to every entry (i, j) with j > i + offset.

    ``offset`` is the number of keys preceding the first query row, so a
    query at absolute position ``offset + i`` sees keys ``0 .. offset + i``.
    """
    rows, cols = scores.shape
    blocked = np.arange(cols)[None, :] > (np.arange(rows)[:, None] + offset)
    out = Matrix._wrap(np.where(blocked, -np.inf, scores.data))
    if tape is not None:
        def backward(tape, ledger):
            tape.accumulate(scores, np.where(blocked, 0.0, tape.grad(out)))
        tape.record(backward)
    return out


def softmax_rows(m, tape=None):
    """Row-wise softmax with max subtraction; -inf entries map to exactly 0.

    :raise: pyscaling.exception.NumericError if a row is entirely -inf or holds NaN or +inf
    """
    data = m.data
    if np.isnan(data).any() or np.isposinf(data).any():
        raise NumericError.non_finite("softmax input")
    peak = data.max(axis=1, keepdims=True)
    masked = np.flatnonzero(np.isneginf(peak[:, 0]))
    if masked.size:
        raise NumericError.fully_masked_row(int(masked[0]))

    e = np.exp(data - peak)
    out = Matrix._wrap(e / e.sum(axis=1, keepdims=True))
    if tape is not None:
        def backward(tape, ledger):
            p = out.data
            grad = tape.grad(out)
            tape.accumulate(m, p * (grad - (grad * p).sum(axis=1, keepdims=True)))
        tape.record(backward)
    return out


def layer_norm(x, gain, bias, ledger, direction=FlopLedger.FORWARD, tape=None, epsilon=LAYER_NORM_EPSILON):
    """Normalizes every row of ``x`` to zero mean and unit variance, then applies gain and bias.

    A row vector is simply a 1 x d matrix. The ledger is charged d mult-adds per row.

    :param x: input rows (r x d)
    :param gain: gain row (1 x d)
    :param bias: bias row (1 x d)
    :param ledger: ledger to charge, or `None`
    :return: normalized rows (r x d)
    :rtype: Matrix
    """
    if gain.shape != (1, x.cols) or bias.shape != (1, x.cols):
        raise ShapeError.mismatch("normalize", x.shape, gain.shape)

    data = x.data
    centered = data - data.mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=1, keepdims=True) + epsilon)
    normalized = centered * inv_std
    out = Matrix._wrap(normalized * gain.data + bias.data)
    _tally(ledger, FlopLedger.LAYER_NORM, direction, x.rows * x.cols)

    if tape is not None:
        def backward(tape, ledger):
            grad = tape.grad(out)
            tape.accumulate(gain, (grad * normalized).sum(axis=0, keepdims=True))
            tape.accumulate(bias, grad.sum(axis=0, keepdims=True))
            g = grad * gain.data
            dx = inv_std * (g - g.mean(axis=1, keepdims=True) -
                            normalized * (g * normalized).mean(axis=1, keepdims=True))
            tape.accumulate(x, dx)
            _tally(ledger, FlopLedger.LAYER_NORM, FlopLedger.BACKWARD, x.rows * x.cols)
        tape.record(backward)
    return out


def gelu(x, tape=None):
    """GELU activation, tanh approximation."""
    data = x.data
    t = np.tanh(_GELU_C * (data + _GELU_K * data ** 3))
    out = Matrix._wrap(0.5 * data * (1.0 + t))
    if tape is not None:
        def backward(tape, ledger):
            d_inner = _GELU_C * (1.0 + 3.0 * _GELU_K * data ** 2)
            derivative = 0.5 * (1.0 + t) + 0.5 * data * (1.0 - t * t) * d_inner
            tape.accumulate(x, tape.grad(out) * derivative)
        tape.record(backward)
    return out


def concat_cols(parts, tape=None):
    rows = parts[0].rows
    for part in parts[1:]:
        if part.rows != rows:
            raise ShapeError.mismatch("concatenate", parts[0].shape, part.shape)

    out = Matrix._wrap(np.concatenate([p.data for p in parts], axis=1))
    if tape is not None:
        def backward(tape, ledger):
            grad = tape.grad(out)
            start = 0
            for part in parts:
                tape.accumulate(part, grad[:, start:start + part.cols])
                start += part.cols
        tape.record(backward)
    return out


def lookup_rows(table, indices, tape=None):
    """Gathers rows of ``table``; costs no mult-adds."""
    indices = np.asarray(indices, dtype=np.intp)
    out = Matrix._wrap(table.data[indices])
    if tape is not None:
        def backward(tape, ledger):
            grad = np.zeros(table.shape)
            np.add.at(grad, indices, tape.grad(out))
            tape.accumulate(table, grad)
        tape.record(backward)
    return out
