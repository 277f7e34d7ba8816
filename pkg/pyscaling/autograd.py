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

"""Reverse-mode differentiation over :class:`pyscaling.tensor.Matrix` operations.

Operations in :mod:`pyscaling.tensor` record a backward closure on the tape
when one is passed to them. Replaying the closures in reverse order
propagates gradients from the loss back to every matrix that took part in
the forward evaluation. Matrices are identified by object identity, which is
stable because the tape keeps every participating matrix alive.
"""

from __future__ import annotations

import numpy as np

from pyscaling.exception import NumericError, ShapeError


class Tape:
    def __init__(self):
        self._backward = []
        self._grads = {}
        self._refs = {}

    def __len__(self):
        return len(self._backward)

    def record(self, backward):
        """Records a closure ``backward(tape, ledger)`` to be replayed in reverse."""
        self._backward.append(backward)

    def grad(self, matrix):
        """Returns the accumulated gradient for ``matrix`` as an array (zeros if nothing flowed into it)."""
        grad = self._grads.get(id(matrix))
        if grad is None:
            return np.zeros(matrix.shape)
        return grad

    def accumulate(self, matrix, grad):
        if grad.shape != matrix.shape:
            raise ShapeError.mismatch("accumulate gradient into", matrix.shape, grad.shape)
        key = id(matrix)
        if key in self._grads:
            self._grads[key] = self._grads[key] + grad
        else:
            self._refs[key] = matrix
            self._grads[key] = np.array(grad, dtype=np.float64)

    def backward(self, loss, ledger):
        """Propagates d(loss)/d(loss) = 1 back through every recorded operation.

        :param loss: the 1 x 1 loss matrix produced last on this tape
        :param ledger: ledger charged with the backward mult-adds
        """
        if loss.shape != (1, 1):
            raise ShapeError.mismatch("differentiate", loss.shape, (1, 1))
        if not loss.is_finite():
            raise NumericError.non_finite("loss")

        self._grads.clear()
        self._refs.clear()
        self.accumulate(loss, np.ones((1, 1)))
        for backward in reversed(self._backward):
            backward(self, ledger)
