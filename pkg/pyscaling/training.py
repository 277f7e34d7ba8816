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

"""Reverse-mode training of the reference model on a character corpus.

Every forward evaluation over ``m`` tokens trains ``m - 1`` next-token
predictions at once: output row ``k`` is scored against input token ``k + 1``.
Backpropagation replays the recorded tape, which performs two matrix
products for every forward product, so a forward-backward pass costs three
forward passes in multiply-adds.
"""

from __future__ import annotations

import math
import warnings

from collections import Counter, namedtuple
from pathlib import Path

import numpy as np

from pyscaling.autograd import Tape
from pyscaling.config import ModelConfig
from pyscaling.exception import ConfigError, CorpusError, NumericError, SequenceError, ShapeError, \
    VocabularyCapWarning, VocabularyError
from pyscaling.log import get_logger
from pyscaling.model import ROLES, ParameterSet, check_tokens, forward, init_params, parameter_role
from pyscaling.tensor import FlopLedger, Matrix

DEFAULT_CORPUS = Path(__file__).with_name("data") / "corpus.txt"
UNKNOWN_SYMBOL = "�"

# vocab is an upper bound, the corpus decides the actual size
DEMO_CONFIG = ModelConfig(n=32, vocab=64, d_emb=32, heads=4, layers=2)

# relative errors are taken against max(|analytic|, |numeric|, GRAD_CHECK_FLOOR)
GRAD_CHECK_FLOOR = 1e-3

_logger = get_logger("training")

LossGraph = namedtuple("LossGraph", ("params", "tape", "logits", "loss"))
TrainingResult = namedtuple("TrainingResult", ("losses", "params", "vocabulary", "ledger"))
GradCheckReport = namedtuple("GradCheckReport", ("max_relative_error", "role_errors", "checked", "epsilon",
                                                 "max_unfloored_error"))


class CharVocabulary:
    """Character-level vocabulary built from corpus text.

    When the text has more distinct characters than allowed, the most frequent
    ones are kept and all others share one unknown slot (the last id).
    """

    def __init__(self, symbols, has_unknown=False):
        self._symbols = tuple(symbols)
        self._has_unknown = bool(has_unknown)
        self._ids = {s: i for i, s in enumerate(self._symbols)}
        if len(self._ids) != len(self._symbols):
            raise ConfigError.invalid_value("symbols", "".join(self._symbols), "must be distinct")

    @classmethod
    def from_text(cls, text, limit):
        if limit < 1:
            raise ConfigError.invalid_value("vocab", limit, "must be at least 1")
        counts = Counter(text)
        if len(counts) <= limit:
            return cls(sorted(counts))

        warnings.warn("Corpus has %d distinct characters, keeping the %d most frequent." %
                      (len(counts), limit - 1), VocabularyCapWarning)
        ranked = sorted(counts, key=lambda c: (-counts[c], c))[:limit - 1]
        return cls(sorted(ranked), has_unknown=True)

    def __len__(self):
        return len(self._symbols) + (1 if self._has_unknown else 0)

    def __eq__(self, other):
        return isinstance(other, CharVocabulary) and (self._symbols, self._has_unknown) == (
            other._symbols, other._has_unknown)

    def get_symbols(self):
        return self._symbols

    def has_unknown(self):
        return self._has_unknown

    def encode(self, text):
        unknown = len(self._symbols) if self._has_unknown else None
        ids = []
        for char in text:
            token = self._ids.get(char, unknown)
            if token is None:
                raise VocabularyError.unknown_character(char)
            ids.append(token)
        return np.array(ids, dtype=np.int64)

    def decode(self, ids):
        return "".join(self._symbols[i] if i < len(self._symbols) else UNKNOWN_SYMBOL for i in ids)


def load_corpus(path=None):
    """Reads a UTF-8 text corpus (the bundled demo corpus when ``path`` is `None`)."""
    path = Path(path) if path is not None else DEFAULT_CORPUS
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as ex:
        raise CorpusError.unreadable(path, ex)
    if not text:
        raise CorpusError.empty(path)
    return text


class GradientSet:
    """One gradient matrix per parameter matrix, with identical names and shapes."""

    def __init__(self, params, arrays):
        self._matrices = {}
        for name, matrix in params.named():
            grad = arrays[name]
            if grad.shape != matrix.shape:
                raise ShapeError.not_congruent(name, matrix.shape, grad.shape)
            self._matrices[name] = grad if isinstance(grad, Matrix) else Matrix(grad)

    def __getitem__(self, name):
        return self._matrices[name]

    def __iter__(self):
        return iter(self._matrices)

    def named(self):
        return tuple(self._matrices.items())

    def is_finite(self):
        return all(m.is_finite() for m in self._matrices.values())


def cross_entropy(logits, tokens, tape=None):
    """Mean next-token cross-entropy over positions ``0 .. m-2`` as a 1 x 1 matrix."""
    m = logits.rows
    if m < 2:
        raise SequenceError.too_short(m, 2)
    tokens = np.asarray(tokens, dtype=np.intp)
    if tokens.shape != (m, ):
        raise ShapeError.mismatch("score", logits.shape, (tokens.size, 1))

    z = logits.data[:-1]
    targets = tokens[1:]
    rows = np.arange(m - 1)
    peak = z.max(axis=1, keepdims=True)
    shifted = np.exp(z - peak)
    total = shifted.sum(axis=1, keepdims=True)
    log_sum = peak[:, 0] + np.log(total[:, 0])
    out = Matrix._wrap(np.array([[np.mean(log_sum - z[rows, targets])]]))
    if not out.is_finite():
        raise NumericError.non_finite("loss")

    if tape is not None:
        def backward(tape, ledger):
            probs = shifted / total
            probs[rows, targets] -= 1.0
            grad = np.zeros(logits.shape)
            grad[:-1] = probs * (tape.grad(out)[0, 0] / (m - 1))
            tape.accumulate(logits, grad)
        tape.record(backward)
    return out


def loss_all_positions(logits, tokens):
    """Mean cross-entropy of predicting token ``k + 1`` from output row ``k``.

    :param logits: logits (m x V), m >= 2
    :param tokens: the m input tokens
    :return: loss in nats
    :rtype: float
    :raise: pyscaling.exception.SequenceError if m < 2
    """
    return float(cross_entropy(logits, tokens).data[0, 0])


def forward_loss(tokens, params, ledger):
    """Forward evaluation with a recording tape, ready for :func:`backward`.

    :rtype: LossGraph
    """
    tape = Tape()
    logits = forward(tokens, params, ledger, tape=tape)
    return LossGraph(params, tape, logits, cross_entropy(logits, tokens, tape))


def backward(graph, ledger):
    """Backpropagates a recorded loss to every parameter.

    :param graph: result of :func:`forward_loss`
    :param ledger: ledger charged with the backward mult-adds
    :rtype: GradientSet
    :raise: pyscaling.exception.NumericError on a non-finite loss or gradient
    """
    graph.tape.backward(graph.loss, ledger)
    grads = GradientSet(graph.params, {name: graph.tape.grad(m) for name, m in graph.params.named()})
    if not grads.is_finite():
        raise NumericError.non_finite("gradients")
    return grads


def sgd_step(params, grads, learning_rate):
    """Returns ``p - learning_rate * g`` for every parameter matrix.

    :rtype: pyscaling.model.ParameterSet
    """
    if learning_rate < 0:
        raise ConfigError.invalid_value("learning_rate", learning_rate, "must not be negative")
    updated = {}
    for name, matrix in params.named():
        grad = grads[name]
        if grad.shape != matrix.shape:
            raise ShapeError.not_congruent(name, matrix.shape, grad.shape)
        updated[name] = Matrix._wrap(matrix.data - learning_rate * grad.data)
    return ParameterSet(params.get_config(), updated, params.get_seed())


def _windows(ids, length, starts):
    positions = (np.asarray(starts)[:, None] + np.arange(length)[None, :]) % ids.size
    return ids[positions]


def train_demo(cfg, tcfg, ledger=None):
    """Trains a fresh model with plain SGD on random contiguous corpus windows.

    The vocabulary is built from the corpus (at most ``cfg.vocab`` symbols) and
    the model's ``vocab`` is set to its size. Each step averages loss and
    gradients over ``tcfg.batch_size`` windows of ``cfg.n`` tokens, evaluated in
    a fixed order.

    :param cfg: model configuration
    :param tcfg: training configuration
    :param ledger: ledger to charge, or `None`
    :return: per-step losses (before each update), final parameters, vocabulary, ledger
    :rtype: TrainingResult
    """
    text = load_corpus(tcfg.corpus)
    vocabulary = CharVocabulary.from_text(text, cfg.vocab)
    ids = vocabulary.encode(text)
    if ids.size < 2:
        raise CorpusError.empty(tcfg.corpus or DEFAULT_CORPUS)
    if cfg.n < 2:
        raise SequenceError.too_short(cfg.n, 2)

    cfg = cfg.replace(vocab=len(vocabulary))
    ledger = ledger if ledger is not None else FlopLedger()
    params = init_params(cfg, tcfg.seed)
    rng = np.random.default_rng([tcfg.seed, 1])

    _logger.info("training %d parameters over %d corpus tokens, vocabulary %d (ln V = %.4f)",
                 params.count(), ids.size, len(vocabulary), math.log(len(vocabulary)))

    losses = []
    for step in range(tcfg.steps):
        batch = _windows(ids, cfg.n, rng.integers(0, ids.size, size=tcfg.batch_size))
        total_loss = 0.0
        total_grads = {name: np.zeros(m.shape) for name, m in params.named()}
        for window in batch:
            graph = forward_loss(window, params, ledger)
            grads = backward(graph, ledger)
            total_loss += float(graph.loss.data[0, 0])
            for name in total_grads:
                total_grads[name] += grads[name].data

        mean_grads = GradientSet(params, {k: v / len(batch) for k, v in total_grads.items()})
        losses.append(total_loss / len(batch))
        params = sgd_step(params, mean_grads, tcfg.learning_rate)
        _logger.debug("step %d loss %.6f", step, losses[-1])

    _logger.info("loss %.4f -> %.4f after %d steps", losses[0], losses[-1], len(losses))
    return TrainingResult(losses, params, vocabulary, ledger)


def relative_error(analytic, numeric, floor=GRAD_CHECK_FLOOR):
    difference = abs(analytic - numeric)
    if difference == 0.0:
        return 0.0
    return difference / max(abs(analytic), abs(numeric), floor)


def finite_difference(loss, params, name, row, col, epsilon):
    """Central difference ``(L(p + eps) - L(p - eps)) / 2 eps`` for one parameter entry.

    :param loss: callable mapping a parameter set to a float
    """
    base = params[name].data
    values = []
    for sign in (1.0, -1.0):
        perturbed = base.copy()
        perturbed[row, col] += sign * epsilon
        values.append(loss(params.replace(name, Matrix._wrap(perturbed))))
    return (values[0] - values[1]) / (2.0 * epsilon)


def _sample_entries(params, samples, rng):
    by_role = {role: [] for role in ROLES}
    for name, matrix in params.named():
        by_role[parameter_role(name)].append(name)

    present = [role for role in ROLES if by_role[role]]
    per_role = int(math.ceil(samples / float(len(present))))
    entries = []
    for role in present:
        for _ in range(per_role):
            name = by_role[role][rng.integers(len(by_role[role]))]
            rows, cols = params[name].shape
            entries.append((role, name, int(rng.integers(rows)), int(rng.integers(cols))))
    return entries


def grad_check(cfg, seed, epsilon=1e-5, samples=200, tokens=None):
    """Compares analytic gradients with central differences on sampled entries.

    Entries are drawn evenly across every parameter role (embedding, the
    three projections, output projection, both feed-forward matrices, norms
    and unembedding), deterministically from ``seed``.

    :param cfg: small model configuration (n >= 2)
    :param seed: seed for parameters, tokens and sampling
    :param epsilon: finite-difference step
    :param samples: minimum number of entries to check
    :param tokens: token sequence (random tokens of length n when `None`)
    :return: worst relative error overall and per role
    :rtype: GradCheckReport
    """
    rng = np.random.default_rng([seed, 2])
    params = init_params(cfg, seed)
    if tokens is None:
        tokens = rng.integers(0, cfg.vocab, size=cfg.n)
    tokens = check_tokens(tokens, cfg)

    grads = backward(forward_loss(tokens, params, FlopLedger()), FlopLedger())

    def loss(candidate):
        return loss_all_positions(forward(tokens, candidate, None), tokens)

    role_errors = {}
    unfloored = 0.0
    entries = _sample_entries(params, samples, rng)
    for role, name, row, col in entries:
        numeric = finite_difference(loss, params, name, row, col, epsilon)
        analytic = grads[name].data[row, col]
        role_errors[role] = max(role_errors.get(role, 0.0), relative_error(analytic, numeric))
        unfloored = max(unfloored, relative_error(analytic, numeric, 0.0))

    worst = max(role_errors.values())
    _logger.info("gradient check over %d entries: max relative error %.3e (%.3e without floor)",
                 len(entries), worst, unfloored)
    return GradCheckReport(worst, role_errors, len(entries), epsilon, unfloored)
