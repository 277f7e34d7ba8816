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

"""Desk-scale cross-check of the instrumented model against the closed forms.

Every multiply-add the reference model performs lands in a ledger; the checks
below compare those measured counts with the analytic predictions category by
category, and add the behavioural checks (cached decoding, backward ratio,
gradients) that make the counts trustworthy.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np

from pyscaling import cost
from pyscaling.config import ModelConfig
from pyscaling.decoder import decode_step, generate, generate_reference, prefill
from pyscaling.exception import GuardError, SequenceError
from pyscaling.log import get_logger
from pyscaling.model import forward, init_params
from pyscaling.tensor import FlopLedger
from pyscaling.training import backward, forward_loss, grad_check

DESK_FLOP_LIMIT = 10 ** 9
SMALL_CONFIG = ModelConfig(n=8, vocab=11, d_emb=8, heads=2, layers=2)

GRADIENT_TOLERANCE = 1e-5
LOGIT_TOLERANCE = 1e-9

STATUS_EXACT = "exact"
STATUS_MISMATCH = "mismatch"
STATUS_OK = "ok"
STATUS_FAIL = "fail"

Check = namedtuple("Check", ("name", "measured", "expected", "status"))

_logger = get_logger("verify")


class VerifyReport:
    """Ordered list of checks; passes when every check does."""

    def __init__(self, cfg):
        self._config = cfg
        self._checks = []

    def __iter__(self):
        return iter(self._checks)

    def __len__(self):
        return len(self._checks)

    def get_config(self):
        return self._config

    def get_checks(self):
        return tuple(self._checks)

    def passed(self):
        return all(c.status in (STATUS_EXACT, STATUS_OK) for c in self._checks)

    def failures(self):
        return tuple(c for c in self._checks if c.status not in (STATUS_EXACT, STATUS_OK))

    def merge(self, other):
        """Appends the checks of another report."""
        self._checks.extend(other.get_checks())
        return self

    def count(self, name, measured, expected):
        status = STATUS_EXACT if measured == expected else STATUS_MISMATCH
        self._add(Check(name, measured, expected, status))

    def within(self, name, error, tolerance):
        status = STATUS_OK if error <= tolerance else STATUS_FAIL
        self._add(Check(name, error, tolerance, status))

    def condition(self, name, holds):
        self._add(Check(name, int(bool(holds)), 1, STATUS_OK if holds else STATUS_FAIL))

    def _add(self, check):
        _logger.debug("%s: measured %s expected %s (%s)", *check)
        self._checks.append(check)


def guard(cfg, limit=DESK_FLOP_LIMIT):
    """Refuses configurations whose forward pass is too large to run at desk scale."""
    flops = cost.forward_flops(cfg)
    if flops > limit:
        raise GuardError.too_large(flops, limit)


def _tokens(cfg, rng, length):
    return [int(t) for t in rng.integers(0, cfg.vocab, size=length)]


def check_forward(report, params, rng, expect_offset=0):
    """Forward ledger per category at m = n, and the total at every shorter m."""
    cfg = params.get_config()
    ledger = FlopLedger()
    forward(_tokens(cfg, rng, cfg.n), params, ledger)
    predicted = cost.forward_flops_breakdown(cfg)
    for category in FlopLedger.CATEGORIES:
        report.count("forward %s" % category, ledger.get(category, FlopLedger.FORWARD),
                     predicted[category] + expect_offset)

    mismatched = []
    for m in range(1, cfg.n):
        ledger = FlopLedger()
        forward(_tokens(cfg, rng, m), params, ledger)
        if ledger.total(FlopLedger.FORWARD) != cost.forward_flops(cfg, m) + expect_offset:
            mismatched.append(m)
    report.condition("shorter windows: forward total", not mismatched)


def check_decode(report, params, rng, expect_offset=0):
    """Ledger of every decode step against the incremental cost at that cache length."""
    cfg = params.get_config()
    sequence = _tokens(cfg, rng, cfg.n)
    ledger = FlopLedger()
    cache, _ = prefill(sequence[:1], params, ledger)

    measured = FlopLedger()
    predicted = dict.fromkeys(FlopLedger.CATEGORIES, 0)
    steps_exact = True
    for token in sequence[1:]:
        t = cache.get_length() + 1
        before = ledger.snapshot()
        decode_step(cache, token, params, ledger)
        step = ledger.since(before)
        measured.merge(step)
        expected = cost.incremental_flops(cfg, t, include_logits=True) + expect_offset
        steps_exact = steps_exact and step.matmul_total(FlopLedger.FORWARD) == expected
        for category, count in cost.incremental_flops_breakdown(cfg, t).items():
            predicted[category] += count

    for category in FlopLedger.CATEGORIES:
        report.count("decode %s" % category, measured.get(category, FlopLedger.FORWARD),
                     predicted[category] + expect_offset)
    report.condition("decode matmul flops at every cache length", steps_exact)


def check_backward(report, params, rng):
    """Backward matmul flops are exactly twice the forward ones."""
    cfg = params.get_config()
    ledger = FlopLedger()
    backward(forward_loss(_tokens(cfg, rng, cfg.n), params, ledger), ledger)
    report.count("backward matmul = 2 x forward", ledger.matmul_total(FlopLedger.BACKWARD),
                 cost.BACKWARD_FACTOR * ledger.matmul_total(FlopLedger.FORWARD))
    report.count("backward layer_norm", ledger.get(FlopLedger.LAYER_NORM, FlopLedger.BACKWARD),
                 ledger.get(FlopLedger.LAYER_NORM, FlopLedger.FORWARD))


def check_kv_cache(report, params, rng, prompts=5):
    """Cached decoding reproduces full-forward logits and greedy tokens."""
    cfg = params.get_config()
    sequence = _tokens(cfg, rng, cfg.n)
    full = forward(sequence, params, None).data
    cache, row = prefill(sequence[:1], params, None)
    rows = [row.data[0]]
    for token in sequence[1:]:
        row, cache = decode_step(cache, token, params, None)
        rows.append(row.data[0])
    cached = np.array(rows)
    error = float(np.max(np.abs(cached - full) / np.maximum(np.abs(full), 1.0)))
    report.within("kv cache logits", error, LOGIT_TOLERANCE)

    identical = True
    for _ in range(prompts):
        length = int(rng.integers(1, cfg.n))
        prompt = _tokens(cfg, rng, length)
        steps = cfg.n - length
        identical = identical and generate(prompt, steps, 0.0, 0, params) == generate_reference(
            prompt, steps, 0.0, 0, params)
    report.condition("greedy cached generation = uncached", identical)


def run_verification(cfg=SMALL_CONFIG, seed=0, expect_offset=0, gradients=True):
    """Runs every check on ``cfg``.

    :param cfg: small model configuration (vocab >= 1, n >= 2)
    :param seed: seed for parameters and sampled tokens
    :param expect_offset: added to every expected flop count (0 in normal use)
    :param gradients: include the finite-difference gradient check
    :rtype: VerifyReport
    :raise: pyscaling.exception.GuardError when the config exceeds the desk limit
    """
    guard(cfg)
    if cfg.n < 2:
        raise SequenceError.too_short(cfg.n, 2)

    report = VerifyReport(cfg)
    params = init_params(cfg, seed)
    rng = np.random.default_rng([seed, 3])
    check_forward(report, params, rng, expect_offset)
    check_decode(report, params, rng, expect_offset)
    check_backward(report, params, rng)
    check_kv_cache(report, params, rng)
    if gradients:
        result = grad_check(cfg, seed)
        report.within("gradient check (%d entries)" % result.checked, result.max_relative_error,
                      GRADIENT_TOLERANCE)

    _logger.info("verification of %s: %d checks, %s", cfg, len(report), "passed" if report.passed() else "FAILED")
    return report


def sweep_heads(cfg, heads, seed=0):
    """Forward ledger totals for several head counts at fixed ``d_emb``.

    :return: report with one exact-count check per head count, expected to equal the analytic total
    :rtype: VerifyReport
    """
    report = VerifyReport(cfg)
    expected = cost.forward_flops(cfg)
    for h in heads:
        variant = cfg.replace(heads=h)
        guard(variant)
        ledger = FlopLedger()
        rng = np.random.default_rng([seed, 4])
        forward(_tokens(variant, rng, variant.n), init_params(variant, seed), ledger)
        report.count("forward total, H=%d" % h, ledger.total(FlopLedger.FORWARD), expected)
    return report
