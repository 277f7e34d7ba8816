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

"""Closed-form flops, memory, data and cost model of decoder-only transformers.

One flop is one multiply-add inside a matrix multiplication. Attention is
counted with the full ``m x m`` score matrix (factor exactly 2 on the
``L m^2 d_emb`` term) and activations with factor exactly 13 on ``n d_emb``.
Every function is pure and exact: counts are Python integers.

When ``d_ff`` differs from ``4 * d_emb`` the per-row sums are used, so the
``12 d_emb^2`` terms become ``4 d_emb^2 + 2 d_emb d_ff``.
"""

from __future__ import annotations

from collections import namedtuple
from dataclasses import dataclass

from pyscaling.config import HardwareProfile, ModelConfig
from pyscaling.exception import ConfigError, SequenceError, WindowFullError
from pyscaling.tensor import FlopLedger

CHINCHILLA_TOKENS_PER_PARAMETER = 20
BACKWARD_FACTOR = 2
TOKENS_PER_PRICE_UNIT = 10 ** 6
SECONDS_PER_HOUR = 3600

Economics = namedtuple("Economics", ("gpu_years", "gpu_hours", "dollars"))


@dataclass(frozen=True)
class CostReport:
    """Every headline quantity for one configuration.

    Memories are element counts; see :meth:`memory_bytes` for a bytes view.
    """
    parameters: int
    activations_memory: int
    kv_cache_memory: int
    attention_memory: int
    forward_flops: int
    incremental_flops: int
    chinchilla_tokens: int
    training_flops: int
    gpu_years: float
    gpu_hours: float
    dollars: float

    FIELDS = ("parameters", "activations_memory", "kv_cache_memory", "attention_memory", "forward_flops",
              "incremental_flops", "chinchilla_tokens", "training_flops", "gpu_years", "gpu_hours", "dollars")
    MEMORY_FIELDS = ("activations_memory", "kv_cache_memory", "attention_memory")

    def as_dict(self):
        return {name: getattr(self, name) for name in self.FIELDS}

    def memory_bytes(self, bytes_per_element=2):
        """Returns the memories in bytes at ``bytes_per_element``, keyed ``<field>_bytes``."""
        if not bytes_per_element > 0:
            raise ConfigError.invalid_value("bytes_per_element", bytes_per_element, "must be positive")
        return {name + "_bytes": getattr(self, name) * bytes_per_element for name in self.MEMORY_FIELDS}


@dataclass(frozen=True)
class MoEScenario:
    """A mixture-of-experts model seen through dense-equivalent configurations.

    ``active_training`` is the per-token routed configuration used for most of
    training, ``active_inference`` the one a forward evaluation runs through;
    ``total_parameters`` counts every latent expert parameter.
    """
    active_training: ModelConfig
    total_parameters: int
    dataset_tokens: int
    active_inference: ModelConfig

    def __post_init__(self):
        active = param_count(self.active_training)
        if self.total_parameters < active:
            raise ConfigError.invalid_value("total_parameters", self.total_parameters,
                                            "must be at least the %d active parameters" % active)
        if self.dataset_tokens < 1:
            raise ConfigError.invalid_value("dataset_tokens", self.dataset_tokens, "must be positive")


def _layer_weights(cfg):
    # 4 d^2 for W_Q, W_K, W_V, O and 2 d d_ff for the feed-forward pair (12 d^2 when d_ff = 4 d)
    return 4 * cfg.d_emb ** 2 + 2 * cfg.d_emb * cfg.d_ff


def _check_length(cfg, m, minimum=1):
    if m > cfg.n:
        raise WindowFullError.overflow(m, cfg.n)
    if m < minimum:
        raise SequenceError.too_short(m, minimum)
    return m


def param_count(cfg):
    """Learned scalars: ``12 L d^2 + 4 L d + 2 V d``."""
    return cfg.layers * (_layer_weights(cfg) + 4 * cfg.d_emb) + 2 * cfg.vocab * cfg.d_emb


def forward_flops_breakdown(cfg, m=None):
    """Forward mult-adds over ``m`` tokens (default ``n``) per ledger category.

    :rtype: dict
    """
    m = _check_length(cfg, cfg.n if m is None else m)
    d, layers = cfg.d_emb, cfg.layers
    return {
        FlopLedger.QKV_PROJECTION: 3 * layers * m * d * d,
        FlopLedger.ATTENTION_SCORES: layers * m * m * d,
        FlopLedger.ATTENTION_VALUES: layers * m * m * d,
        FlopLedger.OUTPUT_PROJECTION: layers * m * d * d,
        FlopLedger.FFN_EXPAND: layers * m * d * cfg.d_ff,
        FlopLedger.FFN_CONTRACT: layers * m * cfg.d_ff * d,
        FlopLedger.LOGIT_PROJECTION: m * d * cfg.vocab,
        FlopLedger.LAYER_NORM: 2 * layers * m * d,
        FlopLedger.OTHER: 0
    }


def forward_flops(cfg, m=None):
    """``12 L m d^2 + 2 L m^2 d + (2 L + V) m d``, with ``m`` defaulting to ``n``."""
    return sum(forward_flops_breakdown(cfg, m).values())


def incremental_flops_breakdown(cfg, t=None):
    """Mult-adds to produce one more token when the context (including it) holds ``t`` tokens."""
    t = _check_length(cfg, cfg.n if t is None else t, 0)
    d, layers = cfg.d_emb, cfg.layers
    return {
        FlopLedger.QKV_PROJECTION: 3 * layers * d * d,
        FlopLedger.ATTENTION_SCORES: layers * t * d,
        FlopLedger.ATTENTION_VALUES: layers * t * d,
        FlopLedger.OUTPUT_PROJECTION: layers * d * d,
        FlopLedger.FFN_EXPAND: layers * d * cfg.d_ff,
        FlopLedger.FFN_CONTRACT: layers * cfg.d_ff * d,
        FlopLedger.LOGIT_PROJECTION: d * cfg.vocab,
        FlopLedger.LAYER_NORM: 2 * layers * d,
        FlopLedger.OTHER: 0
    }


def incremental_flops(cfg, t=None, include_logits=False):
    """``(12 d^2 + 2 t d) L`` per generated token, plus ``d V`` when ``include_logits``.

    :param cfg: model configuration
    :param t: context length the new token attends to, itself included (defaults to ``n``)
    :param include_logits: add the one-row logit projection
    :rtype: int
    """
    t = _check_length(cfg, cfg.n if t is None else t, 0)
    flops = (_layer_weights(cfg) + 2 * t * cfg.d_emb) * cfg.layers
    if include_logits:
        flops += cfg.d_emb * cfg.vocab
    return flops


def activations_memory(cfg):
    """``13 n d + n V`` elements (``9 n d + n d_ff + n V`` in general)."""
    return 9 * cfg.n * cfg.d_emb + cfg.n * cfg.d_ff + cfg.n * cfg.vocab


def attention_memory(cfg):
    """Naive per-layer attention activations ``4 n d + H n^2``, with every score matrix materialized."""
    return 4 * cfg.n * cfg.d_emb + cfg.heads * cfg.n ** 2


def kv_cache_memory(cfg, t=None):
    """``2 L t d`` cached elements, ``t`` defaulting to ``n``."""
    t = _check_length(cfg, cfg.n if t is None else t, 0)
    return 2 * cfg.layers * t * cfg.d_emb


def chinchilla_tokens(cfg, include_vocab=True):
    """Compute-optimal training tokens, 20 per parameter: ``240 L d^2 + 40 V d``.

    The layer-norm parameters are left out, as in the rule of thumb.
    """
    tokens = CHINCHILLA_TOKENS_PER_PARAMETER * cfg.layers * _layer_weights(cfg)
    if include_vocab:
        tokens += 2 * CHINCHILLA_TOKENS_PER_PARAMETER * cfg.vocab * cfg.d_emb
    return tokens


def per_token_train_flops(cfg, include_vocab=True):
    """Forward-backward mult-adds per trained token: ``(6 n d + 36 d^2) L + 3 V d``.

    One forward over ``n`` tokens trains all of them at once, so the full
    forward-backward cost is divided by ``n``; the result is three times the
    per-token forward cost.
    """
    forward = (_layer_weights(cfg) + 2 * cfg.n * cfg.d_emb) * cfg.layers
    if include_vocab:
        forward += cfg.vocab * cfg.d_emb
    return (1 + BACKWARD_FACTOR) * forward


def training_flops(cfg, include_vocab=False):
    """Total training mult-adds: ``240 L^2 d^3 (6 n + 36 d)`` without the V terms.

    With ``include_vocab`` the dataset gains ``40 V d`` tokens and each token ``3 V d`` flops.
    """
    return chinchilla_tokens(cfg, include_vocab) * per_token_train_flops(cfg, include_vocab)


def full_context_training_flops(cfg, include_vocab=False):
    """Training cost if every token were trained by its own full-window forward-backward pass."""
    return training_flops(cfg, include_vocab) * cfg.n


def dollars_per_flop(hw):
    return hw.cost_per_year / (hw.flops * hw.seconds_per_year)


def economics(flops, hw):
    """Converts a flop count into device-years, device-hours and dollars.

    :param flops: mult-adds to execute
    :param hw: hardware profile
    :rtype: Economics
    """
    if flops < 0:
        raise ConfigError.invalid_value("flops", flops, "must not be negative")
    seconds = flops / hw.flops
    gpu_years = seconds / hw.seconds_per_year
    return Economics(gpu_years, seconds / SECONDS_PER_HOUR, gpu_years * hw.cost_per_year)


def incremental_price_per_mtok(cfg, hw, t=None, include_logits=False):
    """Dollars per million generated tokens at context length ``t`` (default ``n``)."""
    return incremental_flops(cfg, t, include_logits) * TOKENS_PER_PRICE_UNIT * dollars_per_flop(hw)


def cost_report(cfg, hw=None, include_vocab=False):
    """Builds the full report for one configuration.

    :param cfg: model configuration
    :param hw: hardware profile (defaults to the built-in profile)
    :param include_vocab: keep the V terms in the training estimate
    :rtype: CostReport
    """
    hw = hw if hw is not None else HardwareProfile()
    flops = training_flops(cfg, include_vocab)
    money = economics(flops, hw)
    return CostReport(
        parameters=param_count(cfg),
        activations_memory=activations_memory(cfg),
        kv_cache_memory=kv_cache_memory(cfg),
        attention_memory=attention_memory(cfg),
        forward_flops=forward_flops(cfg),
        incremental_flops=incremental_flops(cfg),
        chinchilla_tokens=chinchilla_tokens(cfg),
        training_flops=flops,
        gpu_years=money.gpu_years,
        gpu_hours=money.gpu_hours,
        dollars=money.dollars)


def moe_scenario_report(scenario, hw=None, include_vocab=False):
    """Report for a mixture-of-experts scenario.

    The dataset size follows the Chinchilla rule on the total latent
    parameters, training cost uses the active training configuration over
    the actual dataset, and every inference figure comes from the active
    inference configuration.

    :rtype: CostReport
    """
    hw = hw if hw is not None else HardwareProfile()
    inference = scenario.active_inference
    flops = per_token_train_flops(scenario.active_training, include_vocab) * scenario.dataset_tokens
    money = economics(flops, hw)
    return CostReport(
        parameters=param_count(inference),
        activations_memory=activations_memory(inference),
        kv_cache_memory=kv_cache_memory(inference),
        attention_memory=attention_memory(inference),
        forward_flops=forward_flops(inference),
        incremental_flops=incremental_flops(inference),
        chinchilla_tokens=CHINCHILLA_TOKENS_PER_PARAMETER * scenario.total_parameters,
        training_flops=flops,
        gpu_years=money.gpu_years,
        gpu_hours=money.gpu_hours,
        dollars=money.dollars)
