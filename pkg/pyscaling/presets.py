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

"""Named configurations for the illustrative use cases.

"32K" and "64K" vocabularies are read as binary (32768, 65536), "80K" and
larger as decimal. The state-of-the-art case is a range, represented by a
low and a high end.
"""

from __future__ import annotations

from collections import namedtuple

from pyscaling.cache import cached
from pyscaling.config import HardwareProfile, ModelConfig
from pyscaling.cost import MoEScenario, cost_report, moe_scenario_report
from pyscaling.exception import ConfigError

Preset = namedtuple("Preset", ("name", "description", "config"))

PRESET_A = "A"
PRESET_B = "B"
PRESET_C = "C"
PRESET_D_LOW = "D-low"
PRESET_D_HIGH = "D-high"
PRESET_DEEPSEEK_INFERENCE = "deepseek-inference"

PRESETS = {
    PRESET_A: Preset(PRESET_A, "Small-scale academic model",
                     ModelConfig(n=2048, vocab=32768, d_emb=4096, heads=32, layers=32)),
    PRESET_B: Preset(PRESET_B, "Mid-scale enterprise assistant",
                     ModelConfig(n=4096, vocab=65536, d_emb=6144, heads=48, layers=60)),
    PRESET_C: Preset(PRESET_C, "Large-scale model, ca. 2021",
                     ModelConfig(n=8192, vocab=80000, d_emb=12288, heads=96, layers=96)),
    PRESET_D_LOW: Preset(PRESET_D_LOW, "State of the art (2025), low end",
                         ModelConfig(n=100000, vocab=100000, d_emb=16384, heads=128, layers=120)),
    PRESET_D_HIGH: Preset(PRESET_D_HIGH, "State of the art (2025), high end",
                          ModelConfig(n=200000, vocab=200000, d_emb=20480, heads=160, layers=160)),
    PRESET_DEEPSEEK_INFERENCE: Preset(PRESET_DEEPSEEK_INFERENCE, "Mixture-of-experts inference path, V excluded",
                                      ModelConfig(n=128000, vocab=0, d_emb=7168, heads=128, layers=61))
}

SCENARIO_DEEPSEEK = "deepseek"

SCENARIOS = {
    SCENARIO_DEEPSEEK: MoEScenario(
        active_training=ModelConfig(n=32768, vocab=0, d_emb=7168, heads=128, layers=61),
        total_parameters=671 * 10 ** 9,
        dataset_tokens=148 * 10 ** 11,
        active_inference=PRESETS[PRESET_DEEPSEEK_INFERENCE].config)
}


def get_preset(name):
    """Returns the configuration of a named preset.

    :param name: preset id
    :rtype: pyscaling.config.ModelConfig
    :raise: pyscaling.exception.ConfigError
    """
    if name not in PRESETS:
        raise ConfigError.unknown_preset(name, PRESETS.keys())
    return PRESETS[name].config


def get_scenario(name):
    if name not in SCENARIOS:
        raise ConfigError.unknown_scenario(name, SCENARIOS.keys())
    return SCENARIOS[name]


@cached
def use_case_report(preset, hw=None, include_vocab=False):
    """Full cost report of a named preset.

    :param preset: preset id
    :param hw: hardware profile (defaults to the built-in profile)
    :param include_vocab: keep the V terms in the training estimate
    :rtype: pyscaling.cost.CostReport
    """
    return cost_report(get_preset(preset), hw if hw is not None else HardwareProfile(), include_vocab)


@cached
def scenario_report(scenario, hw=None, include_vocab=False):
    return moe_scenario_report(get_scenario(scenario), hw if hw is not None else HardwareProfile(),
                               include_vocab)
