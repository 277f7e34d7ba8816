
import pytest

from pyscaling import cost
from pyscaling.config import HardwareProfile, ModelConfig
from pyscaling.exception import ConfigError, WindowFullError
from pyscaling.presets import PRESET_D_HIGH, PRESET_D_LOW, PRESETS, get_preset, get_scenario, \
    scenario_report, use_case_report

PRESET_A = ModelConfig(n=2048, vocab=32768, d_emb=4096, heads=32, layers=32)

# published figures per use case, in report field order
PUBLISHED = {
    "A": (6.7e9, 180e6, 0.5e9, 15e12, 7e9, 130e9, 2.7e21, 0.27, 2.7e3),
    "B": (28e9, 600e6, 3e9, 125e12, 30e9, 540e9, 50e21, 5, 50e3),
    "C": (175e9, 1.9e9, 20e9, 1.6e15, 200e9, 3.5e12, 2e24, 200, 2e6)
}
PUBLISHED_RANGES = {
    "parameters": (400e9, 800e9),
    "activations_memory": (30e9, 90e9),
    "kv_cache_memory": (0.4e12, 1.3e12),
    "forward_flops": (80e15, 400e15),
    "incremental_flops": (1e12, 2e12),
    "chinchilla_tokens": (8e12, 15e12),
    "training_flops": (20e24, 100e24),
    "gpu_years": (2000, 10000),
    "dollars": (20e6, 100e6)
}
FIELDS = ("parameters", "activations_memory", "kv_cache_memory", "forward_flops", "incremental_flops",
          "chinchilla_tokens", "training_flops", "gpu_years", "dollars")


def test_preset_a_exact_counts():
    assert cost.param_count(PRESET_A) == 6711410688
    assert cost.activations_memory(PRESET_A) == 176160768
    assert cost.kv_cache_memory(PRESET_A) == 536870912
    assert cost.forward_flops(PRESET_A) == 14569065938944
    assert cost.incremental_flops(PRESET_A) == 6979321856
    assert cost.chinchilla_tokens(PRESET_A) == 134217728000
    assert cost.training_flops(PRESET_A) == pytest.approx(2.6978e21, rel=1e-4)


@pytest.mark.parametrize("preset", sorted(PUBLISHED))
def test_use_case_reproduces_published_values(preset):
    report = use_case_report(preset)
    for field, published in zip(FIELDS, PUBLISHED[preset]):
        assert getattr(report, field) == pytest.approx(published, rel=0.1), field


def test_state_of_the_art_brackets_ranges():
    low, high = use_case_report(PRESET_D_LOW), use_case_report(PRESET_D_HIGH)
    for field, (range_low, range_high) in PUBLISHED_RANGES.items():
        assert 0.75 * range_low <= getattr(low, field) <= 1.25 * range_low, field
        assert 0.75 * range_high <= getattr(high, field) <= 1.25 * range_high, field


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_preset_heads_divide_embedding(preset):
    cfg = get_preset(preset)
    assert cfg.d_h * cfg.heads == cfg.d_emb


def test_head_count_only_changes_attention_memory():
    high = get_preset(PRESET_D_HIGH)
    assert high.heads == 160
    wide, narrow = cost.cost_report(high).as_dict(), cost.cost_report(high.replace(heads=128)).as_dict()
    # only the naive attention scores grow with the head count
    assert wide.pop("attention_memory") - narrow.pop("attention_memory") == 32 * high.n ** 2
    assert wide == narrow


def test_custom_config_equal_to_preset():
    assert cost.cost_report(PRESET_A) == use_case_report("A")


def test_zero_layers_counts_only_vocabulary():
    cfg = ModelConfig(n=16, vocab=100, d_emb=32, heads=4, layers=0)
    assert cost.param_count(cfg) == 2 * 100 * 32


def test_degenerate_lengths(small_cfg):
    assert cost.incremental_flops(PRESET_A, 0) == 12 * 4096 ** 2 * 32
    assert cost.kv_cache_memory(PRESET_A, 0) == 0
    one = small_cfg.replace(n=1)
    assert cost.activations_memory(one) == 13 * 8 + 11
    with pytest.raises(WindowFullError):
        cost.forward_flops(small_cfg, 5)
    with pytest.raises(WindowFullError):
        cost.incremental_flops(small_cfg, 5)


def test_small_config_breakdown(small_cfg):
    breakdown = cost.forward_flops_breakdown(small_cfg)
    assert sum(breakdown.values()) - breakdown["layer_norm"] == 7008
    assert breakdown["layer_norm"] == 128
    assert cost.forward_flops(small_cfg) == 12 * 2 * 4 * 64 + 2 * 2 * 16 * 8 + (4 + 11) * 4 * 8


def test_general_ffn_width():
    cfg = ModelConfig(n=4, vocab=3, d_emb=8, heads=2, layers=1, d_ff=20)
    assert cost.param_count(cfg) == 4 * 64 + 2 * 8 * 20 + 4 * 8 + 2 * 3 * 8


def test_training_identities():
    assert cost.training_flops(PRESET_A) == cost.chinchilla_tokens(PRESET_A, False) * \
        cost.per_token_train_flops(PRESET_A, False)
    n, d, layers = PRESET_A.n, PRESET_A.d_emb, PRESET_A.layers
    assert cost.training_flops(PRESET_A) == 240 * layers ** 2 * d ** 3 * (6 * n + 36 * d)
    assert cost.per_token_train_flops(PRESET_A) == 3 * cost.incremental_flops(PRESET_A, include_logits=True)
    assert cost.training_flops(PRESET_A, include_vocab=True) > cost.training_flops(PRESET_A)
    assert cost.full_context_training_flops(PRESET_A) == cost.training_flops(PRESET_A) * n


def test_chinchilla_close_to_twenty_per_parameter():
    ratio = cost.chinchilla_tokens(PRESET_A) / (20.0 * cost.param_count(PRESET_A))
    assert abs(ratio - 1) < 0.005


@pytest.mark.parametrize("change", [dict(n=8), dict(vocab=22), dict(d_emb=16), dict(layers=3)])
def test_reports_are_monotone(small_cfg, change):
    base = cost.cost_report(small_cfg).as_dict()
    grown = cost.cost_report(small_cfg.replace(**change)).as_dict()
    for field, value in base.items():
        assert grown[field] >= value, field


def test_economics():
    hw = HardwareProfile()
    money = cost.economics(2.7e21, hw)
    assert money.gpu_years == pytest.approx(0.285, rel=0.01)
    assert money.dollars == pytest.approx(2850, rel=0.01)
    assert money.gpu_hours == pytest.approx(money.gpu_years * 3.156e7 / 3600)
    assert cost.economics(2e24, hw).gpu_years == pytest.approx(211, rel=0.01)
    assert cost.economics(1e18, hw).dollars == pytest.approx(1.0, rel=0.1)
    assert cost.dollars_per_flop(hw) == pytest.approx(1.056e-18, rel=1e-3)
    with pytest.raises(ConfigError):
        cost.economics(-1, hw)


def test_faster_device_halves_gpu_years():
    slow = cost.cost_report(PRESET_A)
    fast = cost.cost_report(PRESET_A, HardwareProfile(flops=600e12))
    assert fast.gpu_years == pytest.approx(slow.gpu_years / 2)


def test_incremental_price():
    hw = HardwareProfile()
    assert cost.incremental_price_per_mtok(PRESET_A, hw) == pytest.approx(0.00737, rel=0.01)
    low = cost.incremental_price_per_mtok(get_preset(PRESET_D_LOW), hw)
    high = cost.incremental_price_per_mtok(get_preset(PRESET_D_HIGH), hw)
    assert 0.75 <= low <= 1.25
    assert 1.5 <= high <= 2.5
    floor = cost.incremental_price_per_mtok(PRESET_A, hw, t=0)
    assert floor == pytest.approx(12 * 4096 ** 2 * 32 * 1e6 * cost.dollars_per_flop(hw))


def test_deepseek_scenario():
    scenario = get_scenario("deepseek")
    assert cost.per_token_train_flops(scenario.active_training) == pytest.approx(1.988e11, rel=1e-3)

    report = scenario_report("deepseek")
    assert report.training_flops == pytest.approx(2.9e24, rel=0.03)
    assert report.chinchilla_tokens == pytest.approx(13.4e12, rel=0.01)
    assert report.parameters == pytest.approx(38e9, rel=0.03)
    assert report.gpu_hours == pytest.approx(report.gpu_years * 3.156e7 / 3600)


def test_moe_total_must_cover_active():
    scenario = get_scenario("deepseek")
    with pytest.raises(ConfigError):
        cost.MoEScenario(scenario.active_training, 1000, 10 ** 12, scenario.active_inference)


def test_memory_bytes():
    report = use_case_report("A")
    memory = report.memory_bytes(2)
    assert memory["kv_cache_memory_bytes"] == 2 * 536870912
    assert set(memory) == {"activations_memory_bytes", "kv_cache_memory_bytes", "attention_memory_bytes"}
    assert report.attention_memory == 4 * 2048 * 4096 + 32 * 2048 ** 2
    with pytest.raises(ConfigError):
        report.memory_bytes(0)


def test_unknown_preset():
    with pytest.raises(ConfigError) as info:
        use_case_report("Z")
    assert "A" in str(info.value)
