import numpy as np
import pytest

from numpy.testing import assert_allclose

from pyscaling import cost
from pyscaling.decoder import KVCache, decode_step, extend, generate, generate_reference, prefill
from pyscaling.exception import WindowFullError
from pyscaling.model import embed, forward
from pyscaling.tensor import FlopLedger, layer_norm


def test_prefill_matches_forward_exactly(check_params):
    tokens = [1, 2, 3, 4, 5]
    cache, row = prefill(tokens, check_params, FlopLedger())
    full = forward(tokens, check_params, FlopLedger())
    assert np.array_equal(row.data, full.data[-1:])
    assert cache.get_length() == 5
    assert cache.scalar_count() == 2 * 2 * 5 * 8


def test_decode_matches_full_forward(check_params, check_cfg):
    tokens = [0, 10, 3, 7, 7, 2, 9, 4]
    full = forward(tokens, check_params, None).data
    cache, row = prefill(tokens[:1], check_params, None)
    rows = [row.data[0]]
    for token in tokens[1:]:
        row, cache = decode_step(cache, token, check_params, None)
        rows.append(row.data[0])
    assert_allclose(np.array(rows), full, rtol=1e-9, atol=1e-12)
    assert cache.get_length() == check_cfg.n


def test_decode_step_ledger_at_every_length(check_params, check_cfg):
    ledger = FlopLedger()
    cache, _ = prefill([5], check_params, ledger)
    for t in range(1, check_cfg.n):
        before = ledger.snapshot()
        decode_step(cache, t % 11, check_params, ledger)
        step = ledger.since(before)
        assert step.matmul_total() == cost.incremental_flops(check_cfg, t + 1, include_logits=True)
        assert step.get(FlopLedger.LAYER_NORM) == 2 * check_cfg.layers * check_cfg.d_emb
        assert step.as_dict(FlopLedger.FORWARD) == cost.incremental_flops_breakdown(check_cfg, t + 1)


def test_cache_scalar_count_at_every_step(check_params, check_cfg):
    cache, _ = prefill([3], check_params, None)
    for t in range(1, check_cfg.n):
        assert cache.scalar_count() == 2 * check_cfg.layers * t * check_cfg.d_emb
        for i in range(check_cfg.layers):
            assert cache.keys(i).shape == cache.values(i).shape == (t, check_cfg.d_emb)
        decode_step(cache, t % check_cfg.vocab, check_params, None)
    assert cache.scalar_count() == 2 * check_cfg.layers * check_cfg.n * check_cfg.d_emb


def test_cached_values_match_projections(check_params):
    tokens = [6, 2, 9]
    cache, _ = prefill(tokens, check_params, None)
    layer = check_params.layer(0)
    x = embed(tokens, check_params, None)
    normed = layer_norm(x, layer.norm1_gain, layer.norm1_bias, None)
    expected = np.hstack([normed.data @ w.data for w in layer.w_v])
    assert_allclose(cache.values(0).data, expected, rtol=1e-12, atol=1e-14)


def test_decode_step_per_layer_cost(small_params):
    ledger = FlopLedger()
    cache, _ = prefill([1, 2, 3], small_params, ledger)
    before = ledger.snapshot()
    decode_step(cache, 4, small_params, ledger)
    step = ledger.since(before)
    assert step.matmul_total() - step.get(FlopLedger.LOGIT_PROJECTION) == 2 * 832


def test_decode_on_full_cache(small_params):
    cache, _ = prefill([1, 2, 3, 4], small_params, FlopLedger())
    with pytest.raises(WindowFullError):
        decode_step(cache, 0, small_params, FlopLedger())
    assert cache.get_length() == 4


def test_cache_grows_by_doubling_up_to_window(check_params):
    cache = KVCache(check_params.get_config())
    assert cache.get_length() == 0
    extend(cache, [1], check_params, None)
    assert cache.get_capacity() == 1
    extend(cache, [2], check_params, None)
    assert cache.get_capacity() == 2
    extend(cache, [3, 4, 5], check_params, None)
    assert cache.get_capacity() == 5
    extend(cache, [6], check_params, None)
    assert cache.get_capacity() == 8
    assert cache.keys(0).shape == (6, 8)


def test_fork_is_independent(check_params):
    cache, _ = prefill([1, 2], check_params, None)
    copy = cache.fork()
    decode_step(copy, 3, check_params, None)
    assert cache.get_length() == 2
    assert copy.get_length() == 3
    assert np.array_equal(copy.keys(1).data[:2], cache.keys(1).data)


def test_generate_zero_steps_echoes_prompt(check_params):
    assert generate([1, 2, 3], 0, 1.0, 0, check_params) == (1, 2, 3)


def test_generate_overflow(check_params):
    with pytest.raises(WindowFullError):
        generate([1, 2, 3], 6, 1.0, 0, check_params)


def test_generate_is_reproducible(check_params):
    first = generate([4], 7, 1.0, 11, check_params)
    assert len(first) == 8
    assert first == generate([4], 7, 1.0, 11, check_params)


def test_greedy_cached_equals_uncached(check_params, check_cfg):
    rng = np.random.default_rng(5)
    for _ in range(50):
        length = int(rng.integers(1, check_cfg.n))
        prompt = [int(t) for t in rng.integers(0, check_cfg.vocab, size=length)]
        steps = check_cfg.n - length
        assert generate(prompt, steps, 0.0, 0, check_params) == generate_reference(prompt, steps, 0.0, 0,
                                                                                  check_params)


def test_sampled_cached_equals_uncached(check_params):
    assert generate([2, 3], 6, 0.8, 9, check_params) == generate_reference([2, 3], 6, 0.8, 9, check_params)


def test_generate_after_cached_prefix(check_params):
    prefix, _ = prefill([1, 2, 3], check_params, None)
    tail = generate([4, 5], 3, 0.0, 0, check_params, prefix=prefix)
    whole = generate([1, 2, 3, 4, 5], 3, 0.0, 0, check_params)
    assert tail == whole[3:]
    assert prefix.get_length() == 3


def test_generate_ledger_counts(check_params, check_cfg):
    ledger = FlopLedger()
    generate([1, 2], 3, 0.0, 0, check_params, ledger)
    # prefill of 2 tokens, then decode steps at context lengths 3 and 4
    expected = cost.forward_flops(check_cfg, 2)
    for t in (3, 4):
        expected += cost.incremental_flops(check_cfg, t, include_logits=True) + 2 * check_cfg.layers * 8
    assert ledger.total() == expected
