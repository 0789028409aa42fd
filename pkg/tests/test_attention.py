import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dado.attention import (
    aggregate_heads,
    attention_sparsity,
    build_attention_map,
    normalize_unit,
    resample_bilinear,
)
from dado.validation import ContractError

from oracles import pixelwise_max


def _r(values):
    return np.asarray(values, dtype=np.float32)


class TestAggregateHeads:
    def test_pointwise_max(self):
        out = aggregate_heads([_r([[0.1, 0.4]]), _r([[0.3, 0.2]])])
        assert out.tolist() == [[pytest.approx(0.3), pytest.approx(0.4)]]

    def test_single_head_identity(self):
        head = _r([[0.2, 0.7], [0.1, 0.0]])
        assert np.array_equal(aggregate_heads([head]), head)

    def test_six_random_heads_match_loop_oracle(self):
        rng = np.random.default_rng(11)
        heads = [rng.random((9, 13)).astype(np.float32) for _ in range(6)]
        assert np.array_equal(aggregate_heads(heads), pixelwise_max(heads))

    def test_permutation_invariant_and_idempotent(self):
        rng = np.random.default_rng(5)
        heads = [rng.random((4, 6)).astype(np.float32) for _ in range(3)]
        base = aggregate_heads(heads)
        assert np.array_equal(aggregate_heads(heads[::-1]), base)
        assert np.array_equal(aggregate_heads(heads + heads), base)

    def test_dimension_mismatch_names_head(self):
        with pytest.raises(ContractError, match="head 1"):
            aggregate_heads([_r([[0.0, 1.0]]), _r([[0.0], [1.0]])])

    def test_empty_list_rejected(self):
        with pytest.raises(ContractError):
            aggregate_heads([])


class TestNormalizeUnit:
    def test_minmax_scaling(self):
        assert normalize_unit(_r([[0.0, 2.0, 4.0]])).tolist() == [[0.0, 0.5, 1.0]]

    def test_constant_maps_to_zero(self):
        assert normalize_unit(_r([[3.3, 3.3], [3.3, 3.3]])).max() == 0.0

    def test_output_range_and_idempotence(self):
        rng = np.random.default_rng(2)
        arr = (rng.random((8, 8)) * 40 - 7).astype(np.float32)
        out = normalize_unit(arr)
        assert out.min() == 0.0 and out.max() == 1.0
        assert np.array_equal(normalize_unit(out), out)


class TestResampleBilinear:
    def test_same_size_identity(self):
        arr = np.random.default_rng(3).random((5, 7)).astype(np.float32)
        out = resample_bilinear(arr, 7, 5)
        assert np.array_equal(out, arr)

    def test_monotone_row_upsample(self):
        out = resample_bilinear(_r([[0.0, 1.0], [0.0, 1.0]]), 4, 2)
        assert out.shape == (2, 4)
        for row in out:
            assert all(a <= b for a, b in zip(row, row[1:]))
            assert row[0] == 0.0 and row[-1] == 1.0

    def test_constant_stays_constant(self):
        out = resample_bilinear(np.full((3, 3), 0.25, np.float32), 9, 6)
        assert np.allclose(out, 0.25)

    def test_values_stay_in_hull(self):
        rng = np.random.default_rng(9)
        arr = rng.random((6, 6)).astype(np.float32)
        out = resample_bilinear(arr, 17, 4)
        assert out.min() >= arr.min() - 1e-6 and out.max() <= arr.max() + 1e-6


class TestAttentionSparsity:
    def test_uniform_mask_is_one(self):
        assert attention_sparsity(np.full((4, 4), 0.7, np.float32)) == pytest.approx(1.0)

    def test_single_pixel_is_zero(self):
        m = np.zeros((4, 4), np.float32)
        m[1, 2] = 1.0
        assert attention_sparsity(m) == 0.0

    def test_two_equal_pixels_of_four(self):
        m = _r([[1.0, 1.0], [0.0, 0.0]])
        assert attention_sparsity(m) == pytest.approx(math.log(2) / math.log(4))

    def test_all_zero_mask_is_one(self):
        assert attention_sparsity(np.zeros((3, 3), np.float32)) == 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.03125, 0.25, 1.0]))
    def test_scale_invariant(self, seed, scale):
        rng = np.random.default_rng(seed)
        mask = rng.random((6, 5)).astype(np.float32)
        assert attention_sparsity(mask * np.float32(scale)) == pytest.approx(
            attention_sparsity(mask), rel=1e-9
        )

    @pytest.mark.parametrize("method", ["hoyer", "gini"])
    def test_alternate_methods_share_extremes(self, method):
        uniform = np.full((5, 5), 0.6, np.float32)
        assert attention_sparsity(uniform, method=method) == pytest.approx(1.0)
        single = np.zeros((5, 5), np.float32)
        single[2, 2] = 1.0
        assert attention_sparsity(single, method=method) == pytest.approx(0.0, abs=0.05)
        assert attention_sparsity(np.zeros((3, 3), np.float32), method=method) == 1.0

    def test_unknown_method_rejected(self):
        with pytest.raises(ContractError):
            attention_sparsity(np.ones((2, 2), np.float32), method="l0")


def test_build_attention_map_pipeline():
    rng = np.random.default_rng(4)
    heads = [rng.random((8, 8)).astype(np.float32) * 3 for _ in range(6)]
    amap = build_attention_map(heads, out_w=16, out_h=12)
    assert amap.mask.shape == (12, 16)
    assert 0.0 <= amap.sparsity <= 1.0
    assert amap.mask.min() >= 0.0 and amap.mask.max() <= 1.0
