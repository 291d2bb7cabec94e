"""Index bank: normalized differences and the per-index class projection."""

import numpy as np
import pytest

from waveseg.errors import ContractError
from waveseg.indices import (
    IndexHead,
    compute_index,
    index_logits,
    make_index_head,
    ndvi,
    normalized_difference,
)
from waveseg.raster import BLUE, GREEN, NIR, RED, Raster
from waveseg.tensor import Parameter, softmax_np


class TestNormalizedDifference:
    def test_equal_bands_give_zero(self):
        a = np.full((4, 4), 0.4)
        np.testing.assert_array_equal(normalized_difference(a, a).values, 0.0)

    def test_hand_value(self):
        # (0.5 - 0.25) / 0.75 = 1/3
        out = normalized_difference(np.array([[0.5]]), np.array([[0.25]]))
        assert out.values[0, 0] == pytest.approx(1 / 3, abs=1e-7)

    def test_zero_over_zero_is_zero(self):
        out = normalized_difference(np.zeros((2, 2)), np.zeros((2, 2)))
        np.testing.assert_array_equal(out.values, 0.0)

    def test_bounded(self):
        rng = np.random.default_rng(0)
        a = rng.uniform(0, 1, size=(32, 32))
        b = rng.uniform(0, 1, size=(32, 32))
        values = normalized_difference(a, b).values
        assert np.all(values <= 1.0) and np.all(values >= -1.0)

    def test_exact_antisymmetry(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(0, 1, size=(16, 16))
        b = rng.uniform(0, 1, size=(16, 16))
        ab = normalized_difference(a, b).values
        ba = normalized_difference(b, a).values
        np.testing.assert_array_equal(ab, -ba)

    def test_extent_mismatch(self):
        with pytest.raises(ContractError):
            normalized_difference(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_negative_input_rejected(self):
        with pytest.raises(ContractError):
            normalized_difference(np.full((2, 2), -0.1), np.zeros((2, 2)))


class TestIndexResolution:
    def make_raster(self, rng):
        data = rng.uniform(0, 1, size=(8, 8, 4)).astype(np.float32)
        return Raster(data, (NIR, RED, GREEN, BLUE))

    def test_ndvi_uses_nir_red(self):
        rng = np.random.default_rng(2)
        raster = self.make_raster(rng)
        direct = normalized_difference(raster.band("nir"), raster.band("red"))
        np.testing.assert_array_equal(ndvi(raster).values, direct.values)

    def test_custom_pair(self):
        rng = np.random.default_rng(3)
        raster = self.make_raster(rng)
        out = compute_index(raster, ("nir", "green"))
        direct = normalized_difference(raster.band("nir"), raster.band("green"))
        np.testing.assert_array_equal(out.values, direct.values)

    def test_unknown_spec(self):
        rng = np.random.default_rng(4)
        with pytest.raises(ContractError):
            compute_index(self.make_raster(rng), "mystery")


class TestIndexLogits:
    def test_resolution_preserved(self):
        rng = np.random.default_rng(5)
        head = make_index_head("h", 6, rng, np.float64)
        for h, w in ((8, 8), (16, 32), (5, 9)):
            out = index_logits(rng.uniform(-1, 1, size=(h, w)), head)
            assert out.shape == (6, h, w)

    def test_zero_head_gives_uniform_softmax(self):
        head = IndexHead(
            weight=Parameter("w", np.zeros(4)), bias=Parameter("b", np.zeros(4))
        )
        out = index_logits(np.random.default_rng(6).uniform(-1, 1, (3, 3)), head)
        probs = softmax_np(out.data, axis=0)
        np.testing.assert_allclose(probs, 0.25, atol=1e-12)

    def test_threshold_oracle(self):
        # Vegetation weight positive, others zero: argmax flips at -bias/weight.
        weight = np.array([0.0, 2.0])
        bias = np.array([0.5, -0.3])
        head = IndexHead(weight=Parameter("w", weight), bias=Parameter("b", bias))
        threshold = (bias[0] - bias[1]) / weight[1]  # logit crossover
        lo, hi = threshold - 0.05, threshold + 0.05
        out = index_logits(np.array([[lo, hi]]), head)
        pred = np.argmax(out.data, axis=0)
        assert pred[0, 0] == 0 and pred[0, 1] == 1

    def test_gradients_flow_to_head(self):
        rng = np.random.default_rng(7)
        head = make_index_head("h", 3, rng, np.float64)
        out = index_logits(rng.uniform(-1, 1, (4, 4)), head)
        out.sum().backward()
        assert head.weight.grad is not None and head.bias.grad is not None
