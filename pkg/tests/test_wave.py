"""Wave branch: amplitude/phase representation, mixing, block properties."""

import numpy as np
import pytest

from waveseg.errors import DimensionError
from waveseg.gradcheck import check_wave_block
from waveseg.nn import LayerNorm
from waveseg.tensor import Tensor
from waveseg.wave import WaveBlock, channel_fc, to_wave, token_mix


def make_wave(x, phases):
    return to_wave(Tensor(x), Tensor(phases))


class TestToWave:
    def test_zero_phase(self):
        x = np.array([[1.0, -2.0], [0.5, 3.0]])
        wave = make_wave(x, np.zeros_like(x))
        np.testing.assert_array_equal(wave.real.data, np.abs(x))
        np.testing.assert_array_equal(wave.imag.data, 0.0)

    def test_zero_input(self):
        phases = np.array([[0.3, -1.2]])
        wave = make_wave(np.zeros((1, 2)), phases)
        np.testing.assert_array_equal(wave.amplitude.data, 0.0)
        np.testing.assert_array_equal(wave.real.data, 0.0)
        np.testing.assert_array_equal(wave.imag.data, 0.0)

    def test_pythagorean_identity(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((5, 4))
        wave = make_wave(x, rng.standard_normal((5, 4)))
        np.testing.assert_allclose(
            wave.real.data**2 + wave.imag.data**2,
            wave.amplitude.data**2,
            atol=1e-6,
        )

    def test_amplitude_non_negative(self):
        rng = np.random.default_rng(1)
        wave = make_wave(rng.standard_normal((6, 3)), rng.standard_normal((6, 3)))
        assert np.all(wave.amplitude.data >= 0)

    def test_phase_shape_mismatch(self):
        with pytest.raises(DimensionError):
            make_wave(np.zeros((2, 2)), np.zeros((2, 3)))


class TestChannelFC:
    def test_identity_weights(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 3))
        out = channel_fc(Tensor(x), Tensor(np.eye(3)))
        np.testing.assert_allclose(out.data, x, atol=1e-15)

    def test_hand_case(self):
        # W = [[1,1],[0,1]], x_j = [2,3] -> [5, 3]
        out = channel_fc(Tensor([[2.0, 3.0]]), Tensor([[1.0, 1.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(out.data, [[5.0, 3.0]])

    def test_token_equivariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 4))
        w = Tensor(rng.standard_normal((4, 4)))
        perm = rng.permutation(6)
        direct = channel_fc(Tensor(x[perm]), w).data
        permuted = channel_fc(Tensor(x), w).data[perm]
        np.testing.assert_allclose(direct, permuted, atol=1e-15)


class TestTokenMix:
    def test_zero_phase_reduces_to_real_mixer(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((5, 3))
        w_real = Tensor(rng.standard_normal((5, 5)))
        w_imag = Tensor(rng.standard_normal((5, 5)))
        wave = make_wave(x, np.zeros_like(x))
        out = token_mix(wave, w_real, w_imag)
        expected = w_real.data @ np.abs(x)
        np.testing.assert_array_equal(out.data, expected)

    def test_half_pi_phase_reduces_to_imag_mixer(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((5, 3))
        w_real = Tensor(rng.standard_normal((5, 5)))
        w_imag = Tensor(rng.standard_normal((5, 5)))
        wave = make_wave(x, np.full_like(x, np.pi / 2))
        out = token_mix(wave, w_real, w_imag)
        expected = w_imag.data @ np.abs(x)
        assert np.max(np.abs(out.data - expected)) <= 1e-12

    def test_hand_case(self):
        # x=[1,2], phases [0, pi], mix_real=[[1,1],[0,0]] -> [-1, 0]
        wave = make_wave(np.array([[1.0], [2.0]]), np.array([[0.0], [np.pi]]))
        out = token_mix(
            wave,
            Tensor([[1.0, 1.0], [0.0, 0.0]]),
            Tensor(np.zeros((2, 2))),
        )
        np.testing.assert_allclose(out.data, [[-1.0], [0.0]], atol=1e-12)

    def test_linear_in_amplitude(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((4, 2))
        phases = rng.standard_normal((4, 2))
        w_real = Tensor(rng.standard_normal((4, 4)))
        w_imag = Tensor(rng.standard_normal((4, 4)))
        one = token_mix(make_wave(x, phases), w_real, w_imag).data
        two = token_mix(make_wave(2 * x, phases), w_real, w_imag).data
        np.testing.assert_allclose(two, 2 * one, atol=1e-12)

    def test_complex_arithmetic_oracle(self):
        # Mixing the real/imag parts separately must equal taking the real
        # part of a complex-weighted aggregation of amplitude*exp(i*phase).
        rng = np.random.default_rng(7)
        x = rng.standard_normal((5, 3))
        phases = rng.standard_normal((5, 3))
        wr = rng.standard_normal((5, 5))
        wi = rng.standard_normal((5, 5))
        out = token_mix(make_wave(x, phases), Tensor(wr), Tensor(wi)).data
        waves = np.abs(x) * np.exp(1j * phases)
        oracle = wr @ waves.real + wi @ waves.imag
        np.testing.assert_allclose(out, oracle, atol=1e-6)


class TestWaveBlock:
    def test_zero_input_residual_identity(self):
        rng = np.random.default_rng(8)
        block = WaveBlock("b", n_tokens=4, dim=3, rng=rng, dtype=np.float64)
        out = block(Tensor(np.zeros((4, 3))))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    @pytest.mark.parametrize("n_tokens", [4, 16, 64])
    def test_shape_preserved(self, n_tokens):
        rng = np.random.default_rng(9)
        block = WaveBlock("b", n_tokens=n_tokens, dim=5, rng=rng, dtype=np.float64)
        out = block(Tensor(rng.standard_normal((n_tokens, 5))))
        assert out.shape == (n_tokens, 5)

    def test_fresh_block_sits_at_phase_zero_point(self):
        # phase projection starts at zero, so the block equals a plain mixer.
        rng = np.random.default_rng(10)
        block = WaveBlock("b", n_tokens=6, dim=4, rng=rng, dtype=np.float64)
        x = Tensor(rng.standard_normal((6, 4)))
        z = block.norm_tokens(x)
        plain = block.mix_real.data @ np.abs(z.data)
        mixed = token_mix(
            to_wave(z, block.phases_for(z)), block.mix_real, block.mix_imag
        )
        np.testing.assert_array_equal(mixed.data, plain)

    def test_static_phase_mode(self):
        rng = np.random.default_rng(11)
        block = WaveBlock("b", n_tokens=4, dim=3, rng=rng, dtype=np.float64,
                          phase_mode="static")
        assert block.phase_table is not None
        out = block(Tensor(rng.standard_normal((4, 3))))
        assert out.shape == (4, 3)

    def test_gradients_match_finite_differences(self):
        assert check_wave_block(seed=0) <= 1e-4


class TestLayerNorm:
    def test_standardizes_rows(self):
        rng = np.random.default_rng(12)
        norm = LayerNorm("n", 8, np.float64)
        out = norm(Tensor(rng.standard_normal((5, 8)) * 3 + 1)).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(out.std(axis=1), 1.0, atol=1e-3)
