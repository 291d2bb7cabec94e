"""Space branch: patch embedding and multi-head self-attention."""

import numpy as np
import pytest

from waveseg.errors import ContractError
from waveseg.gradcheck import check_attention_block
from waveseg.space import AttentionBlock, PatchEmbed, SpaceEncoder
from waveseg.tensor import Tensor


class TestPatchEmbed:
    def test_token_count(self):
        rng = np.random.default_rng(0)
        embed = PatchEmbed("e", in_channels=1, patch=4, dim=8, grid_h=8, grid_w=8,
                           rng=rng, dtype=np.float64)
        out = embed(Tensor(rng.standard_normal((1, 8, 8))))
        assert out.shape == (4, 8)

    def test_zero_image_leaves_positions(self):
        rng = np.random.default_rng(1)
        embed = PatchEmbed("e", in_channels=2, patch=2, dim=6, grid_h=4, grid_w=4,
                           rng=rng, dtype=np.float64)
        embed.proj.bias.data = np.zeros_like(embed.proj.bias.data)
        out = embed(Tensor(np.zeros((2, 4, 4))))
        np.testing.assert_allclose(out.data, embed.positions.data, atol=1e-15)

    def test_one_hot_pixel_selects_weight_row(self):
        rng = np.random.default_rng(2)
        embed = PatchEmbed("e", in_channels=1, patch=2, dim=5, grid_h=2, grid_w=2,
                           rng=rng, dtype=np.float64)
        x = np.zeros((1, 2, 2))
        x[0, 0, 1] = 1.0  # second pixel of the flattened patch
        out = embed(Tensor(x))
        expected = (
            embed.proj.weight.data[1]
            + embed.proj.bias.data
            + embed.positions.data[0]
        )
        np.testing.assert_allclose(out.data[0], expected, atol=1e-15)

    def test_divisibility_enforced(self):
        rng = np.random.default_rng(3)
        embed = PatchEmbed("e", in_channels=1, patch=4, dim=8, grid_h=8, grid_w=8,
                           rng=rng, dtype=np.float64)
        with pytest.raises(ContractError):
            embed(Tensor(np.zeros((1, 6, 6))))


class TestAttentionBlock:
    def test_single_token_attention_is_identity_weight(self):
        rng = np.random.default_rng(4)
        block = AttentionBlock("a", dim=4, heads=2, rng=rng, dtype=np.float64)
        tokens = Tensor(rng.standard_normal((1, 4)))
        out = block(tokens)
        assert out.shape == (1, 4)

    def test_attention_rows_sum_to_one(self):
        rng = np.random.default_rng(5)
        block = AttentionBlock("a", dim=8, heads=2, rng=rng, dtype=np.float64)
        tokens = Tensor(rng.standard_normal((6, 8)))
        q = block.wq(block.norm_attn(tokens))
        k = block.wk(block.norm_attn(tokens))
        scale = 1.0 / np.sqrt(block.head_dim)
        for h in range(block.heads):
            sl = slice(h * block.head_dim, (h + 1) * block.head_dim)
            weights = ((q[:, sl] @ k[:, sl].T) * scale).softmax(axis=1)
            np.testing.assert_allclose(weights.data.sum(axis=1), 1.0, atol=1e-6)

    def test_identical_tokens_attend_uniformly(self):
        rng = np.random.default_rng(6)
        block = AttentionBlock("a", dim=4, heads=1, rng=rng, dtype=np.float64)
        token = rng.standard_normal(4)
        tokens = Tensor(np.tile(token, (5, 1)))
        normed = block.norm_attn(tokens)
        q, k = block.wq(normed), block.wk(normed)
        weights = ((q @ k.T) * (1 / np.sqrt(4))).softmax(axis=1)
        np.testing.assert_allclose(weights.data, 0.2, atol=1e-10)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        block = AttentionBlock("a", dim=6, heads=2, rng=rng, dtype=np.float64)
        x = rng.standard_normal((8, 6))
        perm = rng.permutation(8)
        direct = block(Tensor(x[perm])).data
        permuted = block(Tensor(x)).data[perm]
        np.testing.assert_allclose(direct, permuted, atol=1e-12)

    def test_dim_heads_divisibility(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ContractError):
            AttentionBlock("a", dim=6, heads=4, rng=rng, dtype=np.float64)

    def test_gradients_match_finite_differences(self):
        assert check_attention_block(seed=0) <= 1e-4


class TestSpaceEncoder:
    def test_positions_break_equivariance_only(self):
        # With positions zeroed the whole encoder is permutation equivariant.
        rng = np.random.default_rng(9)
        enc = SpaceEncoder("s", in_channels=1, patch=1, dim=8, heads=2, layers=2,
                          grid_h=3, grid_w=3, rng=rng, dtype=np.float64)
        enc.embed.positions.data = np.zeros_like(enc.embed.positions.data)
        x = rng.standard_normal((1, 3, 3))
        out = enc(Tensor(x)).data
        perm = np.array([4, 2, 0, 8, 6, 1, 3, 5, 7])
        x_perm = x.reshape(1, 9)[:, perm].reshape(1, 3, 3)
        out_perm = enc(Tensor(x_perm)).data
        np.testing.assert_allclose(out_perm, out[perm], atol=1e-12)
