"""Spatial-domain feature extractor: patch embedding plus a small
multi-head self-attention encoder."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .nn import LayerNorm, Linear
from .tensor import Parameter, Tensor, concat


class PatchEmbed:
    """Non-overlapping patches, linearly projected, plus learned positions."""

    def __init__(self, name, in_channels, patch, dim, grid_h, grid_w, rng, dtype):
        self.patch = int(patch)
        self.in_channels = int(in_channels)
        self.grid = (grid_h // self.patch, grid_w // self.patch)
        n_tokens = self.grid[0] * self.grid[1]
        self.proj = Linear(name, in_channels * patch * patch, dim, rng, dtype)
        self.positions = Parameter(
            f"{name}.pos", 0.02 * rng.standard_normal((n_tokens, dim)), dtype=dtype
        )

    def __call__(self, x: Tensor) -> Tensor:
        c, h, w = x.shape
        p = self.patch
        if h % p or w % p:
            raise ContractError(f"extents {h}x{w} not divisible by patch {p}")
        # [C,H,W] -> [n, C*p*p] with patches in row-major grid order.
        patches = (
            x.reshape(c, h // p, p, w // p, p)
            .transpose(1, 3, 0, 2, 4)
            .reshape((h // p) * (w // p), c * p * p)
        )
        return self.proj(patches) + self.positions

    def parameters(self):
        return self.proj.parameters() + [self.positions]


class AttentionBlock:
    """Pre-norm residual block: scaled dot-product MHSA then a feed-forward."""

    def __init__(self, name, dim, heads, rng, dtype, ffn_mult=2):
        if dim % heads:
            raise ContractError(f"dim {dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.norm_attn = LayerNorm(f"{name}.norm1", dim, dtype)
        self.wq = Linear(f"{name}.q", dim, dim, rng, dtype)
        self.wk = Linear(f"{name}.k", dim, dim, rng, dtype)
        self.wv = Linear(f"{name}.v", dim, dim, rng, dtype)
        self.wo = Linear(f"{name}.o", dim, dim, rng, dtype)
        self.norm_ffn = LayerNorm(f"{name}.norm2", dim, dtype)
        hidden = ffn_mult * dim
        self.ffn_in = Linear(f"{name}.ffn1", dim, hidden, rng, dtype)
        self.ffn_out = Linear(f"{name}.ffn2", hidden, dim, rng, dtype)

    def attention(self, tokens: Tensor) -> Tensor:
        q, k, v = self.wq(tokens), self.wk(tokens), self.wv(tokens)
        scale = 1.0 / np.sqrt(self.head_dim)
        outputs = []
        for h in range(self.heads):
            sl = slice(h * self.head_dim, (h + 1) * self.head_dim)
            scores = (q[:, sl] @ k[:, sl].T) * scale
            weights = scores.softmax(axis=1)  # rows sum to 1
            outputs.append(weights @ v[:, sl])
        merged = outputs[0] if len(outputs) == 1 else concat(outputs, axis=1)
        return self.wo(merged)

    def __call__(self, x: Tensor) -> Tensor:
        y = x + self.attention(self.norm_attn(x))
        return y + self.ffn_out(self.ffn_in(self.norm_ffn(y)).relu())

    def parameters(self):
        params = self.norm_attn.parameters()
        for lin in (self.wq, self.wk, self.wv, self.wo):
            params += lin.parameters()
        params += self.norm_ffn.parameters()
        params += self.ffn_in.parameters() + self.ffn_out.parameters()
        return params


class SpaceEncoder:
    """Patch embedding followed by a stack of attention blocks."""

    def __init__(self, name, in_channels, patch, dim, heads, layers, grid_h, grid_w,
                 rng, dtype):
        self.embed = PatchEmbed(f"{name}.embed", in_channels, patch, dim,
                                grid_h, grid_w, rng, dtype)
        self.blocks = [
            AttentionBlock(f"{name}.block{i}", dim, heads, rng, dtype)
            for i in range(layers)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        tokens = self.embed(x)
        for block in self.blocks:
            tokens = block(tokens)
        return tokens

    def parameters(self):
        params = self.embed.parameters()
        for block in self.blocks:
            params += block.parameters()
        return params
