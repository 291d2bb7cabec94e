"""Small trainable building blocks shared by the feature branches."""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .tensor import Parameter, Tensor, custom_op


def fan_in_uniform(rng, shape, fan_in):
    """Scaled-uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    limit = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape)


class Linear:
    """Affine map applied row-wise: [n, in] -> [n, out]."""

    def __init__(self, name, in_dim, out_dim, rng, dtype, zero_init=False, bias=True):
        w = np.zeros((in_dim, out_dim)) if zero_init else fan_in_uniform(
            rng, (in_dim, out_dim), in_dim
        )
        self.weight = Parameter(f"{name}.w", w, dtype=dtype)
        self.bias = Parameter(f"{name}.b", np.zeros(out_dim), dtype=dtype) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias.tile_rows(out.shape[0])
        return out

    def parameters(self):
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class LayerNorm:
    """Per-row standardization over the channel axis with learnable scale/shift."""

    def __init__(self, name, dim, dtype, eps=1e-5):
        self.scale = Parameter(f"{name}.scale", np.ones(dim), dtype=dtype)
        self.shift = Parameter(f"{name}.shift", np.zeros(dim), dtype=dtype)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim != 2 or x.shape[1] != self.scale.shape[0]:
            raise ContractError(
                f"layer norm expects [n, {self.scale.shape[0]}], got {x.shape}"
            )
        data = x.data
        mu = data.mean(axis=1, keepdims=True)
        var = data.var(axis=1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        normed = (data - mu) * inv
        gamma = self.scale.data
        scale_p, shift_p = self.scale, self.shift

        def grad_fn(g):
            # Exact for the biased variance used above (ddof=0).
            gy = g * gamma
            gx = inv * (
                gy
                - gy.mean(axis=1, keepdims=True)
                - normed * (gy * normed).mean(axis=1, keepdims=True)
            )
            return (gx, (g * normed).sum(axis=0), g.sum(axis=0))

        out = normed * gamma + shift_p.data
        return custom_op(out, (x, scale_p, shift_p), grad_fn)

    def parameters(self):
        return [self.scale, self.shift]
