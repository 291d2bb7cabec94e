"""Phase-aware wave-token feature extractor.

Tokens are represented as waves: an amplitude (the absolute value of the
token) and a phase predicted from the token content.  Token mixing aggregates
the real and imaginary parts across tokens with two learnable weight sets, so
the phase modulates how much each token contributes to each output position.
With all phases zero the block collapses to a plain linear token mixer, which
is also the state it is initialized in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError
from .nn import LayerNorm, Linear, fan_in_uniform
from .tensor import Parameter, Tensor


@dataclass
class WaveToken:
    """Amplitude/phase pair plus the derived real and imaginary parts."""

    amplitude: Tensor  # [n, d], non-negative
    phase: Tensor      # [n, d]
    real: Tensor       # amplitude * cos(phase)
    imag: Tensor       # amplitude * sin(phase)


def to_wave(x: Tensor, phase: Tensor) -> WaveToken:
    """Convert tokens to waves: amplitude |x| with the given per-entry phase."""
    if x.shape != phase.shape:
        raise DimensionError(f"phase shape {phase.shape} does not match tokens {x.shape}")
    amplitude = x.abs()
    return WaveToken(
        amplitude=amplitude,
        phase=phase,
        real=amplitude * phase.cos(),
        imag=amplitude * phase.sin(),
    )


def channel_fc(x: Tensor, channel_weights: Tensor) -> Tensor:
    """Per-token linear map over channels; no cross-token interaction."""
    if x.data.ndim != 2 or channel_weights.shape != (x.shape[1], x.shape[1]):
        raise DimensionError(
            f"channel weights {channel_weights.shape} do not fit tokens {x.shape}"
        )
    return x @ channel_weights.T


def token_mix(wave: WaveToken, mix_real: Tensor, mix_imag: Tensor) -> Tensor:
    """Aggregate across tokens: mix_real @ real + mix_imag @ imag.

    For fixed phases this is linear in the amplitudes; with zero phases it
    equals ``mix_real @ amplitude`` and with phases pi/2 ``mix_imag @ amplitude``.
    """
    n = wave.amplitude.shape[0]
    if mix_real.shape != (n, n) or mix_imag.shape != (n, n):
        raise DimensionError(
            f"mixing weights must be [{n},{n}], got {mix_real.shape} and {mix_imag.shape}"
        )
    return mix_real @ wave.real + mix_imag @ wave.imag


class WaveBlock:
    """Pre-norm residual block: wave token mixing then channel mixing.

    ``phase_mode`` selects how phases are produced: ``content`` predicts them
    from the token through a linear map, ``static`` learns one fixed table.
    Both start at zero, so a fresh block sits exactly at the degenerate
    plain-MLP point.
    """

    def __init__(self, name, n_tokens, dim, rng, dtype, phase_mode="content"):
        if phase_mode not in ("content", "static"):
            raise ContractError(f"unknown phase mode {phase_mode!r}")
        self.phase_mode = phase_mode
        self.norm_tokens = LayerNorm(f"{name}.norm1", dim, dtype)
        if phase_mode == "content":
            self.phase_proj = Linear(f"{name}.phase", dim, dim, rng, dtype, zero_init=True)
            self.phase_table = None
        else:
            self.phase_proj = None
            self.phase_table = Parameter(
                f"{name}.phase.table", np.zeros((n_tokens, dim)), dtype=dtype
            )
        self.mix_real = Parameter(
            f"{name}.mix_real", fan_in_uniform(rng, (n_tokens, n_tokens), n_tokens), dtype=dtype
        )
        self.mix_imag = Parameter(
            f"{name}.mix_imag", fan_in_uniform(rng, (n_tokens, n_tokens), n_tokens), dtype=dtype
        )
        self.norm_channels = LayerNorm(f"{name}.norm2", dim, dtype)
        self.channel_weights = Parameter(
            f"{name}.channel", fan_in_uniform(rng, (dim, dim), dim), dtype=dtype
        )

    def phases_for(self, tokens: Tensor) -> Tensor:
        if self.phase_mode == "content":
            return self.phase_proj(tokens)
        return self.phase_table

    def __call__(self, x: Tensor) -> Tensor:
        z = self.norm_tokens(x)
        mixed = token_mix(to_wave(z, self.phases_for(z)), self.mix_real, self.mix_imag)
        y = x + mixed
        z2 = self.norm_channels(y)
        return y + channel_fc(z2, self.channel_weights)

    def parameters(self):
        params = self.norm_tokens.parameters()
        if self.phase_proj is not None:
            params += self.phase_proj.parameters()
        else:
            params.append(self.phase_table)
        params += [self.mix_real, self.mix_imag]
        params += self.norm_channels.parameters()
        params.append(self.channel_weights)
        return params
