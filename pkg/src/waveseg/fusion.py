"""Channel attention and the multi-domain voting head.

Channel attention gates each channel of a feature map by a sigmoid of a small
squeeze-excite path over the spatial channel means.  The voting head fuses
per-domain class-probability maps with adaptive convex weights (softmax over
free logits), with majority and uniform-average voting as baselines.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .raster import LabelMap
from .tensor import Parameter, Tensor, softmax_np
from .nn import fan_in_uniform


def channel_mean(feature_map: Tensor) -> Tensor:
    """Spatial mean per channel: [C, H, W] -> [C]."""
    if feature_map.data.ndim != 3:
        raise ContractError(f"expected [C,H,W], got shape {feature_map.shape}")
    _, h, w = feature_map.shape
    return feature_map.sum(axis=(1, 2)) * (1.0 / (h * w))


class ChannelAttention:
    """Squeeze-excite gate: reduce C -> C/r, rectify, expand back, sigmoid."""

    def __init__(self, name, channels, reduction, rng, dtype):
        if channels % reduction:
            raise ContractError(
                f"channels {channels} not divisible by reduction {reduction}"
            )
        hidden = channels // reduction
        self.reduce = Parameter(
            f"{name}.reduce", fan_in_uniform(rng, (hidden, channels), channels), dtype=dtype
        )
        self.expand = Parameter(
            f"{name}.expand", fan_in_uniform(rng, (channels, hidden), hidden), dtype=dtype
        )

    def gate(self, feature_map: Tensor) -> Tensor:
        """The per-channel gate in (0, 1), shape [C]."""
        channels = self.expand.shape[0]
        if feature_map.shape[0] != channels:
            raise ContractError(
                f"feature map has {feature_map.shape[0]} channels, weights expect {channels}"
            )
        pooled = channel_mean(feature_map).reshape(channels, 1)
        squeezed = (self.reduce @ pooled).relu()
        return (self.expand @ squeezed).sigmoid().reshape(channels)

    def __call__(self, feature_map: Tensor) -> Tensor:
        _, h, w = feature_map.shape
        return feature_map * self.gate(feature_map).tile_spatial(h, w)

    def parameters(self):
        return [self.reduce, self.expand]


def channel_attend(feature_map: Tensor, weights: ChannelAttention) -> Tensor:
    return weights(feature_map)


@dataclass
class FusionState:
    """Per-domain class-probability maps plus the adaptive vote logits.

    ``domain_probs`` is ordered space, wave, then one entry per index.  When
    ``vote_logits`` is None the effective weights are uniform.
    """

    domain_probs: list
    vote_logits: Parameter | None = None
    domain_names: list = field(default_factory=list)

    def __post_init__(self):
        if not self.domain_probs:
            raise ContractError("fusion needs at least one domain")
        shapes = {p.shape for p in self.domain_probs}
        if len(shapes) != 1:
            raise ContractError(f"domain probability extents disagree: {sorted(shapes)}")
        if self.vote_logits is not None and self.vote_logits.size != len(self.domain_probs):
            raise ContractError(
                f"{self.vote_logits.size} vote logits for {len(self.domain_probs)} domains"
            )

    def weights(self) -> np.ndarray:
        """Effective convex weights: softmax of the logits, or uniform."""
        k = len(self.domain_probs)
        if self.vote_logits is None:
            return np.full(k, 1.0 / k)
        return softmax_np(self.vote_logits.data, axis=0)


def _weighted_probs(state: FusionState, weights) -> np.ndarray:
    acc = np.zeros(state.domain_probs[0].shape, dtype=np.float64)
    for w, probs in zip(weights, state.domain_probs):
        acc += float(w) * probs.data
    return acc


def superpose(state: FusionState, n_classes=None) -> LabelMap:
    """Per-pixel argmax of the weight-superposed probability maps.

    Ties break toward the lowest class id.  Inference-only: no tape.
    """
    fused = _weighted_probs(state, state.weights())
    labels = np.argmax(fused, axis=0)
    return LabelMap(labels, n_classes=n_classes or fused.shape[0])


def superpose_soft(state: FusionState) -> Tensor:
    """Differentiable convex combination of the domain probability maps.

    A valid distribution per pixel since the weights sum to one; gradients
    reach both the vote logits and every branch.
    """
    if state.vote_logits is not None:
        lam = state.vote_logits.softmax(axis=0)
        terms = [probs * lam[k] for k, probs in enumerate(state.domain_probs)]
    else:
        uniform = 1.0 / len(state.domain_probs)
        terms = [probs * uniform for probs in state.domain_probs]
    acc = terms[0]
    for term in terms[1:]:
        acc = acc + term
    return acc


def vote_average(state: FusionState, n_classes=None) -> LabelMap:
    """Superposition with the weights fixed uniform."""
    k = len(state.domain_probs)
    fused = _weighted_probs(state, np.full(k, 1.0 / k))
    labels = np.argmax(fused, axis=0)
    return LabelMap(labels, n_classes=n_classes or fused.shape[0])


def vote_majority(state: FusionState, n_classes=None) -> LabelMap:
    """Per-pixel mode of the per-domain argmaxes; ties to the lowest class id."""
    k = state.domain_probs[0].shape[0]
    votes = np.stack([np.argmax(p.data, axis=0) for p in state.domain_probs])
    counts = np.stack([(votes == c).sum(axis=0) for c in range(k)])
    labels = np.argmax(counts, axis=0)
    return LabelMap(labels, n_classes=n_classes or k)
