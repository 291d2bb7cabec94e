"""Remote-sensing indices computed at the native raster resolution."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .raster import Raster
from .tensor import Parameter, Tensor

EPS = 1e-8


@dataclass
class IndexMap:
    """A normalized-difference index; values lie in [-1, 1] at full resolution."""

    kind: str
    values: np.ndarray


def normalized_difference(a_band, b_band, kind="nd") -> IndexMap:
    """Pointwise (a - b) / (a + b + eps), clamped to [-1, 1].

    Degenerate 0/0 pixels map to 0.  Antisymmetric exactly:
    normalized_difference(a, b).values == -normalized_difference(b, a).values.
    """
    a = np.asarray(a_band)
    b = np.asarray(b_band)
    if a.shape != b.shape:
        raise ContractError(f"band extents disagree: {a.shape} vs {b.shape}")
    if a.size and (a.min() < 0 or b.min() < 0):
        raise ContractError("normalized difference expects non-negative reflectances")
    values = np.clip((a - b) / (a + b + EPS), -1.0, 1.0)
    return IndexMap(kind=kind, values=values)


def ndvi(raster: Raster) -> IndexMap:
    """(NIR - RED) / (NIR + RED); requires nir and red bands to be tagged."""
    return normalized_difference(raster.band("nir"), raster.band("red"), kind="ndvi")


def compute_index(raster: Raster, spec) -> IndexMap:
    """Resolve an index spec: the name ``"ndvi"`` or a custom ``(a_tag, b_tag)``."""
    if spec == "ndvi":
        return ndvi(raster)
    if isinstance(spec, (tuple, list)) and len(spec) == 2:
        a, b = spec
        return normalized_difference(raster.band(a), raster.band(b), kind=f"nd({a},{b})")
    raise ContractError(f"unknown index spec {spec!r}")


@dataclass
class IndexHead:
    """Per-class affine map from a scalar index to class logits."""

    weight: Parameter  # [n_classes]
    bias: Parameter    # [n_classes]

    def parameters(self):
        return [self.weight, self.bias]


def make_index_head(name, n_classes, rng, dtype) -> IndexHead:
    limit = 1.0
    w = rng.uniform(-limit, limit, size=n_classes)
    return IndexHead(
        weight=Parameter(f"{name}.w", w, dtype=dtype),
        bias=Parameter(f"{name}.b", np.zeros(n_classes), dtype=dtype),
    )


def index_logits(index_values, head: IndexHead) -> Tensor:
    """Lift a scalar index map to [n_classes, H, W] logits, differentiably.

    The output keeps the source resolution: the index branch never changes
    scale, which is what lets it carry edges the downsampled branches lose.
    """
    if isinstance(index_values, IndexMap):
        index_values = index_values.values
    if isinstance(index_values, Tensor):
        flat = index_values.reshape(1, index_values.size)
        h, w = index_values.shape[-2], index_values.shape[-1]
    else:
        arr = np.asarray(index_values)
        h, w = arr.shape
        flat = Tensor(arr.reshape(1, arr.size), dtype=head.weight.dtype)
    n_classes = head.weight.shape[0]
    scaled = head.weight.reshape(n_classes, 1) @ flat
    return scaled.reshape(n_classes, h, w) + head.bias.tile_spatial(h, w)
