"""Synthetic multispectral scenes with class-dependent spectral signatures.

Each scene is background (class 0) plus three foreground regions placed on a
jittered cell grid; the class triple rotates with the scene index so a
dataset covers every class without cramming all of them into each tile.
Band values follow per-class reflectance priors: vegetation classes have NIR
well above RED (NDVI > 0.3 before noise, and region brightness jitter is a
common scale across bands so it cannot change NDVI), water has low NIR,
built classes are spectrally flat.  The boundary-dense variant instead
scatters many small overlapping shapes, for edge-sensitive ablations.

Samples are quantized to the 8-bit grid so raster containers round-trip
bit-exactly.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .raster import BLUE, GREEN, NIR, RED, LabelMap, Raster

BANDS = (NIR, RED, GREEN, BLUE)

#: Per-class base reflectance over (nir, red, green, blue).
CLASS_SPECTRA = np.array(
    [
        [0.24, 0.28, 0.35, 0.50],  # 0 clutter / background: bluish gray
        [0.46, 0.46, 0.46, 0.46],  # 1 impervious surface: flat mid
        [0.74, 0.76, 0.72, 0.74],  # 2 building: flat bright
        [0.62, 0.20, 0.52, 0.16],  # 3 low vegetation: NIR and green high
        [0.52, 0.08, 0.20, 0.10],  # 4 tree: NIR high, dark visible bands
        [0.02, 0.05, 0.10, 0.20],  # 5 water: dark, blue-leaning
    ]
)

VEGETATION_CLASSES = (3, 4)


def spectra_ndvi(class_id):
    nir, red = CLASS_SPECTRA[class_id, 0], CLASS_SPECTRA[class_id, 1]
    return (nir - red) / (nir + red)


def _draw_shape(labels, rng, class_id, center_r, center_c, radius):
    size = labels.shape[0]
    if rng.uniform() < 0.7:
        r0 = int(np.clip(center_r - radius, 0, size - 1))
        r1 = int(np.clip(center_r + radius, 1, size))
        c0 = int(np.clip(center_c - radius, 0, size - 1))
        c1 = int(np.clip(center_c + radius, 1, size))
        labels[r0:r1, c0:c1] = class_id
    else:
        yy, xx = np.ogrid[:size, :size]
        mask = (yy - center_r) ** 2 + (xx - center_c) ** 2 <= radius**2
        labels[mask] = class_id


def _scene_regular(labels, rng, scene_index, n_classes):
    """Three foreground regions on a jittered 2x2 cell grid.

    The class triple rotates deterministically with the scene index, so any
    dataset of two or more scenes covers every class without cramming all of
    them into each tile.
    """
    size = labels.shape[0]
    n_foreground = n_classes - 1
    class_ids = [(scene_index * 3 + j) % n_foreground + 1 for j in range(3)]
    cells = [(r, c) for r in range(2) for c in range(2)]
    rng.shuffle(cells)
    cell = size / 2.0
    for class_id, (r, c) in zip(class_ids, cells):
        center_r = (r + 0.5) * cell + rng.uniform(-0.12, 0.12) * cell
        center_c = (c + 0.5) * cell + rng.uniform(-0.12, 0.12) * cell
        radius = rng.uniform(0.18, 0.26) * size
        _draw_shape(labels, rng, class_id, center_r, center_c, radius)


def _scene_boundary_dense(labels, rng, n_classes):
    """Many small overlapping shapes: a high boundary-to-area ratio."""
    size = labels.shape[0]
    for _ in range(14):
        class_id = int(rng.integers(1, n_classes))
        center_r = rng.uniform(0, size)
        center_c = rng.uniform(0, size)
        radius = rng.uniform(0.05, 0.12) * size
        _draw_shape(labels, rng, class_id, center_r, center_c, max(radius, 1.5))


def synth_dataset(seed, n_samples, size, n_classes=6, noise=0.0125, boundary_dense=False):
    """Deterministic list of (Raster, LabelMap) scenes; all classes appear."""
    if size < 16 or size % 2:
        raise ContractError(f"size must be even and >= 16, got {size}")
    if n_classes > CLASS_SPECTRA.shape[0]:
        raise ContractError(
            f"at most {CLASS_SPECTRA.shape[0]} classes have spectra, got {n_classes}"
        )
    rng = np.random.default_rng(seed)
    samples = []
    covered = set()
    for scene_index in range(n_samples):
        labels = np.zeros((size, size), dtype=np.int64)
        if boundary_dense:
            _scene_boundary_dense(labels, rng, n_classes)
        else:
            _scene_regular(labels, rng, scene_index, n_classes)
        covered |= set(np.unique(labels))
        if scene_index == n_samples - 1:
            # The rotation normally covers every class across the dataset;
            # patch any class that heavy occlusion (or a one-scene dataset)
            # left out, so the coverage guarantee is unconditional.
            patch = max(3, size // 10)
            for class_id in sorted(set(range(n_classes)) - covered):
                r = (class_id * 2 * patch) % (size - patch)
                labels[r : r + patch, r : r + patch] = class_id

        image = CLASS_SPECTRA[labels].copy()
        # Per-region brightness jitter: common scale across bands, NDVI-neutral.
        for class_id in range(n_classes):
            mask = labels == class_id
            if mask.any():
                image[mask] *= rng.uniform(0.92, 1.08)
        image += rng.normal(0.0, noise, size=image.shape)
        image = np.clip(image, 0.0, 1.0)
        # Quantize through the exact load path so containers round-trip bit-exactly.
        image = np.rint(image * 255.0).astype(np.uint8).astype(np.float32) / np.float32(255.0)
        samples.append(
            (
                Raster(image, BANDS, bit_depth=8),
                LabelMap(labels, n_classes=n_classes),
            )
        )
    return samples
