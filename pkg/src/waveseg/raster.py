"""Multi-band raster and label containers, tiling, and prediction output.

Container layouts (little-endian throughout):

MSRS raster, version 1:
    magic    4 bytes  b"MSRS"
    version  u16
    height   u32
    width    u32
    bands    u16      (C)
    depth    u16      bit depth of the stored samples (8 or 16)
    tags     C * (kind u8, index u16)   kind: 0 nir, 1 red, 2 green, 3 blue, 4 other
    samples  H*W*C unsigned ints of the stated depth, row-major, band-interleaved

LBLS label map, version 1:
    magic    4 bytes  b"LBLS"
    version  u16
    height   u32
    width    u32
    classes  u16
    labels   H*W u16 class ids, row-major

Raw integer samples are normalized to [0, 1] on load by dividing by the bit
depth maximum (2^depth - 1); saving re-quantizes by rounding, so any raster
that originated from a container round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, FormatError

RASTER_MAGIC = b"MSRS"
LABEL_MAGIC = b"LBLS"
VERSION = 1

_KIND_CODES = {"nir": 0, "red": 1, "green": 2, "blue": 3, "other": 4}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


@dataclass(frozen=True)
class BandTag:
    """Semantic tag of one raster band; ``index`` disambiguates extra bands."""

    kind: str
    index: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ContractError(f"unknown band kind {self.kind!r}")

    @classmethod
    def parse(cls, text):
        text = text.strip().lower()
        if ":" in text:
            kind, idx = text.split(":", 1)
            return cls(kind, int(idx))
        return cls(text)

    def __str__(self):
        return self.kind if self.kind != "other" else f"other:{self.index}"


NIR = BandTag("nir")
RED = BandTag("red")
GREEN = BandTag("green")
BLUE = BandTag("blue")


def parse_band_list(text):
    """Parse a comma-separated tag list such as ``nir,red,green,blue``."""
    return tuple(BandTag.parse(part) for part in text.split(",") if part.strip())


@dataclass
class Raster:
    """Normalized multi-band image; ``data`` is float32 [H, W, C] in [0, 1]."""

    data: np.ndarray
    bands: tuple
    bit_depth: int = 8

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        self.bands = tuple(self.bands)
        if self.data.ndim != 3:
            raise ContractError(f"raster data must be [H,W,C], got shape {self.data.shape}")
        if len(self.bands) != self.data.shape[2]:
            raise ContractError(
                f"{len(self.bands)} band tags for {self.data.shape[2]} bands"
            )
        if not np.all(np.isfinite(self.data)):
            raise ContractError("raster contains non-finite values")

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def n_bands(self):
        return self.data.shape[2]

    def band(self, tag):
        """The [H, W] plane of the first band tagged ``tag``."""
        tag = BandTag.parse(tag) if isinstance(tag, str) else tag
        for i, b in enumerate(self.bands):
            if b == tag:
                return self.data[:, :, i]
        raise ContractError(f"raster has no {tag} band (bands: {[str(b) for b in self.bands]})")


@dataclass
class LabelMap:
    """Per-pixel class ids in [0, n_classes)."""

    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 2:
            raise ContractError(f"labels must be [H,W], got shape {self.labels.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ContractError(
                f"labels outside [0, {self.n_classes}): "
                f"range {self.labels.min()}..{self.labels.max()}"
            )

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]


@dataclass(frozen=True)
class TileSpec:
    """Sliding-window geometry; stride <= window guarantees gap-free coverage."""

    window: int
    stride: int

    def __post_init__(self):
        if self.window <= 0 or self.stride <= 0:
            raise ContractError(f"window/stride must be positive, got {self}")
        if self.stride > self.window:
            raise ContractError(f"stride {self.stride} exceeds window {self.window}")


# -- container I/O -----------------------------------------------------------


def _sample_dtype(depth):
    if depth == 8:
        return np.dtype("<u1")
    if depth == 16:
        return np.dtype("<u2")
    raise FormatError(f"unsupported bit depth {depth}")


def save_raster(raster: Raster, path):
    depth = raster.bit_depth
    peak = float((1 << depth) - 1)
    samples = np.rint(raster.data * peak).astype(_sample_dtype(depth))
    with open(path, "wb") as fh:
        fh.write(RASTER_MAGIC)
        fh.write(struct.pack("<HIIHH", VERSION, raster.height, raster.width,
                             raster.n_bands, depth))
        for tag in raster.bands:
            fh.write(struct.pack("<BH", _KIND_CODES[tag.kind], tag.index))
        fh.write(samples.tobytes())


def load_raster(path, band_tags=None) -> Raster:
    """Load an MSRS container; ``band_tags`` overrides the stored tags."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != RASTER_MAGIC:
        raise FormatError("bad raster magic", offset=0)
    header = struct.calcsize("<HIIHH")
    if len(blob) < 4 + header:
        raise FormatError("truncated raster header", offset=len(blob))
    version, height, width, n_bands, depth = struct.unpack_from("<HIIHH", blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported raster version {version}", offset=4)
    pos = 4 + header
    tags = []
    for _ in range(n_bands):
        if len(blob) < pos + 3:
            raise FormatError("truncated band tags", offset=pos)
        kind, index = struct.unpack_from("<BH", blob, pos)
        if kind not in _CODE_KINDS:
            raise FormatError(f"unknown band kind code {kind}", offset=pos)
        tags.append(BandTag(_CODE_KINDS[kind], index))
        pos += 3
    dtype = _sample_dtype(depth)
    expected = height * width * n_bands * dtype.itemsize
    if len(blob) - pos != expected:
        raise FormatError(
            f"sample payload is {len(blob) - pos} bytes, expected {expected}",
            offset=pos,
        )
    samples = np.frombuffer(blob, dtype=dtype, offset=pos).reshape(height, width, n_bands)
    if band_tags is not None:
        if len(band_tags) != n_bands:
            raise ContractError(
                f"{len(band_tags)} band tags supplied for {n_bands} stored bands"
            )
        tags = list(band_tags)
    peak = np.float32((1 << depth) - 1)
    return Raster(samples.astype(np.float32) / peak, tuple(tags), bit_depth=depth)


def save_labels(labels: LabelMap, path):
    with open(path, "wb") as fh:
        fh.write(LABEL_MAGIC)
        fh.write(struct.pack("<HIIH", VERSION, labels.height, labels.width,
                             labels.n_classes))
        fh.write(labels.labels.astype("<u2").tobytes())


def load_labels(path) -> LabelMap:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != LABEL_MAGIC:
        raise FormatError("bad label magic", offset=0)
    header = struct.calcsize("<HIIH")
    if len(blob) < 4 + header:
        raise FormatError("truncated label header", offset=len(blob))
    version, height, width, n_classes = struct.unpack_from("<HIIH", blob, 4)
    if version != VERSION:
        raise FormatError(f"unsupported label version {version}", offset=4)
    pos = 4 + header
    expected = height * width * 2
    if len(blob) - pos != expected:
        raise FormatError(
            f"label payload is {len(blob) - pos} bytes, expected {expected}", offset=pos
        )
    labels = np.frombuffer(blob, dtype="<u2", offset=pos).reshape(height, width)
    return LabelMap(labels.astype(np.int64), n_classes=n_classes)


# -- tiling -------------------------------------------------------------------


def tile_offsets(extent, window, stride):
    """Window start offsets along one axis, last one clamped to the border."""
    if window > extent:
        raise ContractError(f"window {window} exceeds extent {extent}")
    offsets = list(range(0, extent - window + 1, stride))
    if offsets[-1] != extent - window:
        offsets.append(extent - window)
    return offsets


def tile(raster: Raster, labels: LabelMap, spec: TileSpec):
    """Row-major sliding-window crops of a raster/label pair."""
    if (labels.height, labels.width) != (raster.height, raster.width):
        raise ContractError(
            f"label extents {labels.height}x{labels.width} do not match "
            f"raster {raster.height}x{raster.width}"
        )
    rows = tile_offsets(raster.height, spec.window, spec.stride)
    cols = tile_offsets(raster.width, spec.window, spec.stride)
    out = []
    for r in rows:
        for c in cols:
            crop = raster.data[r : r + spec.window, c : c + spec.window].copy()
            lcrop = labels.labels[r : r + spec.window, c : c + spec.window].copy()
            out.append(
                (
                    Raster(crop, raster.bands, bit_depth=raster.bit_depth),
                    LabelMap(lcrop, n_classes=labels.n_classes),
                )
            )
    return out


# -- prediction output ---------------------------------------------------------

#: Fixed palette for rendering class maps; cycles past 12 classes.
PALETTE = np.array(
    [
        (255, 255, 255),  # 0: background / clutter
        (64, 64, 64),     # 1: impervious
        (200, 30, 30),    # 2: building
        (120, 220, 80),   # 3: low vegetation
        (20, 120, 40),    # 4: tree
        (40, 90, 220),    # 5: water
        (240, 200, 40),
        (160, 60, 200),
        (40, 210, 210),
        (250, 130, 30),
        (130, 90, 40),
        (230, 120, 180),
    ],
    dtype=np.uint8,
)


def write_palette_image(labels: LabelMap, path):
    """Render the label map as a binary PPM using the fixed palette."""
    rgb = PALETTE[labels.labels % len(PALETTE)]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{labels.width} {labels.height}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def save_prediction(labels: LabelMap, path):
    """Write the label container plus a palette image for visual inspection."""
    save_labels(labels, path)
    write_palette_image(labels, f"{path}.ppm")
