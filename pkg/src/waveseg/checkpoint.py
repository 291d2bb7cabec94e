"""Parameter checkpoint container.

Layout (all integers little-endian):

    magic   4 bytes  b"ISWT"
    version u16      currently 1
    count   u32      number of parameters
    then per parameter:
        name_len u16, name UTF-8 bytes
        rank     u8
        extents  rank * u32
        elements product(extents) * f64 little-endian

Elements are always stored as 64-bit floats; a float32 model round-trips
bit-exactly because every float32 is exactly representable in float64.
"""

from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from .errors import ContractError, FormatError

MAGIC = b"ISWT"
VERSION = 1


def save_checkpoint(named_arrays, path):
    """Write ``{name: ndarray}`` (or an iterable of Parameters) to ``path``."""
    if not isinstance(named_arrays, dict):
        named_arrays = OrderedDict((p.name, p.data) for p in named_arrays)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(named_arrays)))
        for name, arr in named_arrays.items():
            arr = np.asarray(arr)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.blob):
            raise FormatError(f"truncated checkpoint while reading {what}", offset=self.pos)
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def load_checkpoint(path):
    """Read a checkpoint into an ordered ``{name: float64 ndarray}``."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad checkpoint magic", offset=0)
    (version, count) = r.unpack("<HI", "header")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    out = OrderedDict()
    for _ in range(count):
        (name_len,) = r.unpack("<H", "name length")
        name = r.take(name_len, "name").decode("utf-8")
        (rank,) = r.unpack("<B", "rank")
        extents = r.unpack(f"<{rank}I", "extents") if rank else ()
        n_elem = int(np.prod(extents)) if extents else 1
        raw = r.take(8 * n_elem, f"elements of {name!r}")
        out[name] = np.frombuffer(raw, dtype="<f8").reshape(extents).copy()
    if r.pos != len(blob):
        raise FormatError("trailing bytes after last parameter", offset=r.pos)
    return out


def apply_checkpoint(params, state):
    """Load ``state`` arrays into Parameters in place, casting to each dtype."""
    by_name = {p.name: p for p in params}
    missing = set(by_name) - set(state)
    unexpected = set(state) - set(by_name)
    if missing or unexpected:
        raise ContractError(
            f"checkpoint mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
        )
    for name, arr in state.items():
        p = by_name[name]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise ContractError(
                f"checkpoint shape mismatch for {name!r}: {arr.shape} vs {p.data.shape}"
            )
        p.data = np.ascontiguousarray(arr, dtype=p.data.dtype)
