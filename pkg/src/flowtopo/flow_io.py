"""Reading and writing Middlebury ``.flo`` files, and 3x3 patch sampling.

The container layout is little-endian throughout::

    float32  magic (202021.25)
    int32    width
    int32    height
    float32  u, v interleaved per pixel, row-major (height * width * 2 values)
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

TAG_FLOAT = 202021.25
HEADER = struct.Struct("<fii")
MAX_DIM = 10**5
# Sintel marks invalid flow with huge sentinel values.
DEFAULT_SENTINEL_CUTOFF = 1e9


class FlowFormatError(ValueError):
    """Base class for malformed flow data."""


class BadMagic(FlowFormatError):
    pass


class Truncated(FlowFormatError):
    pass


class NonFiniteFlow(Truncated):
    """A NaN or infinite value was found in the payload."""


class NonPositiveDims(FlowFormatError):
    pass


class NoValidAnchors(ValueError):
    pass


@dataclass(eq=False)
class FlowField:
    """A ``height x width`` grid of (u, v) flow vectors stored as float32.

    ``data`` has shape ``(height, width, 2)``; ``data[..., 0]`` is the
    horizontal component.
    """

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if not (1 <= self.width <= MAX_DIM and 1 <= self.height <= MAX_DIM):
            raise NonPositiveDims(f"invalid dimensions {self.width}x{self.height}")
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.shape != (self.height, self.width, 2):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"({self.height}, {self.width}, 2)"
            )

    @classmethod
    def from_array(cls, data) -> "FlowField":
        data = np.asarray(data, dtype=np.float32)
        return cls(width=data.shape[1], height=data.shape[0], data=data)

    def __eq__(self, other):
        if not isinstance(other, FlowField):
            return NotImplemented
        # bitwise comparison so that -0.0 and 0.0 are told apart
        return (
            self.width == other.width
            and self.height == other.height
            and self.data.tobytes() == other.data.tobytes()
        )


def read_flo(buf: bytes) -> FlowField:
    """Parse the bytes of a ``.flo`` file."""
    buf = bytes(buf)
    if len(buf) < HEADER.size:
        if len(buf) >= 4 and struct.unpack_from("<f", buf)[0] != TAG_FLOAT:
            raise BadMagic("bad magic number")
        raise Truncated(f"header needs {HEADER.size} bytes, got {len(buf)}")
    magic, width, height = HEADER.unpack_from(buf)
    if magic != TAG_FLOAT:
        raise BadMagic(f"bad magic number {magic!r}, expected {TAG_FLOAT}")
    if width <= 0 or height <= 0 or width > MAX_DIM or height > MAX_DIM:
        raise NonPositiveDims(f"invalid dimensions {width}x{height}")
    n_bytes = width * height * 2 * 4
    if len(buf) - HEADER.size < n_bytes:
        raise Truncated(
            f"payload has {len(buf) - HEADER.size} bytes, header implies {n_bytes}"
        )
    data = np.frombuffer(buf, dtype="<f4", count=width * height * 2, offset=HEADER.size)
    if not np.all(np.isfinite(data)):
        raise NonFiniteFlow("flow payload contains NaN or infinite values")
    data = data.astype(np.float32).reshape(height, width, 2)
    return FlowField(width=width, height=height, data=data)


def write_flo(flow: FlowField) -> bytes:
    """Serialize ``flow`` to the exact byte layout accepted by :func:`read_flo`."""
    header = HEADER.pack(TAG_FLOAT, flow.width, flow.height)
    return header + flow.data.astype("<f4", copy=False).tobytes()


def read_flo_file(path) -> FlowField:
    with open(path, "rb") as fh:
        return read_flo(fh.read())


def write_flo_file(path, flow: FlowField):
    with open(path, "wb") as fh:
        fh.write(write_flo(flow))


def scan_flo_dir(directory) -> list[str]:
    """Sorted paths of every ``.flo`` file below ``directory``."""
    paths = []
    for root, _, files in os.walk(directory):
        paths.extend(os.path.join(root, f) for f in files if f.endswith(".flo"))
    return sorted(paths)


@dataclass
class PatchSet:
    """A batch of raw 3x3 flow patches.

    ``vectors`` is ``(n, 18)``, ordered ``(u1..u9, v1..v9)`` with pixels
    numbered down each column of the patch. ``provenance`` holds one
    ``(field_index, row, col)`` triple per patch, or -1 for synthetic data.
    """

    vectors: np.ndarray
    provenance: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if self.vectors.shape[1] != 18:
            raise ValueError("patch vectors must have 18 entries")
        if self.provenance is None:
            self.provenance = np.full((len(self.vectors), 3), -1, dtype=np.int64)

    def __len__(self):
        return len(self.vectors)


def patch_vector(window: np.ndarray) -> np.ndarray:
    """Flatten a ``(3, 3, 2)`` window into the column-major 18-vector."""
    u = window[:, :, 0].ravel(order="F")
    v = window[:, :, 1].ravel(order="F")
    return np.concatenate([u, v]).astype(float)


def _valid_anchor_mask(flow: FlowField, cutoff: float) -> np.ndarray:
    bad = np.any(np.abs(flow.data) > cutoff, axis=2)
    windows = np.lib.stride_tricks.sliding_window_view(bad, (3, 3))
    return ~windows.any(axis=(2, 3))


def sample_patches(fields, n: int, seed: int, cutoff: float = DEFAULT_SENTINEL_CUTOFF) -> PatchSet:
    """Draw ``n`` 3x3 patches uniformly, with replacement, over all anchors.

    An anchor is the top-left pixel of a window lying entirely inside one
    field. Windows touching a pixel with a component larger than ``cutoff``
    in magnitude are not eligible.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    fields = list(fields)
    anchors = []
    for f in fields:
        if f.width < 3 or f.height < 3:
            anchors.append(np.empty(0, dtype=np.int64))
            continue
        anchors.append(np.flatnonzero(_valid_anchor_mask(f, cutoff)))
    counts = np.array([len(a) for a in anchors], dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise NoValidAnchors("no field has a valid 3x3 window")

    rng = np.random.default_rng(seed)
    draws = rng.integers(0, total, size=n)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    which = np.searchsorted(offsets, draws, side="right") - 1

    vectors = np.empty((n, 18))
    provenance = np.empty((n, 3), dtype=np.int64)
    for t, (fi, g) in enumerate(zip(which, draws)):
        f = fields[fi]
        flat = anchors[fi][g - offsets[fi]]
        row, col = divmod(int(flat), f.width - 2)
        vectors[t] = patch_vector(f.data[row:row + 3, col:col + 3])
        provenance[t] = (fi, row, col)
    return PatchSet(vectors, provenance)
