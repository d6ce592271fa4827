"""Two-moons generation and IDX (MNIST) file parsing."""
from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from attnlab.errors import FormatError, ParameterError
from attnlab.numeric.rng import RandomSource


@dataclass(frozen=True)
class MoonSpec:
    n_train: int = 400
    n_test: int = 100
    noise: float = 0.2
    seed: int = 0


@dataclass
class LabeledPoints:
    x: np.ndarray
    y: np.ndarray

    def rows(self):
        for (a, b), label in zip(self.x, self.y):
            yield {"x": float(a), "y": float(b), "label": int(label)}


def make_moons(n: int, noise: float, rng: RandomSource) -> LabeledPoints:
    """Class 0 on (cos t, sin t), class 1 on (1 - cos t, 1/2 - sin t), t ~ U[0, pi].

    Class 0 gets ceil(n/2) points, class 1 floor(n/2); isotropic N(0, noise^2)
    is added to every coordinate.
    """
    if n < 2:
        raise ParameterError(f"need at least 2 points, got {n}")
    if noise < 0:
        raise ParameterError(f"noise must be nonnegative, got {noise}")
    n0 = (n + 1) // 2
    t = math.pi * rng.derive("t").uniforms(n)
    x = np.empty((n, 2))
    x[:n0, 0] = np.cos(t[:n0])
    x[:n0, 1] = np.sin(t[:n0])
    x[n0:, 0] = 1.0 - np.cos(t[n0:])
    x[n0:, 1] = 0.5 - np.sin(t[n0:])
    if noise > 0:
        x += noise * rng.derive("noise").normals(2 * n).reshape(n, 2)
    y = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n - n0, dtype=np.int64)]
    return LabeledPoints(x, y)


def generate_moons(spec: MoonSpec) -> tuple[LabeledPoints, LabeledPoints]:
    root = RandomSource(spec.seed)
    train = make_moons(spec.n_train, spec.noise, root.derive("moons/train"))
    test = make_moons(spec.n_test, spec.noise, root.derive("moons/test"))
    return train, test


_IDX_TYPES = {0x08: ("B", np.uint8)}
_IDX_MAGIC_RANK = {0x00000801: 1, 0x00000803: 3}


@dataclass
class IdxData:
    array: np.ndarray
    dims: tuple[int, ...]
    magic: int

    @property
    def is_images(self) -> bool:
        return len(self.dims) == 3

    def as_rows(self) -> np.ndarray:
        """Images flattened to N x (rows*cols) and scaled to [0, 1]; labels as int64."""
        if self.is_images:
            return self.array.reshape(self.dims[0], -1).astype(np.float64) / 255.0
        return self.array.astype(np.int64)


def parse_idx(data: bytes) -> IdxData:
    if len(data) < 4:
        raise FormatError(f"IDX header needs 4 bytes, got {len(data)}")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in _IDX_MAGIC_RANK:
        raise FormatError(f"unsupported IDX magic 0x{magic:08X} (expected 0x00000801 or 0x00000803)")
    rank = _IDX_MAGIC_RANK[magic]
    header = 4 + 4 * rank
    if len(data) < header:
        raise FormatError(f"IDX header truncated: {len(data)} bytes, need {header}")
    dims = struct.unpack(f">{rank}I", data[4:header])
    count = int(np.prod(dims, dtype=np.int64))
    payload = len(data) - header
    if payload != count:
        raise FormatError(f"IDX payload has {payload} bytes, dims {dims} need {count}")
    arr = np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)
    return IdxData(arr, tuple(int(d) for d in dims), magic)


def load_idx(path) -> IdxData:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return parse_idx(fh.read())
