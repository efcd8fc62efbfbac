"""Synthetic datasets and the ABT1 binary tensor file format.

Datasets are pure functions of (spec, seed) and live in [-1, 1] to match
the generator's Tanh output. The file format stores one float32 tensor:

    magic "ABT1" | dtype u8 (0 = float32) | ndim u8 |
    ndim x u32 little-endian extents | row-major little-endian payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .linalg import assert_finite

__all__ = [
    "BadMagicError",
    "DatasetSpec",
    "ExtentOverflowError",
    "TensorFileError",
    "TruncatedPayloadError",
    "UnknownDtypeError",
    "generate_blobs",
    "generate_ring2d",
    "read_tensor_file",
    "write_tensor_file",
]


@dataclass
class DatasetSpec:
    """Declarative dataset selection: ring2d, blobs, or a pre-converted file."""

    kind: str = "ring2d"
    size: int = 4096
    seed: int = 0
    modes: int = 8
    radius: float = 0.7
    sigma: float = 0.05
    img_size: int = 16
    path: str = ""

    def validate(self) -> None:
        if self.kind not in ("ring2d", "blobs", "file"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind != "file" and self.size < 2:
            raise ValueError("dataset size must be at least 2")
        if self.kind == "ring2d":
            if self.modes < 1:
                raise ValueError("ring2d needs at least one mode")
            if self.sigma <= 0:
                raise ValueError("ring2d sigma must be positive")
        if self.kind == "blobs" and self.img_size not in (8, 16, 32):
            raise ValueError(f"blobs img_size must be 8, 16 or 32, got {self.img_size}")
        if self.kind == "file" and not self.path:
            raise ValueError("file dataset needs a path")

    def load(self) -> np.ndarray:
        self.validate()
        if self.kind == "ring2d":
            return generate_ring2d(self.size, self.modes, self.radius, self.sigma, self.seed)
        if self.kind == "blobs":
            return generate_blobs(self.size, self.img_size, self.seed)
        return read_tensor_file(self.path)


def generate_ring2d(n: int, k_modes: int = 8, radius: float = 0.7,
                    sigma: float = 0.05, seed: int = 0) -> np.ndarray:
    """Mixture of k Gaussians centered on a ring, (n, 2) float32."""
    rng = np.random.default_rng([seed, 101])
    angles = 2.0 * np.pi * rng.integers(0, k_modes, size=n) / k_modes
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    pts = centers + sigma * rng.standard_normal((n, 2))
    return pts.astype(np.float32)


def generate_blobs(n: int, img_size: int = 16, seed: int = 0) -> np.ndarray:
    """Grayscale Gaussian bumps at uniform random centers, (n, 1, s, s) in [-1, 1]."""
    rng = np.random.default_rng([seed, 202])
    s = img_size
    cx = rng.uniform(0.0, s, size=n)
    cy = rng.uniform(0.0, s, size=n)
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64)
    tau = s / 6.0
    d2 = (xx[None] - cx[:, None, None]) ** 2 + (yy[None] - cy[:, None, None]) ** 2
    imgs = 2.0 * np.exp(-d2 / (2.0 * tau * tau)) - 1.0
    return imgs[:, None, :, :].astype(np.float32)


# ---------------------------------------------------------------------------
# ABT1 tensor files

MAGIC = b"ABT1"
DTYPE_F32 = 0
MAX_ELEMENTS = 2**31


class TensorFileError(Exception):
    pass


class BadMagicError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


class UnknownDtypeError(TensorFileError):
    pass


class ExtentOverflowError(TensorFileError):
    pass


def write_tensor_file(path, arr: np.ndarray) -> None:
    """Write one tensor as float32. Non-finite payloads are rejected."""
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    assert_finite(arr, f"tensor payload for {path}")
    if arr.size > MAX_ELEMENTS:
        raise ExtentOverflowError(f"{arr.size} elements exceed the 2^31 cap")
    header = MAGIC + struct.pack("<BB", DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype("<f4", copy=False).tobytes())


def read_tensor_file(path) -> np.ndarray:
    """Read an ABT1 file back as a float32 array, bit-identical to the write."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise TruncatedPayloadError(f"{path}: file shorter than the magic")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}")
    if len(blob) < 6:
        raise TruncatedPayloadError(f"{path}: header truncated")
    dtype_code, ndim = struct.unpack_from("<BB", blob, 4)
    if dtype_code != DTYPE_F32:
        raise UnknownDtypeError(f"{path}: unknown dtype code {dtype_code}")
    if len(blob) < 6 + 4 * ndim:
        raise TruncatedPayloadError(f"{path}: extents truncated")
    shape = struct.unpack_from(f"<{ndim}I", blob, 6)
    count = 1
    for ext in shape:
        count *= int(ext)
    if count > MAX_ELEMENTS:
        raise ExtentOverflowError(f"{path}: {count} elements exceed the 2^31 cap")
    payload = blob[6 + 4 * ndim:]
    if len(payload) < 4 * count:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, expected {4 * count}"
        )
    if len(payload) > 4 * count:
        raise TensorFileError(f"{path}: {len(payload) - 4 * count} trailing bytes")
    arr = np.frombuffer(payload, dtype="<f4", count=count).reshape(shape)
    return arr.astype(np.float32, copy=True)
