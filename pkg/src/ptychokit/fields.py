"""Complex-field containers, orthonormal 2D Fourier transforms, and patch
projection geometry.

A field is a 2D complex128 ndarray. A scan grid holds the integer top-left
offsets of every probe position; extraction and accumulation implement the
patch projector and its adjoint. Coverage maps hold the probe-weighted
normalizer used by the reconstruction solvers.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

CFLD_MAGIC = b"CFLD"
CFLD_VERSION = 1
_CFLD_HEADER = struct.Struct("<4sIQQ")


class NumericalFailure(RuntimeError):
    """Raised when a solver iterate stops being finite.

    :param iteration: first iteration at which a NaN/Inf appeared.
    """

    def __init__(self, iteration: int):
        super().__init__(f"non-finite values in iterate at iteration {iteration}")
        self.iteration = iteration


def fft2_orthonormal(f: np.ndarray, workers: int = 1) -> np.ndarray:
    """Unitary 2D DFT over the last two axes.

    :param f: 2D field or stack of fields (transform applied per leading index).
    :param workers: thread count handed to the FFT backend; results are
        bit-identical for any value because each slice is transformed
        independently.
    :return: transformed complex128 array of the same shape.
    """
    return scipy.fft.fft2(f, norm="ortho", axes=(-2, -1), workers=workers)


def ifft2_orthonormal(f: np.ndarray, workers: int = 1) -> np.ndarray:
    """Inverse of :func:`fft2_orthonormal`; same unitarity contract."""
    return scipy.fft.ifft2(f, norm="ortho", axes=(-2, -1), workers=workers)


@dataclass(frozen=True)
class ScanGrid:
    """Ordered probe positions over an image.

    :param offsets: J (row, col) integer pairs, top-left corner of each patch.
    :param patch_size: side length N_p of the square patches.
    :param image_shape: (N1, N2) of the full image the offsets index into.
    """

    offsets: tuple[tuple[int, int], ...]
    patch_size: int
    image_shape: tuple[int, int]

    def __post_init__(self):
        if len(self.offsets) < 1:
            raise ValueError("scan grid needs at least one offset")
        if len(set(self.offsets)) != len(self.offsets):
            raise ValueError("scan grid offsets must be distinct")
        n = self.patch_size
        n1, n2 = self.image_shape
        for r, c in self.offsets:
            if not (0 <= r and r + n <= n1 and 0 <= c and c + n <= n2):
                raise ValueError(
                    f"offset ({r}, {c}) places a {n}x{n} patch outside "
                    f"a {n1}x{n2} image"
                )

    def __len__(self) -> int:
        return len(self.offsets)


def extract_patch(image: np.ndarray, grid: ScanGrid, j: int) -> np.ndarray:
    """Return the patch at grid position j (a copy; the image is untouched)."""
    if not 0 <= j < len(grid):
        raise IndexError(f"patch index {j} out of range for J={len(grid)}")
    r, c = grid.offsets[j]
    n = grid.patch_size
    return image[r : r + n, c : c + n].copy()


def accumulate_patch(
    target: np.ndarray, patch: np.ndarray, grid: ScanGrid, j: int
) -> np.ndarray:
    """Add a patch into the target image at grid position j, in place.

    Adjoint of :func:`extract_patch` under the standard inner product.
    """
    n = grid.patch_size
    if patch.shape != (n, n):
        raise ValueError(f"patch shape {patch.shape} != ({n}, {n})")
    if not 0 <= j < len(grid):
        raise IndexError(f"patch index {j} out of range for J={len(grid)}")
    r, c = grid.offsets[j]
    target[r : r + n, c : c + n] += patch
    return target


def extract_stack(image: np.ndarray, grid: ScanGrid) -> np.ndarray:
    """Extract all J patches as a (J, N_p, N_p) stack."""
    n = grid.patch_size
    out = np.empty((len(grid), n, n), dtype=np.complex128)
    for j, (r, c) in enumerate(grid.offsets):
        out[j] = image[r : r + n, c : c + n]
    return out


def accumulate_stack(stack: np.ndarray, grid: ScanGrid) -> np.ndarray:
    """Scatter-add a (J, N_p, N_p) stack into a zero image.

    The sum runs in fixed index order so the result is bit-identical
    regardless of how the caller parallelized the per-patch work.
    """
    out = np.zeros(grid.image_shape, dtype=np.complex128)
    n = grid.patch_size
    for j, (r, c) in enumerate(grid.offsets):
        out[r : r + n, c : c + n] += stack[j]
    return out


def amplitude_power(probe: np.ndarray, kappa: float) -> np.ndarray:
    """Pointwise |probe|^kappa with 0^0 defined as 0.

    The zero convention keeps uncovered pixels at weight zero for every
    kappa, so the coverage normalizer vanishes exactly off the covered
    region.
    """
    a = np.abs(probe)
    return np.where(a > 0, a**kappa, 0.0)


@dataclass(frozen=True)
class CoverageMap:
    """Probe-weighted coverage of the image plane.

    :param weights: scatter-add of |probe|^kappa over all offsets (the
        diagonal of the normalizer).
    :param covered_mask: boolean map, true exactly where weights > 0.
    :param kappa: exponent the weights were built with.
    """

    weights: np.ndarray = field(repr=False)
    covered_mask: np.ndarray = field(repr=False)
    kappa: float = 0.0


def build_coverage(probe: np.ndarray, grid: ScanGrid, kappa: float) -> CoverageMap:
    """Build the |probe|^kappa coverage map for a grid."""
    if kappa < 0:
        raise ValueError("kappa must be nonnegative")
    wk = amplitude_power(probe, kappa)
    weights = np.zeros(grid.image_shape, dtype=np.float64)
    n = grid.patch_size
    for r, c in grid.offsets:
        weights[r : r + n, c : c + n] += wk
    return CoverageMap(weights=weights, covered_mask=weights > 0, kappa=kappa)


def divide_where_covered(
    image: np.ndarray, coverage: CoverageMap
) -> np.ndarray:
    """Pixelwise image / weights on the covered region, 0 elsewhere."""
    return np.divide(
        image,
        coverage.weights,
        out=np.zeros_like(image),
        where=coverage.covered_mask,
    )


def write_cfld(path, arr: np.ndarray) -> None:
    """Write a 2D complex field in the CFLD binary format.

    Layout: magic "CFLD", version u32, rows u64, cols u64, then rows*cols
    little-endian float64 (real, imag) pairs in row-major order.
    """
    a = np.ascontiguousarray(arr, dtype=np.complex128)
    if a.ndim != 2:
        raise ValueError(f"CFLD stores 2D fields, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(_CFLD_HEADER.pack(CFLD_MAGIC, CFLD_VERSION, a.shape[0], a.shape[1]))
        fh.write(a.astype("<c16").tobytes())


def read_cfld(path) -> np.ndarray:
    """Read a CFLD file back into a complex128 array."""
    with open(path, "rb") as fh:
        header = fh.read(_CFLD_HEADER.size)
        if len(header) != _CFLD_HEADER.size:
            raise ValueError(f"{path}: truncated CFLD header")
        magic, version, rows, cols = _CFLD_HEADER.unpack(header)
        if magic != CFLD_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != CFLD_VERSION:
            raise ValueError(f"{path}: unsupported CFLD version {version}")
        payload = fh.read(rows * cols * 16)
    if len(payload) != rows * cols * 16:
        raise ValueError(f"{path}: truncated CFLD payload")
    data = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return data.reshape(rows, cols)
