"""SHARP and SHARP+ solvers over frame stacks s_j = d * P_j x.

Both iterate a relaxed combination of two projections: P_a replaces each
frame's Fourier magnitudes with the measured ones, and P_Q makes the
overlapping frames consistent with a single image through a
|d|^2-weighted back-projection. The two variants differ only in the sign
of the beta (P_Q - I) term, which is what the comparison here isolates:

    sharp_plus:  s <- 2 beta P_Q P_a s + (1 - 2 beta) P_a s - beta (P_Q - I) s
    sharp:       s <- 2 beta P_Q P_a s + (1 - 2 beta) P_a s + beta (P_Q - I) s
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .fields import (
    CoverageMap,
    NumericalFailure,
    ScanGrid,
    accumulate_stack,
    build_coverage,
    divide_where_covered,
    extract_stack,
    fft2_orthonormal,
    ifft2_orthonormal,
)
from .metrics import nrmse_phase_aligned
from .pmace import phase_factor

VARIANTS = ("sharp", "sharp_plus")


@dataclass(frozen=True)
class SharpParams:
    """Solver parameters.

    :param beta: relaxation weight in (0, 1).
    :param max_iters: exact number of iterations to run.
    :param variant: "sharp" or "sharp_plus" (sign of the beta (P_Q - I) term).
    :param eval_every: trace recording period in iterations.
    """

    beta: float = 0.5
    max_iters: int = 100
    variant: str = "sharp_plus"
    eval_every: int = 1

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")


def p_a(frames: np.ndarray, y: np.ndarray, workers: int = 1) -> np.ndarray:
    """Fourier-magnitude projection: F*(y phase(F s)) per frame."""
    fs = fft2_orthonormal(frames, workers=workers)
    return ifft2_orthonormal(y * phase_factor(fs), workers=workers)


def stitch_frames(
    frames: np.ndarray,
    probe: np.ndarray,
    coverage2: CoverageMap,
    grid: ScanGrid,
) -> np.ndarray:
    """Image estimate (sum_k P_k^t |d|^2)^{-1} sum_j P_j^t conj(d) s_j.

    :param coverage2: coverage map built with kappa = 2.
    """
    image = accumulate_stack(np.conj(probe)[None, :, :] * frames, grid)
    return divide_where_covered(image, coverage2)


def p_q(
    frames: np.ndarray,
    probe: np.ndarray,
    grid: ScanGrid,
    coverage2: CoverageMap | None = None,
) -> np.ndarray:
    """Consistency projection: back-project, normalize, re-illuminate."""
    if coverage2 is None:
        coverage2 = build_coverage(probe, grid, 2.0)
    image = stitch_frames(frames, probe, coverage2, grid)
    return probe[None, :, :] * extract_stack(image, grid)


def sharp_iterate(
    y: np.ndarray,
    probe: np.ndarray,
    grid: ScanGrid,
    params: SharpParams,
    init: np.ndarray,
    trace_target: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    descale: float = 1.0,
    workers: int = 1,
) -> tuple[np.ndarray, list[tuple[int, float, float]]]:
    """Run the selected SHARP variant and return (reconstruction, trace).

    Frames start as s_j = probe * P_j(init). The reconstruction is the
    weighted back-projection of the final frames divided by `descale`;
    trace semantics match the PMACE solver (rows at iteration 0, every
    `eval_every`, and max_iters; NRMSE against the de-scaled target).

    Raises :class:`NumericalFailure` if an iterate stops being finite.
    """
    if init.shape != grid.image_shape:
        raise ValueError(
            f"init shape {init.shape} does not match image {grid.image_shape}"
        )
    if y.shape != (len(grid), grid.patch_size, grid.patch_size):
        raise ValueError(
            f"amplitude stack shape {y.shape} does not match grid "
            f"({len(grid)}, {grid.patch_size}, {grid.patch_size})"
        )
    coverage2 = build_coverage(probe, grid, 2.0)
    if mask is None:
        mask = coverage2.covered_mask
    sign = -1.0 if params.variant == "sharp_plus" else 1.0
    beta = params.beta
    s = probe[None, :, :] * extract_stack(init, grid)
    start = time.perf_counter()
    rows: list[tuple[int, float, float]] = []

    def record(iteration: int) -> None:
        if trace_target is not None:
            recon = stitch_frames(s, probe, coverage2, grid) / descale
            err = nrmse_phase_aligned(recon, trace_target, mask)
        else:
            err = float("nan")
        rows.append((iteration, err, time.perf_counter() - start))

    record(0)
    for t in range(1, params.max_iters + 1):
        pa = p_a(s, y, workers=workers)
        s = (
            2 * beta * p_q(pa, probe, grid, coverage2)
            + (1 - 2 * beta) * pa
            + sign * beta * (p_q(s, probe, grid, coverage2) - s)
        )
        if not np.isfinite(s).all():
            raise NumericalFailure(t)
        if t % params.eval_every == 0 or t == params.max_iters:
            record(t)
    recon = stitch_frames(s, probe, coverage2, grid) / descale
    return recon, rows
