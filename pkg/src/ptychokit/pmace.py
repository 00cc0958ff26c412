"""PMACE solver: probe-weighted proximal agents, a probe-exponent consensus
operator, and the Mann iteration that drives their composition to a fixed
point.

The agents act per probe position on a stack of image patches,

    F_j(x_j) = (alpha x_j + D^reginv F*(y_j phase(F D x_j))) / (1 + alpha),

pulling each patch toward agreement with its measured amplitudes while
alpha (a noise-to-signal ratio) damps the step. The consensus operator
re-extracts every patch from the |d|^kappa-weighted average image, making
the stack consistent. The Mann loop relaxes the reflected composition
T = (2G - I)(2F - I) with weight rho.
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
    amplitude_power,
    build_coverage,
    divide_where_covered,
    extract_stack,
    fft2_orthonormal,
    ifft2_orthonormal,
)
from .metrics import nrmse_phase_aligned

RECIPROCAL_EPS_FRAC = 1e-6


@dataclass(frozen=True)
class PmaceParams:
    """Solver parameters.

    :param alpha: noise-to-signal ratio weighting the current estimate in
        the agent update; 0 means pure data fitting.
    :param rho: Mann averaging weight in (0, 1); changes the convergence
        rate but not the noise-free solution.
    :param kappa: probe amplitude exponent for the consensus weights.
    :param max_iters: exact number of iterations to run.
    :param eval_every: trace recording period in iterations.
    """

    alpha: float = 0.0
    rho: float = 0.5
    kappa: float = 1.25
    max_iters: int = 100
    eval_every: int = 1

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.eval_every < 1:
            raise ValueError("eval_every must be at least 1")


def phase_factor(z: np.ndarray) -> np.ndarray:
    """Pointwise z/|z| with the convention phase(0) = 0."""
    az = np.abs(z)
    out = np.zeros_like(z)
    np.divide(z, az, out=out, where=az > 0)
    return out


def regularized_reciprocal(probe: np.ndarray) -> np.ndarray:
    """conj(d) / (|d|^2 + eps^2) with eps = 1e-6 * max|d|.

    Equals 1/d wherever the probe is meaningfully illuminated and stays
    finite (near zero) on the dark exterior, so the agent update is total.
    """
    a = np.abs(probe)
    eps = RECIPROCAL_EPS_FRAC * a.max()
    return np.conj(probe) / (a**2 + eps**2)


def agent_update(
    x: np.ndarray,
    y: np.ndarray,
    probe: np.ndarray,
    alpha: float,
    workers: int = 1,
) -> np.ndarray:
    """Probe-weighted proximal agent applied to a patch or patch stack.

    Interpolates between the input and the data-fitting point
    D^reginv F*(y phase(F D x)) with weights alpha/(1+alpha) and
    1/(1+alpha).

    :param x: (N_p, N_p) patch or (J, N_p, N_p) stack.
    :param y: measured amplitudes with matching shape.
    """
    dinv = regularized_reciprocal(probe)
    fx = fft2_orthonormal(probe * x, workers=workers)
    fit = dinv * ifft2_orthonormal(y * phase_factor(fx), workers=workers)
    return (alpha * x + fit) / (1 + alpha)


def stitch_weighted(
    stack: np.ndarray,
    probe: np.ndarray,
    coverage: CoverageMap,
    grid: ScanGrid,
) -> np.ndarray:
    """|d|^kappa-weighted back-projection normalized on the covered region.

    Uncovered pixels are 0; the exponent is taken from the coverage map.
    """
    wk = amplitude_power(probe, coverage.kappa)
    image = accumulate_stack(wk[None, :, :] * stack, grid)
    return divide_where_covered(image, coverage)


def consensus(
    stack: np.ndarray,
    probe: np.ndarray,
    coverage: CoverageMap,
    grid: ScanGrid,
) -> np.ndarray:
    """Weighted-average projection onto mutually consistent patch stacks."""
    return extract_stack(stitch_weighted(stack, probe, coverage, grid), grid)


def mann_iterate(
    y: np.ndarray,
    probe: np.ndarray,
    grid: ScanGrid,
    params: PmaceParams,
    init: np.ndarray,
    trace_target: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    descale: float = 1.0,
    workers: int = 1,
) -> tuple[np.ndarray, list[tuple[int, float, float]]]:
    """Run the PMACE Mann iteration and return (reconstruction, trace).

    The loop body per iteration is

        w <- F(v);  z <- G(2w - v);  v <- v + 2 rho (z - w)

    starting from v_j = P_j(init). The reconstruction is the weighted
    back-projection of the final v, divided by `descale` (the simulator's
    amplitude scale factor for noisy data; 1 for noise-free data). The
    trace records phase-aligned NRMSE against `trace_target` (after the
    same de-scaling) every `eval_every` iterations plus iterations 0 and
    max_iters; without a target the NRMSE column is NaN.

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
    coverage = build_coverage(probe, grid, params.kappa)
    if mask is None:
        mask = coverage.covered_mask
    v = extract_stack(init, grid)
    start = time.perf_counter()
    rows: list[tuple[int, float, float]] = []

    def record(iteration: int) -> None:
        if trace_target is not None:
            recon = stitch_weighted(v, probe, coverage, grid) / descale
            err = nrmse_phase_aligned(recon, trace_target, mask)
        else:
            err = float("nan")
        rows.append((iteration, err, time.perf_counter() - start))

    record(0)
    for t in range(1, params.max_iters + 1):
        w = agent_update(v, y, probe, params.alpha, workers=workers)
        z = consensus(2 * w - v, probe, coverage, grid)
        v = v + 2 * params.rho * (z - w)
        if not np.isfinite(v).all():
            raise NumericalFailure(t)
        if t % params.eval_every == 0 or t == params.max_iters:
            record(t)
    recon = stitch_weighted(v, probe, coverage, grid) / descale
    return recon, rows
