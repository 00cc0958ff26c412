"""Synthetic objects and probes, the far-field forward model, and Poisson
measurement simulation.

The forward model takes a complex transmittance image x, multiplies each
scanned patch by the probe, and records far-field amplitudes
y_j = |F(d * x_j)| under the orthonormal 2D DFT. Noisy data replace the
intensities with Poisson draws scaled to a peak photon rate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft

from .fields import (
    ScanGrid,
    extract_stack,
    fft2_orthonormal,
    read_cfld,
    write_cfld,
)

NORMALIZATION_MODES = ("global-max", "per-pattern-max")


def make_scan_grid(
    image_shape: tuple[int, int],
    probe_size: int,
    grid_dims: tuple[int, int],
    spacing: int,
) -> ScanGrid:
    """Centered row-major raster grid of probe positions.

    The grid bounding box is centered in the image, rounding the margin
    down when the leftover is odd.

    :param image_shape: (N1, N2) image dimensions.
    :param probe_size: patch side length N_p.
    :param grid_dims: (rows, cols) of probe positions.
    :param spacing: pixel step between adjacent positions.
    """
    span_r = (grid_dims[0] - 1) * spacing + probe_size
    span_c = (grid_dims[1] - 1) * spacing + probe_size
    if span_r > image_shape[0] or span_c > image_shape[1]:
        raise ValueError(
            f"{grid_dims[0]}x{grid_dims[1]} grid with spacing {spacing} and "
            f"patch {probe_size} spans {span_r}x{span_c}, exceeding "
            f"{image_shape[0]}x{image_shape[1]}"
        )
    m_r = (image_shape[0] - span_r) // 2
    m_c = (image_shape[1] - span_c) // 2
    offsets = tuple(
        (m_r + i * spacing, m_c + j * spacing)
        for i in range(grid_dims[0])
        for j in range(grid_dims[1])
    )
    return ScanGrid(offsets=offsets, patch_size=probe_size, image_shape=tuple(image_shape))


def _smooth_unit_field(rng: np.random.Generator, shape, cutoff: float) -> np.ndarray:
    """Band-limited random field min-max normalized to [0, 1]."""
    g = rng.standard_normal(shape)
    spectrum = scipy.fft.fft2(g)
    fr = scipy.fft.fftfreq(shape[0])[:, None]
    fc = scipy.fft.fftfreq(shape[1])[None, :]
    lowpass = np.exp(-(fr**2 + fc**2) / (2 * cutoff**2))
    s = scipy.fft.ifft2(spectrum * lowpass).real
    return (s - s.min()) / (s.max() - s.min())


def synth_object(shape: tuple[int, int], seed: int, smoothness: float = 1 / 16) -> np.ndarray:
    """Deterministic smooth complex transmittance image.

    Amplitude lies in [0.5, 1.0] and phase in [-pi/2, pi/2]; both are
    band-limited random fields so recovery from overlapping patches is
    well-posed.

    :param shape: (N1, N2) image dimensions.
    :param seed: generator seed; equal seeds give identical images.
    :param smoothness: spectral cutoff as a fraction of the full band.
    """
    rng = np.random.default_rng(seed)
    amp = 0.5 + 0.5 * _smooth_unit_field(rng, shape, smoothness)
    pha = -np.pi / 2 + np.pi * _smooth_unit_field(rng, shape, smoothness)
    return amp * np.exp(1j * pha)


def synth_probe(
    size: int,
    seed: int,
    floor: float = 0.25,
    profile_frac: float = 0.8,
    quad_phase: float = np.pi,
    astig_phase: float = np.pi / 4,
) -> np.ndarray:
    """Deterministic circular-aperture probe with quadratic phase.

    Amplitude is 1 out to radius 0.4*size, rolls off smoothly (raised
    cosine down to `floor`) over a band of 0.05*size, and is exactly 0
    beyond the aperture stop. Every pixel inside the aperture keeps at
    least `floor` of the peak amplitude, which keeps the weighted
    consensus operators well conditioned at patch edges. Phase is a
    seeded quadratic form: isotropic defocus plus mild astigmatism.

    :param size: probe side length, at least 8.
    :param seed: generator seed.
    :param floor: minimum relative amplitude inside the aperture.
    :param profile_frac: width of the overall Gaussian envelope.
    :param quad_phase: scale of the isotropic quadratic phase (radians).
    :param astig_phase: scale of the astigmatic quadratic phase (radians).
    """
    if size < 8:
        raise ValueError("probe size must be at least 8")
    rng = np.random.default_rng(seed)
    c = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    u = xx - c
    v = yy - c
    r = np.hypot(u, v)
    radius = 0.4 * size
    band = 0.05 * size
    edge = np.where(
        r <= radius,
        1.0,
        np.where(
            r < radius + band,
            floor + (1 - floor) * 0.5 * (1 + np.cos(np.pi * (r - radius) / band)),
            0.0,
        ),
    )
    envelope = np.exp(-((r / (profile_frac * size)) ** 2))
    amp = envelope * edge
    defocus = quad_phase * (0.75 + 0.5 * rng.random())
    astig = astig_phase * (rng.random() - 0.5) * 2
    phase = defocus * (r / radius) ** 2 + astig * (u**2 - v**2) / radius**2
    return amp * np.exp(1j * phase)


def forward_amplitude(
    x: np.ndarray, probe: np.ndarray, grid: ScanGrid, workers: int = 1
) -> np.ndarray:
    """Noise-free measured amplitudes y_j = |F(probe * P_j x)| for all j.

    :return: (J, N_p, N_p) nonnegative float64 stack.
    """
    frames = probe[None, :, :] * extract_stack(x, grid)
    return np.abs(fft2_orthonormal(frames, workers=workers))


@dataclass(frozen=True)
class NoisyAmplitudes:
    """Poisson-noised amplitude stack in scaled-count units.

    :param stack: noisy amplitudes, sqrt of sampled photon counts.
    :param scale_factor: sqrt(r_p / M); reconstructions from this stack
        come out multiplied by this factor and must be de-scaled before
        comparison against the unscaled ground truth.
    """

    stack: np.ndarray
    scale_factor: float


def add_poisson_noise(
    clean: np.ndarray, r_p: float, seed: int, mode: str = "global-max"
) -> NoisyAmplitudes:
    """Replace intensities with Poisson draws at peak photon rate r_p.

    Each pattern's intensity is scaled so the reference maximum receives
    mean r_p photons: lambda = y^2 / M * r_p, where M is the maximum
    intensity over the whole stack (mode "global-max", default) or over
    each pattern separately (mode "per-pattern-max"). Output amplitudes
    are square roots of the sampled counts.

    Pattern j draws from its own generator stream derived from
    (seed, j), so results do not depend on evaluation order.
    """
    if r_p <= 0:
        raise ValueError("peak photon rate must be positive")
    if mode not in NORMALIZATION_MODES:
        raise ValueError(f"unknown normalization mode {mode!r}")
    intensity = np.asarray(clean, dtype=np.float64) ** 2
    if mode == "global-max":
        ref = np.full(len(intensity), intensity.max())
    else:
        ref = intensity.max(axis=(1, 2))
    out = np.empty_like(intensity)
    for j in range(len(intensity)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(j,)))
        lam = intensity[j] / ref[j] * r_p if ref[j] > 0 else np.zeros_like(intensity[j])
        out[j] = np.sqrt(rng.poisson(lam).astype(np.float64))
    scale = float(np.sqrt(r_p / intensity.max())) if intensity.max() > 0 else 1.0
    return NoisyAmplitudes(stack=out, scale_factor=scale)


# --- dataset directory layout -------------------------------------------

MANIFEST_NAME = "manifest.json"
TRUTH_NAME = "truth.cfld"
PROBE_NAME = "probe.cfld"


def _amplitude_name(j: int, noisy: bool) -> str:
    return f"{'yn' if noisy else 'y'}_{j:04d}.cfld"


def write_dataset(
    out_dir,
    x: np.ndarray,
    probe: np.ndarray,
    grid: ScanGrid,
    clean: np.ndarray,
    noisy: NoisyAmplitudes | None,
    sim_params: dict,
) -> Path:
    """Write manifest, ground truth, probe, and amplitude stacks.

    Amplitude patterns are stored one CFLD file each (imaginary parts
    zero); noisy files appear only when noise was simulated.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_cfld(out / TRUTH_NAME, x)
    write_cfld(out / PROBE_NAME, probe)
    for j in range(len(grid)):
        write_cfld(out / _amplitude_name(j, False), clean[j].astype(np.complex128))
    if noisy is not None:
        for j in range(len(grid)):
            write_cfld(out / _amplitude_name(j, True), noisy.stack[j].astype(np.complex128))
    manifest = {
        "image_shape": list(grid.image_shape),
        "probe_size": grid.patch_size,
        "num_patterns": len(grid),
        "grid_dims": list(sim_params["grid_dims"]),
        "spacing": sim_params["spacing"],
        "seed": sim_params["seed"],
        "noise": noisy is not None,
        "r_p": sim_params.get("r_p"),
        "normalization": sim_params.get("normalization"),
        "scale_factor": noisy.scale_factor if noisy is not None else 1.0,
    }
    with open(out / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


@dataclass(frozen=True)
class Dataset:
    """In-memory view of a simulated dataset directory."""

    truth: np.ndarray
    probe: np.ndarray
    grid: ScanGrid
    clean: np.ndarray
    noisy: np.ndarray | None
    scale_factor: float
    manifest: dict


def load_dataset(path) -> Dataset:
    """Load a dataset directory written by :func:`write_dataset`."""
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {root}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    truth = read_cfld(root / TRUTH_NAME)
    probe = read_cfld(root / PROBE_NAME)
    if truth.shape != tuple(manifest["image_shape"]):
        raise ValueError(
            f"manifest image_shape {manifest['image_shape']} does not match "
            f"ground truth file shape {list(truth.shape)}"
        )
    grid = make_scan_grid(
        tuple(manifest["image_shape"]),
        manifest["probe_size"],
        tuple(manifest["grid_dims"]),
        manifest["spacing"],
    )
    J = len(grid)
    clean = np.stack([read_cfld(root / _amplitude_name(j, False)).real for j in range(J)])
    noisy = None
    if manifest["noise"]:
        noisy = np.stack([read_cfld(root / _amplitude_name(j, True)).real for j in range(J)])
    return Dataset(
        truth=truth,
        probe=probe,
        grid=grid,
        clean=clean,
        noisy=noisy,
        scale_factor=float(manifest.get("scale_factor", 1.0)),
        manifest=manifest,
    )
