"""
Simulating a ptychographic scan
===============================

Builds a synthetic complex transmittance image and probe, scans an 8x8
grid of overlapping probe positions across it, records far-field
diffraction amplitudes, and adds Poisson shot noise at a peak rate of
1e5 photons. The dataset is written to ./demo_output/dataset.
"""

from pathlib import Path

import numpy as np

import ptychokit as pk

OUT = Path("demo_output") / "dataset"

# Desk-scale geometry: a 176x176 image scanned by a 64x64 probe on an
# 8x8 grid spaced 14 pixels, i.e. adjacent patches share 50 of 64 pixels.
image_shape = (176, 176)
probe_size = 64
grid = pk.make_scan_grid(image_shape, probe_size, (8, 8), 14)
overlap = 1 - 14 / probe_size
print(f"scan grid: {len(grid)} positions, patch {probe_size}, "
      f"linear overlap {overlap:.0%}")
print(f"first offset {grid.offsets[0]}, last offset {grid.offsets[-1]}")

# The object has amplitude in [0.5, 1] and phase in [-pi/2, pi/2], both
# band-limited so overlapping patches constrain each other well.
x = pk.synth_object(image_shape, seed=7)
probe = pk.synth_probe(probe_size, seed=11)
print(f"object amplitude range [{np.abs(x).min():.3f}, {np.abs(x).max():.3f}]")
print(f"probe peak amplitude {np.abs(probe).max():.3f}, "
      f"dark pixels {np.mean(np.abs(probe) == 0):.0%} of the patch")

# Far-field amplitudes under the orthonormal 2D transform. Unitarity
# means each diffraction pattern carries exactly the energy of its
# illuminated patch.
y = pk.forward_amplitude(x, probe, grid)
frames = probe[None] * pk.extract_stack(x, grid)
energy_mismatch = max(
    abs(np.sum(y[j] ** 2) - np.sum(np.abs(frames[j]) ** 2))
    for j in range(len(grid))
)
print(f"amplitude stack {y.shape}, per-pattern energy mismatch "
      f"{energy_mismatch:.2e} (unitary transform)")

# Poisson noise: intensities are scaled so the brightest pixel across
# the stack receives a mean of r_p photons, then each pixel is replaced
# by the square root of a Poisson draw.
noisy = pk.add_poisson_noise(y, r_p=1e5, seed=6)
rel_err = np.linalg.norm(noisy.stack / noisy.scale_factor - y) / np.linalg.norm(y)
print(f"peak photon rate 1e5, amplitude scale factor {noisy.scale_factor:.4f}")
print(f"relative measurement perturbation {rel_err:.3f}")

pk.write_dataset(
    OUT, x, probe, grid, y, noisy,
    {"grid_dims": (8, 8), "spacing": 14,
     "seed": {"object": 7, "probe": 11, "noise": 6},
     "r_p": 1e5, "normalization": "global-max"},
)
files = sorted(p.name for p in OUT.iterdir())
print(f"wrote {len(files)} files to {OUT} "
      f"({files[0]} ... {files[-1]})")
