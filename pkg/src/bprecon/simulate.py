"""Synthetic ground truth: complex ellipse phantoms, Gaussian-lobe coils, k-space.

Both generators are defined on continuous normalized coordinates
``(2 i / n - 1)``, so the same spec sampled on a patch grid gives the
low-resolution version of the full-grid profile. That is what the patch
operators need, since sensitivity maps live at patch dimensions.
"""

from dataclasses import dataclass

import numpy as np

from .core import fft2, ifft2
from .model import apply_model, as_maps


@dataclass(frozen=True)
class PhantomSpec:
    ny: int = 64
    nz: int = 64
    n_ellipses: int = 8
    intensity: tuple = (0.2, 1.0)
    phase_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_ellipses < 1:
            raise ValueError("n_ellipses must be >= 1")
        if min(self.ny, self.nz) < 1:
            raise ValueError("phantom dims must be positive")


@dataclass(frozen=True)
class CoilSpec:
    nc: int = 4
    width: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.nc < 1:
            raise ValueError("nc must be >= 1")
        if self.width <= 0:
            raise ValueError("width must be positive")


def grid_coords(ny, nz):
    y = 2 * np.arange(ny) / ny - 1
    z = 2 * np.arange(nz) / nz - 1
    return np.meshgrid(y, z, indexing="ij")


def make_phantom(spec):
    """Random ellipses painted over a body ellipse, times a smooth phase."""
    rng = np.random.default_rng(spec.seed)
    y, z = grid_coords(spec.ny, spec.nz)
    lo, hi = spec.intensity
    mag = np.zeros((spec.ny, spec.nz))
    for n in range(spec.n_ellipses):
        if n == 0:
            cy, cz = rng.uniform(-0.05, 0.05, 2)
            ay, az = rng.uniform(0.65, 0.85, 2)
        else:
            cy, cz = rng.uniform(-0.5, 0.5, 2)
            ay, az = rng.uniform(0.06, 0.35, 2)
        theta = rng.uniform(0, np.pi)
        value = rng.uniform(lo, hi)
        c, s = np.cos(theta), np.sin(theta)
        u = (c * (y - cy) + s * (z - cz)) / ay
        v = (-s * (y - cy) + c * (z - cz)) / az
        mag[u * u + v * v <= 1] = value
    coef = rng.uniform(-1, 1, 6) * spec.phase_scale
    phase = coef[0] * np.pi + coef[1] * y + coef[2] * z + coef[3] * y * z + coef[4] * y**2 + coef[5] * z**2
    return mag * np.exp(1j * phase)


def make_coils(spec, ny, nz):
    """``(1, nc, ny, nz)`` maps with sum_c |S_c|^2 = 1 at every pixel."""
    rng = np.random.default_rng(spec.seed)
    y, z = grid_coords(ny, nz)
    angles = 2 * np.pi * (np.arange(spec.nc) + rng.uniform(-0.2, 0.2, spec.nc)) / spec.nc
    angles = angles + rng.uniform(0, 2 * np.pi)
    phases = rng.uniform(-1, 1, (spec.nc, 3))
    maps = np.empty((spec.nc, ny, nz), complex)
    for c in range(spec.nc):
        py, pz = 1.2 * np.cos(angles[c]), 1.2 * np.sin(angles[c])
        lobe = np.exp(-((y - py) ** 2 + (z - pz) ** 2) / (2 * spec.width**2))
        maps[c] = lobe * np.exp(1j * np.pi * (phases[c, 0] + 0.5 * phases[c, 1] * y + 0.5 * phases[c, 2] * z))
    maps /= np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return maps[None]


def coil_provider(spec):
    """Callable ``(ny, nz) -> maps`` sampling the same coil model at any size."""
    return lambda ny, nz: make_coils(spec, ny, nz)


def resample_maps(maps, ny, nz):
    """Fourier-resample externally supplied maps and renormalize to unit energy.

    Used for imported maps that only exist at one resolution.
    """
    maps = as_maps(np.asarray(maps))
    sy, sz = maps.shape[-2:]
    k = fft2(maps)
    out = np.zeros(maps.shape[:-2] + (ny, nz), complex)
    cy, cz = min(sy, ny), min(sz, nz)
    src = (slice(sy // 2 - cy // 2, sy // 2 - cy // 2 + cy), slice(sz // 2 - cz // 2, sz // 2 - cz // 2 + cz))
    dst = (slice(ny // 2 - cy // 2, ny // 2 - cy // 2 + cy), slice(nz // 2 - cz // 2, nz // 2 - cz // 2 + cz))
    out[..., dst[0], dst[1]] = k[..., src[0], src[1]]
    res = ifft2(out) * np.sqrt(ny * nz / (sy * sz))
    energy = np.sqrt(np.sum(np.abs(res) ** 2, axis=(-4, -3), keepdims=True))
    scale = np.where(energy > 1, energy, 1.0)
    return res / scale


def synthesize_kspace(phantom, maps):
    """Fully sampled multi-coil k-space of a single-set phantom."""
    img = phantom[None] if phantom.ndim == 2 else phantom
    return apply_model(img, maps)
