"""Bandpass patch bookkeeping: windows, padding, tiling, recombination.

Window design
-------------
Per axis the window is a rectangle convolved with a truncated Gaussian. The
rectangle spans the patch minus half a stopband on each side, the Gaussian
is truncated at +-stopband/2 with sigma = stopband/6. Consequences:

* the window is exactly 1 on the passband (``patch - 2 * stopband`` bins)
  and tapers to ~3e-3 at the patch edge;
* two windows offset by ``patch - stopband`` bins sum to exactly 1 across
  their overlap, so a stopband-sized overlap is the minimum that tiles
  k-space. A bin counts as covered when the windows reaching it sum to at
  least 1; only the outer stopband-wide margin (zero padding) is exempt.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .core import is_torch
from .model import PatchCenter


class CoverageError(ValueError):
    """Part of the k-space grid is not reached by any patch passband."""

    def __init__(self, message, uncovered=()):
        super().__init__(message)
        self.uncovered = list(uncovered)


@dataclass(frozen=True)
class WindowSpec:
    patch_ny: int
    patch_nz: int
    stopband: int = 10

    def __post_init__(self):
        if self.stopband < 0:
            raise ValueError("stopband must be nonnegative")
        if min(self.passband) < 1:
            raise ValueError(
                f"passband {self.passband} < 1 for patch {(self.patch_ny, self.patch_nz)} "
                f"with stopband {self.stopband}"
            )

    @property
    def passband(self):
        return (self.patch_ny - 2 * self.stopband, self.patch_nz - 2 * self.stopband)


def _truncated_cdf(d, half, sigma):
    lo = ndtr(-half / sigma)
    hi = ndtr(half / sigma)
    cdf = (ndtr(d / sigma) - lo) / (hi - lo)
    return np.where(d <= -half, 0.0, np.where(d >= half, 1.0, cdf))


def window_1d(n, stopband):
    if stopband == 0:
        return np.ones(n)
    half = stopband / 2
    sigma = half / 3
    i = np.arange(n, dtype=float)
    left = half - 0.5
    right = n - half - 0.5
    return _truncated_cdf(i - left, half, sigma) - _truncated_cdf(i - right, half, sigma)


def make_window(spec):
    """Separable ``(patch_ny, patch_nz)`` window with values in [0, 1]."""
    return np.outer(window_1d(spec.patch_ny, spec.stopband), window_1d(spec.patch_nz, spec.stopband))


def pad_kspace(ksp, pad):
    """Zero-pad the two trailing axes by ``pad`` bins on every edge.

    DC stays at ``(ny // 2, nz // 2)`` of the padded grid.
    """
    if pad < 0:
        raise ValueError("pad must be >= 0")
    if pad == 0:
        return ksp
    widths = [(0, 0)] * (ksp.ndim - 2) + [(pad, pad), (pad, pad)]
    return np.pad(ksp, widths)


def crop_kspace(ksp, pad):
    if pad == 0:
        return ksp
    return ksp[..., pad:-pad, pad:-pad]


def _axis_starts(full, patch, overlap, stopband):
    if patch > full:
        raise ValueError(f"patch {patch} larger than grid {full}")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    stride = max(1, int(math.floor(patch * (1 - overlap) + 1e-9)))
    starts = list(range(0, full - patch + 1, stride))
    if starts[-1] != full - patch:
        starts.append(full - patch)
    return starts


def _axis_uncovered(full, patch, starts, stopband, tol=1e-9):
    total = np.zeros(full)
    w = window_1d(patch, stopband)
    for s in starts:
        total[s:s + patch] += w
    short = total < 1 - tol
    # the outer stopband-wide margins are only reachable by one tapered edge;
    # zero padding of at least one stopband keeps measured data out of them
    short[:stopband] = False
    short[full - stopband:] = False
    return np.flatnonzero(short)


@dataclass
class PatchGeometry:
    full_ny: int
    full_nz: int
    patch_ny: int
    patch_nz: int
    overlap_y: float
    overlap_z: float
    stopband: int
    centers: list = field(default_factory=list)

    @property
    def patch_shape(self):
        return (self.patch_ny, self.patch_nz)

    @property
    def full_shape(self):
        return (self.full_ny, self.full_nz)

    def start(self, center):
        return (
            self.full_ny // 2 + center.ky - self.patch_ny // 2,
            self.full_nz // 2 + center.kz - self.patch_nz // 2,
        )

    def window(self):
        return make_window(WindowSpec(self.patch_ny, self.patch_nz, self.stopband))


def plan_patches(full_shape, patch_shape, overlap=(0.5, 0.5), stopband=10, strict=True):
    """Lay patch centers on a regular stride grid over the full k-space.

    The last row/column of patches is shifted inward to stay in bounds. With
    ``strict`` (default) a :class:`CoverageError` lists bins whose summed
    window weight falls below 1; ``strict=False`` returns the plan regardless.
    """
    (fy, fz), (py, pz) = full_shape, patch_shape
    WindowSpec(py, pz, stopband)
    oy, oz = overlap
    ys = _axis_starts(fy, py, oy, stopband)
    zs = _axis_starts(fz, pz, oz, stopband)
    if strict:
        gy = _axis_uncovered(fy, py, ys, stopband)
        gz = _axis_uncovered(fz, pz, zs, stopband)
        if gy.size or gz.size:
            bins = [(int(r), int(c)) for r in gy for c in range(fz)]
            bins += [(int(r), int(c)) for r in range(fy) for c in gz if r not in set(gy)]
            raise CoverageError(
                f"overlap ({oy:.4g}, {oz:.4g}) leaves {len(bins)} k-space bins uncovered "
                f"(rows {gy.tolist()}, cols {gz.tolist()}); need overlap >= stopband/patch",
                bins,
            )
    centers = [
        PatchCenter(y + py // 2 - fy // 2, z + pz // 2 - fz // 2) for y in ys for z in zs
    ]
    return PatchGeometry(fy, fz, py, pz, oy, oz, stopband, centers)


def extract_patch(ksp_full, center, patch_shape):
    """Copy the contiguous block of ``patch_shape`` centered at ``center``."""
    fy, fz = ksp_full.shape[-2:]
    py, pz = patch_shape
    y0 = fy // 2 + center.ky - py // 2
    z0 = fz // 2 + center.kz - pz // 2
    if y0 < 0 or z0 < 0 or y0 + py > fy or z0 + pz > fz:
        raise IndexError(f"patch {patch_shape} at center {tuple(center)} exceeds grid {(fy, fz)}")
    return ksp_full[..., y0:y0 + py, z0:z0 + pz].copy()


def recombine(patches, geometry, window):
    """Window-weighted average of windowed k-space patches on the full grid.

    ``patches`` is a sequence of ``(center, windowed_patch)``; accumulation
    runs in the given order.
    """
    patches = list(patches)
    if not patches:
        raise CoverageError("no patches to recombine")
    lead = patches[0][1].shape[:-2]
    acc = np.zeros(lead + geometry.full_shape, dtype=complex)
    weight = np.zeros(geometry.full_shape)
    py, pz = geometry.patch_shape
    for center, data in patches:
        y0, z0 = geometry.start(center)
        acc[..., y0:y0 + py, z0:z0 + pz] += data
        weight[y0:y0 + py, z0:z0 + pz] += window
    empty = np.argwhere(weight <= 0)
    if empty.size:
        raise CoverageError(
            f"{len(empty)} k-space bins received no patch weight", [tuple(b) for b in empty.tolist()]
        )
    return acc / weight


def hard_data_projection(recon, measured, mask):
    """Insert measured samples wherever ``mask == 1``; keep ``recon`` elsewhere."""
    m = np.asarray(mask)
    if not np.all((m == 0) | (m == 1)):
        raise ValueError("hard data projection needs a binary mask")
    if is_torch(recon):
        import torch

        return torch.where(torch.as_tensor(m.astype(bool), device=recon.device), measured, recon)
    return np.where(m.astype(bool), measured, recon)
