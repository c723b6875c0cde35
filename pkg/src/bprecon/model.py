"""Multi-coil imaging model and the per-patch operator B = W M A (phase * .).

Shapes (leading batch axes allowed everywhere):

* image ``(..., nsets, ny, nz)``
* sensitivity maps ``(..., nsets, nc, ny, nz)``
* k-space ``(..., nc, ny, nz)``

Masks and windows are real ``(ny, nz)`` grids, hence self-adjoint. All
functions accept numpy arrays or torch tensors; the network reuses them
unchanged so that autograd differentiates the same operators tested here.
"""

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .core import GridError, as_like, check_grid, check_same_grid, fft2, ifft2


class PatchCenter(NamedTuple):
    """Patch center as integer bin offsets from the full-grid DC bin."""

    ky: int
    kz: int


def as_maps(maps):
    """Promote single-set ``(nc, ny, nz)`` maps to ``(1, nc, ny, nz)``."""
    if maps.ndim == 3:
        return maps[None]
    if maps.ndim < 4:
        raise GridError(f"sensitivity maps need shape (nsets, nc, ny, nz), got {tuple(maps.shape)}")
    return maps


def check_maps(maps, tol=1e-6):
    """Validate the per-pixel energy bound sum |S|^2 <= 1 over coils and sets."""
    maps = as_maps(maps)
    if maps.shape[-4] not in (1, 2):
        raise GridError(f"nsets must be 1 or 2, got {maps.shape[-4]}")
    energy = np.sum(np.abs(np.asarray(maps)) ** 2, axis=(-4, -3))
    if energy.max() > 1 + tol:
        raise GridError(f"sensitivity maps exceed unit energy (max {energy.max():.6g})")
    return maps


@lru_cache(maxsize=256)
def _phase(ny, nz, ky, kz, sign):
    rows = np.arange(ny)[:, None] / ny
    cols = np.arange(nz)[None, :] / nz
    ph = np.exp(sign * 2j * np.pi * (ky * rows + kz * cols))
    ph.setflags(write=False)
    return ph


def phase_modulate(img, center, inverse=False):
    """Multiply by exp(+-j 2 pi (ky row/ny + kz col/nz)).

    The forward ramp circularly shifts ``fft2(img)`` by ``(ky, kz)`` bins.
    ``center`` may also be a sequence of centers, one per leading batch entry.
    """
    check_grid(img, "image")
    sign = -1 if inverse else 1
    ny, nz = img.shape[-2:]
    if len(center) and isinstance(center[0], tuple):
        ph = np.stack([_phase(ny, nz, int(ky), int(kz), sign) for ky, kz in center])
        ph = ph.reshape((len(center),) + (1,) * (img.ndim - 3) + (ny, nz))
        return img * as_like(ph, img)
    ky, kz = center
    if ky == 0 and kz == 0:
        return img
    return img * as_like(_phase(ny, nz, int(ky), int(kz), sign), img)


def apply_model(img, maps):
    """A: weight each map set by its image channel, sum sets per coil, FFT."""
    maps = as_maps(maps)
    _check_image(img, maps)
    coil_imgs = (img[..., :, None, :, :] * maps).sum(axis=-4)
    return fft2(coil_imgs)


def apply_model_adjoint(ksp, maps):
    """A^H: sum over coils of conj(S) * ifft2(k), one channel per map set."""
    maps = as_maps(maps)
    check_same_grid(ksp, maps, ("k-space", "maps"))
    if ksp.shape[-3] != maps.shape[-3]:
        raise GridError(f"k-space has {ksp.shape[-3]} coils, maps have {maps.shape[-3]}")
    coil_imgs = ifft2(ksp)
    return (coil_imgs[..., None, :, :, :] * maps.conj()).sum(axis=-3)


def apply_B(img, maps, mask, window, center):
    """Patch forward operator ``W * M * A(phase * img)``."""
    _check_weights(img, mask, window)
    weight = as_like(np.asarray(window) * np.asarray(mask), img)
    return weight * apply_model(phase_modulate(img, center), maps)


def apply_B_adjoint(ksp, maps, mask, window, center):
    _check_weights(ksp, mask, window)
    weight = as_like(np.asarray(window) * np.asarray(mask), ksp)
    return phase_modulate(apply_model_adjoint(weight * ksp, maps), center, inverse=True)


def ls_gradient(y, u, maps, mask, window, center):
    """Gradient of 1/2 ||B y - W u||^2, i.e. ``B^H B y - B^H (W u)``.

    ``u`` is the raw (unwindowed) measured patch; the window is applied here.
    """
    w = as_like(np.asarray(window), u)
    residual = apply_B(y, maps, mask, window, center) - w * u
    return apply_B_adjoint(residual, maps, mask, window, center)


def _check_image(img, maps):
    check_same_grid(img, maps, ("image", "maps"))
    if img.ndim < 3 or img.shape[-3] != maps.shape[-4]:
        raise GridError(
            f"image shape {tuple(img.shape)} needs a map-set axis of size {maps.shape[-4]}"
        )


def _check_weights(x, mask, window):
    check_same_grid(x, np.asarray(mask), ("operand", "mask"))
    check_same_grid(x, np.asarray(window), ("operand", "window"))
