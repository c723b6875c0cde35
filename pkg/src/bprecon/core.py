"""Grid conventions and the centered unitary 2-D FFT.

Arrays are plain ``numpy.ndarray`` (or ``torch.Tensor`` inside the network)
with the two trailing axes ``(ny, nz)``:

* image / ComplexGrid: ``(..., ny, nz)`` complex
* MultiCoilKSpace: ``(..., nc, ny, nz)`` complex
* RealGrid (masks, windows): ``(ny, nz)`` real in ``[0, 1]``

The transform is unitary (``norm="ortho"``) and places DC at index
``(ny // 2, nz // 2)`` of k-space. The image origin is pixel ``(0, 0)``,
so a linear phase ramp on the image is an exact circular shift of k-space.
"""

import numpy as np

try:
    import torch
except ImportError:  # pragma: no cover
    torch = None

AXES = (-2, -1)


class GridError(ValueError):
    """Invalid grid dimensions or mismatched operands."""


def is_torch(x):
    return torch is not None and isinstance(x, torch.Tensor)


def check_grid(x, name="grid"):
    if x.ndim < 2 or x.shape[-1] == 0 or x.shape[-2] == 0:
        raise GridError(f"{name} must have two non-empty trailing axes, got shape {tuple(x.shape)}")


def check_same_grid(a, b, names=("a", "b")):
    if tuple(a.shape[-2:]) != tuple(b.shape[-2:]):
        raise GridError(
            f"{names[0]} grid {tuple(a.shape[-2:])} does not match {names[1]} grid {tuple(b.shape[-2:])}"
        )


def fft2(x):
    """Centered unitary forward DFT over the last two axes."""
    check_grid(x, "image")
    if is_torch(x):
        return torch.fft.fftshift(torch.fft.fft2(x, norm="ortho"), dim=AXES)
    return np.fft.fftshift(np.fft.fft2(x, axes=AXES, norm="ortho"), axes=AXES)


def ifft2(k):
    """Inverse of :func:`fft2` (and its adjoint)."""
    check_grid(k, "k-space")
    if is_torch(k):
        return torch.fft.ifft2(torch.fft.ifftshift(k, dim=AXES), norm="ortho")
    return np.fft.ifft2(np.fft.ifftshift(k, axes=AXES), axes=AXES, norm="ortho")


def inner_product(a, b):
    """``sum(conj(a) * b)`` over all elements; conjugate-linear in ``a``."""
    if a.shape != b.shape:
        raise GridError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    return complex(np.vdot(a, b))


def norm(x):
    return float(np.linalg.norm(np.ravel(x)))


def dc_index(ny, nz):
    return ny // 2, nz // 2


def as_like(arr, ref):
    """Move a numpy constant into the array family of ``ref`` (numpy or torch)."""
    if not is_torch(ref):
        return arr
    t = torch.tensor(np.asarray(arr), device=ref.device)
    real = {torch.complex128: torch.float64, torch.complex64: torch.float32}.get(ref.dtype, ref.dtype)
    if t.is_complex():
        return t.to(ref.dtype if ref.is_complex() else torch.complex128)
    return t.to(real)
