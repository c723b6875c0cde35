"""Unrolled ISTA-style patch network.

Each iteration is a gradient step on the windowed least-squares data term
followed by a residual convolutional denoiser working on the real and
imaginary parts of every map-set channel. The network output is the full
windowed k-space patch with the windowed measured samples inserted.

Tensors carry a leading batch axis: image ``(B, nsets, ny, nz)`` complex,
k-space ``(B, nc, ny, nz)`` complex.
"""

import struct

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .bandpass import (
    CoverageError,
    crop_kspace,
    extract_patch,
    hard_data_projection,
    pad_kspace,
    recombine,
)
from .core import as_like
from .model import PatchCenter, apply_B_adjoint, apply_model, apply_model_adjoint, ls_gradient, phase_modulate

N_HIDDEN = 5
BN_EPS = 1e-5


class Denoiser(nn.Module):
    """Residual CNN: expand conv, 5 hidden convs, contract conv (3x3, circular).

    Every conv but the last is followed by batch normalization and ReLU.
    """

    def __init__(self, nsets=1, features=16, dtype=torch.float64):
        super().__init__()
        ch = 2 * nsets
        widths = [ch] + [features] * (N_HIDDEN + 1) + [ch]
        self.nsets = nsets
        self.features = features
        self.convs = nn.ModuleList(
            nn.Conv2d(i, o, 3, padding=1, padding_mode="circular", dtype=dtype)
            for i, o in zip(widths[:-1], widths[1:])
        )
        self.norms = nn.ModuleList(
            nn.BatchNorm2d(features, eps=BN_EPS, dtype=dtype) for _ in range(N_HIDDEN + 1)
        )

    def forward(self, y):
        dtype = self.convs[0].weight.dtype
        x = torch.cat([y.real, y.imag], dim=1).to(dtype)
        h = x
        for conv, norm in zip(self.convs[:-1], self.norms):
            h = F.relu(norm(conv(h)))
        out = (x + self.convs[-1](h)).to(y.real.dtype)
        return torch.complex(out[:, : self.nsets], out[:, self.nsets:])

    def zero_(self):
        """Make the block an exact identity (all conv weights and biases zero)."""
        with torch.no_grad():
            for conv in self.convs:
                conv.weight.zero_()
                conv.bias.zero_()
        return self


def denoise_block(y, denoiser, mode="infer"):
    """Run ``denoiser`` in ``train`` (batch statistics) or ``infer`` (running statistics) mode."""
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    if y.shape[1] != denoiser.nsets:
        raise ValueError(f"input has {y.shape[1]} channels, denoiser expects {denoiser.nsets}")
    was_training = denoiser.training
    denoiser.train(mode == "train")
    try:
        return denoiser(y)
    finally:
        denoiser.train(was_training)


def update_block(y, u, maps, mask, window, center, step):
    """``y + step * (B^H B y - B^H W u)``."""
    return y + step * ls_gradient(y, u, maps, mask, window, center)


class UnrolledNet(nn.Module):
    def __init__(self, n_iter=4, nsets=1, features=16, norm_scale=1e5, dtype=torch.float64):
        super().__init__()
        self.n_iter = n_iter
        self.nsets = nsets
        self.features = features
        self.norm_scale = norm_scale
        self.steps = nn.Parameter(torch.full((n_iter,), -2.0, dtype=torch.float64))
        self.denoisers = nn.ModuleList(Denoiser(nsets, features, dtype) for _ in range(n_iter))

    @classmethod
    def identity(cls, n_iter=4, nsets=1, features=16, **kw):
        """Zero step sizes and identity denoisers: output is the projected initial estimate."""
        net = cls(n_iter, nsets, features, **kw)
        with torch.no_grad():
            net.steps.zero_()
        for d in net.denoisers:
            d.zero_()
        return net.eval()

    def initial(self, u, maps, mask, window, center):
        return apply_B_adjoint(as_like(window, u) * u, maps, mask, window, center)

    def forward(self, u, maps, mask, window, center):
        """Windowed full k-space patch estimate, measured bins projected."""
        w = as_like(np.asarray(window), u)
        y = self.initial(u, maps, mask, window, center)
        for m in range(self.n_iter):
            y = update_block(y, u, maps, mask, window, center, self.steps[m])
            y = self.denoisers[m](y)
        k = w * apply_model(phase_modulate(y, center), maps)
        return hard_data_projection(k, w * u, mask)


def _to_tensor(x):
    return torch.as_tensor(np.asarray(x, dtype=complex))


def reconstruct_patch(u, maps, mask, window, center, net):
    """Inference on one k-space patch ``u`` of shape ``(nc, ny, nz)`` (numpy in, numpy out)."""
    net.eval()
    with torch.no_grad():
        out = net(_to_tensor(u)[None], _to_tensor(maps), mask, window, center)
    return out[0].numpy()


def normalization_scale(ksp, target=1e5, block=5):
    """Multiplier giving the central ``block x block`` k-space energy ``target**2``."""
    ny, nz = ksp.shape[-2:]
    y0, z0 = ny // 2 - block // 2, nz // 2 - block // 2
    energy = float(np.sum(np.abs(np.asarray(ksp)[..., y0:y0 + block, z0:z0 + block]) ** 2))
    if not energy > 0:
        raise ValueError("zero energy in the k-space center; cannot normalize")
    return target / np.sqrt(energy)


def reconstruct_full(ksp, maps_provider, mask, geometry, net, pad=0, workers=1, normalize=True):
    """Patch-wise reconstruction of measured multi-coil k-space ``(nc, ny, nz)``.

    ``geometry`` is planned on the padded grid; ``maps_provider(ny, nz)``
    returns sensitivity maps at any grid size. Returns ``{"kspace", "image"}``.
    """
    from .runtime import run_patches

    ny, nz = ksp.shape[-2:]
    if geometry.full_shape != (ny + 2 * pad, nz + 2 * pad):
        raise CoverageError(
            f"geometry grid {geometry.full_shape} does not match padded k-space {(ny + 2 * pad, nz + 2 * pad)}"
        )
    scale = normalization_scale(ksp, net.norm_scale) if normalize else 1.0
    kpad = pad_kspace(ksp * scale, pad)
    mpad = pad_kspace(np.asarray(mask, dtype=float), pad)
    window = geometry.window()
    patch_maps = maps_provider(*geometry.patch_shape)

    def job(center):
        u = extract_patch(kpad, center, geometry.patch_shape)
        m = extract_patch(mpad, center, geometry.patch_shape)
        return reconstruct_patch(u, patch_maps, m, window, center, net)

    outputs = run_patches([(job, (c,)) for c in geometry.centers], workers)
    full = recombine(zip(geometry.centers, outputs), geometry, window)
    full = crop_kspace(full, pad) / scale
    full = hard_data_projection(full, ksp, mask)
    image = apply_model_adjoint(full, maps_provider(ny, nz))
    return {"kspace": full, "image": image}


# -- checkpoint format -------------------------------------------------------

MAGIC = b"BPNETCKP"
VERSION = 1
_HEADER = struct.Struct("<8sIIIIId")


def layer_dims(net):
    d = net.denoisers[0]
    return [(c.in_channels, c.out_channels, *c.kernel_size) for c in d.convs]


def _ordered_arrays(net):
    for m, d in enumerate(net.denoisers):
        yield net.steps[m : m + 1]
        for conv in d.convs:
            yield conv.weight
            yield conv.bias
        for norm in d.norms:
            yield norm.weight
            yield norm.bias
            yield norm.running_mean
            yield norm.running_var


def save_checkpoint(net, path):
    dims = layer_dims(net)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, net.n_iter, net.nsets, net.features, len(dims), net.norm_scale))
        for dim in dims:
            f.write(struct.pack("<4I", *dim))
        for arr in _ordered_arrays(net):
            f.write(arr.detach().cpu().numpy().astype("<f4").tobytes())


class CheckpointError(ValueError):
    pass


def load_checkpoint(path, dtype=torch.float64):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError("file too short for checkpoint header")
    magic, version, n_iter, nsets, features, n_layers, norm_scale = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    net = UnrolledNet(n_iter, nsets, features, norm_scale=norm_scale, dtype=dtype)
    off = _HEADER.size
    dims = [struct.unpack_from("<4I", raw, off + 16 * i) for i in range(n_layers)]
    if [tuple(d) for d in dims] != layer_dims(net):
        raise CheckpointError(f"layer dims {dims} do not match the network layout")
    off += 16 * n_layers
    with torch.no_grad():
        for arr in _ordered_arrays(net):
            n = arr.numel()
            if off + 4 * n > len(raw):
                raise CheckpointError("checkpoint payload truncated")
            vals = np.frombuffer(raw, "<f4", n, off).astype(np.float64)
            arr.copy_(torch.as_tensor(vals).reshape(arr.shape))
            off += 4 * n
    if off != len(raw):
        raise CheckpointError(f"{len(raw) - off} trailing bytes after payload")
    return net.eval()
