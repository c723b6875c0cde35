"""Toy-scale supervised training of the unrolled patch network.

Each step draws a batch of fully sampled examples, applies a random mask from
a pre-generated bank, normalizes by the central 5x5 k-space energy, crops a
random patch from the zero-padded k-space and minimizes the l1 error between
the network output and the windowed fully sampled patch. After the last step
the batch-norm running statistics are re-estimated as a plain average over
fresh training batches (the exponential average kept during training mostly
reflects the last few small batches). Gradients come from
torch autograd through the complete pipeline (FFTs, coil maps, window, mask,
hard projection); parameters are updated with :func:`adam_step`.

Complex gradient convention: for a real loss ``L`` of a complex tensor ``z``
autograd returns ``dL/dRe(z) + 1j * dL/dIm(z)``. Under this convention the
gradient of ``||fft2(x)||^2`` is ``2 x``, and the backward rule of the unitary
FFT is the unitary inverse FFT.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .bandpass import WindowSpec, make_window, pad_kspace
from .model import PatchCenter
from .network import UnrolledNet, normalization_scale, save_checkpoint
from .sampling import MaskSpec, generate_mask
from .simulate import CoilSpec, PhantomSpec, make_coils, make_phantom, synthesize_kspace


class TrainingFailure(RuntimeError):
    """Non-finite loss or gradients."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class TrainConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch: int = 4
    steps: int = 500
    patch: tuple = (32, 32)
    stopband: int = 5
    pad: int = 5
    R_range: tuple = (3.5, 4.5)
    density: str = "variable"
    calib: int = 12
    n_masks: int = 24
    n_iter: int = 4
    features: int = 16
    nsets: int = 1
    norm_scale: float = 1e5
    recal_batches: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")


@dataclass
class NormalizationRecord:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")


@dataclass
class Example:
    kspace: np.ndarray
    phantom: np.ndarray
    coils: CoilSpec
    _maps: dict = field(default_factory=dict, repr=False)

    def maps(self, ny, nz):
        if (ny, nz) not in self._maps:
            self._maps[(ny, nz)] = make_coils(self.coils, ny, nz)
        return self._maps[(ny, nz)]


def make_dataset(n, shape=(64, 64), nc=4, seed=0, n_ellipses=8):
    """``n`` phantom examples, each with its own coil geometry."""
    out = []
    for i in range(n):
        s = seed * 1_000_003 + i
        ph = make_phantom(PhantomSpec(shape[0], shape[1], n_ellipses=n_ellipses, seed=s))
        coils = CoilSpec(nc, seed=s)
        out.append(Example(synthesize_kspace(ph, make_coils(coils, *shape)), ph, coils))
    return out


def make_mask_bank(n, shape, R_range, density="variable", calib=12, seed=0):
    rng = np.random.default_rng(seed)
    Rs = rng.uniform(R_range[0], R_range[1], n)
    return [generate_mask(MaskSpec(shape[0], shape[1], float(R), density, calib=calib, seed=seed * 7919 + i))
            for i, R in enumerate(Rs)]


def normalize_example(ksp, target=1e5, block=5):
    """Scale so the central ``block x block`` energy (all coils) is ``target**2``."""
    scale = normalization_scale(ksp, target, block)
    return ksp * scale, NormalizationRecord(scale)


def l1_loss(pred, truth):
    """Mean of ``|Re(d)| + |Im(d)|`` over all elements, ``d = pred - truth``."""
    if tuple(pred.shape) != tuple(truth.shape):
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs {tuple(truth.shape)}")
    d = pred - truth
    return (d.real.abs() + d.imag.abs()).mean() if torch.is_tensor(d) else float(
        np.mean(np.abs(d.real) + np.abs(d.imag))
    )


def backward(loss, net):
    """Reverse-mode gradients of ``loss`` for every trainable parameter of ``net``."""
    params = dict(net.named_parameters())
    for p in params.values():
        p.grad = None
    if not torch.isfinite(loss):
        raise TrainingFailure(f"non-finite loss {loss.item()}", {"loss": loss.item()})
    loss.backward()
    grads = {}
    bad = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        if not torch.isfinite(g).all():
            bad[name] = int((~torch.isfinite(g)).sum())
        grads[name] = g
    if bad:
        raise TrainingFailure(f"non-finite gradients in {sorted(bad)}", bad)
    return grads


def adam_step(params, grads, state, config):
    """One bias-corrected Adam update of ``params`` (dict of tensors) in place."""
    state["t"] = state.get("t", 0) + 1
    t = state["t"]
    m, v = state.setdefault("m", {}), state.setdefault("v", {})
    b1, b2 = config.beta1, config.beta2
    with torch.no_grad():
        for name, p in params.items():
            g = grads[name]
            if name not in m:
                m[name] = torch.zeros_like(p)
                v[name] = torch.zeros_like(p)
            m[name].mul_(b1).add_(g, alpha=1 - b1)
            v[name].mul_(b2).addcmul_(g, g, value=1 - b2)
            mhat = m[name] / (1 - b1**t)
            vhat = v[name] / (1 - b2**t)
            p.sub_(config.lr * mhat / (vhat.sqrt() + config.epsilon))
    return params, state


def make_batch(dataset, masks, config, rng, window):
    """Random masked, normalized, cropped patches plus windowed ground truth."""
    py, pz = config.patch
    us, truths, ms, maps, centers = [], [], [], [], []
    for _ in range(config.batch):
        ex = dataset[rng.integers(len(dataset))]
        mask = masks[rng.integers(len(masks))]
        full, _ = normalize_example(ex.kspace, config.norm_scale)
        full = pad_kspace(full, config.pad)
        mpad = pad_kspace(mask, config.pad)
        fy, fz = full.shape[-2:]
        y0 = rng.integers(fy - py + 1)
        z0 = rng.integers(fz - pz + 1)
        sl = (Ellipsis, slice(y0, y0 + py), slice(z0, z0 + pz))
        m = mpad[sl[1:]]
        us.append(full[sl] * m)
        truths.append(window * full[sl])
        ms.append(m[None])
        maps.append(ex.maps(py, pz))
        centers.append(PatchCenter(int(y0 + py // 2 - fy // 2), int(z0 + pz // 2 - fz // 2)))
    return (
        torch.as_tensor(np.stack(us)),
        torch.as_tensor(np.stack(maps)),
        np.stack(ms),
        centers,
        torch.as_tensor(np.stack(truths)),
    )


def build_net(config):
    torch.manual_seed(config.seed)
    return UnrolledNet(config.n_iter, config.nsets, config.features, norm_scale=config.norm_scale)


def train_loop(dataset, config, masks=None, net=None, curve_path=None, dump_path=None, log=None):
    """Train and return ``(net, curve)``; ``curve`` holds ``(step, loss, wall_ms)`` rows."""
    if masks is None:
        shape = dataset[0].kspace.shape[-2:]
        masks = make_mask_bank(config.n_masks, shape, config.R_range, config.density, config.calib, config.seed)
    if net is None:
        net = build_net(config)
    rng = np.random.default_rng(config.seed)
    window = make_window(WindowSpec(*config.patch, config.stopband))
    params = dict(net.named_parameters())
    state = {}
    curve = []
    t0 = time.perf_counter()
    net.train()
    for step in range(config.steps):
        u, maps, m, centers, truth = make_batch(dataset, masks, config, rng, window)
        pred = net(u, maps, m, window, centers)
        loss = l1_loss(pred, truth)
        try:
            grads = backward(loss, net)
        except TrainingFailure:
            if dump_path is not None:
                save_checkpoint(net, dump_path)
            raise
        adam_step(params, grads, state, config)
        row = (step, loss.item(), (time.perf_counter() - t0) * 1e3)
        curve.append(row)
        if log is not None:
            log(row)
    if config.steps > 0 and config.recal_batches > 0:
        recalibrate_norms(net, (make_batch(dataset, masks, config, rng, window) for _ in range(config.recal_batches)),
                          window)
    net.eval()
    if curve_path is not None:
        write_curve(curve_path, curve)
    return net, curve


def recalibrate_norms(net, batches, window):
    """Replace running mean/var of every norm by the cumulative average over ``batches``."""
    norms = [n for d in net.denoisers for n in d.norms]
    saved = [n.momentum for n in norms]
    for n in norms:
        n.reset_running_stats()
        n.momentum = None
    net.train()
    try:
        with torch.no_grad():
            for u, maps, m, centers, _ in batches:
                net(u, maps, m, window, centers)
    finally:
        for n, mom in zip(norms, saved):
            n.momentum = mom
    return net.eval()


def write_curve(path, curve):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "loss", "wall_ms"])
        for step, loss, ms in curve:
            w.writerow([step, repr(loss), f"{ms:.3f}"])


def smoothed(curve, k=20):
    losses = np.array([c[1] for c in curve])
    if len(losses) < k:
        return losses
    return np.convolve(losses, np.ones(k) / k, mode="valid")
