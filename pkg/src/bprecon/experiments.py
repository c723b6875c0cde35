"""Held-out evaluation and the experiment sweeps (iterations, patch size, overlap, R)."""

import csv
from dataclasses import replace

import numpy as np

from .bandpass import CoverageError, plan_patches
from .metrics import evaluate
from .model import apply_model_adjoint
from .network import reconstruct_full
from .sampling import MaskSpec, generate_mask
from .simulate import coil_provider
from .training import train_loop


def evaluate_set(net, examples, masks, patch, overlap, stopband, pad, workers=1, strict=True):
    """Per-example metric reports for the network and the zero-filled input."""
    ny, nz = examples[0].kspace.shape[-2:]
    geo = plan_patches((ny + 2 * pad, nz + 2 * pad), patch, overlap, stopband, strict=strict)
    recon, zero = [], []
    for ex, mask in zip(examples, masks):
        measured = ex.kspace * mask
        out = reconstruct_full(measured, coil_provider(ex.coils), mask, geo, net, pad=pad, workers=workers)
        zf = apply_model_adjoint(measured, ex.maps(ny, nz))
        recon.append(evaluate(out["image"][0], ex.phantom))
        zero.append(evaluate(zf[0], ex.phantom))
    return recon, zero


def summarize(reports):
    return {k: float(np.mean([getattr(r, k) for r in reports])) for k in ("psnr", "nrmse", "ssim")}


def sweep_overlap(net, examples, masks, overlaps_y, patch, stopband, pad, overlap_z=0.5):
    """Rows ``{overlap_y, status, psnr, nrmse, ssim}``.

    Plans that fail the coverage check get status ``coverage_error``; their
    metrics are still measured on the non-strict plan when every bin receives
    some window weight, and are NaN otherwise.
    """
    rows = []
    for oy in overlaps_y:
        status = "ok"
        try:
            plan_patches(_padded(examples, pad), patch, (oy, overlap_z), stopband)
        except CoverageError:
            status = "coverage_error"
        try:
            rec, _ = evaluate_set(net, examples, masks, patch, (oy, overlap_z), stopband, pad, strict=False)
            metrics = summarize(rec)
        except CoverageError:
            metrics = {"psnr": np.nan, "nrmse": np.nan, "ssim": np.nan}
        rows.append({"overlap_y": oy, "status": status, **metrics})
    return rows


def _padded(examples, pad):
    ny, nz = examples[0].kspace.shape[-2:]
    return (ny + 2 * pad, nz + 2 * pad)


def sweep_iterations(dataset, examples, masks, config, iterations, overlap=(0.5, 0.5)):
    """Train one network per iteration count with otherwise identical settings."""
    rows = []
    for n in iterations:
        net, _ = train_loop(dataset, replace(config, n_iter=n))
        rec, zero = evaluate_set(net, examples, masks, config.patch, overlap, config.stopband, config.pad)
        rows.append({"iters": n, **summarize(rec), "zf_nrmse": summarize(zero)["nrmse"]})
    return rows


def sweep_patch(dataset, examples, masks, config, train_dims, infer_dims, overlap=(0.5, 0.5)):
    """Train per patch size, then apply every network across inference patch sizes."""
    rows = []
    for td in train_dims:
        net, _ = train_loop(dataset, replace(config, patch=(td, td)))
        for d in infer_dims:
            rec, _ = evaluate_set(net, examples, masks, (d, d), overlap, config.stopband, config.pad)
            rows.append({"train_dim": td, "infer_dim": d, **summarize(rec)})
    return rows


def sweep_R(net, examples, Rs, patch, overlap, stopband, pad, density="variable", calib=12, seed=0):
    ny, nz = examples[0].kspace.shape[-2:]
    rows = []
    for R in Rs:
        masks = [generate_mask(MaskSpec(ny, nz, R, density, calib=calib, seed=seed + i)) for i in range(len(examples))]
        rec, zero = evaluate_set(net, examples, masks, patch, overlap, stopband, pad)
        rows.append({"R": R, **summarize(rec), "zf_nrmse": summarize(zero)["nrmse"]})
    return rows


def write_rows(path, rows):
    if not rows:
        return
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
