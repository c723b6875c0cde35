"""Patch-parallel execution and the per-patch timing benchmark."""

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import torch

from .bandpass import WindowSpec, make_window
from .model import PatchCenter
from .network import reconstruct_patch
from .simulate import CoilSpec, make_coils


class PatchJobError(RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"patch job {index} failed: {cause!r}")
        self.index = index


def _call(index, fn, args):
    try:
        return fn(*args)
    except Exception as exc:
        raise PatchJobError(index, exc) from exc


def run_patches(jobs, workers=1):
    """Execute ``(fn, args)`` jobs, returning results in job order.

    Results land in a preallocated slot per job index, so the output does not
    depend on completion order. Patch jobs are pure; threads suffice because
    numpy and torch release the GIL inside their kernels.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = list(jobs)
    results = [None] * len(jobs)
    if workers == 1 or len(jobs) <= 1:
        for i, (fn, args) in enumerate(jobs):
            results[i] = _call(i, fn, args)
        return results
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_call, i, fn, args): i for i, (fn, args) in enumerate(jobs)}
        for fut, i in futures.items():
            results[i] = fut.result()
    return results


@dataclass
class BenchRecord:
    patch_dim: int
    mean_ms: float
    std_ms: float
    runs: int = 50
    workers: int = 1


def _bench_inputs(dim, nc, stopband, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((nc, dim, dim)) + 1j * rng.standard_normal((nc, dim, dim))
    mask = (rng.random((dim, dim)) < 0.25).astype(float)
    sb = min(stopband, (dim - 1) // 2)
    window = make_window(WindowSpec(dim, dim, sb))
    maps = make_coils(CoilSpec(nc, seed=seed), dim, dim)
    return u * mask, maps, mask, window


def bench_patch_time(patch_dims, net, runs=50, nc=4, stopband=10, seed=0, threads=1):
    """Mean/std wall time of a single :func:`reconstruct_patch` call per patch size.

    One warm-up call per size is excluded. Torch intra-op threads are pinned
    to ``threads`` for the duration so that sizes are timed under equal load.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    prev = torch.get_num_threads()
    torch.set_num_threads(threads)
    records = []
    try:
        for dim in patch_dims:
            u, maps, mask, window = _bench_inputs(dim, nc, stopband, seed)
            center = PatchCenter(0, 0)
            reconstruct_patch(u, maps, mask, window, center, net)
            times = []
            for _ in range(runs):
                t0 = time.perf_counter()
                reconstruct_patch(u, maps, mask, window, center, net)
                times.append((time.perf_counter() - t0) * 1e3)
            records.append(BenchRecord(dim, float(np.mean(times)), float(np.std(times)), runs, 1))
    finally:
        torch.set_num_threads(prev)
    return records


def scaling_fit(records):
    """R^2 of least-squares fits of time to ``a N^2 log N + b`` and to ``a N + b``."""
    n = np.array([r.patch_dim for r in records], float)
    t = np.array([r.mean_ms for r in records])

    def r2(feature):
        X = np.column_stack([feature, np.ones_like(feature)])
        coef, *_ = np.linalg.lstsq(X, t, rcond=None)
        resid = t - X @ coef
        return 1 - resid @ resid / np.sum((t - t.mean()) ** 2)

    return {"nlogn": float(r2(n**2 * np.log(n))), "linear": float(r2(n))}


def write_bench_csv(path, records):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["patch_dim", "mean_ms", "std_ms", "runs", "workers"])
        for r in records:
            w.writerow([r.patch_dim, f"{r.mean_ms:.6g}", f"{r.std_ms:.6g}", r.runs, r.workers])
