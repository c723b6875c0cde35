"""Image-quality metrics on magnitude images: NRMSE, PSNR, SSIM."""

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d


@dataclass
class MetricReport:
    psnr: float
    nrmse: float
    ssim: float


def _pair(test, ref):
    test = np.asarray(test, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if test.shape != ref.shape:
        raise ValueError(f"shape mismatch {test.shape} vs {ref.shape}")
    return test, ref


def nrmse(test, ref):
    """``||test - ref|| / ||ref||``."""
    test, ref = _pair(test, ref)
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(test - ref) / denom)


def psnr(test, ref):
    """``20 log10(max(ref) / rms(test - ref))`` in dB; ``inf`` for identical images."""
    test, ref = _pair(test, ref)
    mse = np.mean((test - ref) ** 2)
    if mse == 0:
        return math.inf
    return float(20 * np.log10(ref.max() / np.sqrt(mse)))


def gaussian_kernel(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(img, g):
    # separable correlation, keep only fully overlapped positions
    r = len(g) // 2
    out = correlate1d(correlate1d(img, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    return out[r:img.shape[0] - r, r:img.shape[1] - r]


def ssim_map(test, ref, data_range=None, k1=0.01, k2=0.03, size=11, sigma=1.5):
    test, ref = _pair(test, ref)
    if min(test.shape) < size:
        raise ValueError(f"images must be at least {size}x{size} for SSIM")
    L = ref.max() if data_range is None else data_range
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    g = gaussian_kernel(size, sigma)
    mx, my = _filter_valid(test, g), _filter_valid(ref, g)
    sxx = _filter_valid(test * test, g) - mx * mx
    syy = _filter_valid(ref * ref, g) - my * my
    sxy = _filter_valid(test * ref, g) - mx * my
    return ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))


def ssim(test, ref, data_range=None):
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), range = max(ref)."""
    return float(ssim_map(test, ref, data_range).mean())


def evaluate(test, ref):
    """Metrics of ``|test|`` against ``|ref|``."""
    t, r = np.abs(test), np.abs(ref)
    return MetricReport(psnr=psnr(t, r), nrmse=nrmse(t, r), ssim=ssim(t, r))


def write_reports(path, reports):
    """CSV with columns slice_id, psnr, nrmse, ssim."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["slice_id", "psnr", "nrmse", "ssim"])
        for slice_id, rep in reports:
            d = asdict(rep)
            w.writerow([slice_id, repr(d["psnr"]), repr(d["nrmse"]), repr(d["ssim"])])
