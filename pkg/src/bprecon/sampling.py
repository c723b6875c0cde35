"""Poisson-disc k-space subsampling masks with a fully sampled calibration block.

Samples are placed by dart throwing over a seeded random permutation of the
non-calibration bins: a candidate is accepted when every accepted sample lies
at least ``max(r(candidate), r(sample))`` away, and throwing stops once the
target sample count is reached. The base radius ``r0`` is bisected to the
largest value that still reaches the target, so the achieved reduction factor
equals the target up to rounding of the sample count.

Radius law: ``r(k) = r0 * (1 + p * |k| / k_max)`` with ``p = 0`` for uniform
density. ``|k|`` is the radial distance from DC in units of the half-grid
extent per axis. The variable-density power law is a free choice of this
package, not a calibrated clinical profile.

Randomness comes from numpy's PCG64 generator seeded with ``seed``.
"""

from dataclasses import dataclass

import numba
import numpy as np


class InfeasibleMaskError(ValueError):
    pass


@dataclass(frozen=True)
class MaskSpec:
    ny: int
    nz: int
    target_R: float
    density: str = "uniform"
    power: float = 2.0
    calib: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.density not in ("uniform", "variable"):
            raise ValueError(f"density must be 'uniform' or 'variable', got {self.density!r}")
        if self.calib > min(self.ny, self.nz) or self.calib < 0:
            raise ValueError(f"calib {self.calib} does not fit grid {(self.ny, self.nz)}")
        if self.target_R < 1:
            raise ValueError("target_R must be >= 1")
        if self.power < 0:
            raise ValueError("power must be >= 0")

    @property
    def p(self):
        return self.power if self.density == "variable" else 0.0


def calib_slices(ny, nz, calib):
    cy, cz = ny // 2 - calib // 2, nz // 2 - calib // 2
    return slice(cy, cy + calib), slice(cz, cz + calib)


def radial_distance(ny, nz):
    """Normalized distance from DC, scaled so that k_max = 1 at the corners."""
    ky = (np.arange(ny) - ny // 2) / (ny / 2)
    kz = (np.arange(nz) - nz // 2) / (nz / 2)
    rho = np.sqrt(ky[:, None] ** 2 + kz[None, :] ** 2)
    return rho / rho.max()


@numba.njit(cache=True)
def _throw(order_y, order_z, radius, r0, reach, n_needed, out):
    ny, nz = out.shape
    accepted = np.zeros((ny, nz))  # radius of accepted sample, 0 if empty
    count = 0
    for n in range(order_y.size):
        if count >= n_needed:
            break
        y = order_y[n]
        z = order_z[n]
        rc = r0 * radius[y, z]
        ok = True
        for dy in range(-reach, reach + 1):
            yy = y + dy
            if yy < 0 or yy >= ny:
                continue
            for dz in range(-reach, reach + 1):
                zz = z + dz
                if zz < 0 or zz >= nz:
                    continue
                rq = accepted[yy, zz]
                if rq > 0.0:
                    lim = rc if rc > rq else rq
                    if dy * dy + dz * dz < lim * lim:
                        ok = False
                        break
            if not ok:
                break
        if ok:
            accepted[y, z] = rc
            count += 1
    for y in range(ny):
        for z in range(nz):
            out[y, z] = accepted[y, z] > 0.0
    return count


def generate_mask(spec):
    """Binary ``(ny, nz)`` float mask hitting ``spec.target_R`` (see module doc)."""
    return poisson_disc(spec)[0]


def poisson_disc(spec, tol=1e-3):
    """Return ``(mask, r0)``: the mask and the base radius it was thrown with."""
    ny, nz = spec.ny, spec.nz
    if spec.target_R == 1:
        return np.ones((ny, nz)), 0.0
    total = ny * nz
    n_target = int(round(total / spec.target_R))
    sy, sz = calib_slices(ny, nz, spec.calib)
    calib = np.zeros((ny, nz), bool)
    calib[sy, sz] = True
    n_calib = int(calib.sum())
    if n_target < max(n_calib, 1):
        raise InfeasibleMaskError(
            f"R={spec.target_R} needs {n_target} samples but the calibration block alone has {n_calib}"
        )
    n_needed = n_target - n_calib

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    free = np.flatnonzero(~calib.ravel())
    order = rng.permutation(free)
    oy, oz = np.divmod(order, nz)
    radius = 1.0 + spec.p * radial_distance(ny, nz)

    def run(r0):
        out = np.zeros((ny, nz), np.bool_)
        reach = int(np.ceil(r0 * radius.max()))
        count = _throw(oy, oz, radius, r0, reach, n_needed, out)
        return count >= n_needed, out

    # every distinct bin is >= 1 apart, so r0 with max radius <= 1 always succeeds
    lo = 1.0 / radius.max()
    ok, best = run(lo)
    if not ok:  # pragma: no cover - only if n_needed exceeds free bins
        raise InfeasibleMaskError("target exceeds available bins")
    hi = max(2.0, 2.0 * np.sqrt(total / max(n_target, 1)))
    while True:
        ok, out = run(hi)
        if not ok:
            break
        lo, best, hi = hi, out, 2 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, out = run(mid)
        if ok:
            lo, best = mid, out
        else:
            hi = mid
    return (best | calib).astype(float), lo


def achieved_R(mask):
    """Reduction factor: total bins / sampled bins."""
    mask = np.asarray(mask)
    n = np.count_nonzero(mask)
    if n == 0:
        raise ValueError("mask has no samples")
    return mask.size / n
