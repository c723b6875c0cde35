import numpy as np
import pytest
from hypothesis import given, strategies as st

from bprecon.core import fft2
from bprecon.model import apply_model_adjoint, check_maps
from bprecon.simulate import CoilSpec, PhantomSpec, make_coils, make_phantom, resample_maps, synthesize_kspace


def test_zero_intensity_phantom():
    assert not make_phantom(PhantomSpec(32, 32, intensity=(0.0, 0.0))).any()


def test_phantom_deterministic_and_finite():
    a = make_phantom(PhantomSpec(48, 40, seed=7))
    np.testing.assert_array_equal(a, make_phantom(PhantomSpec(48, 40, seed=7)))
    assert not np.array_equal(a, make_phantom(PhantomSpec(48, 40, seed=8)))
    energy = np.sum(np.abs(a) ** 2)
    assert np.isfinite(energy) and energy > 0
    assert np.abs(a).max() <= 1.0 + 1e-12
    assert np.iscomplexobj(a) and np.ptp(np.angle(a[np.abs(a) > 0])) > 0


def test_spec_validation():
    with pytest.raises(ValueError):
        PhantomSpec(n_ellipses=0)
    with pytest.raises(ValueError):
        CoilSpec(nc=0)


def test_single_coil_unit_magnitude():
    maps = make_coils(CoilSpec(1, seed=3), 20, 24)
    np.testing.assert_allclose(np.abs(maps), 1.0, atol=1e-12)


@given(st.integers(1, 8), st.integers(0, 2**31), st.integers(4, 48), st.integers(4, 48))
def test_coil_energy(nc, seed, ny, nz):
    maps = make_coils(CoilSpec(nc, seed=seed), ny, nz)
    assert maps.shape == (1, nc, ny, nz)
    energy = np.sum(np.abs(maps) ** 2, axis=(0, 1))
    assert energy.max() <= 1 + 1e-6
    np.testing.assert_allclose(energy, 1.0, atol=1e-12)
    check_maps(maps)
    np.testing.assert_array_equal(maps, make_coils(CoilSpec(nc, seed=seed), ny, nz))


def test_synthesis_cases():
    ph = make_phantom(PhantomSpec(32, 32, seed=1))
    unit = np.ones((1, 1, 32, 32))
    np.testing.assert_allclose(synthesize_kspace(ph, unit)[0], fft2(ph), atol=1e-14)
    assert not synthesize_kspace(np.zeros((32, 32), complex), unit).any()
    maps = make_coils(CoilSpec(6, seed=1), 32, 32)
    back = apply_model_adjoint(synthesize_kspace(ph, maps), maps)[0]
    assert np.linalg.norm(back - ph) / np.linalg.norm(ph) < 1e-10


def test_resample_maps_keeps_energy_bound():
    maps = make_coils(CoilSpec(4, seed=2), 64, 64)
    low = resample_maps(maps, 32, 32)
    assert low.shape == (1, 4, 32, 32)
    assert np.sum(np.abs(low) ** 2, axis=(0, 1)).max() <= 1 + 1e-12
    # away from the (non-periodic) border, Fourier resampling tracks direct sampling
    direct = make_coils(CoilSpec(4, seed=2), 32, 32)
    inner = (Ellipsis, slice(8, 24), slice(8, 24))
    assert np.linalg.norm(low[inner] - direct[inner]) / np.linalg.norm(direct[inner]) < 0.03
    np.testing.assert_allclose(resample_maps(maps, 64, 64), maps, atol=1e-12)
