import numpy as np
import pytest
import torch

from bprecon.network import UnrolledNet
from bprecon.runtime import PatchJobError, bench_patch_time, run_patches, scaling_fit, write_bench_csv
from bprecon.runtime import BenchRecord


def noisy_job(i):
    rng = np.random.default_rng(i)
    a = rng.standard_normal((40, 40))
    return np.linalg.svd(a @ a.T, compute_uv=False)


def test_parallel_equals_serial():
    jobs = [(noisy_job, (i,)) for i in range(64)]
    serial = run_patches(jobs, 1)
    parallel = run_patches(jobs, 4)
    assert len(parallel) == 64
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a, b)


def test_empty_and_invalid():
    assert run_patches([], 4) == []
    with pytest.raises(ValueError):
        run_patches([], 0)


@pytest.mark.parametrize("workers", [1, 3])
def test_job_error_names_index(workers):
    def job(i):
        if i == 5:
            raise RuntimeError("boom")
        return i

    with pytest.raises(PatchJobError) as info:
        run_patches([(job, (i,)) for i in range(8)], workers)
    assert info.value.index == 5


def test_bench_records(tmp_path):
    torch.manual_seed(0)
    net = UnrolledNet(1, 1, 4).eval()
    recs = bench_patch_time([16, 24], net, runs=1, nc=2, stopband=2)
    assert [r.patch_dim for r in recs] == [16, 24]
    assert all(r.std_ms == 0 and r.mean_ms > 0 and r.runs == 1 for r in recs)
    path = tmp_path / "b.csv"
    write_bench_csv(path, recs)
    assert path.read_text().splitlines()[0] == "patch_dim,mean_ms,std_ms,runs,workers"
    with pytest.raises(ValueError):
        bench_patch_time([16], net, runs=0)


def test_scaling_fit_prefers_true_model():
    dims = [32, 48, 64, 128, 256]
    recs = [BenchRecord(n, 1e-4 * n * n * np.log(n) + 0.5, 0.0) for n in dims]
    fit = scaling_fit(recs)
    assert fit["nlogn"] == pytest.approx(1.0)
    assert fit["nlogn"] > fit["linear"]


def test_measured_scaling_prefers_nlogn():
    torch.manual_seed(0)
    net = UnrolledNet(1, 1, 4).eval()
    recs = bench_patch_time([32, 64, 128, 256], net, runs=3, nc=2, stopband=4)
    fit = scaling_fit(recs)
    assert fit["nlogn"] > fit["linear"]
