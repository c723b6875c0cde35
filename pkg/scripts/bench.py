"""Per-patch inference time versus patch dimension, with the N^2 log N fit.

    python3 scripts/bench.py --runs 50 --out runs/bench.csv
"""

import argparse

import torch

from bprecon.network import UnrolledNet, load_checkpoint
from bprecon.runtime import bench_patch_time, scaling_fit, write_bench_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--checkpoint", default=None)
    ap.add_argument("--dims", type=int, nargs="+", default=[32, 48, 64, 128, 256])
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    if args.checkpoint:
        net = load_checkpoint(args.checkpoint)
    else:
        torch.manual_seed(0)
        net = UnrolledNet(4, 1, 16).eval()
    recs = bench_patch_time(args.dims, net, runs=args.runs)
    for r in recs:
        print(f"{r.patch_dim:4d}  {r.mean_ms:9.2f} ms  +- {r.std_ms:.2f}")
    fit = scaling_fit(recs)
    print(f"R^2  N^2 log N: {fit['nlogn']:.4f}  linear: {fit['linear']:.4f}")
    if args.out:
        write_bench_csv(args.out, recs)


if __name__ == "__main__":
    main()
