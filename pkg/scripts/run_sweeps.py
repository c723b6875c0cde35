"""Overlap and acceleration sweeps for a trained checkpoint (CSV per sweep).

    python3 scripts/run_sweeps.py runs/desk/net_x4.ckpt --out runs/desk
"""

import argparse
import os

from bprecon.experiments import sweep_overlap, sweep_R, write_rows
from bprecon.network import load_checkpoint
from bprecon.training import TrainConfig, make_dataset, make_mask_bank

OVERLAPS = [0.05, 0.1, 0.125, 0.140625, 0.15625, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("checkpoint")
    ap.add_argument("--test-examples", type=int, default=50)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    cfg = TrainConfig()
    net = load_checkpoint(args.checkpoint)
    test = make_dataset(args.test_examples, seed=99)
    masks = make_mask_bank(args.test_examples, (64, 64), (3.5, 4.5), "variable", calib=12, seed=4321)
    rows = sweep_overlap(net, test, masks, OVERLAPS, cfg.patch, cfg.stopband, cfg.pad)
    write_rows(os.path.join(args.out, "overlap.csv"), rows)
    for r in rows:
        print(f"overlap {r['overlap_y']:.4f} {r['status']:>15} nrmse {r['nrmse']:.4f} ssim {r['ssim']:.4f}")
    rows = sweep_R(net, test, [2, 3, 4, 5, 6, 7, 8, 9], cfg.patch, (0.5, 0.5), cfg.stopband, cfg.pad,
                   calib=cfg.calib, seed=4321)
    write_rows(os.path.join(args.out, "R.csv"), rows)
    for r in rows:
        print(f"R {r['R']:.0f} nrmse {r['nrmse']:.4f} (zero-filled {r['zf_nrmse']:.4f})")


if __name__ == "__main__":
    main()
