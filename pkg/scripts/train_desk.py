"""Train the desk-scale networks and report held-out metrics against zero filling.

    python3 scripts/train_desk.py --steps 1500 --iters 2 4 --out runs/desk
"""

import argparse
import json
import os
import time

from bprecon.experiments import evaluate_set, summarize
from bprecon.network import save_checkpoint
from bprecon.training import TrainConfig, make_dataset, make_mask_bank, train_loop


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--iters", type=int, nargs="+", default=[2, 4])
    ap.add_argument("--examples", type=int, default=500)
    ap.add_argument("--test-examples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/desk")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    train = make_dataset(args.examples, seed=args.seed)
    test = make_dataset(args.test_examples, seed=args.seed + 99)
    masks = make_mask_bank(args.test_examples, (64, 64), (3.5, 4.5), "variable", calib=12, seed=4321)
    summary = {}
    for n in args.iters:
        cfg = TrainConfig(steps=args.steps, n_iter=n, seed=args.seed)
        t0 = time.perf_counter()
        net, _ = train_loop(train, cfg, curve_path=os.path.join(args.out, f"loss_x{n}.csv"))
        minutes = (time.perf_counter() - t0) / 60
        save_checkpoint(net, os.path.join(args.out, f"net_x{n}.ckpt"))
        rec, zf = evaluate_set(net, test, masks, cfg.patch, (0.5, 0.5), cfg.stopband, cfg.pad)
        summary[f"x{n}"] = {"train_min": minutes, "recon": summarize(rec), "zero_filled": summarize(zf)}
        print(f"x{n}: {json.dumps(summary[f'x{n}'])}", flush=True)
    with open(os.path.join(args.out, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2)


if __name__ == "__main__":
    main()
