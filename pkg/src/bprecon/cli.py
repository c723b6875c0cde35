"""Command-line entry point: ``bprecon <command> [flags]``.

Every command accepts ``--config FILE`` with ``key=value`` lines (keys are
flag names with dashes or underscores); explicit flags override the file.
The fully resolved settings are echoed to ``<out>.config`` next to the output.
"""

import argparse
import sys

from .bandpass import CoverageError, plan_patches
from .config import ReconConfig, read_config_file
from .core import GridError
from .io import GridFormatError, read_grid, write_grid
from .metrics import evaluate, write_reports
from .network import CheckpointError, UnrolledNet, load_checkpoint, reconstruct_full, save_checkpoint
from .sampling import InfeasibleMaskError, MaskSpec, achieved_R, generate_mask
from .simulate import CoilSpec, PhantomSpec, make_coils, make_phantom, resample_maps, synthesize_kspace

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING_INPUT = 3
EXIT_COVERAGE = 4
EXIT_DIVERGENCE = 5
EXIT_BAD_INPUT = 6

DEFAULTS = ReconConfig()


def _dims(text):
    parts = [int(p) for p in text.replace("x", ",").split(",") if p]
    return (parts[0], parts[0]) if len(parts) == 1 else tuple(parts)


def _floats(text):
    return [float(p) for p in text.split(",") if p]


def _ints(text):
    return [int(p) for p in text.split(",") if p]


def _recon_flags(p):
    p.add_argument("--patch", type=_dims, default=DEFAULTS.patch)
    p.add_argument("--overlap-y", type=float, default=DEFAULTS.overlap_y)
    p.add_argument("--overlap-z", type=float, default=DEFAULTS.overlap_z)
    p.add_argument("--stopband", type=int, default=DEFAULTS.stopband)
    p.add_argument("--pad", type=int, default=DEFAULTS.pad)
    p.add_argument("--iters", type=int, default=DEFAULTS.iters)
    p.add_argument("--features", type=int, default=DEFAULTS.features)
    p.add_argument("--workers", type=int, default=DEFAULTS.workers)


def _mask_flags(p):
    p.add_argument("--R", type=float, default=DEFAULTS.R)
    p.add_argument("--density", choices=("uniform", "variable"), default=DEFAULTS.density)
    p.add_argument("--calib", type=int, default=DEFAULTS.calib)


def build_parser():
    parser = argparse.ArgumentParser(prog="bprecon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--seed", type=int, default=DEFAULTS.seed)
        p.add_argument("--out", required=name != "bench" and name != "sweep", default=None)
        return p

    p = command("phantom", "write a synthetic complex phantom")
    p.add_argument("--ny", type=int, default=64)
    p.add_argument("--nz", type=int, default=64)
    p.add_argument("--ellipses", type=int, default=8)

    p = command("mask", "write a Poisson-disc sampling mask")
    p.add_argument("--ny", type=int, default=64)
    p.add_argument("--nz", type=int, default=64)
    _mask_flags(p)

    p = command("synth", "synthesize fully sampled multi-coil k-space from a phantom")
    p.add_argument("--phantom", required=True)
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--maps-out", default=None, help="sensitivity map GridFile (default <out>.maps)")

    p = command("train", "train an unrolled patch network on synthetic phantoms")
    p.add_argument("--examples", type=int, default=500)
    p.add_argument("--image", type=_dims, default=(64, 64))
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--steps", type=int, default=1500)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--patch", type=_dims, default=(32, 32))
    p.add_argument("--stopband", type=int, default=5)
    p.add_argument("--pad", type=int, default=5)
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--R-range", type=_floats, default=[3.5, 4.5])
    p.add_argument("--density", choices=("uniform", "variable"), default="variable")
    p.add_argument("--calib", type=int, default=12)

    p = command("recon", "patch-wise reconstruction of measured k-space")
    p.add_argument("--kspace", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--maps", required=True)
    p.add_argument("--checkpoint", default="identity", help="checkpoint file or 'identity'")
    p.add_argument("--kspace-out", default=None)
    _recon_flags(p)

    p = command("metrics", "PSNR/NRMSE/SSIM of magnitude images")
    p.add_argument("--test", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--slice-id", default="0")

    p = command("bench", "per-patch inference time versus patch size")
    p.add_argument("--dims", type=_ints, default=[32, 48, 64, 128, 256])
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--checkpoint", default="random")
    p.add_argument("--iters", type=int, default=DEFAULTS.iters)
    p.add_argument("--features", type=int, default=DEFAULTS.features)
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--stopband", type=int, default=DEFAULTS.stopband)

    p = command("sweep", "experiment sweeps over iterations, patch size, overlap or R")
    p.add_argument("axis", choices=("iters", "patch", "overlap", "R"))
    p.add_argument("--values", default=None, help="comma-separated sweep values")
    p.add_argument("--checkpoint", default=None, help="trained network for overlap/R sweeps")
    p.add_argument("--examples", type=int, default=500)
    p.add_argument("--test-examples", type=int, default=20)
    p.add_argument("--steps", type=int, default=1500)
    p.add_argument("--patch", type=_dims, default=(32, 32))
    p.add_argument("--infer-dims", type=_ints, default=[24, 32, 40, 48])
    p.add_argument("--stopband", type=int, default=5)
    p.add_argument("--pad", type=int, default=5)
    p.add_argument("--iters", type=int, default=4)
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--overlap-z", type=float, default=0.5)
    p.add_argument("--R", type=float, default=4.0)
    p.add_argument("--density", choices=("uniform", "variable"), default="variable")
    p.add_argument("--calib", type=int, default=12)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys {unknown}")
        typed = {}
        for a in sub._actions:
            if a.dest in values:
                typed[a.dest] = a.type(values[a.dest]) if a.type else values[a.dest]
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    return args


def echo_config(args):
    if not args.out:
        return
    with open(args.out + ".config", "w") as f:
        for key, value in sorted(vars(args).items()):
            if isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            f.write(f"{key}={value}\n")


def _load_net(spec, iters, features, nsets=1):
    if spec == "identity":
        return UnrolledNet.identity(iters, nsets, features)
    if spec == "random":
        import torch

        torch.manual_seed(0)
        return UnrolledNet(iters, nsets, features).eval()
    return load_checkpoint(spec)


def cmd_phantom(args):
    ph = make_phantom(PhantomSpec(args.ny, args.nz, n_ellipses=args.ellipses, seed=args.seed))
    write_grid(args.out, ph, axes=("y", "z"), kind="phantom", seed=args.seed)


def cmd_mask(args):
    spec = MaskSpec(args.ny, args.nz, args.R, args.density, calib=args.calib, seed=args.seed)
    mask = generate_mask(spec)
    R = achieved_R(mask)
    law = "r0*(1+p*|k|/kmax) power-law stand-in" if args.density == "variable" else "uniform"
    write_grid(args.out, mask, axes=("ky", "kz"), kind="mask", seed=args.seed, target_R=args.R,
               achieved_R=f"{R:.6f}", density=args.density, density_law=law, calib=args.calib)
    print(f"achieved_R={R:.4f}")


def cmd_synth(args):
    ph, _ = read_grid(args.phantom)
    maps = make_coils(CoilSpec(args.coils, seed=args.seed), *ph.shape)
    ksp = synthesize_kspace(ph, maps)
    write_grid(args.out, ksp, axes=("coil", "ky", "kz"), kind="kspace", seed=args.seed)
    write_grid(args.maps_out or args.out + ".maps", maps, axes=("set", "coil", "y", "z"), kind="maps",
               seed=args.seed)


def cmd_train(args):
    from .training import TrainConfig, make_dataset, train_loop

    cfg = TrainConfig(lr=args.lr, batch=args.batch, steps=args.steps, patch=args.patch, stopband=args.stopband,
                      pad=args.pad, R_range=tuple(args.R_range), density=args.density, calib=args.calib,
                      n_iter=args.iters, features=args.features, seed=args.seed)
    data = make_dataset(args.examples, args.image, args.coils, seed=args.seed)
    net, curve = train_loop(data, cfg, curve_path=args.out + ".loss.csv", dump_path=args.out + ".diverged")
    save_checkpoint(net, args.out)
    print(f"final_loss={curve[-1][1]:.6g}" if curve else "final_loss=nan")


def cmd_recon(args):
    ksp, _ = read_grid(args.kspace)
    mask, _ = read_grid(args.mask)
    maps, _ = read_grid(args.maps)
    maps = maps if maps.ndim == 4 else maps[None]
    net = _load_net(args.checkpoint, args.iters, args.features, maps.shape[0])
    ny, nz = ksp.shape[-2:]
    geo = plan_patches((ny + 2 * args.pad, nz + 2 * args.pad), args.patch, (args.overlap_y, args.overlap_z),
                       args.stopband)

    def provider(py, pz):
        return maps if (py, pz) == maps.shape[-2:] else resample_maps(maps, py, pz)

    out = reconstruct_full(ksp * mask, provider, mask, geo, net, pad=args.pad, workers=args.workers)
    image = out["image"]
    write_grid(args.out, image[0] if image.shape[0] == 1 else image, kind="image")
    if args.kspace_out:
        write_grid(args.kspace_out, out["kspace"], axes=("coil", "ky", "kz"), kind="kspace")


def cmd_metrics(args):
    test, _ = read_grid(args.test)
    ref, _ = read_grid(args.ref)
    rep = evaluate(test, ref)
    write_reports(args.out, [(args.slice_id, rep)])
    print(f"psnr={rep.psnr:.4f} nrmse={rep.nrmse:.6g} ssim={rep.ssim:.6f}")


def cmd_bench(args):
    from .runtime import bench_patch_time, write_bench_csv

    net = _load_net(args.checkpoint, args.iters, args.features)
    records = bench_patch_time(args.dims, net, runs=args.runs, nc=args.coils, stopband=args.stopband)
    for r in records:
        print(f"patch={r.patch_dim} mean_ms={r.mean_ms:.3f} std_ms={r.std_ms:.3f}")
    if args.out:
        write_bench_csv(args.out, records)


def cmd_sweep(args):
    from .experiments import sweep_iterations, sweep_overlap, sweep_patch, sweep_R, write_rows
    from .training import TrainConfig, make_dataset, make_mask_bank, train_loop

    cfg = TrainConfig(steps=args.steps, patch=args.patch, stopband=args.stopband, pad=args.pad,
                      density=args.density, calib=args.calib, n_iter=args.iters, features=args.features,
                      seed=args.seed)
    test = make_dataset(args.test_examples, seed=args.seed + 99)
    masks = make_mask_bank(args.test_examples, test[0].kspace.shape[-2:], (args.R, args.R), args.density,
                           args.calib, seed=args.seed + 1234)

    def trained():
        if args.checkpoint:
            return load_checkpoint(args.checkpoint)
        return train_loop(make_dataset(args.examples, seed=args.seed), cfg)[0]

    if args.axis == "overlap":
        values = _floats(args.values or "0.05,0.1,0.125,0.15625,0.2,0.3,0.4,0.5,0.6")
        rows = sweep_overlap(trained(), test, masks, values, args.patch, args.stopband, args.pad, args.overlap_z)
    elif args.axis == "R":
        values = _floats(args.values or "2,3,4,5,6,7,8,9")
        rows = sweep_R(trained(), test, values, args.patch, (0.5, args.overlap_z), args.stopband, args.pad,
                       args.density, args.calib, seed=args.seed + 1234)
    elif args.axis == "iters":
        values = _ints(args.values or "2,4,8,12")
        rows = sweep_iterations(make_dataset(args.examples, seed=args.seed), test, masks, cfg, values)
    else:
        values = _ints(args.values or "24,32,40")
        rows = sweep_patch(make_dataset(args.examples, seed=args.seed), test, masks, cfg, values, args.infer_dims)
    for row in rows:
        print(" ".join(f"{k}={v}" for k, v in row.items()))
    if args.out:
        write_rows(args.out, rows)


COMMANDS = {
    "phantom": cmd_phantom,
    "mask": cmd_mask,
    "synth": cmd_synth,
    "train": cmd_train,
    "recon": cmd_recon,
    "metrics": cmd_metrics,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
}


def main(argv=None):
    from .training import TrainingFailure

    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        echo_config(args)
        COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except CoverageError as exc:
        print(f"error: coverage: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except TrainingFailure as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (GridFormatError, CheckpointError, GridError, InfeasibleMaskError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
