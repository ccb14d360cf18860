"""Command line entry points for simulation, reconstruction and the studies."""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness, metrics, sensing
from .errors import MultilookError


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--scene", help="grayscale image path (default: synthetic)")
    p.add_argument("--height", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--m-over-n", dest="m_over_n", type=float)
    p.add_argument("--looks", dest="num_looks", type=int)
    p.add_argument("--sigma-w", dest="sigma_w", type=float)
    p.add_argument("--sigma-z", dest="sigma_z", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda", dest="lambda_residual", type=float)
    p.add_argument("--delta-x", dest="delta_x", type=float)
    p.add_argument("--mode", choices=("bagged", "dip-simple", "dip-m3"))
    p.add_argument("--outer-iters", dest="outer_iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--fit-iters", dest="fit_iters", type=int)
    p.add_argument("--paper-scale", dest="paper_scale", action="store_const",
                   const=True, help="run at full 128x128 problem size (slow)")


def _config_from_args(args: argparse.Namespace) -> harness.ExperimentConfig:
    skip = {"config", "command", "func", "verbose", "ensemble", "image",
            "reference", "out"}
    overrides = {k: v for k, v in vars(args).items()
                 if k not in skip and v is not None}
    return harness.parse_config(args.config, overrides)


def _cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    scene, ens = harness._make_problem(cfg)
    ens.save(args.out)
    print(f"wrote {args.out}: m={ens.m} n={ens.n} L={ens.num_looks}")
    return 0


def _cmd_reconstruct(args) -> int:
    cfg = _config_from_args(args)
    result = harness.run_reconstruct(cfg)
    print(f"psnr={result['psnr']:.2f}dB ssim={result['ssim']} "
          f"exact={result['exact_inversions']} ns={result['ns_steps']} "
          f"({result['seconds']:.1f}s)")
    return 0


def _cmd_ns_compare(args) -> int:
    cfg = _config_from_args(args)
    result = harness.run_ns_compare(cfg)
    print(f"max |tracked - exact| psnr gap: "
          f"{result['max_gap_tracked_exact']:.3f} dB")
    return 0


def _cmd_threshold(args) -> int:
    cfg = _config_from_args(args)
    result = harness.run_threshold_study(cfg)
    for delta, rate in result["rates"].items():
        print(f"delta={delta} success={rate:.2f}")
    return 0


def _cmd_scaling(args) -> int:
    cfg = _config_from_args(args)
    result = harness.run_scaling_study(cfg)
    print(f"m-doubling gain {result['doubling_gain_m_db']:.2f} dB, "
          f"L-doubling gain {result['doubling_gain_l_db']:.2f} dB")
    return 0


def _cmd_overfit(args) -> int:
    cfg = _config_from_args(args)
    result = harness.run_overfit_study(cfg)
    for key, stats in result.items():
        if key in ("config", "rng_id"):
            continue
        print(f"{key}: peak {stats['peak']:.2f} dB at iter {stats['peak_iter']}, "
              f"final {stats['final']:.2f} dB")
    return 0


def _cmd_metrics(args) -> int:
    a = sensing.load_scene(args.image).pixels
    b = sensing.load_scene(args.reference).pixels
    rep = metrics.report(a, b)
    print(f"mse={rep.mse:.6g} psnr={rep.psnr_db:.2f}dB ssim={rep.ssim:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multilook",
        description="Multilook speckle imaging: likelihood-based reconstruction "
                    "with a bagged deep-decoder prior.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a measurement ensemble")
    _add_config_flags(p)
    p.add_argument("out", help="output .npz path")
    p.set_defaults(func=_cmd_simulate)

    for name, func, desc in (
            ("reconstruct", _cmd_reconstruct, "reconstruct a scene end to end"),
            ("ns-compare", _cmd_ns_compare,
             "compare tracked, exact and frozen inverse trajectories"),
            ("threshold-study", _cmd_threshold,
             "warm-start inverse refinement success rate vs perturbation"),
            ("scaling-study", _cmd_scaling,
             "reconstruction quality across measurement and look budgets"),
            ("overfit-study", _cmd_overfit,
             "decoder fitting curves on clean and noisy targets")):
        p = sub.add_parser(name, help=desc)
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("metrics", help="compare two grayscale images")
    p.add_argument("image")
    p.add_argument("reference")
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MultilookError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
