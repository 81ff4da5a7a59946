"""Command-line frontend: degrade, train, sr, eval, psnr.

Every subcommand prints a single JSON report on stdout that echoes the
effective configuration; diagnostics go to stderr.  Exit status 0 means
success, 1 a validation error (bad flags, malformed inputs, violated
preconditions), 2 an unexpected runtime failure.  Values may come from
a JSON config file via --config; explicit command-line flags override
file values, which override built-in defaults.
"""

import argparse
import json
import math
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from .image import degrade, load_pgm, psnr, save_pgm, upsample_nearest
from .mixture import EmConfig
from .pipeline import (
    JointModel,
    PatchGeometry,
    crop_training_quarter,
    super_resolve,
    train,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

REPORT_VERSION = 1

_GEOM_DEFAULTS = {
    "tau": 4,
    "stride_train": 2,
    "stride_recon": 1,
    "gamma": 0.1,
}

_EM_DEFAULTS = {
    "k": 10,
    "max_outer_iters": 200,
    "fp_inner_iters": 3,
    "newton_iters": 10,
    "rel_tol": 1e-5,
    "cov_reg": None,
    "delta_floor": 1e-10,
    "beta_min": 0.1,
    "beta_max": 5.0,
    "fix_beta": None,
    "init": "kmeans-assign",
    "seed": 0,
    "omit_cov_shape_factor": False,
}

_TRAIN_DEFAULTS = {**_GEOM_DEFAULTS, **_EM_DEFAULTS, "full_image": False}


class _CliParser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as validation errors."""

    def error(self, message):
        raise ValueError(f"{self.prog}: {message}")


def _add_geometry_flags(parser):
    parser.add_argument("--tau", type=int, help="LR patch side (default 4)")
    parser.add_argument("--stride-train", type=int, help="LR training stride (default 2)")
    parser.add_argument("--stride-recon", type=int, help="LR reconstruction stride (default 1)")
    parser.add_argument("--gamma", type=float, help="aggregation decay (default 0.1)")


def _add_em_flags(parser):
    parser.add_argument("--k", type=int, help="number of mixture components (default 10)")
    parser.add_argument("--max-outer-iters", type=int)
    parser.add_argument("--fp-inner-iters", type=int)
    parser.add_argument("--newton-iters", type=int)
    parser.add_argument("--rel-tol", type=float)
    parser.add_argument("--cov-reg", type=float, help="covariance ridge (default: auto)")
    parser.add_argument("--delta-floor", type=float)
    parser.add_argument("--beta-min", type=float)
    parser.add_argument("--beta-max", type=float)
    parser.add_argument("--fix-beta", type=float, help="pin the shape parameter (1 = Gaussian mixture)")
    parser.add_argument("--init", choices=["kmeans-assign", "random-responsibility"])
    parser.add_argument("--seed", type=int)
    parser.add_argument(
        "--omit-cov-shape-factor",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="drop the shape factor in the covariance fixed point",
    )


def build_parser():
    parser = _CliParser(prog="ggmm-sr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("degrade", help="block-average an HR image down by q")
    p.add_argument("hr", help="input HR image (PGM)")
    p.add_argument("--out", required=True, help="output LR image (PGM)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--q", type=int)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_degrade, defaults={"q": 2, "noise_sigma": 0.0, "seed": 0})

    p = sub.add_parser("train", help="learn a joint model from an HR/LR pair")
    p.add_argument("--hr", required=True, help="reference HR image (PGM)")
    p.add_argument("--lr", required=True, help="reference LR image (PGM)")
    p.add_argument("--model-out", required=True, help="output model file (JSON)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument(
        "--full-image",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="train on the full pair instead of the upper-left quarter",
    )
    _add_geometry_flags(p)
    _add_em_flags(p)
    p.set_defaults(func=cmd_train, defaults=dict(_TRAIN_DEFAULTS))

    p = sub.add_parser("sr", help="super-resolve an LR image with a trained model")
    p.add_argument("--lr", required=True, help="input LR image (PGM)")
    p.add_argument("--model", required=True, help="trained model file (JSON)")
    p.add_argument("--out", required=True, help="output HR estimate (PGM)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sr, defaults={"workers": 1})

    p = sub.add_parser("eval", help="degrade, train, reconstruct, and report PSNRs")
    p.add_argument("hr", help="ground-truth HR image (PGM)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out-dir", help="directory for intermediate images (default: temp)")
    p.add_argument("--q", type=int)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument(
        "--full-image",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="train on the full pair instead of the upper-left quarter",
    )
    _add_geometry_flags(p)
    _add_em_flags(p)
    p.set_defaults(
        func=cmd_eval,
        defaults={
            **_TRAIN_DEFAULTS,
            "q": 2,
            "noise_sigma": 0.0,
            "workers": 1,
            "out_dir": None,
        },
    )

    p = sub.add_parser("psnr", help="PSNR between two images")
    p.add_argument("a", help="first image (PGM)")
    p.add_argument("b", help="second image (PGM)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--peak", type=float)
    p.set_defaults(func=cmd_psnr, defaults={"peak": 1.0})

    return parser


def _effective_config(args):
    """Merge defaults, config-file values, and explicit flags (in that order)."""
    cfg = dict(args.defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        for key, value in loaded.items():
            if key not in cfg:
                raise ValueError(f"unknown config key {key!r}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _emit(report):
    print(json.dumps(report, sort_keys=True))


def _psnr_value(value):
    return "inf" if math.isinf(value) else value


def _em_config(cfg):
    return EmConfig(
        K=cfg["k"],
        max_outer_iters=cfg["max_outer_iters"],
        fp_inner_iters=cfg["fp_inner_iters"],
        newton_iters=cfg["newton_iters"],
        rel_tol=cfg["rel_tol"],
        cov_reg=cfg["cov_reg"],
        delta_floor=cfg["delta_floor"],
        beta_bounds=(cfg["beta_min"], cfg["beta_max"]),
        fix_beta=cfg["fix_beta"],
        init=cfg["init"],
        seed=cfg["seed"],
        omit_cov_shape_factor=bool(cfg["omit_cov_shape_factor"]),
    )


def _derive_q(hr, lr):
    if hr.shape[0] % lr.shape[0] or hr.shape[1] % lr.shape[1]:
        raise ValueError(
            f"HR shape {hr.shape} is not an integer multiple of LR shape {lr.shape}"
        )
    q = hr.shape[0] // lr.shape[0]
    if q < 2 or hr.shape[1] // lr.shape[1] != q:
        raise ValueError(
            f"HR shape {hr.shape} and LR shape {lr.shape} imply no common q >= 2"
        )
    return q


def _count_training_samples(lr_shape, geom):
    def axis_count(size, side, stride):
        if size < side:
            raise ValueError(f"training image extent {size} is smaller than tau={side}")
        last = size - side
        n = last // stride + 1
        return n if last % stride == 0 else n + 1

    return axis_count(lr_shape[0], geom.tau, geom.stride_train) * axis_count(
        lr_shape[1], geom.tau, geom.stride_train
    )


def _prepare_training(hr, lr, cfg, q):
    geom = PatchGeometry(
        tau=cfg["tau"],
        q=q,
        stride_train=cfg["stride_train"],
        stride_recon=cfg["stride_recon"],
        gamma=cfg["gamma"],
    )
    if not cfg["full_image"]:
        hr, lr = crop_training_quarter(hr, lr, q)
    n = _count_training_samples(lr.shape, geom)
    if n <= cfg["k"]:
        raise ValueError(
            f"K={cfg['k']} needs more than K training samples, "
            f"but the geometry yields only {n}"
        )
    return hr, lr, geom


def cmd_degrade(args):
    cfg = _effective_config(args)
    hr = load_pgm(args.hr)
    lr = degrade(hr, cfg["q"], cfg["noise_sigma"], cfg["seed"])
    save_pgm(lr, args.out)
    _emit(
        {
            "report_version": REPORT_VERSION,
            "command": "degrade",
            "config": {**cfg, "hr": args.hr, "out": args.out},
            "lr_size": list(lr.shape),
        }
    )
    return EXIT_OK


def cmd_train(args):
    cfg = _effective_config(args)
    hr = load_pgm(args.hr)
    lr = load_pgm(args.lr)
    q = _derive_q(hr, lr)
    hr_t, lr_t, geom = _prepare_training(hr, lr, cfg, q)
    model, report = train(hr_t, lr_t, geom, _em_config(cfg))
    Path(args.model_out).write_text(model.to_json())
    _emit(
        {
            "report_version": REPORT_VERSION,
            "command": "train",
            "config": {**cfg, "hr": args.hr, "lr": args.lr, "model_out": args.model_out, "q": q},
            "n_samples": _count_training_samples(lr_t.shape, geom),
            "nll_trace": report.nll_trace,
            "final_nll": report.nll_trace[-1],
            "n_outer_iters": report.n_outer_iters,
            "converged": report.converged,
            "n_resets": len(report.resets),
        }
    )
    return EXIT_OK


def cmd_sr(args):
    cfg = _effective_config(args)
    model = JointModel.from_json(Path(args.model).read_text())
    lr = load_pgm(args.lr)
    out = super_resolve(lr, model, workers=cfg["workers"])
    save_pgm(out, args.out)
    _emit(
        {
            "report_version": REPORT_VERSION,
            "command": "sr",
            "config": {**cfg, "lr": args.lr, "model": args.model, "out": args.out},
            "hr_size": list(out.shape),
        }
    )
    return EXIT_OK


def cmd_eval(args):
    cfg = _effective_config(args)
    hr = load_pgm(args.hr)
    q = cfg["q"]

    if cfg["out_dir"] is None:
        tmp = tempfile.TemporaryDirectory(prefix="ggmm-sr-eval-")
        out_dir = Path(tmp.name)
    else:
        tmp = None
        out_dir = Path(cfg["out_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
    try:
        lr = degrade(hr, q, cfg["noise_sigma"], cfg["seed"])
        save_pgm(lr, out_dir / "lr.pgm")
        lr = load_pgm(out_dir / "lr.pgm")

        hr_t, lr_t, geom = _prepare_training(hr, lr, cfg, q)
        em = _em_config(cfg)

        outputs = {}
        training = {}
        for method, em_cfg in (
            ("mmse-ggmm", em),
            ("mmse-gmm", replace(em, fix_beta=1.0)),
        ):
            print(f"training {method} (K={em_cfg.K}) ...", file=sys.stderr)
            model, report = train(hr_t, lr_t, geom, em_cfg)
            recon = super_resolve(lr, model, workers=cfg["workers"])
            path = out_dir / f"sr_{method}.pgm"
            save_pgm(recon, path)
            outputs[method] = str(path)
            training[method] = {
                "final_nll": report.nll_trace[-1],
                "n_outer_iters": report.n_outer_iters,
                "converged": report.converged,
            }
        nearest_path = out_dir / "nearest.pgm"
        save_pgm(upsample_nearest(lr, q), nearest_path)
        outputs["nearest"] = str(nearest_path)

        # Score exactly what was written to disk, so a psnr subcommand run
        # on the output files reproduces the reported numbers.
        psnrs = {
            method: _psnr_value(psnr(load_pgm(path), hr))
            for method, path in outputs.items()
        }
        _emit(
            {
                "report_version": REPORT_VERSION,
                "command": "eval",
                "config": {**cfg, "hr": args.hr},
                "psnr_db": psnrs,
                "outputs": outputs if tmp is None else {},
                "training": training,
            }
        )
    finally:
        if tmp is not None:
            tmp.cleanup()
    return EXIT_OK


def cmd_psnr(args):
    cfg = _effective_config(args)
    value = psnr(load_pgm(args.a), load_pgm(args.b), peak=cfg["peak"])
    _emit(
        {
            "report_version": REPORT_VERSION,
            "command": "psnr",
            "config": {**cfg, "a": args.a, "b": args.b},
            "psnr_db": _psnr_value(value),
        }
    )
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - unexpected failure path
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
