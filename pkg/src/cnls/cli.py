"""``cnls`` command line.

Settings come from built-in defaults, then ``--config FILE``, then flags.
Exit status: 0 success, 2 when every dichotomy verdict is inconclusive, 1 on
error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import scipy.fft

from .config import ConfigError, ExperimentConfig, config_from_dict, parse_config, write_manifest
from . import experiments as ex

log = logging.getLogger("cnls")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, help="FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")


def _grid(p, L=None, M=None):
    p.add_argument("--L", type=float, default=L, help="box side length")
    p.add_argument("--M", type=int, default=M, help="points per side (even)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cnls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)

    p = sub.add_parser("ground-state", help="compute the Townes profile")
    _common(p)
    _grid(p)
    p.add_argument("--tol", type=float)
    p.add_argument("--method", choices=("petviashvili", "shooting", "both"))

    p = sub.add_parser("gn-constant", help="sharp Gagliardo-Nirenberg constant table")
    _common(p)
    _grid(p)
    p.add_argument("--N-list", dest="n_list", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated component counts")

    for name, help_ in (("simulate", "evolve one initial datum"),
                        ("dichotomy", "scattering/blowup verdicts over a mass-scale list")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        _grid(p)
        p.add_argument("--init", help="gaussian | ground-state | snapshot:PATH")
        p.add_argument("--N", type=int)
        p.add_argument("--offset", type=int, help="label of the first component")
        p.add_argument("--system", choices=("finite", "infinite"))
        p.add_argument("--t-end", dest="t_end", type=float)
        p.add_argument("--dt-max", dest="dt_max", type=float)
        p.add_argument("--sample-interval", dest="sample_interval", type=float)
        p.add_argument("--blowup-factor", dest="blowup_sup_factor", type=float)
        p.add_argument("--dealias", action="store_const", const=True)
        if name == "simulate":
            p.add_argument("--mass-scale", dest="mass_scale", type=float)
        else:
            p.add_argument("--sigma-list", dest="sigma_list",
                           type=lambda s: [float(v) for v in s.split(",")])

    p = sub.add_parser("morawetz-check", help="interaction Morawetz identity check")
    _common(p)
    _grid(p)
    p.add_argument("--N", type=int)

    p = sub.add_parser("resonance-check", help="resonance sets and oracle residuals as NDJSON")
    _common(p)
    p.add_argument("--N-max", dest="n_max", type=int, default=8)
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--symmetric", action="store_true", help="use labels centred on 0")
    return parser


_NON_CONFIG = {"config", "verbose", "n_max", "samples", "symmetric"}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        raw = parse_config(args.config).to_dict()
    raw["experiment"] = args.experiment
    for key, value in vars(args).items():
        if key in _NON_CONFIG or key == "experiment" or value is None:
            continue
        raw[key] = value
    return config_from_dict(raw)


def _emit_dichotomy(cfg: ExperimentConfig) -> int:
    rows = ex.run_dichotomy(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    text = ex.write_csv(rows, out / "verdicts.csv", ex.VERDICT_COLUMNS)
    constants = ex.threshold_constants(cfg.N, cfg.system)
    write_manifest(out, cfg, ex.thresholds_dict(constants), {"review_flags": ex.monotonicity_flags(rows)})
    sys.stdout.write(text)
    return 2 if all(r["verdict"] == ex.INCONCLUSIVE for r in rows) else 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        with scipy.fft.set_workers(cfg.threads):
            return _dispatch(cfg, args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"cnls: error: {exc}", file=sys.stderr)
        return 1


def _dispatch(cfg: ExperimentConfig, args) -> int:
    if cfg.experiment == "ground-state":
        print(json.dumps(ex.run_ground_state(cfg), indent=2))
    elif cfg.experiment == "gn-constant":
        rows = ex.gn_table(cfg.n_list, cfg.L, cfg.M)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        sys.stdout.write(ex.write_csv(rows, Path(cfg.out) / "gn_constants.csv"))
        write_manifest(cfg.out, cfg, {"q_mass2": rows[-1]["threshold_mass"] ** 2 * 2})
    elif cfg.experiment == "simulate":
        res = ex.run_simulate(cfg)
        print(json.dumps({"status": res.outcome.status, "t_final": res.outcome.t_final,
                          "steps": res.outcome.steps}))
    elif cfg.experiment == "dichotomy":
        return _emit_dichotomy(cfg)
    elif cfg.experiment == "morawetz-check":
        report = ex.morawetz_check(cfg)
        print(json.dumps(report))
    elif cfg.experiment == "resonance-check":
        for rec in ex.resonance_check(args.n_max, args.samples, seed=cfg.seed, symmetric=args.symmetric):
            print(json.dumps(rec))
    return 0


if __name__ == "__main__":
    sys.exit(main())
