"""Command-line front end.

Verbs: calibrate, coverage, rate, sweep.  Exit codes: 0 success,
2 config error, 3 convergence failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError
from .experiments import ExperimentSpec, run


def _parse_grid(text: str) -> list:
    """Grid syntax: comma list '25,50,100' or range 'start:stop:step'."""
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise ConfigError("grid step must be > 0")
        out = []
        x = start
        while x <= stop + 1e-12:
            out.append(round(x, 10))
            x += step
        return out
    return [float(v) for v in text.split(",")]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="network config file (INI)")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    p.add_argument("--engine", default="both",
                   choices=("analytic", "simulate", "both"))
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--iters", type=int, default=1000,
                   help="Monte Carlo iterations per estimate")
    p.add_argument("--grid", type=str, default="",
                   help="grid points: 'a,b,c' or 'start:stop:step'")
    p.add_argument("--window-km", type=float, default=2.0,
                   help="simulation window side (km)")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers for sweep grid points")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="iabnet",
        description="Coverage and rate analysis of a two-tier mm-wave "
                    "network with wireless (integrated) backhaul: "
                    "Monte Carlo simulator and closed-form engine.")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("calibrate", help="fit the LOS range constant mu "
                                         "to the sampled blockage process")
    _add_common(p)

    p = sub.add_parser("coverage", help="SINR/SNR coverage curves")
    _add_common(p)
    p.add_argument("--tau2-db", type=float, default=5.0,
                   help="backhaul SNR threshold for the joint coverage (dB)")

    p = sub.add_parser("rate", help="rate CCDF curves")
    _add_common(p)
    p.add_argument("--scheme", default="all",
                   choices=("IRA", "ORA", "WB", "all"))
    p.add_argument("--eta", type=float, default=None,
                   help="override the ORA access bandwidth fraction")

    p = sub.add_parser("sweep", help="parameter sweeps with derived summaries")
    _add_common(p)
    p.add_argument("--kind", required=True, choices=("eta", "bias", "density"))
    p.add_argument("--rho", type=float, default=20e6,
                   help="target rate threshold (bit/s)")
    p.add_argument("--eta", type=float, default=None,
                   help="override the ORA access bandwidth fraction")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = {"calibrate": "calibrate", "coverage": "coverage",
            "rate": "rate_ccdf"}.get(args.verb, f"sweep_{getattr(args, 'kind', '')}")
    try:
        spec = ExperimentSpec(
            kind=kind,
            config_path=args.config,
            out_dir=args.out,
            engine=args.engine,
            grid=_parse_grid(args.grid) if args.grid else [],
            seed=args.seed,
            n_iter=args.iters,
            scheme=getattr(args, "scheme", "IRA"),
            rho=getattr(args, "rho", 20e6),
            eta=getattr(args, "eta", None),
            tau2_db=getattr(args, "tau2_db", 5.0),
            window_km=args.window_km,
            workers=args.workers,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status = run(spec)
    if status != 0:
        print(f"experiment failed with status {status}; "
              f"see {args.out}/error.json", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
