"""Batch experiment harness: calibration, coverage, rate CCDF, sweeps.

Each experiment loads a config, runs the analytic engine and/or the
simulator, writes one CSV per experiment (every row carries config
hash, engine and seed/tolerance provenance) plus a companion matplotlib
script that reproduces the corresponding figure family.  Reruns with an
identical spec and master seed produce byte-identical CSVs.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytic import (
    Omega,
    PathlossLaw,
    RateModel,
    association_probability,
    backhaul_snr_ccdf,
    calibrate_mu,
    joint_sbs_backhaul_coverage,
    mbs_coverage,
)
from .config import ConfigError, NetworkConfig, db_to_linear
from .geometry import Rect
from .simulator import simulate_coverage, simulate_rate_ccdfs

__all__ = ["ExperimentSpec", "run", "emit_plot_script"]

KINDS = ("calibrate", "coverage", "rate_ccdf", "sweep_eta", "sweep_bias",
         "sweep_density")
ENGINES = ("analytic", "simulate", "both")

_DEFAULT_GRIDS = {
    "coverage": list(np.arange(-10.0, 20.5, 2.0)),          # tau, dB
    "rate_ccdf": list(np.geomspace(3e5, 3e8, 15)),          # rho, bit/s
    "sweep_eta": [round(0.05 * k, 2) for k in range(1, 20)],
    "sweep_bias": [0.0, 5.0, 10.0, 15.0, 20.0],             # T_s, dB
    "sweep_density": [25.0, 50.0, 100.0, 200.0],            # lambda_s, /km^2
}


@dataclass
class ExperimentSpec:
    """One batch experiment: what to run, on which engine, where to write."""

    kind: str
    config_path: str
    out_dir: str
    engine: str = "both"
    grid: list = field(default_factory=list)
    seed: int = 0
    n_iter: int = 1000
    scheme: str = "IRA"
    rho: float = 20e6
    eta: float | None = None
    tau2_db: float = 5.0
    window_km: float = 2.0
    workers: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if not self.grid:
            self.grid = list(_DEFAULT_GRIDS.get(self.kind, []))
        if self.kind != "calibrate":
            if not self.grid:
                raise ConfigError("grid must be non-empty")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ConfigError("grid must be strictly ascending")
        if self.engine in ("simulate", "both") and self.n_iter < 1:
            raise ConfigError("iteration count must be >= 1 when simulating")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def window(self) -> Rect:
        return Rect.square(self.window_km * 1e3)

    def point_seed(self, index: int) -> int:
        return int(np.random.SeedSequence((self.seed, index)).generate_state(1)[0])


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def _provenance(spec: ExperimentSpec, config: NetworkConfig) -> list:
    return [config.hash(), spec.engine, spec.seed,
            spec.n_iter if spec.engine != "analytic" else "quad_rel_1e-7"]


_PROV_HEADER = ["config_hash", "engine", "seed", "iters_or_tol"]


def run(spec: ExperimentSpec) -> int:
    """Execute the experiment; returns the process exit status.

    0 = success, 2 = config error, 3 = convergence/calibration failure.
    A machine-readable error record is written to <out_dir>/error.json
    on failure.
    """
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        config = NetworkConfig.load(spec.config_path)
        _DISPATCH[spec.kind](spec, config, out)
        return 0
    except ConfigError as exc:
        _error_record(out, "config", exc)
        return 2
    except Exception as exc:  # convergence, calibration, bracket failures
        _error_record(out, "convergence", exc)
        return 3


def _error_record(out: Path, kind: str, exc: Exception) -> None:
    rec = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    with open(out / "error.json", "w", encoding="utf-8") as fh:
        json.dump(rec, fh, indent=2)


# ----------------------------------------------------------------------
# Individual experiments
# ----------------------------------------------------------------------

def _run_calibrate(spec: ExperimentSpec, config: NetworkConfig, out: Path):
    res = calibrate_mu(config, spec.window(), spec.n_iter, seed=spec.seed)
    header = ["mu_m", "saturated", "a_m_empirical", "a_m_stderr",
              "a_m_analytic", *_PROV_HEADER]
    rows = [[res.mu, res.saturated, res.a_m_empirical, res.a_m_stderr,
             res.a_m_analytic, *_provenance(spec, config)]]
    _write_csv(out / "calibration.csv", header, rows)


def _run_coverage(spec: ExperimentSpec, config: NetworkConfig, out: Path):
    tau_db = np.asarray(spec.grid, dtype=float)
    tau = 10.0 ** (tau_db / 10.0)
    tau2 = 10.0 ** (spec.tau2_db / 10.0)
    cols = {}
    if spec.engine in ("analytic", "both"):
        law = PathlossLaw.from_config(config)
        om = Omega.from_config(config)
        a_m = association_probability(law, om, "m")
        a_s = association_probability(law, om, "s")
        cols["mbs_analytic"] = [mbs_coverage(law, om, config, t, a_i=a_m) for t in tau]
        cols["joint_analytic"] = [
            joint_sbs_backhaul_coverage(law, om, config, t, tau2, a_s=a_s) for t in tau]
        cols["backhaul_analytic"] = [backhaul_snr_ccdf(law, config, t) for t in tau]
    if spec.engine in ("simulate", "both"):
        sim = simulate_coverage(config, spec.window(), tau, spec.n_iter,
                                spec.seed, tau2=tau2)
        cols["mbs_simulated"] = sim.mbs_access.probabilities
        cols["mbs_stderr"] = sim.mbs_access.stderr
        cols["joint_simulated"] = sim.sbs_joint.probabilities
        cols["joint_stderr"] = sim.sbs_joint.stderr
        cols["backhaul_simulated"] = sim.backhaul_typical.probabilities
        cols["backhaul_stderr"] = sim.backhaul_typical.stderr
    if spec.engine == "both":
        for fam in ("mbs", "joint", "backhaul"):
            cols[f"{fam}_abs_gap"] = list(np.abs(
                np.asarray(cols[f"{fam}_analytic"]) - np.asarray(cols[f"{fam}_simulated"])))
    header = ["tau_db", "tau2_db", *cols.keys(), *_PROV_HEADER]
    prov = _provenance(spec, config)
    rows = [[tau_db[i], spec.tau2_db, *(float(cols[c][i]) for c in cols), *prov]
            for i in range(len(tau_db))]
    _write_csv(out / "coverage.csv", header, rows)
    emit_plot_script(out / "coverage.csv", "coverage")


def _run_rate_ccdf(spec: ExperimentSpec, config: NetworkConfig, out: Path):
    rhos = np.asarray(spec.grid, dtype=float)
    schemes = ("IRA", "ORA", "WB") if spec.scheme == "all" else (spec.scheme,)
    cols = {}
    if spec.engine in ("analytic", "both"):
        model = RateModel(config)
        for s in schemes:
            cols[f"{s}_analytic"] = model.rate_ccdf(s, rhos, eta=spec.eta)
    if spec.engine in ("simulate", "both"):
        sims = simulate_rate_ccdfs(config, spec.window(), rhos, spec.n_iter,
                                   spec.seed, schemes=schemes)
        for s in schemes:
            cols[f"{s}_simulated"] = sims[s].probabilities
            cols[f"{s}_stderr"] = sims[s].stderr
    if spec.engine == "both":
        for s in schemes:
            cols[f"{s}_abs_gap"] = np.abs(cols[f"{s}_analytic"] - cols[f"{s}_simulated"])
    header = ["rho_bps", *cols.keys(), *_PROV_HEADER]
    prov = _provenance(spec, config)
    rows = [[float(rhos[i]), *(float(cols[c][i]) for c in cols), *prov]
            for i in range(len(rhos))]
    _write_csv(out / "rate_ccdf.csv", header, rows)
    emit_plot_script(out / "rate_ccdf.csv", "rate_ccdf")


def _golden_max(f, lo: float, hi: float, x_tol: float = 1e-3) -> float:
    """Golden-section maximizer of a unimodal scalar function."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > x_tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _run_sweep_eta(spec: ExperimentSpec, config: NetworkConfig, out: Path):
    model = RateModel(config)
    eta_star = _golden_max(lambda e: model.rate_coverage("ORA", spec.rho, eta=e),
                           0.01, 0.99)
    p_star = model.rate_coverage("ORA", spec.rho, eta=eta_star)
    rows = []
    prov = _provenance(spec, config)
    for e in spec.grid:
        p = model.rate_coverage("ORA", spec.rho, eta=float(e))
        rho50 = model.median_rate("ORA", eta=float(e))
        rows.append([float(e), spec.rho, p, rho50, eta_star, p_star, *prov])
    header = ["eta_a", "rho_bps", "p_r_ora", "median_rate_bps",
              "eta_star", "p_r_at_eta_star", *_PROV_HEADER]
    _write_csv(out / "sweep_eta.csv", header, rows)
    emit_plot_script(out / "sweep_eta.csv", "sweep")


def _sweep_point_bias(args):
    ini, ts_db, rho, eta = args
    config = NetworkConfig.from_ini_str(ini).with_updates(t_s=db_to_linear(ts_db))
    model = RateModel(config)
    row = [ts_db, rho]
    for s in ("IRA", "ORA", "WB"):
        row.append(model.rate_coverage(s, rho, eta=eta))
        row.append(model.median_rate(s, eta=eta))
    return row


def _sweep_point_density(args):
    ini, lam_s, rho, eta = args
    config = NetworkConfig.from_ini_str(ini).with_updates(lambda_s=lam_s)
    model = RateModel(config)
    eta_star = _golden_max(lambda e: model.rate_coverage("ORA", rho, eta=e),
                           0.01, 0.99)
    row = [lam_s, rho, eta_star]
    for s in ("IRA", "ORA", "WB", "MACRO_ONLY"):
        row.append(model.rate_coverage(s, rho, eta=eta))
        row.append(model.median_rate(s, eta=eta))
    return row


def _parallel_rows(spec: ExperimentSpec, worker, args_list):
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            return list(pool.map(worker, args_list))
    return [worker(a) for a in args_list]


def _run_sweep_bias(spec: ExperimentSpec, config: NetworkConfig, out: Path):
    ini = config.to_ini_str()
    rows = _parallel_rows(spec, _sweep_point_bias,
                          [(ini, float(t), spec.rho, spec.eta) for t in spec.grid])
    prov = _provenance(spec, config)
    header = ["t_s_db", "rho_bps"]
    for s in ("ira", "ora", "wb"):
        header += [f"p_r_{s}", f"median_rate_{s}_bps"]
    header += _PROV_HEADER
    _write_csv(out / "sweep_bias.csv", header, [r + prov for r in rows])
    emit_plot_script(out / "sweep_bias.csv", "sweep")


def _run_sweep_density(spec: ExperimentSpec, config: NetworkConfig, out: Path):
    ini = config.to_ini_str()
    rows = _parallel_rows(spec, _sweep_point_density,
                          [(ini, float(l), spec.rho, spec.eta) for l in spec.grid])
    prov = _provenance(spec, config)
    header = ["lambda_s_per_km2", "rho_bps", "eta_star"]
    for s in ("ira", "ora", "wb", "macro"):
        header += [f"p_r_{s}", f"median_rate_{s}_bps"]
    header += _PROV_HEADER
    _write_csv(out / "sweep_density.csv", header, [r + prov for r in rows])
    emit_plot_script(out / "sweep_density.csv", "sweep")


_DISPATCH = {
    "calibrate": _run_calibrate,
    "coverage": _run_coverage,
    "rate_ccdf": _run_rate_ccdf,
    "sweep_eta": _run_sweep_eta,
    "sweep_bias": _run_sweep_bias,
    "sweep_density": _run_sweep_density,
}


# ----------------------------------------------------------------------
# Plot script generation (CSV in, matplotlib script out)
# ----------------------------------------------------------------------

_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Plot {kind} results from {csv_name} (auto-generated)."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

path = Path(__file__).parent / "{csv_name}"
with open(path, newline="") as fh:
    rows = list(csv.DictReader(fh))

x = [float(r["{x_col}"]) for r in rows]
fig, ax = plt.subplots(figsize=(6, 4))
for col in {y_cols}:
    if col in rows[0] and rows[0][col] != "":
        ax.plot(x, [float(r[col]) for r in rows],
                marker="o" if "simulated" in col else None,
                linestyle="" if "simulated" in col else "-",
                label=col)
ax.set_xlabel("{x_label}")
ax.set_ylabel("{y_label}")
{x_scale}ax.grid(True, alpha=0.4)
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(path.with_suffix(".png"), dpi=150)
print("wrote", path.with_suffix(".png"))
'''


def emit_plot_script(csv_path, kind: str) -> Path:
    """Write a standalone matplotlib script next to an experiment CSV."""
    csv_path = Path(csv_path)
    if not csv_path.exists():
        raise FileNotFoundError(f"no such CSV: {csv_path}")
    with open(csv_path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    if kind == "coverage":
        x_col, x_label, x_scale = "tau_db", "SINR threshold (dB)", ""
    elif kind == "rate_ccdf":
        x_col, x_label = "rho_bps", "rate threshold (bit/s)"
        x_scale = 'ax.set_xscale("log")\n'
    elif kind == "sweep":
        x_col, x_label, x_scale = header[0], header[0], ""
    else:
        raise ValueError(f"unknown plot kind {kind!r}")
    y_cols = [c for c in header
              if c not in (x_col, *_PROV_HEADER, "tau2_db", "rho_bps")
              and not c.endswith("_stderr")]
    script = _PLOT_TEMPLATE.format(kind=kind, csv_name=csv_path.name,
                                   x_col=x_col, x_label=x_label,
                                   y_cols=repr(y_cols), x_scale=x_scale,
                                   y_label="probability / value")
    out = csv_path.with_name(f"plot_{csv_path.stem}.py")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(script)
    return out
