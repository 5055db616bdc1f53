"""Experiment drivers behind the command-line subcommands."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, write_manifest
from .core import VecField, inverse_transform, make_grid, norm_l2h, write_snapshot, read_snapshot
from .diagnostics import (
    DiagnosticsMonitor,
    central_difference,
    edge_window,
    morawetz_direct,
    morawetz_fft,
    morawetz_kernel,
    morawetz_action,
    morawetz_derivative,
    periodic_offsets,
)
from .groundstate import build_vector_ground_state, solve_townes_petviashvili, solve_townes_shooting
from .nonlinearity import apply_nonlinearity, apply_nonlinearity_bruteforce, resonance_set
from .solver import BLOWUP, COMPLETED, EvolutionOutcome, SolverConfig, evolve
from .variational import SharpConstants, sharp_constants, weinstein

log = logging.getLogger(__name__)

DISPERSE = "disperses"
BLOWUP_VERDICT = "blowup"
INCONCLUSIVE = "inconclusive"
NEAR_THRESHOLD_BAND = (0.95, 1.05)
TAIL_FRACTION = 0.1
TAIL_GROWTH_MAX = 0.02
SUP_DECAY_MIN = 3.0
EDGE_MASS_MAX = 1e-6


@lru_cache(maxsize=None)
def reference_q_mass2() -> float:
    """``||Q||^2`` from Petviashvili on a well-resolved reference grid."""
    return solve_townes_petviashvili(make_grid(32.0, 256)).mass2


def threshold_constants(N: int, system: str = "finite", q_mass2: Optional[float] = None) -> SharpConstants:
    q = reference_q_mass2() if q_mass2 is None else q_mass2
    return sharp_constants(math.inf if system == "infinite" else N, q)


def _noise(grid, n, rng: np.random.Generator) -> np.ndarray:
    """Smooth complex noise: random low modes, unit sup norm."""
    coef = rng.standard_normal((n, grid.M, grid.M)) + 1j * rng.standard_normal((n, grid.M, grid.M))
    coef *= np.exp(-grid.k2 / 2.0)
    out = inverse_transform(coef, grid)
    return out / np.abs(out).max()


def initial_data(cfg: ExperimentConfig, constants: Optional[SharpConstants] = None, sigma=None) -> VecField:
    """Build ``u0`` for ``cfg.init``; rescaled so ``||u0||^2 = sigma * threshold^2``."""
    grid = make_grid(cfg.L, cfg.M)
    sigma = cfg.mass_scale if sigma is None else sigma
    if cfg.init == "gaussian":
        X, Y = grid.coords
        g = np.exp(-(X**2 + Y**2) / 2.0)
        u = VecField(grid, np.repeat(g[None], cfg.N, axis=0).astype(np.complex128), cfg.offset)
    elif cfg.init == "ground-state":
        gs = solve_townes_petviashvili(grid, tol=cfg.tol)
        u = build_vector_ground_state(gs, cfg.N).components
        u = VecField(grid, u.data, cfg.offset)
    elif cfg.init.startswith("snapshot:"):
        u, _ = read_snapshot(cfg.init.split(":", 1)[1])
    else:
        raise ValueError(f"unknown initial data family {cfg.init!r}")
    if cfg.perturbation:
        rng = np.random.default_rng(cfg.seed)
        u = u.with_data(u.data + cfg.perturbation * np.abs(u.data).max() * _noise(u.grid, u.n_components, rng))
    if sigma is not None:
        constants = constants or threshold_constants(u.n_components, cfg.system)
        u = u * math.sqrt(sigma * constants.threshold_mass2 / norm_l2h(u, 0) ** 2)
    return u


def edge_mass_fraction(u: VecField) -> float:
    """Share of the mass sitting where the edge taper is active."""
    dx, dy = periodic_offsets(u.grid)
    rho = u.density()
    total = rho.sum()
    return float(rho[edge_window(dx, dy, u.grid.L) < 1.0].sum() / total) if total else 0.0


class SnapshotWriter:
    def __init__(self, out_dir):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.count = 0

    def __call__(self, t, u):
        write_snapshot(self.out / f"snap_{self.count:05d}.rnls", u, t)
        self.count += 1


class EdgeMonitor:
    def __init__(self):
        self.times, self.fractions = [], []

    def __call__(self, t, u):
        self.times.append(t)
        self.fractions.append(edge_mass_fraction(u))


@dataclass
class RunResult:
    outcome: EvolutionOutcome
    diagnostics: DiagnosticsMonitor
    edge: EdgeMonitor
    constants: SharpConstants
    u0: VecField


def run_simulation(u0: VecField, solver_cfg: SolverConfig, constants: SharpConstants,
                   stream=None, snapshot_dir=None) -> RunResult:
    diag = DiagnosticsMonitor(stream=stream)
    edge = EdgeMonitor()
    monitors = [diag, edge]
    if snapshot_dir is not None:
        monitors.append(SnapshotWriter(snapshot_dir))
    outcome = evolve(u0, solver_cfg, monitors)
    return RunResult(outcome, diag, edge, constants, u0)


def dispersal_proxy(result: RunResult) -> dict:
    """Tail growth of the running L^4 integral and sup-norm decay, cut at wrap-around."""
    rec = result.diagnostics.records
    fr = np.asarray(result.edge.fractions)
    n_ok = len(rec) if np.all(fr <= EDGE_MASS_MAX) else int(np.argmax(fr > EDGE_MASS_MAX))
    if n_ok < 3:
        return {"window_end": rec[max(n_ok - 1, 0)].t, "tail_growth": math.nan, "sup_decay": math.nan, "ok": False}
    t = np.array([r.t for r in rec[:n_ok]])
    acc = np.array([r.l4_accum for r in rec[:n_ok]])
    sup = np.array([r.sup_norm for r in rec[:n_ok]])
    cut = t[-1] - TAIL_FRACTION * (t[-1] - t[0])
    growth = (acc[-1] - np.interp(cut, t, acc)) / acc[-1] if acc[-1] > 0 else 0.0
    decay = sup[0] / sup[-1]
    return {
        "window_end": float(t[-1]),
        "tail_growth": float(growth),
        "sup_decay": float(decay),
        "ok": bool(growth < TAIL_GROWTH_MAX and decay >= SUP_DECAY_MIN),
    }


def classify(result: RunResult, sigma: float) -> tuple[str, str]:
    if NEAR_THRESHOLD_BAND[0] < sigma < NEAR_THRESHOLD_BAND[1]:
        return INCONCLUSIVE, "near-threshold band"
    if result.outcome.status == BLOWUP:
        return BLOWUP_VERDICT, result.outcome.blowup_info.get("reason", "")
    if result.outcome.status == COMPLETED:
        proxy = dispersal_proxy(result)
        if proxy["ok"]:
            return DISPERSE, "dispersal proxy satisfied"
        return INCONCLUSIVE, f"tail_growth={proxy['tail_growth']:.3g} sup_decay={proxy['sup_decay']:.3g}"
    return INCONCLUSIVE, f"run {result.outcome.status}"


VERDICT_COLUMNS = ("N", "sigma", "mass2", "threshold_mass2", "energy", "status", "t_final",
                   "tail_growth", "sup_decay", "verdict", "reason")


def run_dichotomy(cfg: ExperimentConfig) -> list[dict]:
    """One evolution per ``sigma`` in ``cfg.sigma_list``; returns the verdict rows."""
    constants = threshold_constants(cfg.N, cfg.system)
    rows = []
    for sigma in cfg.sigma_list:
        u0 = initial_data(cfg, constants, sigma=sigma)
        result = run_simulation(u0, cfg.solver_config(), constants)
        verdict, reason = classify(result, sigma)
        proxy = dispersal_proxy(result) if result.outcome.status == COMPLETED else {}
        rows.append({
            "N": cfg.N,
            "sigma": sigma,
            "mass2": norm_l2h(u0, 0) ** 2,
            "threshold_mass2": constants.threshold_mass2,
            "energy": result.diagnostics.records[0].energy,
            "status": result.outcome.status,
            "t_final": result.outcome.t_final,
            "tail_growth": proxy.get("tail_growth", math.nan),
            "sup_decay": proxy.get("sup_decay", math.nan),
            "verdict": verdict,
            "reason": reason,
        })
        log.info("sigma=%g -> %s (%s)", sigma, verdict, reason)
    return rows


def monotonicity_flags(rows: list[dict]) -> list[str]:
    """Blowup verdicts strictly below a positive-energy dispersal, for human review."""
    flags = []
    for r in rows:
        if r["verdict"] != BLOWUP_VERDICT:
            continue
        for s in rows:
            if s["verdict"] == DISPERSE and s["energy"] > 0 and r["sigma"] < s["sigma"]:
                flags.append(f"blowup at sigma={r['sigma']} below dispersal at sigma={s['sigma']}")
    return flags


def gn_table(n_list, L: float, M: int) -> list[dict]:
    """Formula ``C_N`` against the measured Weinstein value of the vector ground state."""
    gs = solve_townes_petviashvili(make_grid(L, M))
    rows = []
    for n in n_list:
        c = sharp_constants(n, gs.mass2)
        measured = weinstein(build_vector_ground_state(gs, n).components)
        rows.append({
            "N": n,
            "C_N": c.C_N,
            "W_measured": measured,
            "rel_error": abs(measured - c.C_N) / c.C_N,
            "threshold_mass": c.threshold_mass,
        })
    c = sharp_constants(math.inf, gs.mass2)
    rows.append({"N": "inf", "C_N": c.C_N, "W_measured": math.nan, "rel_error": math.nan,
                 "threshold_mass": c.threshold_mass})
    return rows


def resonance_check(n_max: int = 8, samples: int = 5, M: int = 16, seed: int = 0, symmetric: bool = False):
    """Yield one record per (N, j) with the oracle-vs-closed-form residual."""
    rng = np.random.default_rng(seed)
    grid = make_grid(2 * np.pi, M)
    for n in range(1, n_max + 1):
        offset = -(n // 2) if symmetric else 0
        worst = 0.0
        for _ in range(samples):
            data = rng.standard_normal((n, M, M)) + 1j * rng.standard_normal((n, M, M))
            u = VecField(grid, data, offset)
            a, b = apply_nonlinearity(u).data, apply_nonlinearity_bruteforce(u).data
            worst = max(worst, float(np.abs(a - b).max() / np.abs(b).max()))
        labels = list(range(offset, offset + n))
        for j in labels:
            yield {"j": j, "N": n, "cardinality": len(resonance_set(j, labels)), "max_residual": worst}


def morawetz_check(cfg: ExperimentConfig, dts=None) -> dict:
    """Finite-difference ``dM/dt`` against the four-term formula under dt halving,
    plus the direct-quadrature oracle on a 16x16 grid."""
    grid = make_grid(cfg.L, cfg.M)
    u0 = morawetz_test_data(grid, cfg.N)
    kernel = morawetz_kernel(grid)
    t0 = 0.2
    dts = dts or (0.01, 0.005, 0.0025)
    errors = []
    for dt in dts:
        m_vals, d_vals = [], []

        def mon(t, u, dt=dt):
            if abs(t - t0) <= 1.01 * dt:
                m_vals.append(morawetz_action(u, kernel=kernel))
                d_vals.append(morawetz_derivative(u, kernel=kernel))

        evolve(u0, SolverConfig(t_end=t0 + 1.5 * dt, dt_max=dt, sample_interval=dt, adaptive=False), [mon])
        errors.append(abs(central_difference(m_vals, dt)[0] - d_vals[1]))
    small = morawetz_test_data(make_grid(2 * np.pi, 16), cfg.N, width=0.8)
    a_fft, t_fft = morawetz_fft(small)
    a_dir, t_dir = morawetz_direct(small)
    oracle = max(abs(a_fft - a_dir), abs(t_fft.total - t_dir.total)) / max(abs(t_dir.total), abs(a_dir), 1e-300)
    return {
        "dts": list(dts),
        "fd_errors": errors,
        "ratios": [errors[i] / errors[i + 1] for i in range(len(errors) - 1)],
        "scale": abs(d_vals[1]),
        "oracle_rel_residual": oracle,
        "max_residual": errors[-1],
    }


def morawetz_test_data(grid, n: int = 2, width: float = 1.0) -> VecField:
    """Off-centre boosted Gaussians; every term of the identity is non-zero."""
    X, Y = grid.coords
    comps = []
    for j in range(n):
        cx, cy = 0.6 * (-1) ** j, 0.3 * j
        g = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * width**2))
        comps.append((0.9**j) * g * np.exp(1j * (0.5 * X - 0.3 * j * Y)))
    return VecField(grid, np.array(comps))


def write_csv(rows: list[dict], path=None, columns=None) -> str:
    columns = columns or list(rows[0].keys())
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in columns})
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def write_outputs(out_dir, records=None, table=None, table_name="table.csv", snapshots=()) -> Path:
    """Write diagnostics records as NDJSON, a CSV table and ``(t, field)`` snapshots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if records:
        with open(out / "diagnostics.ndjson", "w") as fh:
            for r in records:
                fh.write(r.to_json() + "\n")
    if table:
        write_csv(table, out / table_name)
    for i, (t, u) in enumerate(snapshots):
        write_snapshot(out / f"snap_{i:05d}.rnls", u, t)
    return out


def thresholds_dict(c: SharpConstants) -> dict:
    row = c.as_row()
    return {k: row[k] for k in ("N", "C_N", "threshold_mass", "threshold_mass2", "q_mass2")}


def run_simulate(cfg: ExperimentConfig) -> RunResult:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    constants = threshold_constants(cfg.N, cfg.system)
    u0 = initial_data(cfg, constants)
    with open(out / "diagnostics.ndjson", "w") as fh:
        result = run_simulation(u0, cfg.solver_config(), constants, stream=fh,
                                snapshot_dir=out if cfg.snapshots else None)
    write_manifest(out, cfg, thresholds_dict(constants), {
        "outcome": {"status": result.outcome.status, "t_final": result.outcome.t_final,
                    "steps": result.outcome.steps},
    })
    return result


def run_ground_state(cfg: ExperimentConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {}
    if cfg.method in ("petviashvili", "both"):
        gs = solve_townes_petviashvili(make_grid(cfg.L, cfg.M), tol=cfg.tol)
        report["petviashvili"] = gs.scalars()
        write_snapshot(out / "profile.rnls", gs.profile)
    if cfg.method in ("shooting", "both"):
        report["shooting"] = solve_townes_shooting().scalars()
    if len(report) == 2:
        a, b = report["petviashvili"]["mass2"], report["shooting"]["mass2"]
        report["mass2_rel_diff"] = abs(a - b) / b
    (out / "groundstate.json").write_text(json.dumps(report, indent=2) + "\n")
    q = report.get("petviashvili", report.get("shooting"))["mass2"]
    write_manifest(out, cfg, thresholds_dict(sharp_constants(cfg.N, q)))
    return report
