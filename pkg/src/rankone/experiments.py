"""Seeded experiment drivers: phase diagrams, noise sweeps, tomography, design reports.

Every trial derives its own seed from ``(master, n, r, m, trial)`` through
:class:`numpy.random.SeedSequence`, so grids can grow without changing the
cells already run, and the noise sweep reuses one signal, ensemble and
noise direction across all ``eta`` values of a trial.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import designs, ensembles, linalg, solver
from .errors import ConfigError

KINDS = ("phase_diagram", "noise_sweep", "design_report", "tomography", "verify_suite")
MEASUREMENTS = ("gaussian", "real_gaussian", "design")
SIGNALS = ("hermitian", "psd", "density", "maximally_mixed")
CSV_HEADER = ("n", "r", "m", "eta", "seed", "trial", "rel_error", "success", "iterations", "wall_ms")
DEFAULT_THRESHOLD = 1e-3


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``m`` lists absolute measurement counts; ``m_per_rn`` lists multipliers
    giving ``m = c * r * n`` for each ``(n, r)``. Exactly one is required
    for recovery experiments.
    """

    kind: str
    n: tuple = ()
    r: tuple = ()
    m: tuple = ()
    m_per_rn: tuple = ()
    trials: int = 1
    eta: tuple = (0.0,)
    seed: int = 0
    measurement: str = "gaussian"
    design_file: str | None = None
    signal: str = "hermitian"
    mode: str = "nuclear"
    solver: solver.SolverConfig = field(default_factory=solver.SolverConfig)
    success_threshold: float = DEFAULT_THRESHOLD
    k_max: int = 4
    timing: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        for name in ("n", "r", "m"):
            if any((not isinstance(v, int)) or v < 1 for v in getattr(self, name)):
                raise ConfigError(f"grid values for {name!r} must be positive integers")
        if any(not v > 0 for v in self.m_per_rn):
            raise ConfigError("m_per_rn values must be positive")
        if any(not (v >= 0 and math.isfinite(v)) for v in self.eta):
            raise ConfigError("eta values must be finite and nonnegative")
        if not self.eta:
            raise ConfigError("eta list must not be empty")
        if self.measurement not in MEASUREMENTS:
            raise ConfigError(f"measurement must be one of {MEASUREMENTS}")
        if self.signal not in SIGNALS:
            raise ConfigError(f"signal must be one of {SIGNALS}")
        if self.mode not in solver.MODES:
            raise ConfigError(f"mode must be one of {solver.MODES}")
        if not self.success_threshold > 0:
            raise ConfigError("success_threshold must be positive")
        if self.kind in ("phase_diagram", "noise_sweep", "tomography"):
            if not self.n or not self.r:
                raise ConfigError("recovery experiments need nonempty n and r grids")
            if bool(self.m) == bool(self.m_per_rn):
                raise ConfigError("give exactly one of 'm' or 'm_per_rn'")
            if any(r > n for n in self.n for r in self.r) and self.signal != "maximally_mixed":
                raise ConfigError("every r must be <= every n")
        if self.measurement == "design" and self.kind != "verify_suite" and not self.design_file:
            raise ConfigError("design measurements need 'design_file'")
        if self.kind == "design_report" and not self.design_file:
            raise ConfigError("design_report needs 'design_file'")

    def cells(self):
        """``(n, r, m)`` grid cells in sorted order."""
        out = set()
        for n, r in itertools.product(self.n, self.r):
            ms = self.m or tuple(int(round(c * r * n)) for c in self.m_per_rn)
            out.update((n, r, m) for m in ms)
        return sorted(out)


_SOLVER_KEYS = {f.name for f in fields(solver.SolverConfig)}
_GRID_KEYS = ("n", "r", "m", "m_per_rn")


def config_from_dict(obj, **overrides):
    """Build an :class:`ExperimentConfig` from parsed JSON; unknown keys are errors."""
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    obj = {**obj, **{k: v for k, v in overrides.items() if v is not None}}
    allowed = {f.name for f in fields(ExperimentConfig)} | {"grid"}
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {k: v for k, v in obj.items() if k != "grid"}
    grid = obj.get("grid", {})
    if not isinstance(grid, dict) or set(grid) - set(_GRID_KEYS):
        raise ConfigError(f"grid must be an object with keys among {_GRID_KEYS}")
    kw.update(grid)
    for key in _GRID_KEYS + ("eta",):
        if key in kw:
            value = kw[key]
            kw[key] = tuple(value) if isinstance(value, list) else (value,)
    if "solver" in kw:
        sc = kw["solver"]
        if not isinstance(sc, dict) or set(sc) - _SOLVER_KEYS:
            raise ConfigError(f"solver must be an object with keys among {sorted(_SOLVER_KEYS)}")
        try:
            kw["solver"] = solver.SolverConfig(**sc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid solver settings: {exc}") from exc
    if "kind" not in kw:
        raise ConfigError("config is missing 'kind'")
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, **overrides):
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(obj, **overrides)


# Trials ------------------------------------------------------------------------


def trial_seed(master, n, r, m, trial):
    """Deterministic 64-bit seed for one grid cell and trial."""
    return int(np.random.SeedSequence([master, n, r, m, trial]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class TrialRecord:
    n: int
    r: int
    m: int
    eta: float
    seed: int
    trial: int
    relative_error: float
    success: bool
    iterations: int
    wall_time: float
    status: str = ""
    objective: float = math.nan
    reference_objective: float = math.nan
    feasibility_gap: float = math.nan
    b_norm: float = math.nan
    error_ratio: float = math.nan
    fidelity: float = math.nan
    estimate_trace: float = math.nan
    estimate_min_eigenvalue: float = math.nan

    def sort_key(self):
        return (self.n, self.r, self.m, self.eta, self.trial)


def _signal(kind, n, r, rng):
    if kind == "maximally_mixed":
        return np.eye(n, dtype=np.complex128) / n
    if kind == "density":
        x = linalg.random_low_rank(n, r, True, rng).matrix
        return x / np.trace(x).real
    return linalg.random_low_rank(n, r, kind == "psd", rng).matrix


def _ensemble(cfg, design, n, m, rng):
    if cfg.measurement == "design":
        if design.dim != n:
            raise ConfigError(f"design has dimension {design.dim} but the grid asks for n={n}")
        return ensembles.sample_from_design(design, m, rng)
    field = "real" if cfg.measurement == "real_gaussian" else "complex"
    return ensembles.sample_gaussian(n, m, rng, field)


def renormalize_density(x):
    """Project onto the PSD cone and scale to unit trace (maximally mixed if nothing is left)."""
    x = linalg.project_psd(linalg.hermitian(x))
    tr = float(np.trace(x).real)
    if tr <= 0:
        return np.eye(x.shape[0], dtype=np.complex128) / x.shape[0]
    return x / tr


def run_trial(cfg, design, n, r, m, trial, etas):
    """Solve one seeded instance at each ``eta``; returns one record per ``eta``."""
    seed = trial_seed(cfg.seed, n, r, m, trial)
    rng = np.random.default_rng(seed)
    x = _signal(cfg.signal, n, r, rng)
    ens = _ensemble(cfg, design, n, m, rng)
    clean = ensembles.apply(ens, x)
    direction = rng.standard_normal(m)
    direction /= np.linalg.norm(direction)
    tomography = cfg.kind == "tomography"
    records = []
    for eta in etas:
        b = clean + eta * direction
        problem = solver.RecoveryProblem(ens, b, float(eta), cfg.mode)
        result = solver.solve(problem, cfg.solver)
        report = solver.certify(result, problem, x)
        x_hat = result.X_hat
        fidelity = math.nan
        rel = report.relative_error
        if tomography:
            x_hat = renormalize_density(x_hat)
            rel = float(np.linalg.norm(x_hat - x) / np.linalg.norm(x))
            fidelity = 1.0 - 0.5 * linalg.nuclear_norm(x_hat - x)
        records.append(
            TrialRecord(
                n=n, r=r, m=m, eta=float(eta), seed=seed, trial=trial,
                relative_error=rel,
                success=bool(rel <= cfg.success_threshold),
                iterations=result.iterations,
                wall_time=result.wall_time,
                status=result.status,
                objective=result.objective,
                reference_objective=report.reference_objective,
                feasibility_gap=result.feasibility_gap,
                b_norm=float(np.linalg.norm(b)),
                error_ratio=report.error_ratio,
                fidelity=fidelity,
                estimate_trace=float(np.trace(x_hat).real),
                estimate_min_eigenvalue=float(linalg.eigvalsh(x_hat)[-1]),
            )
        )
    return records


def _worker_count():
    env = os.environ.get("R1_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"R1_THREADS must be an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError("R1_THREADS must be >= 1")
        return value
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _run_trials(cfg, etas):
    design = designs.load_design(cfg.design_file) if cfg.measurement == "design" else None
    jobs = [(n, r, m, t) for n, r, m in cfg.cells() for t in range(cfg.trials)]
    workers = min(_worker_count(), len(jobs))
    if workers <= 1:
        batches = [run_trial(cfg, design, n, r, m, t, etas) for n, r, m, t in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_trial, cfg, design, n, r, m, t, etas) for n, r, m, t in jobs]
            batches = [f.result() for f in futures]
    return sorted(itertools.chain.from_iterable(batches), key=TrialRecord.sort_key)


# Tables and summaries ------------------------------------------------------------


@dataclass
class ExperimentResult:
    records: list
    summary: dict
    timing: bool = False

    def to_csv(self):
        return records_to_csv(self.records, self.timing)


def _fmt(x):
    return format(float(x), ".12g")


def records_to_csv(records, timing=False):
    """CSV text with the fixed header; ``wall_ms`` is left empty unless ``timing``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow([
            rec.n, rec.r, rec.m, _fmt(rec.eta), rec.seed, rec.trial, _fmt(rec.relative_error),
            int(rec.success), rec.iterations, _fmt(1000.0 * rec.wall_time) if timing else "",
        ])
    return buf.getvalue()


def _rate(records):
    k = sum(r.success for r in records)
    p = k / len(records)
    return p, math.sqrt(p * (1 - p) / len(records))


def minimality_witness(records, tol_objective=1e-6, tol_gap=1e-7):
    """Check ``objective <= ||X||_1 + 1e-6`` and ``gap <= 1e-7 (1 + ||b||)`` on converged noiseless trials."""
    checked = violations = 0
    worst_objective = worst_gap = -math.inf
    for rec in records:
        if rec.eta != 0 or rec.status != "converged":
            continue
        checked += 1
        excess = rec.objective - rec.reference_objective
        gap_ratio = rec.feasibility_gap / (1.0 + rec.b_norm)
        worst_objective = max(worst_objective, excess)
        worst_gap = max(worst_gap, gap_ratio)
        if excess > tol_objective or gap_ratio > tol_gap:
            violations += 1
    return {"checked": checked, "violations": violations,
            "max_objective_excess": worst_objective if checked else None,
            "max_gap_over_1_plus_b": worst_gap if checked else None,
            "pass": violations == 0}


def _cell_summary(records):
    out = []
    for key, group in itertools.groupby(records, key=lambda r: (r.n, r.r, r.m, r.eta)):
        group = list(group)
        rate, se = _rate(group)
        errs = np.array([g.relative_error for g in group])
        out.append({
            "n": key[0], "r": key[1], "m": key[2], "eta": key[3], "trials": len(group),
            "success_rate": rate, "stderr": se,
            "median_rel_error": float(np.median(errs)),
            "converged": sum(g.status == "converged" for g in group),
            "median_iterations": float(np.median([g.iterations for g in group])),
        })
    return out


def monotone_in_m(cells):
    """Success rates nondecreasing in ``m`` at fixed ``(n, r, eta)`` within 3 pooled standard errors."""
    drops = []
    for key, group in itertools.groupby(cells, key=lambda c: (c["n"], c["r"], c["eta"])):
        group = sorted(group, key=lambda c: c["m"])
        for a, b in zip(group, group[1:]):
            pooled_p = (a["success_rate"] * a["trials"] + b["success_rate"] * b["trials"]) / (a["trials"] + b["trials"])
            se = math.sqrt(max(pooled_p * (1 - pooled_p), 0.0) * (1 / a["trials"] + 1 / b["trials"]))
            if a["success_rate"] - b["success_rate"] > 3 * se + 1e-12:
                drops.append({"n": key[0], "r": key[1], "m_from": a["m"], "m_to": b["m"]})
    return {"drops": drops, "pass": not drops}


def _config_echo(cfg):
    out = asdict(cfg)
    out["solver"] = asdict(cfg.solver)
    for k, v in out.items():
        if isinstance(v, tuple):
            out[k] = list(v)
    return out


def run_phase_diagram(cfg):
    """One record per ``(n, r, m, trial)`` at ``eta = cfg.eta[0]``; success rate per cell."""
    records = _run_trials(cfg, (cfg.eta[0],))
    cells = _cell_summary(records)
    summary = {"kind": "phase_diagram", "config": _config_echo(cfg), "cells": cells,
               "monotone_in_m": monotone_in_m(cells), "minimality_witness": minimality_witness(records)}
    return ExperimentResult(records, summary, cfg.timing)


def run_noise_sweep(cfg):
    """Records per ``(eta, trial)`` with median ``error / (eta / sqrt(m))`` per ``eta``."""
    etas = tuple(sorted(set(cfg.eta)))
    records = _run_trials(cfg, etas)
    per_eta = []
    for (n, r, m), group in itertools.groupby(records, key=lambda rec: (rec.n, rec.r, rec.m)):
        group = list(group)
        for eta in etas:
            rows = [g for g in group if g.eta == eta]
            errs = np.array([g.relative_error for g in rows])
            ratio = float(np.median([g.error_ratio for g in rows])) if eta > 0 else None
            per_eta.append({"n": n, "r": r, "m": m, "eta": eta, "median_rel_error": float(np.median(errs)),
                            "median_ratio": ratio, "success_rate": _rate(rows)[0]})
    summary = {"kind": "noise_sweep", "config": _config_echo(cfg), "per_eta": per_eta,
               "noise_scaling": noise_scaling(per_eta), "minimality_witness": minimality_witness(records)}
    return ExperimentResult(records, summary, cfg.timing)


def noise_scaling(per_eta, max_spread=4.0):
    """Spread of the median ratios across positive ``eta`` and monotonicity of the median error."""
    out = []
    for key, group in itertools.groupby(per_eta, key=lambda c: (c["n"], c["r"], c["m"])):
        group = sorted(group, key=lambda c: c["eta"])
        ratios = [c["median_ratio"] for c in group if c["median_ratio"] is not None]
        spread = max(ratios) / min(ratios) if ratios and min(ratios) > 0 else math.inf
        medians = [c["median_rel_error"] for c in group]
        monotone = all(a <= b for a, b in zip(medians, medians[1:]))
        out.append({"n": key[0], "r": key[1], "m": key[2], "ratio_spread": spread, "monotone": monotone,
                    "pass": monotone and spread < max_spread})
    return out


def run_tomography(cfg):
    """Density-matrix recovery in ``psd_trace`` mode; estimates renormalized to trace one."""
    records = _run_trials(cfg, (cfg.eta[0],))
    cells = _cell_summary(records)
    by_cell = {}
    for rec in records:
        by_cell.setdefault((rec.n, rec.r, rec.m), []).append(rec.fidelity)
    for c in cells:
        c["median_fidelity_proxy"] = float(np.median(by_cell[(c["n"], c["r"], c["m"])]))
    summary = {"kind": "tomography", "config": _config_echo(cfg), "cells": cells,
               "trials": [{"n": r.n, "r": r.r, "m": r.m, "trial": r.trial, "rel_error": r.relative_error,
                           "fidelity_proxy": r.fidelity} for r in records],
               "minimality_witness": minimality_witness(records)}
    return ExperimentResult(records, summary, cfg.timing)


def tomography_config(**kw):
    kw.setdefault("signal", "density")
    kw.setdefault("mode", "psd_trace")
    return ExperimentConfig(kind="tomography", **kw)


def run_design_report(design_file, k_max=4, tol=1e-8):
    """Accuracy table ``theta_inf(k)``, ``theta_1(k)`` for ``k = 1..k_max`` plus frame and weight statistics."""
    design = designs.load_design(design_file)
    n = design.dim
    rows = []
    for k in range(1, k_max + 1):
        theta_inf = designs.design_moment_gap(design, k, math.inf)
        theta_1 = designs.design_moment_gap(design, k, 1)
        slack = 1e-9 * theta_1 + 1e-15
        ordered = theta_inf <= theta_1 + slack and theta_1 <= n**k * theta_inf + slack
        rows.append({"k": k, "theta_inf": theta_inf, "theta_1": theta_1, "ordering_holds": ordered,
                     "within_tol": theta_inf <= tol})
    gap = designs.tight_frame_gap(design)
    w = design.weights
    return {
        "kind": "design_report",
        "file": str(design_file),
        "n": n,
        "t": design.order,
        "vector_count": design.size,
        "weights": {"min": float(w.min()), "max": float(w.max()), "mean": float(w.mean()),
                    "effective_count": float(1.0 / np.sum(w**2))},
        "tight_frame_gap": gap,
        "usable": gap <= 1.0 / n,
        "accuracy": rows,
        "pass": all(r["ordering_holds"] for r in rows) and all(r["within_tol"] for r in rows if r["k"] <= design.order),
    }


def write_outputs(result, out_dir, stem):
    """Write ``<stem>.csv`` and ``<stem>_summary.json``; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}_summary.json"
    csv_path.write_text(result.to_csv())
    json_path.write_text(json.dumps(result.summary, indent=2, sort_keys=True, default=_json_default) + "\n")
    return csv_path, json_path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_schema(name):
    """Bundled JSON schema ``name`` (``"config"``, ``"report"`` or ``"design"``)."""
    from importlib.resources import files

    return json.loads(files("rankone").joinpath("schemas", f"{name}.schema.json").read_text())
