"""Execute an :class:`ExperimentConfig` and write its artifacts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    HopfResult,
    TrapVerdict,
    classify_trapping,
    default_escape_radius,
    hopf_adaptation_experiment,
    phase_portrait,
)
from .config import ConfigError, ExperimentConfig
from .export import export_svg, export_table, svg_polyline, trajectory_columns, _write_text
from .floquet import MathieuFamily, MonodromyResult, StabilityGrid, monodromy, stability_sweep
from .invariants import InvariantReport, drift_report, invariant_set, phase_integrals, poisson_bracket
from .models import MonkeySaddlePair, PhaseState, SimpleSaddlePair, build_system
from .ode import NumericalFailure, Trajectory, integrate_span

MODES = ("simulate", "invariants", "floquet", "sweep", "hopf")
BRACKET_POINTS = 20


@dataclass
class RunArtifacts:
    out_dir: Path
    files: dict[str, Path] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    trajectory: Trajectory | None = None
    report: InvariantReport | None = None
    verdict: TrapVerdict | None = None
    portraits: list = field(default_factory=list)
    monodromy: MonodromyResult | None = None
    grid: StabilityGrid | None = None
    hopf: HopfResult | None = None

    @property
    def failed(self) -> bool:
        return self.summary.get("status") == "numerical-failure"


def _failure_dict(failure) -> dict | None:
    if failure is None:
        return None
    return {"kind": failure.kind, "t": failure.t, "message": failure.message}


def _json_safe(obj):
    """Replace non-finite floats so the summary stays strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _ext(cfg: ExperimentConfig) -> str:
    return cfg.outputs.format


def run(cfg: ExperimentConfig, out_dir=".", mode: str | None = None, extra: dict | None = None) -> RunArtifacts:
    """Run ``cfg`` in ``mode`` and write files under ``out_dir``.

    ``mode`` defaults to ``hopf`` or ``sweep`` for those configurations and
    to ``simulate`` otherwise.  Numerical failures do not raise: the partial
    artifacts are written and the summary carries ``status =
    "numerical-failure"``.
    """
    if mode is None:
        mode = cfg.system if cfg.system in ("hopf", "sweep") else "simulate"
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    special = ("hopf", "sweep")
    if (mode in special or cfg.system in special) and cfg.system != mode:
        raise ConfigError(f"a {cfg.system} configuration cannot run in {mode} mode", "system")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = RunArtifacts(out)
    art.summary = {"mode": mode, "config": cfg.to_dict(), "status": "ok", "failure": None, "results": {}}
    if extra:
        art.summary.update(extra)
    {"simulate": _simulate, "invariants": _simulate, "floquet": _floquet, "sweep": _sweep, "hopf": _hopf}[mode](
        cfg, art, mode
    )
    art.summary["files"] = {k: p.name for k, p in art.files.items()}
    stem = cfg.outputs.prefix if mode in ("simulate", cfg.system) else f"{cfg.outputs.prefix}_{mode}"
    summary_path = out / f"{stem}_summary.json"
    _write_text(summary_path, json.dumps(_json_safe(art.summary), indent=2) + "\n")
    art.files["summary"] = summary_path
    return art


def _simulate(cfg: ExperimentConfig, art: RunArtifacts, mode: str) -> None:
    sys = build_system(cfg.profile, cfg.potential)
    # export times are made integrator nodes so exported values carry no interpolation error
    grid = np.linspace(*cfg.t_span, cfg.outputs.samples)
    traj = integrate_span(sys.newton_rhs, cfg.initial, cfg.t_span, cfg.integrator, stops=grid)
    prefix, res = cfg.outputs.prefix, art.summary["results"]

    if traj.dense and traj.t_end > traj.t_start:
        if traj.failure is not None:
            grid = np.linspace(traj.t_start, traj.t_end, cfg.outputs.samples)
        sampled = traj.resample(grid)
    else:
        sampled = traj
    art.trajectory = sampled

    labels, values = (), None
    if cfg.analysis.invariants:
        invset = invariant_set(sys)
        labels = invset.labels
        values = invset.evaluate(sampled.t, sampled.q, sampled.v, sys.profile)
        art.report = drift_report(sampled, invset, sys.profile)
        res["invariants"] = art.report.as_dict()

    R = cfg.analysis.escape_radius or default_escape_radius(cfg.initial)
    art.verdict = classify_trapping(traj, R, cfg.analysis.per_coordinate)
    res["verdict"] = art.verdict.as_dict()
    res["integration"] = {
        "t_range": [traj.t_start, traj.t_end],
        "nodes": len(traj),
        **{k: traj.meta[k] for k in ("accepted", "rejected", "nfev") if k in traj.meta},
    }

    ext = _ext(cfg)
    if mode == "simulate":
        header, data = trajectory_columns(sampled, labels, values)
        art.files["trajectory"] = export_table(header, data, art.out_dir / f"{prefix}_trajectory.{ext}", ext)
    else:
        header = ["t", *labels]
        data = np.column_stack([sampled.t] + ([] if values is None else [values]))
        art.files["invariants"] = export_table(header, data, art.out_dir / f"{prefix}_invariants.{ext}", ext)
        if isinstance(cfg.potential, (SimpleSaddlePair, MonkeySaddlePair)) and sys.signature == (1, -1):
            res["poisson_bracket"] = _bracket_check(cfg)
    res["table"] = {"columns": header, "rows": int(len(data))}

    for i in range(sampled.d):
        portrait = phase_portrait(sampled, i)
        art.portraits.append(portrait)
        if cfg.outputs.svg:
            name = "xy"[i] if i < 2 else f"q{i}"
            art.files[f"portrait_{name}"] = export_svg(
                portrait, art.out_dir / f"{prefix}_portrait_{name}.svg", f"{cfg.system}: {name} phase portrait"
            )
    res["portraits"] = [{"index": p.index, "points": len(p), "bbox": p.bbox} for p in art.portraits]

    if traj.failure is not None:
        art.summary["status"] = "numerical-failure"
        art.summary["failure"] = _failure_dict(traj.failure)


def _bracket_check(cfg: ExperimentConfig) -> dict:
    """``{I1, I2}`` at seeded random phase points."""
    rng = np.random.default_rng(cfg.seed)
    first, second = phase_integrals(cfg.potential)
    pts = rng.uniform(-1.0, 1.0, size=(BRACKET_POINTS, 4))
    vals = [abs(poisson_bracket(first, second, PhaseState(0.0, row[:2], row[2:]))) for row in pts]
    return {"seed": cfg.seed, "points": BRACKET_POINTS, "max_abs": float(max(vals))}


def _floquet(cfg: ExperimentConfig, art: RunArtifacts, mode: str) -> None:
    sys = build_system(cfg.profile, cfg.potential)
    if not sys.is_linear:
        raise ConfigError(f"the {cfg.system} system is nonlinear; monodromy needs a linear system", "system")
    T = cfg.period if cfg.period is not None else sys.profile.period
    if T is None:
        raise ConfigError("the modulation is not periodic; set floquet.period", "floquet.period")
    try:
        res = monodromy(sys, T, cfg.integrator)
    except NumericalFailure as exc:
        art.summary["status"] = "numerical-failure"
        art.summary["failure"] = _failure_dict(exc.record)
        return
    art.monodromy = res
    art.summary["results"]["monodromy"] = res.as_dict()
    lam, mu = res.eigenvalues, res.exponents
    data = np.column_stack([lam.real, lam.imag, np.abs(lam), mu.real, mu.imag])
    ext = _ext(cfg)
    art.files["multipliers"] = export_table(
        ["re", "im", "abs", "mu_re", "mu_im"], data, art.out_dir / f"{cfg.outputs.prefix}_multipliers.{ext}", ext
    )


def _sweep(cfg: ExperimentConfig, art: RunArtifacts, mode: str) -> None:
    s = cfg.sweep
    grid = stability_sweep(MathieuFamily(s.family), s.axis1, s.axis2, cfg.integrator, s.workers)
    art.grid = grid
    counts = {}
    for c in grid.classes.ravel():
        counts[str(c)] = counts.get(str(c), 0) + 1
    art.summary["results"]["classes"] = dict(sorted(counts.items()))
    prefix = cfg.outputs.prefix
    if cfg.outputs.format == "json":
        art.files["grid"] = _write_text(art.out_dir / f"{prefix}_grid.json", json.dumps(_json_safe(grid.as_dict())) + "\n")
    else:
        lines = [f"{s.axis1.name},{s.axis2.name},class,max_modulus"]
        for i, p1 in enumerate(s.axis1.values):
            for j, p2 in enumerate(s.axis2.values):
                m = grid.max_modulus[i, j]
                lines.append(f"{p1:.12g},{p2:.12g},{grid.classes[i, j]},{'' if not np.isfinite(m) else format(m, '.12g')}")
        art.files["grid"] = _write_text(art.out_dir / f"{prefix}_grid.csv", "\n".join(lines) + "\n")
    if cfg.outputs.svg:
        art.files["grid_svg"] = export_svg(grid, art.out_dir / f"{prefix}_grid.svg")


def _hopf(cfg: ExperimentConfig, art: RunArtifacts, mode: str) -> None:
    h = cfg.hopf
    result = hopf_adaptation_experiment(
        h.mu, h.eps, h.forcing, h.omega0, h.horizon, (h.x0, h.y0), cfg.integrator, cfg.outputs.samples
    )
    art.hopf = result
    art.trajectory = result.trajectory
    art.summary["results"]["hopf"] = {
        "final_omega": result.final_omega,
        "terminal_mean": result.terminal_mean,
        "target": h.forcing.frequency,
        "samples": int(result.t.size),
    }
    xy = result.trajectory.sample(result.t)[:, :2]
    ext, prefix = _ext(cfg), cfg.outputs.prefix
    data = np.column_stack([result.t, xy, result.omega])
    art.files["omega"] = export_table(["t", "x", "y", "omega"], data, art.out_dir / f"{prefix}_omega.{ext}", ext)
    if cfg.outputs.svg:
        art.files["omega_svg"] = _write_text(
            art.out_dir / f"{prefix}_omega.svg", svg_polyline(result.t, result.omega, "t", "omega", "adaptive frequency")
        )
    if result.failure is not None:
        art.summary["status"] = "numerical-failure"
        art.summary["failure"] = _failure_dict(result.failure)
