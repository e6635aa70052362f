"""Trajectory diagnostics: trapping, phase portraits, lift residuals, Hopf adaptation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import SinusoidalForcing, hopf_vector_field
from .ode import CapabilityError, FailureRecord, IntegratorConfig, State, Trajectory, solve

ESCAPE_FACTOR = 50.0
ESCAPE_FLOOR = 1.0

HOPF_CONFIG = IntegratorConfig(rtol=1e-6, atol=1e-9, max_steps=5_000_000)


def default_escape_radius(s0: State | np.ndarray) -> float:
    """``50 * |s0|`` with a floor of 1."""
    y = s0.as_array() if isinstance(s0, State) else np.asarray(s0, dtype=float)
    return max(ESCAPE_FACTOR * float(np.linalg.norm(y)), ESCAPE_FLOOR)


@dataclass(frozen=True)
class CoordinateVerdict:
    index: int
    verdict: str  # "trapped" | "escaped"
    escape_time: float | None
    max_abs: float


@dataclass(frozen=True)
class TrapVerdict:
    coordinates: tuple[CoordinateVerdict, ...]
    overall: str  # "trapped" | "escaped" | "mixed"
    max_radius: float
    threshold: float

    def as_dict(self) -> dict:
        return {
            "overall": self.overall,
            "threshold": self.threshold,
            "max_radius": self.max_radius,
            "coordinates": [
                {
                    "index": c.index,
                    "verdict": c.verdict,
                    "escape_time": c.escape_time,
                    "max_abs": c.max_abs,
                }
                for c in self.coordinates
            ],
        }


def _origin_order(traj: Trajectory) -> np.ndarray:
    """Sample indices ordered by distance in time from where the data were given."""
    origin = traj.meta.get("t_origin", traj.t_start)
    return np.argsort(np.abs(traj.t - origin), kind="stable")


def classify_trapping(traj: Trajectory, R: float | None = None, per_coordinate: bool = True) -> TrapVerdict:
    """Trapped/escaped verdict per coordinate against the radius ``R``.

    A coordinate escapes when ``|u_i| > R`` at some sample; the escape time
    is the offending sample closest in time to the initial data.  With
    ``per_coordinate=False`` the Euclidean norm of ``q`` is tested instead.
    """
    if R is None:
        R = default_escape_radius(traj.y[_origin_order(traj)[0]])
    if not R > 0:
        raise ValueError("escape radius must be positive")
    q = traj.q
    tracks = np.abs(q) if per_coordinate else np.linalg.norm(q, axis=1)[:, None]
    order = _origin_order(traj)
    verdicts = []
    for i in range(tracks.shape[1]):
        col = tracks[:, i]
        over = col[order] > R
        if over.any():
            k = order[int(np.argmax(over))]
            verdicts.append(CoordinateVerdict(i, "escaped", float(traj.t[k]), float(col.max())))
        else:
            verdicts.append(CoordinateVerdict(i, "trapped", None, float(col.max())))
    kinds = {v.verdict for v in verdicts}
    overall = kinds.pop() if len(kinds) == 1 else "mixed"
    radius = float(np.max(np.linalg.norm(q, axis=1)))
    return TrapVerdict(tuple(verdicts), overall, radius, float(R))


@dataclass(frozen=True)
class PhasePortrait:
    index: int
    u: np.ndarray
    udot: np.ndarray

    def __len__(self) -> int:
        return self.u.size

    @property
    def bbox(self) -> tuple[float, float, float, float] | None:
        if self.u.size == 0:
            return None
        return (float(self.u.min()), float(self.u.max()), float(self.udot.min()), float(self.udot.max()))


def phase_portrait(traj: Trajectory, index: int) -> PhasePortrait:
    """``(u_i, u_i')`` at each sample, cut at the first non-finite entry."""
    if not 0 <= index < traj.d:
        raise IndexError(f"coordinate {index} out of range for d={traj.d}")
    u, ud = traj.q[:, index], traj.v[:, index]
    bad = ~(np.isfinite(u) & np.isfinite(ud))
    stop = int(np.argmax(bad)) if bad.any() else u.size
    return PhasePortrait(index, u[:stop].copy(), ud[:stop].copy())


def eisenhart_residual(
    m: Callable,
    profile,
    y_traj: Trajectory,
    h: float = 1e-3,
    *,
    F: Callable | None = None,
    dF: Callable | None = None,
    coordinate: int = 0,
    richardson: bool = True,
) -> float:
    """Max of ``|d/dt(m dF(y)/dt) + m w^2 F(y)|`` over a uniform grid of step ``h``.

    The outer time derivative is a central difference of ``m F'(y) y'``
    using dense output for ``y`` and ``y'``.  With ``richardson`` the
    difference at steps ``h`` and ``2h`` is combined to cancel the
    leading ``h^2`` error; without it the residual is plain second order.
    """
    if len(y_traj) < 3:
        raise CapabilityError("need at least three trajectory samples")
    if not y_traj.dense:
        raise CapabilityError("trajectory was built without dense output")
    F = F or (lambda y: y)
    dF = dF or (lambda y: np.ones_like(y))
    lo, hi = sorted((y_traj.t_start, y_traj.t_end))
    margin = 2 * h if richardson else h
    n = int(np.floor((hi - lo - 2 * margin) / h)) + 1
    if n < 1:
        raise CapabilityError("trajectory is shorter than the difference stencil")
    grid = lo + margin + h * np.arange(n)
    grid = grid[grid + margin <= hi]
    if grid.size == 0:
        raise CapabilityError("trajectory is shorter than the difference stencil")
    d = y_traj.d

    def flux(t):
        s = y_traj.sample(t)
        y, v = s[:, coordinate], s[:, d + coordinate]
        return m(t) * dF(y) * v

    def derivative(step):
        return (flux(grid + step) - flux(grid - step)) / (2 * step)

    deriv = derivative(h)
    if richardson:
        deriv = (4 * deriv - derivative(2 * h)) / 3
    y0 = y_traj.sample(grid)[:, coordinate]
    w = profile.omega(grid)
    r = deriv + m(grid) * w * w * F(y0)
    return float(np.max(np.abs(r)))


@dataclass(frozen=True)
class HopfResult:
    final_omega: float
    terminal_mean: float
    t: np.ndarray
    omega: np.ndarray
    trajectory: Trajectory
    failure: FailureRecord | None


def hopf_adaptation_experiment(
    mu: float,
    eps: float,
    forcing: SinusoidalForcing,
    omega0: float,
    horizon: float,
    xy0: tuple[float, float] = (1.0, 0.0),
    cfg: IntegratorConfig | None = None,
    samples: int = 20_001,
) -> HopfResult:
    """Integrate the adaptive Hopf oscillator and summarise ``w(t)``.

    ``terminal_mean`` is the time average of ``w`` over the last 10% of
    the horizon, taken on a uniform grid from dense output.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if xy0[0] == 0 and xy0[1] == 0:
        raise ValueError("initial point must be off the origin")
    traj = solve(hopf_vector_field(mu, eps, forcing), 0.0, [xy0[0], xy0[1], omega0], horizon, cfg or HOPF_CONFIG)
    t_stop = traj.t_end
    grid = np.linspace(0.0, t_stop, samples)
    omega = traj.sample(grid)[:, 2]
    terminal = float("nan")
    if t_stop >= horizon:
        tail = np.linspace(0.9 * horizon, horizon, 20 * samples + 1)
        terminal = float(np.mean(traj.sample(tail)[:, 2]))
    return HopfResult(float(traj.y[-1, 2]), terminal, grid, omega, traj, traj.failure)
