"""First integrals, drift monitoring and a finite-difference Poisson bracket."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .models import (
    MonkeySaddlePair,
    PhaseState,
    SimpleSaddlePair,
    SystemSpec,
    omega_eval,
)
from .ode import State, Trajectory

DRIFT_FLOOR = 1e-12

# evaluator(q, v, w) with q, v of shape (d, n) and w of shape (n,)
Evaluator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _generic(potential, sigma):
    sigma = np.asarray(sigma, dtype=float)[:, None]

    def evaluate(q, v, w):
        u = v / w
        return 0.5 * np.sum(sigma * u * u, axis=0) + potential.value(q)

    return evaluate


def _pair_integrals(potential):
    def first(q, v, w):
        ux, uy = v[0] / w, v[1] / w
        return 0.5 * (ux * ux - uy * uy) + potential.saddle(q) + potential.rotated(q)

    def second(q, v, w):
        return (v[0] / w) * (v[1] / w) + potential.rotated(q) - potential.saddle(q)

    return first, second


@dataclass(frozen=True)
class InvariantSet:
    labels: tuple[str, ...]
    evaluators: tuple[Evaluator, ...]

    def evaluate(self, t, q, v, profile) -> np.ndarray:
        """Values at samples; ``q`` and ``v`` have shape ``(n, d)``. Returns ``(n, k)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        q = np.asarray(q, dtype=float).reshape(t.size, -1).T
        v = np.asarray(v, dtype=float).reshape(t.size, -1).T
        w = profile.omega(t)
        return np.column_stack([f(q, v, w) for f in self.evaluators])


def invariant_set(sys: SystemSpec) -> InvariantSet:
    """The known first integrals of ``sys``."""
    pot = sys.potential
    if isinstance(pot, (SimpleSaddlePair, MonkeySaddlePair)) and sys.signature == (1, -1):
        return InvariantSet(("I1", "I2"), _pair_integrals(pot))
    return InvariantSet(("I",), (_generic(pot, sys.sigma),))


def generic_integral(sys: SystemSpec, s: State) -> float:
    """``1/2 sum s_i (x_i'/w)^2 + U(q)``."""
    w, _, _ = omega_eval(sys.profile, s.t)
    u = s.v / w
    return 0.5 * float(np.sum(sys.sigma * u * u)) + float(sys.potential.value(s.q))


def _pair_at(potential, s: State, omega: float) -> tuple[float, float]:
    if s.d != 2:
        raise ValueError("expected a two-coordinate state")
    first, second = _pair_integrals(potential)
    q, v = s.q[:, None], s.v[:, None]
    w = np.array([float(omega)])
    return float(first(q, v, w)[0]), float(second(q, v, w)[0])


def kapitza_integrals(s: State, omega: float) -> tuple[float, float]:
    return _pair_at(SimpleSaddlePair(), s, omega)


def monkey_integrals(s: State, omega: float) -> tuple[float, float]:
    return _pair_at(MonkeySaddlePair(), s, omega)


def phase_integrals(potential) -> tuple[Callable, Callable]:
    """The pair integrals written in canonical coordinates, ``p = (x'/w, -y'/w)``.

    Each returned function takes ``(q, p)``.
    """

    def first(q, p):
        return 0.5 * (p[0] ** 2 - p[1] ** 2) + potential.saddle(q) + potential.rotated(q)

    def second(q, p):
        return -p[0] * p[1] + potential.rotated(q) - potential.saddle(q)

    return first, second


@dataclass(frozen=True)
class InvariantDrift:
    label: str
    initial: float
    max_abs_drift: float
    max_rel_drift: float
    t_max: float


@dataclass(frozen=True)
class InvariantReport:
    entries: tuple[InvariantDrift, ...]
    samples: int

    def __getitem__(self, label: str) -> InvariantDrift:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    @property
    def max_rel_drift(self) -> float:
        return max(e.max_rel_drift for e in self.entries)

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "invariants": {
                e.label: {
                    "initial": e.initial,
                    "max_abs_drift": e.max_abs_drift,
                    "max_rel_drift": e.max_rel_drift,
                    "t_max": e.t_max,
                }
                for e in self.entries
            },
        }


def drift_from_values(labels, t, values, reference_index: int = 0) -> InvariantReport:
    """Drift of tabulated invariant values relative to one reference row."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    entries = []
    for j, label in enumerate(labels):
        col = values[:, j]
        i0 = col[reference_index]
        dev = np.abs(col - i0)
        k = int(np.argmax(dev))
        entries.append(
            InvariantDrift(
                label=label,
                initial=float(i0),
                max_abs_drift=float(dev[k]),
                max_rel_drift=float(dev[k] / max(abs(i0), DRIFT_FLOOR)),
                t_max=float(t[k]),
            )
        )
    return InvariantReport(tuple(entries), int(t.size))


def drift_report(traj: Trajectory, invset: InvariantSet, profile) -> InvariantReport:
    """Evaluate every invariant at every sample and report the worst deviation.

    Drift is measured against the value at the sample where the initial
    data were given (``meta["t_origin"]``, else the first sample).
    """
    values = invset.evaluate(traj.t, traj.q, traj.v, profile)
    ref = 0
    if "t_origin" in traj.meta:
        ref = int(np.argmin(np.abs(traj.t - traj.meta["t_origin"])))
    return drift_from_values(invset.labels, traj.t, values, ref)


def _partials(fn, q, p, h):
    """Central-difference gradients in q and p, Richardson-refined."""
    d = q.size
    dq, dp = np.empty(d), np.empty(d)

    def central(x, i, step, wrt_q):
        plus, minus = x.copy(), x.copy()
        plus[i] += step
        minus[i] -= step
        if wrt_q:
            return (fn(plus, p) - fn(minus, p)) / (2 * step)
        return (fn(q, plus) - fn(q, minus)) / (2 * step)

    for i in range(d):
        for out, x, wrt_q in ((dq, q, True), (dp, p, False)):
            coarse = central(x, i, h, wrt_q)
            fine = central(x, i, h / 2, wrt_q)
            out[i] = (4 * fine - coarse) / 3
    return dq, dp


def poisson_bracket(f, g, ps: PhaseState, h: float = 1e-3) -> float:
    """``sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i`` by finite differences."""
    if not h > 0:
        raise ValueError("h must be positive")
    q, p = ps.q.astype(float), ps.p.astype(float)
    fq, fp = _partials(f, q, p, h)
    gq, gp = (fq, fp) if g is f else _partials(g, q, p, h)
    return float(sum(fq[i] * gp[i] - fp[i] * gq[i] for i in range(q.size)))
