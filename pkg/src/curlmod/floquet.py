"""Monodromy matrices, characteristic exponents and stability sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import (
    DomainError,
    Harmonic,
    SimpleSaddlePair,
    SqrtCosine,
    SystemSpec,
    build_system,
)
from .ode import CapabilityError, IntegratorConfig, NumericalFailure, FailureRecord, solve

INSTABILITY_TOL = 1e-8
REPEATED_TOL = 1e-6

MONODROMY_CONFIG = IntegratorConfig(rtol=1e-12, atol=1e-14, dense=False)


@dataclass(frozen=True)
class StandardMathieu:
    """Unmodulated Mathieu equation ``x'' + (a + 2q cos 2t) x = 0`` with ``p = x'``.

    Not an integrable modulation; kept as the reference family whose
    resonance tongues the modulated variants lack.
    """

    a: float
    q: float
    d = 1
    is_linear = True

    @property
    def period(self) -> float:
        return math.pi

    def phase_rhs(self, t, y):
        stiffness = self.a + 2 * self.q * np.cos(2 * t)
        return np.concatenate([y[1:], -stiffness * y[:1]])


@dataclass(frozen=True)
class MonodromyResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    exponents: np.ndarray
    classification: str
    period: float

    @property
    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def as_dict(self) -> dict:
        return {
            "period": self.period,
            "matrix": self.matrix.tolist(),
            "eigenvalues": [[z.real, z.imag] for z in self.eigenvalues],
            "exponents": [[z.real, z.imag] for z in self.exponents],
            "classification": self.classification,
            "max_modulus": self.max_modulus,
            "det": self.det,
        }


def default_period(sys) -> float:
    period = getattr(sys, "period", None)
    if period is None and isinstance(sys, SystemSpec):
        period = sys.profile.period
    if period is None:
        raise ValueError("profile is not periodic; pass the period explicitly")
    return period


def monodromy(sys, T: float | None = None, cfg: IntegratorConfig | None = None) -> MonodromyResult:
    """Period map of a linear periodic system in canonical coordinates.

    Column ``j`` is the solution at ``t = T`` started from the ``j``-th unit
    vector at ``t = 0``.
    """
    if not getattr(sys, "is_linear", False):
        raise CapabilityError("monodromy is only defined for linear systems")
    T = default_period(sys) if T is None else float(T)
    cfg = cfg or MONODROMY_CONFIG
    n = 2 * sys.d

    def rhs(t, y):
        return sys.phase_rhs(t, y.reshape(n, n)).ravel()

    traj = solve(rhs, 0.0, np.eye(n).ravel(), T, cfg).raise_for_failure()
    M = traj.y[-1].reshape(n, n)
    lam = np.linalg.eigvals(M)
    lam = lam[np.argsort(-np.abs(lam), kind="stable")]
    return MonodromyResult(M, lam, exponents(lam, T), classify(lam), T)


def exponents(eigenvalues, T: float) -> np.ndarray:
    """``mu = -i log(lambda) / T`` on the principal branch."""
    lam = np.asarray(getattr(eigenvalues, "eigenvalues", eigenvalues), dtype=complex)
    if np.any(lam == 0):
        raise NumericalFailure(FailureRecord("non-finite", T, "zero Floquet multiplier"))
    return -1j * np.log(lam) / T


def classify(eigenvalues) -> str:
    lam = np.asarray(eigenvalues, dtype=complex)
    mod = np.abs(lam)
    if np.any(mod > 1 + INSTABILITY_TOL):
        return "unstable"
    for target in (1.0, -1.0):
        if np.count_nonzero(np.abs(lam - target) < REPEATED_TOL) >= 2:
            return "marginal"
    return "bounded-oscillatory"


def kapitza_characteristic_roots(a: float, b: float) -> np.ndarray:
    """Roots of ``det((lambda^2 + b) I + A) = 0`` with ``A = [[0, a], [-a, 0]]``."""
    squares = np.array([-b + 1j * a, -b - 1j * a])
    roots = np.sqrt(squares)
    return np.concatenate([roots, -roots])


# --------------------------------------------------------------------------
# parameter sweeps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis count must be at least 1")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.min, self.max, self.count)


@dataclass(frozen=True)
class MathieuFamily:
    """Mathieu-type systems parameterised by ``(a, q)``.

    ``kind`` selects the standard equation, the modulated oscillator with
    ``w^2 = a + 2q cos 2t``, or the modulated Kapitza pair with the same ``w``.
    """

    kind: str = "standard"

    def __post_init__(self):
        if self.kind not in ("standard", "modulated", "mathieu-kapitza"):
            raise ValueError(f"unknown family {self.kind!r}")

    def __call__(self, a: float, q: float):
        if self.kind == "standard":
            return StandardMathieu(a, q), math.pi
        profile = SqrtCosine(a, q)
        if profile.window_min(0.0, math.pi) <= 0:
            raise DomainError(f"w vanishes for a={a}, q={q}")
        potential = Harmonic() if self.kind == "modulated" else SimpleSaddlePair()
        return build_system(profile, potential), math.pi


@dataclass(frozen=True)
class StabilityGrid:
    axis1: Axis
    axis2: Axis
    classes: np.ndarray  # (count1, count2) of str
    max_modulus: np.ndarray  # nan where out of domain or failed

    def as_dict(self) -> dict:
        return {
            "axis1": vars(self.axis1),
            "axis2": vars(self.axis2),
            "classes": self.classes.tolist(),
            "max_modulus": [[None if not np.isfinite(x) else float(x) for x in row] for row in self.max_modulus],
        }


def _cell(args):
    family, p1, p2, cfg = args
    try:
        sys, T = family(p1, p2)
    except DomainError:
        return "out-of-domain", math.nan
    try:
        res = monodromy(sys, T, cfg)
    except NumericalFailure:
        return "failed", math.nan
    return res.classification, res.max_modulus


def stability_sweep(
    family,
    axis1: Axis,
    axis2: Axis,
    cfg: IntegratorConfig | None = None,
    workers: int = 1,
) -> StabilityGrid:
    """Classify the monodromy at every ``(axis1, axis2)`` grid point."""
    cfg = cfg or MONODROMY_CONFIG
    jobs = [(family, float(p1), float(p2), cfg) for p1 in axis1.values for p2 in axis2.values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_cell(job) for job in jobs]
    shape = (axis1.count, axis2.count)
    classes = np.array([r[0] for r in results], dtype=object).reshape(shape)
    mods = np.array([r[1] for r in results], dtype=float).reshape(shape)
    return StabilityGrid(axis1, axis2, classes, mods)
