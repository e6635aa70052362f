"""Modulation profiles, potentials and the canonical modulated system.

Every system here is an instance of

    d/dt (x_i' / w(t)) + s_i w(t) dU/dx_i = 0,

with a modulation ``w(t) > 0``, a potential ``U`` and a kinetic signature
``s_i = +-1``.  Expanded second-order forms are generated from this, never
written out by hand:

    x_i'' = (w'/w) x_i' - s_i w^2 dU/dx_i.

The Hamiltonian form uses ``p_i = s_i x_i' / w``, giving

    x_i' = w s_i p_i,    p_i' = -w dU/dx_i,

with Hamiltonian ``w(t) * H`` where ``H = 1/2 sum s_i p_i^2 + U``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as _quad
from scipy.special import ellipeinc

from .ode import State


class DomainError(ValueError):
    """A modulation profile is not positive where it has to be."""


class ConstructionError(ValueError):
    """Inconsistent pieces handed to :func:`build_system`."""


# --------------------------------------------------------------------------
# modulation profiles
# --------------------------------------------------------------------------


def _cosine_min(a: float, b: float, freq: float, t0: float, t1: float) -> float:
    """Minimum of ``a + b cos(freq t)`` over ``[t0, t1]``."""
    lo, hi = min(t0, t1), max(t0, t1)
    candidates = [a + b * math.cos(freq * lo), a + b * math.cos(freq * hi)]
    if b != 0 and freq != 0:
        # cos(freq t) = -sign(b) at freq t = theta + 2 pi k
        theta = math.pi if b > 0 else 0.0
        w = abs(freq)
        k_lo = math.ceil((w * lo - theta) / (2 * math.pi))
        if (theta + 2 * math.pi * k_lo) / w <= hi:
            candidates.append(a - abs(b))
    return min(candidates)


def _sqrt_cos_phase(a: float, b: float, freq: float, t):
    """Closed form of ``int_0^t sqrt(a + b cos(freq s)) ds`` for ``a >= |b|``.

    Uses ``a + b cos(2u) = (a + b)(1 - m sin^2 u)`` with ``m = 2b / (a + b)``,
    which turns the integral into an incomplete elliptic integral of the
    second kind.  Negative ``b`` is handled by a half-period shift.
    """
    t = np.asarray(t, dtype=float)
    if b == 0 or freq == 0:
        return math.sqrt(a + b) * t
    if b < 0:
        shift = math.pi / freq
        return _sqrt_cos_phase(a, -b, freq, t + shift) - _sqrt_cos_phase(a, -b, freq, shift)
    m = 2 * b / (a + b)
    return math.sqrt(a + b) * (2 / freq) * ellipeinc(freq * t / 2, m)


@dataclass(frozen=True)
class Constant:
    """``w(t) = omega0``."""

    omega0: float = 1.0
    name = "constant"

    def __post_init__(self):
        if not self.omega0 > 0:
            raise DomainError(f"constant profile needs omega0 > 0, got {self.omega0}")

    @property
    def period(self) -> float | None:
        return None

    def omega(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.omega0)

    def omega_dot(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def phase(self, t):
        return self.omega0 * np.asarray(t, dtype=float)

    def window_min(self, t0: float, t1: float) -> float:
        return self.omega0

    def params(self) -> dict:
        return {"omega0": self.omega0}


@dataclass(frozen=True)
class CosineSquared:
    """``w(t) = sqrt(a + b cos(Omega t))``."""

    a: float
    b: float
    Omega: float
    name = "cosine-squared"

    def __post_init__(self):
        if not self.a >= abs(self.b) or self.a <= 0:
            raise DomainError(
                f"cosine-squared profile needs a >= |b| and a > 0 so that "
                f"a + b cos(Omega t) never goes negative (a={self.a}, b={self.b})"
            )

    @property
    def period(self) -> float | None:
        if self.b == 0 or self.Omega == 0:
            return None
        return 2 * math.pi / abs(self.Omega)

    def omega(self, t):
        return np.sqrt(self.a + self.b * np.cos(self.Omega * np.asarray(t, dtype=float)))

    def omega_dot(self, t):
        t = np.asarray(t, dtype=float)
        return -self.b * self.Omega * np.sin(self.Omega * t) / (2 * self.omega(t))

    def phase(self, t):
        return _sqrt_cos_phase(self.a, self.b, self.Omega, t)

    def window_min(self, t0: float, t1: float) -> float:
        return math.sqrt(max(_cosine_min(self.a, self.b, self.Omega, t0, t1), 0.0))

    def params(self) -> dict:
        return {"a": self.a, "b": self.b, "Omega": self.Omega}


@dataclass(frozen=True)
class CosineDirect:
    """``w(t) = a + 2q cos(2t)``."""

    a: float
    q: float
    name = "cosine-direct"

    def __post_init__(self):
        if not self.a >= 2 * abs(self.q) or self.a <= 0:
            raise DomainError(
                f"cosine-direct profile needs a >= 2|q| and a > 0 "
                f"(a={self.a}, q={self.q}); otherwise a + 2q cos 2t changes sign"
            )

    @property
    def period(self) -> float | None:
        return None if self.q == 0 else math.pi

    def omega(self, t):
        return self.a + 2 * self.q * np.cos(2 * np.asarray(t, dtype=float))

    def omega_dot(self, t):
        return -4 * self.q * np.sin(2 * np.asarray(t, dtype=float))

    def phase(self, t):
        t = np.asarray(t, dtype=float)
        return self.a * t + self.q * np.sin(2 * t)

    def window_min(self, t0: float, t1: float) -> float:
        return _cosine_min(self.a, 2 * self.q, 2.0, t0, t1)

    def params(self) -> dict:
        return {"a": self.a, "q": self.q}


@dataclass(frozen=True)
class SqrtCosine:
    """``w(t) = sqrt(a + 2q cos(2t))``."""

    a: float
    q: float
    name = "sqrt-cosine"

    def __post_init__(self):
        if not self.a >= 2 * abs(self.q) or self.a <= 0:
            raise DomainError(
                f"sqrt-cosine profile needs a >= 2|q| and a > 0 "
                f"(a={self.a}, q={self.q}); otherwise a + 2q cos 2t goes negative"
            )

    @property
    def period(self) -> float | None:
        return None if self.q == 0 else math.pi

    def omega(self, t):
        return np.sqrt(self.a + 2 * self.q * np.cos(2 * np.asarray(t, dtype=float)))

    def omega_dot(self, t):
        t = np.asarray(t, dtype=float)
        return -2 * self.q * np.sin(2 * t) / self.omega(t)

    def phase(self, t):
        return _sqrt_cos_phase(self.a, 2 * self.q, 2.0, t)

    def window_min(self, t0: float, t1: float) -> float:
        return math.sqrt(max(_cosine_min(self.a, 2 * self.q, 2.0, t0, t1), 0.0))

    def params(self) -> dict:
        return {"a": self.a, "q": self.q}


ModulationProfile = Constant | CosineSquared | CosineDirect | SqrtCosine

PROFILES = {cls.name: cls for cls in (Constant, CosineSquared, CosineDirect, SqrtCosine)}


def omega_eval(profile: ModulationProfile, t: float) -> tuple[float, float, float]:
    """``(w(t), w'(t), int_0^t w)`` for a single time; rejects ``w(t) <= 0``."""
    w = float(profile.omega(t))
    if not w > 0:
        raise DomainError(f"{profile.name} profile is not positive at t={t} (w={w})")
    return w, float(profile.omega_dot(t)), float(profile.phase(t))


def check_window(profile: ModulationProfile, t0: float, t1: float) -> None:
    """Raise :class:`DomainError` unless ``w > 0`` on the closed window."""
    if not profile.window_min(t0, t1) > 0:
        raise DomainError(
            f"{profile.name} profile {profile.params()} vanishes inside [{t0}, {t1}]"
        )


# --------------------------------------------------------------------------
# potentials
# --------------------------------------------------------------------------
# q is indexed along its first axis, so (d, n) arrays evaluate column-wise.


@dataclass(frozen=True)
class Harmonic:
    """``U = x^2 / 2``."""

    name = "harmonic"
    dim = 1
    is_linear = True

    def value(self, q):
        return 0.5 * q[0] ** 2

    def gradient(self, q):
        return np.array([q[0]], dtype=float)


@dataclass(frozen=True)
class CubicQuartic:
    """``U = x^2/2 + alpha1 x^3/3 + alpha2 x^4/4``."""

    alpha1: float = 0.0
    alpha2: float = 0.0
    name = "cubic-quartic"
    dim = 1
    is_linear = False

    def value(self, q):
        x = q[0]
        return 0.5 * x**2 + self.alpha1 / 3 * x**3 + self.alpha2 / 4 * x**4

    def gradient(self, q):
        x = q[0]
        g = x + self.alpha1 * x**2 + self.alpha2 * x**3
        return np.array([g], dtype=float)


class _SaddlePair:
    """Saddle surface ``W`` plus its rotated copy ``V``; ``U = W + V``."""

    dim = 2

    def saddle(self, q):
        raise NotImplementedError

    def rotated(self, q):
        raise NotImplementedError

    def value(self, q):
        return self.saddle(q) + self.rotated(q)


@dataclass(frozen=True)
class SimpleSaddlePair(_SaddlePair):
    """``W = (x^2 - y^2)/2``, ``V = xy``."""

    name = "simple-saddle"
    is_linear = True

    def saddle(self, q):
        return 0.5 * (q[0] ** 2 - q[1] ** 2)

    def rotated(self, q):
        return q[0] * q[1]

    def gradient(self, q):
        x, y = q[0], q[1]
        return np.array([x + y, x - y], dtype=float)


@dataclass(frozen=True)
class MonkeySaddlePair(_SaddlePair):
    """``W = x^3/3 - x y^2``, ``V = x^2 y - y^3/3``."""

    name = "monkey-saddle"
    is_linear = False

    def saddle(self, q):
        x, y = q[0], q[1]
        return x**3 / 3 - x * y**2

    def rotated(self, q):
        x, y = q[0], q[1]
        return x**2 * y - y**3 / 3

    def gradient(self, q):
        x, y = q[0], q[1]
        gx = x * x - y * y + 2 * x * y
        gy = x * x - y * y - 2 * x * y
        return np.array([gx, gy], dtype=float)


PotentialField = Harmonic | CubicQuartic | SimpleSaddlePair | MonkeySaddlePair


# --------------------------------------------------------------------------
# assembled systems
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Canonical coordinates with ``p_i = s_i x_i' / w(t)``."""

    t: float
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError("q and p must be 1-D of equal length")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    def __eq__(self, other):
        if not isinstance(other, PhaseState):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.q, other.q) and np.array_equal(self.p, other.p)

    __hash__ = None

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])


@dataclass(frozen=True)
class SystemSpec:
    profile: ModulationProfile
    potential: PotentialField
    signature: tuple[int, ...]
    _sigma: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sig = tuple(int(s) for s in self.signature)
        if any(s not in (1, -1) for s in sig):
            raise ConstructionError(f"signature entries must be +1 or -1, got {sig}")
        if len(sig) != self.potential.dim:
            raise ConstructionError(
                f"{self.potential.name} potential has dimension {self.potential.dim} "
                f"but the signature has length {len(sig)}"
            )
        object.__setattr__(self, "signature", sig)
        object.__setattr__(self, "_sigma", np.array(sig, dtype=float))

    @property
    def d(self) -> int:
        return self.potential.dim

    @property
    def is_linear(self) -> bool:
        return self.potential.is_linear

    @property
    def sigma(self) -> np.ndarray:
        return self._sigma

    def newton_rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """First-order field on ``(q, v)``."""
        d = self.d
        q, v = y[:d], y[d:]
        w = self.profile.omega(t)
        wd = self.profile.omega_dot(t)
        acc = (wd / w) * v - (self._sigma * w * w) * self.potential.gradient(q)
        return np.concatenate([v, acc])

    def phase_rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """First-order field on ``(q, p)``; ``y`` may carry trailing columns."""
        d = self.d
        q, p = y[:d], y[d:]
        w = self.profile.omega(t)
        sig = self._sigma if y.ndim == 1 else self._sigma[:, None]
        return np.concatenate([w * sig * p, -w * self.potential.gradient(q)])

    def to_phase(self, s: State) -> PhaseState:
        w = float(self.profile.omega(s.t))
        return PhaseState(s.t, s.q, self._sigma * s.v / w)

    def from_phase(self, ps: PhaseState) -> State:
        w = float(self.profile.omega(ps.t))
        return State(ps.t, ps.q, self._sigma * ps.p * w)


def default_signature(d: int) -> tuple[int, ...]:
    return (1,) if d == 1 else (1,) + (-1,) * (d - 1)


def build_system(
    profile: ModulationProfile,
    potential: PotentialField,
    signature: tuple[int, ...] | None = None,
) -> SystemSpec:
    if signature is None:
        signature = default_signature(potential.dim)
    return SystemSpec(profile, potential, tuple(signature))


def rhs_newtonian(sys: SystemSpec, s: State) -> np.ndarray:
    """Acceleration ``x''`` at state ``s``."""
    omega_eval(sys.profile, s.t)
    return sys.newton_rhs(s.t, s.as_array())[sys.d :]


def rhs_hamiltonian(sys: SystemSpec, ps: PhaseState) -> np.ndarray:
    """``(q', p')`` at phase state ``ps``."""
    omega_eval(sys.profile, ps.t)
    return sys.phase_rhs(ps.t, ps.as_array())


def hamiltonian_value(sys: SystemSpec, ps: PhaseState) -> tuple[float, float]:
    """Modulated Hamiltonian ``w(t) H`` and the frozen factor ``H``."""
    w, _, _ = omega_eval(sys.profile, ps.t)
    H = 0.5 * float(np.sum(sys.sigma * ps.p**2)) + float(sys.potential.value(ps.q))
    return w * H, H


# --------------------------------------------------------------------------
# closed-form solutions
# --------------------------------------------------------------------------


def closed_form_oscillator(profile: ModulationProfile, A: float, phi: float, t):
    """``A cos(int_0^t w + phi)`` solves the modulated harmonic oscillator."""
    return A * np.cos(profile.phase(t) + phi)


def quadrature_phase(profile: ModulationProfile, t) -> np.ndarray:
    """``int_0^t w`` by adaptive quadrature, accumulated between sorted times."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    for sign in (1.0, -1.0):
        mask = (t >= 0) if sign > 0 else (t < 0)
        if not mask.any():
            continue
        idx = np.flatnonzero(mask)
        order = idx[np.argsort(sign * t[idx])]
        acc, prev = 0.0, 0.0
        for i in order:
            val, _ = _quad.quad(
                lambda s: float(profile.omega(s)), prev, t[i], epsabs=1e-14, epsrel=1e-13, limit=200
            )
            acc += val
            prev = t[i]
            out[i] = acc
    return out


def closed_form_modulated_mathieu(C1: float, C2: float, sign: int, profile: ModulationProfile, t):
    """``sqrt(2 C1) sin(+-int_0^t w + C2)`` on the level set ``I = C1``."""
    if C1 < 0:
        raise ValueError("C1 must be non-negative")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if C1 == 0:
        return np.zeros_like(np.asarray(t, dtype=float))
    return math.sqrt(2 * C1) * np.sin(sign * quadrature_phase(profile, t) + C2)


def fit_modulated_mathieu(profile: ModulationProfile, s: State, sign: int = 1) -> tuple[float, float]:
    """Constants ``(C1, C2)`` of the closed form passing through ``s``."""
    w, _, _ = omega_eval(profile, s.t)
    x, u = float(s.q[0]), float(s.v[0]) / w
    C1 = 0.5 * (u * u + x * x)
    C2 = math.atan2(x, sign * u) - sign * float(quadrature_phase(profile, s.t)[0])
    return C1, C2


# --------------------------------------------------------------------------
# adaptive-frequency Hopf oscillator
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SinusoidalForcing:
    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0

    def __call__(self, t):
        return self.amplitude * np.sin(self.frequency * t + self.phase)


def adaptive_hopf_rhs(state, mu: float, eps: float, F: Callable[[float], float], t: float) -> np.ndarray:
    """Derivatives of ``(x, y, w)`` for the adaptive-frequency Hopf oscillator."""
    x, y, w = (float(c) for c in state)
    r = math.hypot(x, y)
    if r == 0:
        raise DomainError(f"adaptive Hopf oscillator is undefined at the origin (t={t})")
    r2 = r * r
    force = eps * float(F(t))
    return np.array([(mu - r2) * x - w * y + force, (mu - r2) * y + w * x, -force * y / r])


def hopf_vector_field(mu: float, eps: float, F: Callable[[float], float]):
    """Vector field for the integrator; yields NaN at the origin."""

    def rhs(t, s):
        x, y, w = s.tolist()
        r2 = x * x + y * y
        force = eps * float(F(t))
        inv_r = 1 / math.sqrt(r2) if r2 > 0 else math.nan
        return np.array([(mu - r2) * x - w * y + force, (mu - r2) * y + w * x, -force * y * inv_r])

    return rhs
