"""Explicit Runge-Kutta integrators with error control and dense output.

Two methods are provided:

* ``rk4-fixed``: classical fourth-order Runge-Kutta on a uniform grid.
* ``rk45-adaptive``: the Dormand-Prince 5(4) embedded pair with a PI
  step-size controller.

Both record the state and its derivative at every accepted step, which
gives cubic Hermite dense output for free.  The adaptive method also keeps
the quartic continuous extension built from its stages, which is accurate
to the order of the local error and is preferred when present.  Integration never throws away
work: if a step underflows, the step budget runs out, or the vector field
returns a non-finite value, the partial trajectory is returned with a
:class:`FailureRecord` attached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

VectorField = Callable[[float, np.ndarray], np.ndarray]

METHODS = ("rk4-fixed", "rk45-adaptive")


class NumericalFailure(RuntimeError):
    """Raised when a caller asks for a failed trajectory to be treated as an error."""

    def __init__(self, record: "FailureRecord"):
        super().__init__(f"{record.kind} at t={record.t!r}: {record.message}")
        self.record = record


class CapabilityError(RuntimeError):
    """The requested operation needs data the object does not carry."""


class OutOfRangeError(ValueError):
    """A requested time lies outside the integrated interval."""


@dataclass(frozen=True, eq=False)
class State:
    """Point in position-velocity space at time ``t``."""

    t: float
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        v = np.atleast_1d(np.asarray(self.v, dtype=float)).copy()
        if q.ndim != 1 or v.ndim != 1 or q.shape != v.shape:
            raise ValueError(f"q and v must be 1-D of equal length, got {q.shape} and {v.shape}")
        if not (math.isfinite(self.t) and np.isfinite(q).all() and np.isfinite(v).all()):
            raise ValueError("state entries must be finite")
        q.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)

    @property
    def d(self) -> int:
        return self.q.size

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return self.t == other.t and np.array_equal(self.q, other.q) and np.array_equal(self.v, other.v)

    __hash__ = None

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.v])

    @classmethod
    def from_array(cls, t: float, y: np.ndarray) -> "State":
        y = np.asarray(y, dtype=float)
        if y.size % 2:
            raise ValueError(f"cannot split a vector of length {y.size} into (q, v)")
        d = y.size // 2
        return cls(t, y[:d], y[d:])


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rk45-adaptive"
    dt: float | None = None
    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 1_000_000
    dense: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "rk4-fixed" and not (self.dt is not None and self.dt > 0):
            raise ValueError("rk4-fixed needs dt > 0")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class FailureRecord:
    kind: str  # "step-underflow" | "max-steps" | "non-finite"
    t: float
    message: str


class Trajectory:
    """Time-ordered samples ``y(t)`` of a first-order system.

    ``t`` is strictly monotone in the direction of integration.  When ``f``
    (the derivative at each sample) is present the trajectory supports
    interpolation through :meth:`sample`: quartic on segments that carry
    ``coef``, cubic Hermite otherwise.  ``coef[i]`` has shape ``(dim, 4)``
    and gives ``y = y[i] + coef[i] @ (s, s^2, s^3, s^4)`` with
    ``s = (t - t[i]) / (t[i+1] - t[i])``.
    """

    def __init__(
        self,
        t: Sequence[float] | np.ndarray,
        y: np.ndarray,
        f: np.ndarray | None = None,
        meta: Mapping | None = None,
        failure: FailureRecord | None = None,
        coef: np.ndarray | None = None,
    ):
        t = np.array(t, dtype=float)
        y = np.array(y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if t.ndim != 1 or y.shape[0] != t.size or t.size == 0:
            raise ValueError("t must be 1-D and match the first axis of y")
        dt = np.diff(t)
        if t.size > 1 and not ((dt > 0).all() or (dt < 0).all()):
            raise ValueError("sample times must be strictly monotone")
        if f is not None:
            f = np.array(f, dtype=float)
            if f.shape != y.shape:
                raise ValueError("f must have the same shape as y")
            f.flags.writeable = False
        if coef is not None:
            if f is None:
                raise ValueError("coef requires f")
            coef = np.array(coef, dtype=float).reshape(max(t.size - 1, 0), y.shape[1], 4)
            coef.flags.writeable = False
        t.flags.writeable = False
        y.flags.writeable = False
        self._t, self._y, self._f, self._coef = t, y, f, coef
        self._meta = MappingProxyType(dict(meta or {}))
        self._failure = failure

    @property
    def t(self) -> np.ndarray:
        return self._t

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def f(self) -> np.ndarray | None:
        return self._f

    @property
    def coef(self) -> np.ndarray | None:
        return self._coef

    @property
    def meta(self) -> Mapping:
        return self._meta

    @property
    def failure(self) -> FailureRecord | None:
        return self._failure

    @property
    def dense(self) -> bool:
        return self._f is not None

    @property
    def dim(self) -> int:
        return self._y.shape[1]

    @property
    def d(self) -> int:
        """Number of coordinates when the state is laid out as ``(q, v)``."""
        if self.dim % 2:
            raise CapabilityError(f"a {self.dim}-dimensional state has no (q, v) split")
        return self.dim // 2

    @property
    def q(self) -> np.ndarray:
        return self._y[:, : self.d]

    @property
    def v(self) -> np.ndarray:
        return self._y[:, self.d :]

    @property
    def t_start(self) -> float:
        return float(self._t[0])

    @property
    def t_end(self) -> float:
        return float(self._t[-1])

    def __len__(self) -> int:
        return self._t.size

    def state(self, i: int) -> State:
        return State.from_array(self._t[i], self._y[i])

    def states(self) -> list[State]:
        return [self.state(i) for i in range(len(self))]

    def raise_for_failure(self) -> "Trajectory":
        if self._failure is not None:
            raise NumericalFailure(self._failure)
        return self

    def sample(self, times) -> np.ndarray:
        """Interpolated states at ``times``; returns shape ``(n, dim)``."""
        if not self.dense:
            raise CapabilityError("trajectory was built without dense output")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        src = self if self._t[0] <= self._t[-1] else self.reversed()
        t, y, f, coef = src._t, src._y, src._f, src._coef
        lo, hi = t[0], t[-1]
        bad = (times < lo) | (times > hi) | ~np.isfinite(times)
        if bad.any():
            raise OutOfRangeError(
                f"time {times[bad][0]!r} outside the integrated interval [{lo!r}, {hi!r}]"
            )
        if t.size == 1:
            return np.repeat(y, times.size, axis=0)
        i = np.clip(np.searchsorted(t, times, side="right") - 1, 0, t.size - 2)
        h = (t[i + 1] - t[i])[:, None]
        s = ((times - t[i]) / (t[i + 1] - t[i]))[:, None]
        if coef is not None:
            powers = np.hstack([s, s * s, s**3, s**4])
            out = y[i] + np.einsum("nk,ndk->nd", powers, coef[i])
            end = s[:, 0] == 1.0
            out[end] = y[i[end] + 1]
            return out
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        return h00 * y[i] + h10 * h * f[i] + h01 * y[i + 1] + h11 * h * f[i + 1]

    def resample(self, times) -> "Trajectory":
        """Dense-output values at ``times`` packed as a new (non-dense) trajectory."""
        times = np.asarray(times, dtype=float)
        return Trajectory(times, self.sample(times), meta=self._meta, failure=self._failure)

    def window(self, t_lo: float, t_hi: float) -> "Trajectory":
        """Samples with ``t_lo <= t <= t_hi``, keeping derivative data."""
        keep = (self._t >= t_lo) & (self._t <= t_hi)
        f = None if self._f is None else self._f[keep]
        coef = None
        if self._coef is not None and keep.any():
            idx = np.flatnonzero(keep)
            coef = self._coef[idx[0] : idx[-1]]
        return Trajectory(self._t[keep], self._y[keep], f, self._meta, self._failure, coef)

    def reversed(self) -> "Trajectory":
        """The same samples in the opposite time order."""
        f = None if self._f is None else self._f[::-1]
        coef = None
        if self._coef is not None:
            # re-anchor each segment polynomial at its other end: s -> 1 - s
            coef = np.einsum("ndj,mj->ndm", self._coef[::-1], _FLIP)
        return Trajectory(self._t[::-1], self._y[::-1], f, self._meta, self._failure, coef)


def sample_dense(traj: Trajectory, times) -> list[State]:
    """Interpolated :class:`State` objects at ``times``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    ys = traj.sample(times)
    return [State.from_array(t, y) for t, y in zip(times, ys)]


# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = np.zeros((6, 6))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth-order minus embedded fourth-order weights (the seventh stage is FSAL)
_E = np.array(
    [71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)

# continuous extension: y(t + s h) = y + h K^T P (s, s^2, s^3, s^4)
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)
# coefficients of p(1 - s) - p(1) in powers of s, given those of p(s) - p(0)
_FLIP = np.array(
    [[(-1) ** m * math.comb(j, m) if j >= m else 0 for j in range(1, 5)] for m in range(1, 5)],
    dtype=float,
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


def _call(rhs: VectorField, t: float, y: np.ndarray) -> np.ndarray:
    return np.asarray(rhs(t, y), dtype=float)


def _initial_step(rhs, t0, y0, f0, direction, span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = math.sqrt(np.mean((y0 / scale) ** 2))
    d1 = math.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = _call(rhs, t0 + direction * h0, y0 + direction * h0 * f0)
    if not np.isfinite(f1).all():
        return h0
    d2 = math.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def solve(
    rhs: VectorField,
    t0: float,
    y0,
    t_end: float,
    cfg: IntegratorConfig | None = None,
    stops=None,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``(t0, y0)`` to ``t_end``.

    Works in either time direction.  The returned trajectory holds every
    accepted step; on failure it stops at the last good step and carries
    the failure record.  The adaptive method shortens steps so that every
    time in ``stops`` lying strictly between ``t0`` and ``t_end`` becomes
    a node; the fixed-step method ignores ``stops``.
    """
    cfg = cfg or IntegratorConfig()
    t0, t_end = float(t0), float(t_end)
    if t_end == t0:
        raise ValueError("t_end must differ from the start time")
    y0 = np.array(y0, dtype=float).ravel()
    if not np.isfinite(y0).all():
        raise ValueError("initial state must be finite")
    if cfg.method == "rk4-fixed":
        return _solve_rk4(rhs, t0, y0, t_end, cfg)
    return _solve_dopri(rhs, t0, y0, t_end, cfg, _interior(stops, t0, t_end))


def _interior(stops, t0: float, t_end: float) -> list[float]:
    """Stops strictly inside the run, in the order they are reached."""
    if stops is None:
        return []
    lo, hi = min(t0, t_end), max(t0, t_end)
    gap = 16 * np.spacing(max(abs(lo), abs(hi), 1.0))
    pts = np.unique(np.asarray(stops, dtype=float).ravel())
    pts = pts[(pts > lo + gap) & (pts < hi - gap)]
    return (pts if t_end > t0 else pts[::-1]).tolist()


def _finish(ts, ys, fs, cfg, meta, failure, coefs=None):
    meta = {
        "method": cfg.method,
        "rtol": cfg.rtol,
        "atol": cfg.atol,
        "dt": cfg.dt,
        **meta,
    }
    f = np.array(fs) if cfg.dense else None
    coef = None
    if cfg.dense and coefs is not None:
        coef = np.array(coefs).reshape(len(ts) - 1, len(ys[0]), 4)
    return Trajectory(np.array(ts), np.array(ys), f, meta, failure, coef)


def _solve_rk4(rhs, t0, y0, t_end, cfg):
    direction = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    n = max(1, int(math.ceil(span / cfg.dt - 1e-9)))
    h = direction * cfg.dt
    y = y0
    k1 = _call(rhs, t0, y)
    ts, ys, fs = [t0], [y0], [k1]
    nfev, failure = 1, None
    if not np.isfinite(k1).all():
        failure = FailureRecord("non-finite", t0, "vector field is not finite")
        n = 0
    for i in range(n):
        if i >= cfg.max_steps:
            failure = FailureRecord("max-steps", ts[-1], f"exceeded max_steps={cfg.max_steps}")
            break
        t = ts[-1]
        t_next = t_end if i == n - 1 else t0 + (i + 1) * h
        hh = t_next - t
        k2 = _call(rhs, t + hh / 2, y + hh / 2 * k1)
        k3 = _call(rhs, t + hh / 2, y + hh / 2 * k2)
        k4 = _call(rhs, t_next, y + hh * k3)
        y_new = y + hh / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        k_new = _call(rhs, t_next, y_new)
        nfev += 4
        if not (np.isfinite(y_new).all() and np.isfinite(k_new).all()):
            stages = ((t + hh / 2, k2), (t + hh / 2, k3), (t_next, k4))
            bad = next((ts_ for ts_, k in stages if not np.isfinite(k).all()), t_next)
            failure = FailureRecord("non-finite", float(bad), "vector field is not finite")
            break
        y, k1 = y_new, k_new
        ts.append(t_next)
        ys.append(y)
        fs.append(k1)
    meta = {"accepted": len(ts) - 1, "rejected": 0, "nfev": nfev}
    return _finish(ts, ys, fs, cfg, meta, failure)


def _solve_dopri(rhs, t0, y0, t_end, cfg, stops=()):
    rtol, atol = cfg.rtol, cfg.atol
    direction = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    t, y = t0, y0
    k1 = _call(rhs, t, y)
    ts, ys, fs, coefs = [t], [y], [k1], []
    nfev, accepted, rejected = 1, 0, 0
    failure = None
    worst = 0.0
    if not np.isfinite(k1).all():
        failure = FailureRecord("non-finite", t, "vector field is not finite")
        return _finish(ts, ys, fs, cfg, {"accepted": 0, "rejected": 0, "nfev": 1}, failure)

    K = np.empty((7, y.size))
    h = _initial_step(rhs, t, y, k1, direction, span, rtol, atol)
    nfev += 1
    err_old = 1e-4
    last_rejected = False
    n_stop = 0
    while True:
        target = stops[n_stop] if n_stop < len(stops) else t_end
        remaining = abs(target - t)
        if remaining <= 0:
            break
        if accepted + rejected >= cfg.max_steps:
            failure = FailureRecord("max-steps", t, f"exceeded max_steps={cfg.max_steps}")
            break
        h_min = 16 * np.spacing(max(abs(t), abs(t_end), 1.0))
        if h < h_min:
            failure = FailureRecord("step-underflow", t, f"step size {h:.3e} fell below {h_min:.3e}")
            break
        final = h >= remaining
        h_free = h
        if final:
            h = remaining
        hs = direction * h

        K[0] = k1
        for i in range(1, 6):
            K[i] = _call(rhs, t + _C[i] * hs, y + hs * (_A[i, :i] @ K[:i]))
        y_new = y + hs * (_B @ K[:6])
        t_new = target if final else t + hs
        K[6] = k7 = _call(rhs, t_new, y_new)
        nfev += 6

        if not (np.isfinite(y_new).all() and np.isfinite(k7).all()):
            bad = next(
                (t + _C[i] * hs for i in range(1, 7) if not np.isfinite(K[i]).all()),
                t_new,
            )
            failure = FailureRecord("non-finite", float(bad), "vector field is not finite")
            break

        err_vec = hs * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))

        if err <= 1.0:
            factor = MAX_FACTOR if err == 0 else SAFETY * err**-_ALPHA * err_old**_BETA
            factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            if last_rejected:
                factor = min(factor, 1.0)
            err_old = max(err, 1e-4)
            worst = max(worst, err)
            if cfg.dense:
                coefs.append(hs * (K.T @ _P))
            t, y, k1 = t_new, y_new, k7
            ts.append(t)
            ys.append(y)
            fs.append(k1)
            accepted += 1
            last_rejected = False
            if final:
                if n_stop == len(stops):
                    break
                n_stop += 1
                # landing on a stop is not a sign that the step should shrink
                h = max(h * factor, min(h_free, h * MAX_FACTOR))
            else:
                h *= factor
        else:
            factor = max(MIN_FACTOR, SAFETY * err**-_ALPHA)
            h *= factor
            rejected += 1
            last_rejected = True

    meta = {
        "accepted": accepted,
        "rejected": rejected,
        "nfev": nfev,
        "max_error_ratio": worst,
    }
    return _finish(ts, ys, fs, cfg, meta, failure, coefs)


def integrate(
    rhs: VectorField,
    s0: State,
    t_end: float,
    cfg: IntegratorConfig | None = None,
) -> Trajectory:
    """Integrate a system whose state is laid out as ``(q, v)``."""
    return solve(rhs, s0.t, s0.as_array(), t_end, cfg)


def join(backward: Trajectory, forward: Trajectory) -> Trajectory:
    """Glue a backward and a forward run that share their initial sample."""
    if backward.t_start != forward.t_start:
        raise ValueError("runs must start from the same time")
    back = backward.reversed()
    t = np.concatenate([back.t, forward.t[1:]])
    y = np.concatenate([back.y, forward.y[1:]])
    f = coef = None
    if back.dense and forward.dense:
        f = np.concatenate([back.f, forward.f[1:]])
        if back.coef is not None and forward.coef is not None:
            coef = np.concatenate([back.coef, forward.coef])
    meta = dict(forward.meta)
    for key in ("accepted", "rejected", "nfev"):
        meta[key] = backward.meta.get(key, 0) + forward.meta.get(key, 0)
    if "max_error_ratio" in forward.meta:
        meta["max_error_ratio"] = max(
            backward.meta.get("max_error_ratio", 0.0), forward.meta["max_error_ratio"]
        )
    meta["t_origin"] = forward.t_start
    failure = backward.failure or forward.failure
    return Trajectory(t, y, f, meta, failure, coef)


def solve_span(
    rhs: VectorField,
    t0: float,
    y0,
    t_span: tuple[float, float],
    cfg: IntegratorConfig | None = None,
    stops=None,
) -> Trajectory:
    """Integrate outward from ``t0`` to both ends of ``t_span``.

    The result is ordered by increasing time.  ``meta["t_origin"]`` keeps
    the time at which the initial data were given.
    """
    lo, hi = map(float, t_span)
    if not lo <= t0 <= hi or lo == hi:
        raise ValueError(f"t0={t0} must lie inside the span [{lo}, {hi}]")
    if t0 == lo:
        traj = solve(rhs, t0, y0, hi, cfg, stops)
    elif t0 == hi:
        traj = solve(rhs, t0, y0, lo, cfg, stops).reversed()
    else:
        return join(solve(rhs, t0, y0, lo, cfg, stops), solve(rhs, t0, y0, hi, cfg, stops))
    meta = dict(traj.meta, t_origin=float(t0))
    return Trajectory(traj.t, traj.y, traj.f, meta, traj.failure, traj.coef)


def integrate_span(
    rhs: VectorField,
    s0: State,
    t_span: tuple[float, float],
    cfg: IntegratorConfig | None = None,
    stops=None,
) -> Trajectory:
    return solve_span(rhs, s0.t, s0.as_array(), t_span, cfg, stops)
