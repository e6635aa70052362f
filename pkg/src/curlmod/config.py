"""Experiment configuration: strict JSON documents and figure presets.

A document is a single JSON object.  Unknown keys are rejected at every
level, numbers must be finite, and the modulation must stay positive over
the requested time span before anything is integrated.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .floquet import Axis
from .models import (
    PROFILES,
    CubicQuartic,
    DomainError,
    Harmonic,
    MonkeySaddlePair,
    SimpleSaddlePair,
    SinusoidalForcing,
    check_window,
)
from .ode import IntegratorConfig, State

DEFAULT_SAMPLES = 2000

SYSTEMS = {
    "oscillator": "harmonic",
    "mathieu": "harmonic",
    "nonlinear-mathieu": "cubic-quartic",
    "kapitza": "simple-saddle",
    "monkey-kapitza": "monkey-saddle",
    "mathieu-kapitza": "simple-saddle",
    "hopf": None,
}

# hopf runs are long; the tight default would cost minutes for no visible gain
HOPF_INTEGRATOR = {"rtol": 1e-6, "atol": 1e-9, "max_steps": 5_000_000}

_PROFILE_FIELDS = {
    "constant": ("omega0",),
    "cosine-squared": ("a", "b", "Omega"),
    "cosine-direct": ("a", "q"),
    "sqrt-cosine": ("a", "q"),
}

_FAMILIES = ("standard", "modulated", "mathieu-kapitza")


class ConfigError(ValueError):
    """Invalid configuration document; carries the offending field and line if known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class AnalysisConfig:
    escape_radius: float | None = None
    invariants: bool = True
    per_coordinate: bool = True


@dataclass(frozen=True)
class OutputConfig:
    format: str = "csv"
    svg: bool = True
    samples: int = DEFAULT_SAMPLES
    prefix: str = "run"


@dataclass(frozen=True)
class HopfConfig:
    mu: float = 1.0
    eps: float = 0.9
    omega0: float = 25.0
    horizon: float = 2000.0
    x0: float = 1.0
    y0: float = 0.0
    forcing: SinusoidalForcing = field(default_factory=lambda: SinusoidalForcing(1.0, 30.0, 0.0))


@dataclass(frozen=True)
class SweepConfig:
    family: str
    axis1: Axis
    axis2: Axis
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    profile: object = None
    potential: object = None
    initial: State | None = None
    t_span: tuple[float, float] | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    hopf: HopfConfig | None = None
    sweep: SweepConfig | None = None
    period: float | None = None
    seed: int = 0
    label: str = ""

    @property
    def d(self) -> int:
        return 0 if self.potential is None else self.potential.dim

    def to_dict(self) -> dict:
        """Normalised document with every default filled in; parses back to an equal config."""
        out: dict = {}
        if self.sweep is not None:
            s = self.sweep
            out["sweep"] = {
                "family": s.family,
                "axis1": vars(s.axis1).copy(),
                "axis2": vars(s.axis2).copy(),
                "workers": s.workers,
            }
        else:
            out["system"] = self.system
        if self.profile is not None:
            out["modulation"] = {"variant": self.profile.name, **self.profile.params()}
        if isinstance(self.potential, CubicQuartic):
            out["potential"] = {"alpha1": self.potential.alpha1, "alpha2": self.potential.alpha2}
        if self.initial is not None:
            names = _state_names(self.d)
            values = list(self.initial.q) + list(self.initial.v)
            state = {"t0": self.initial.t}
            state.update({n: float(v) for n, v in zip(names, _interleave(values, self.d))})
            out["initial_state"] = state
        if self.t_span is not None:
            out["t_span"] = list(self.t_span)
        if self.period is not None:
            out["floquet"] = {"period": self.period}
        if self.hopf is not None:
            h = self.hopf
            out["hopf"] = {
                "mu": h.mu, "eps": h.eps, "omega0": h.omega0, "horizon": h.horizon,
                "x0": h.x0, "y0": h.y0,
                "forcing": {
                    "amplitude": h.forcing.amplitude,
                    "frequency": h.forcing.frequency,
                    "phase": h.forcing.phase,
                },
            }
        ic = self.integrator
        out["integrator"] = {
            "method": ic.method, "rtol": ic.rtol, "atol": ic.atol, "dt": ic.dt,
            "max_steps": ic.max_steps, "dense": ic.dense,
        }
        out["analysis"] = vars(self.analysis).copy()
        out["outputs"] = vars(self.outputs).copy()
        out["seed"] = self.seed
        out["label"] = self.label
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _state_names(d: int) -> tuple[str, ...]:
    return ("x", "vx") if d == 1 else ("x", "vx", "y", "vy")


def _interleave(values, d):
    """``(q..., v...)`` to ``(x, vx, y, vy)`` order."""
    q, v = values[:d], values[d:]
    out = []
    for a, b in zip(q, v):
        out += [a, b]
    return out


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


class _Doc:
    """Field-level validation helpers that know where keys sit in the source text."""

    def __init__(self, text: str):
        self.text = text

    def line_of(self, key: str) -> int | None:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return None if m is None else self.text.count("\n", 0, m.start()) + 1

    def error(self, path: str, message: str) -> ConfigError:
        return ConfigError(message, path, self.line_of(path.rsplit(".", 1)[-1]))

    def table(self, obj, path: str, allowed, required=()) -> dict:
        if not isinstance(obj, dict):
            raise self.error(path, "expected an object")
        for key in obj:
            if key not in allowed:
                full = f"{path}.{key}" if path else key
                raise ConfigError(f"unknown field '{key}'", full, self.line_of(key))
        for key in required:
            if key not in obj:
                raise self.error(f"{path}.{key}" if path else key, "required field is missing")
        return obj

    def number(self, obj, key, path, default=None, positive=False):
        full = f"{path}.{key}" if path else key
        if key not in obj or obj[key] is None and default is not None:
            if default is None:
                raise self.error(full, "required field is missing")
            return float(default)
        val = obj[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise self.error(full, f"expected a finite number, got {val!r}")
        if positive and not val > 0:
            raise self.error(full, f"must be positive, got {val!r}")
        return float(val)

    def integer(self, obj, key, path, default, minimum=None):
        full = f"{path}.{key}" if path else key
        if key not in obj and default is None:
            raise self.error(full, "required field is missing")
        val = obj.get(key, default)
        if isinstance(val, bool) or not isinstance(val, int):
            raise self.error(full, f"expected an integer, got {val!r}")
        if minimum is not None and val < minimum:
            raise self.error(full, f"must be at least {minimum}, got {val}")
        return val

    def boolean(self, obj, key, path, default):
        val = obj.get(key, default)
        if not isinstance(val, bool):
            raise self.error(f"{path}.{key}", f"expected true or false, got {val!r}")
        return val

    def choice(self, obj, key, path, options, default=None):
        full = f"{path}.{key}" if path else key
        if key not in obj and default is None:
            raise self.error(full, "required field is missing")
        val = obj.get(key, default)
        if val not in options:
            raise self.error(full, f"must be one of {', '.join(map(str, options))}; got {val!r}")
        return val


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a JSON experiment document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", None, exc.lineno) from None
    p = _Doc(text)
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object", None, 1)
    if "sweep" in doc:
        return _parse_sweep(p, doc)
    return _parse_experiment(p, doc)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


_COMMON = ("integrator", "analysis", "outputs", "seed", "label")


def _parse_experiment(p: _Doc, doc: dict) -> ExperimentConfig:
    system = p.choice(doc, "system", "", tuple(SYSTEMS))
    if system == "hopf":
        p.table(doc, "", ("system", "hopf") + _COMMON)
        hopf = _parse_hopf(p, doc.get("hopf", {}))
        integrator = _parse_integrator(p, doc.get("integrator", {}), HOPF_INTEGRATOR)
        return ExperimentConfig(
            system=system,
            integrator=integrator,
            analysis=_parse_analysis(p, doc.get("analysis", {})),
            outputs=_parse_outputs(p, doc.get("outputs", {}), system),
            hopf=hopf,
            seed=p.integer(doc, "seed", "", 0, minimum=0),
            label=_label(p, doc),
        )

    p.table(
        doc, "",
        ("system", "modulation", "potential", "initial_state", "t_span", "floquet") + _COMMON,
        required=("modulation", "initial_state", "t_span"),
    )
    t_span = _parse_span(p, doc["t_span"])
    profile = _parse_profile(p, doc["modulation"], system)
    try:
        check_window(profile, *t_span)
    except DomainError as exc:
        raise p.error("modulation", f"positivity rule violated over t_span: {exc}") from None
    potential = _parse_potential(p, doc.get("potential"), system)
    initial = _parse_initial(p, doc["initial_state"], potential.dim, t_span)
    period = None
    if "floquet" in doc:
        fl = p.table(doc["floquet"], "floquet", ("period",))
        if fl.get("period") is not None:
            period = p.number(fl, "period", "floquet", positive=True)
    return ExperimentConfig(
        system=system,
        profile=profile,
        potential=potential,
        initial=initial,
        t_span=t_span,
        integrator=_parse_integrator(p, doc.get("integrator", {})),
        analysis=_parse_analysis(p, doc.get("analysis", {})),
        outputs=_parse_outputs(p, doc.get("outputs", {}), system),
        period=period,
        seed=p.integer(doc, "seed", "", 0, minimum=0),
        label=_label(p, doc),
    )


def _label(p: _Doc, doc: dict) -> str:
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise p.error("label", "expected a string")
    return label


def _parse_span(p: _Doc, span) -> tuple[float, float]:
    if not isinstance(span, list) or len(span) != 2:
        raise p.error("t_span", "expected [t_start, t_end]")
    for v in span:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise p.error("t_span", f"expected finite numbers, got {v!r}")
    lo, hi = float(span[0]), float(span[1])
    if not lo < hi:
        raise p.error("t_span", f"t_start must be below t_end, got [{lo}, {hi}]")
    return lo, hi


def _parse_profile(p: _Doc, obj, system: str):
    obj = p.table(obj, "modulation", ("variant",) + sum(_PROFILE_FIELDS.values(), ()), ("variant",))
    variant = p.choice(obj, "variant", "modulation", tuple(PROFILES))
    names = _PROFILE_FIELDS[variant]
    for key in obj:
        if key != "variant" and key not in names:
            raise ConfigError(
                f"unknown field '{key}' for the {variant} variant", f"modulation.{key}", p.line_of(key)
            )
    params = {k: p.number(obj, k, "modulation") for k in names}
    try:
        return PROFILES[variant](**params)
    except DomainError as exc:
        raise p.error("modulation", f"positivity rule violated: {exc}") from None


def _parse_potential(p: _Doc, obj, system: str):
    kind = SYSTEMS[system]
    if kind == "cubic-quartic":
        obj = p.table(obj or {}, "potential", ("alpha1", "alpha2"))
        return CubicQuartic(
            p.number(obj, "alpha1", "potential", 0.0), p.number(obj, "alpha2", "potential", 0.0)
        )
    if obj:
        raise p.error("potential", f"the {system} system takes no potential parameters")
    return {"harmonic": Harmonic, "simple-saddle": SimpleSaddlePair, "monkey-saddle": MonkeySaddlePair}[kind]()


def _parse_initial(p: _Doc, obj, d: int, t_span) -> State:
    names = _state_names(d)
    obj = p.table(obj, "initial_state", ("t0",) + names, names)
    lo, hi = t_span
    t0 = p.number(obj, "t0", "initial_state", 0.0 if lo <= 0.0 <= hi else lo)
    if not lo <= t0 <= hi:
        raise p.error("initial_state.t0", f"t0={t0} lies outside t_span [{lo}, {hi}]")
    vals = [p.number(obj, n, "initial_state") for n in names]
    return State(t0, vals[0::2], vals[1::2])


def _parse_integrator(p: _Doc, obj, defaults: dict | None = None) -> IntegratorConfig:
    obj = p.table(obj, "integrator", ("method", "rtol", "atol", "dt", "max_steps", "dense"))
    base = IntegratorConfig(**(defaults or {}))
    kwargs = {
        "method": p.choice(obj, "method", "integrator", ("rk45-adaptive", "rk4-fixed"), base.method),
        "rtol": p.number(obj, "rtol", "integrator", base.rtol, positive=True),
        "atol": p.number(obj, "atol", "integrator", base.atol, positive=True),
        "max_steps": p.integer(obj, "max_steps", "integrator", base.max_steps, minimum=1),
        "dense": p.boolean(obj, "dense", "integrator", base.dense),
    }
    if obj.get("dt") is not None:
        kwargs["dt"] = p.number(obj, "dt", "integrator", positive=True)
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as exc:
        raise p.error("integrator", str(exc)) from None


def _parse_analysis(p: _Doc, obj) -> AnalysisConfig:
    obj = p.table(obj, "analysis", ("escape_radius", "invariants", "per_coordinate"))
    radius = None
    if obj.get("escape_radius") is not None:
        radius = p.number(obj, "escape_radius", "analysis", positive=True)
    return AnalysisConfig(
        radius,
        p.boolean(obj, "invariants", "analysis", True),
        p.boolean(obj, "per_coordinate", "analysis", True),
    )


def _parse_outputs(p: _Doc, obj, system: str) -> OutputConfig:
    obj = p.table(obj, "outputs", ("format", "svg", "samples", "prefix"))
    prefix = obj.get("prefix", system)
    if not isinstance(prefix, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", prefix):
        raise p.error("outputs.prefix", "prefix must be a plain file-name stem")
    return OutputConfig(
        p.choice(obj, "format", "outputs", ("csv", "json"), "csv"),
        p.boolean(obj, "svg", "outputs", True),
        p.integer(obj, "samples", "outputs", DEFAULT_SAMPLES, minimum=2),
        prefix,
    )


def _parse_hopf(p: _Doc, obj) -> HopfConfig:
    obj = p.table(obj, "hopf", ("mu", "eps", "omega0", "horizon", "x0", "y0", "forcing"))
    base = HopfConfig()
    fobj = p.table(obj.get("forcing", {}), "hopf.forcing", ("amplitude", "frequency", "phase"))
    forcing = SinusoidalForcing(
        p.number(fobj, "amplitude", "hopf.forcing", base.forcing.amplitude),
        p.number(fobj, "frequency", "hopf.forcing", base.forcing.frequency),
        p.number(fobj, "phase", "hopf.forcing", base.forcing.phase),
    )
    cfg = HopfConfig(
        mu=p.number(obj, "mu", "hopf", base.mu),
        eps=p.number(obj, "eps", "hopf", base.eps),
        omega0=p.number(obj, "omega0", "hopf", base.omega0),
        horizon=p.number(obj, "horizon", "hopf", base.horizon, positive=True),
        x0=p.number(obj, "x0", "hopf", base.x0),
        y0=p.number(obj, "y0", "hopf", base.y0),
        forcing=forcing,
    )
    if cfg.x0 == 0 and cfg.y0 == 0:
        raise p.error("hopf", "the initial point must be off the origin")
    return cfg


def _parse_axis(p: _Doc, obj, path: str) -> Axis:
    obj = p.table(obj, path, ("name", "min", "max", "count"), ("min", "max", "count"))
    lo, hi = p.number(obj, "min", path), p.number(obj, "max", path)
    if lo > hi:
        raise p.error(path, "min must not exceed max")
    name = obj.get("name", "a" if path.endswith("1") else "q")
    return Axis(name, lo, hi, p.integer(obj, "count", path, None, minimum=1))


def _parse_sweep(p: _Doc, doc: dict) -> ExperimentConfig:
    p.table(doc, "", ("sweep",) + _COMMON)
    obj = p.table(doc["sweep"], "sweep", ("family", "axis1", "axis2", "workers"), ("axis1", "axis2"))
    sweep = SweepConfig(
        family=p.choice(obj, "family", "sweep", _FAMILIES, "standard"),
        axis1=_parse_axis(p, obj["axis1"], "sweep.axis1"),
        axis2=_parse_axis(p, obj["axis2"], "sweep.axis2"),
        workers=p.integer(obj, "workers", "sweep", 1, minimum=1),
    )
    return ExperimentConfig(
        system="sweep",
        integrator=_parse_integrator(p, doc.get("integrator", {}), {"rtol": 1e-12, "atol": 1e-14, "dense": False}),
        analysis=_parse_analysis(p, doc.get("analysis", {})),
        outputs=_parse_outputs(p, doc.get("outputs", {}), "sweep"),
        sweep=sweep,
        seed=p.integer(doc, "seed", "", 0, minimum=0),
        label=_label(p, doc),
    )


DEFAULT_SWEEP = {
    "sweep": {
        "family": "standard",
        "axis1": {"name": "a", "min": 0.0, "max": 2.5, "count": 26},
        "axis2": {"name": "q", "min": 0.0, "max": 1.0, "count": 21},
    }
}

DEFAULT_HOPF = {"system": "hopf"}


# --------------------------------------------------------------------------
# figure presets
# --------------------------------------------------------------------------

AS_PRINTED = "as-printed"
ADJUSTED = "positivity-adjusted"
FIGURE_SPAN = [-50.0, 50.0]

_RECORDS = {
    1: {"q": 0.1, "a": 0.01, "b": 0.01, "alpha1": 0.01, "alpha2": 0.01, "Omega": 0.01, "x0": 0.0, "vx0": 0.1},
    2: {"q": 0.1, "a": 0.01, "alpha1": 0.1, "alpha2": 0.1, "x0": 0.0, "vx0": 0.1},
    3: {"q": 0.1, "a": 0.01, "x0": 0.0, "vx0": 0.1, "y0": 0.0, "vy0": 0.1},
}


def _figure_document(which: int, a: float) -> dict:
    cap = _RECORDS[which]
    doc: dict = {"t_span": list(FIGURE_SPAN), "outputs": {"prefix": f"figure{which}"}}
    if which == 1:
        doc["system"] = "mathieu"
        doc["modulation"] = {"variant": "cosine-squared", "a": cap["a"], "b": cap["b"], "Omega": cap["Omega"]}
        doc["initial_state"] = {"t0": 0.0, "x": cap["x0"], "vx": cap["vx0"]}
    elif which == 2:
        doc["system"] = "nonlinear-mathieu"
        doc["modulation"] = {"variant": "sqrt-cosine", "a": a, "q": cap["q"]}
        doc["potential"] = {"alpha1": cap["alpha1"], "alpha2": cap["alpha2"]}
        doc["initial_state"] = {"t0": 0.0, "x": cap["x0"], "vx": cap["vx0"]}
    else:
        doc["system"] = "mathieu-kapitza"
        doc["modulation"] = {"variant": "sqrt-cosine", "a": a, "q": cap["q"]}
        doc["initial_state"] = {
            "t0": 0.0, "x": cap["x0"], "vx": cap["vx0"], "y": cap["y0"], "vy": cap["vy0"],
        }
    return doc


@dataclass(frozen=True)
class FigurePreset:
    """Parameter record of a figure plus the runnable variants derived from it.

    ``record`` holds the figure parameters unchanged.  ``documents`` holds the
    "as-printed" and "positivity-adjusted" configuration documents; a
    variant that fails validation maps to its :class:`ConfigError` in
    ``configs``.
    """

    number: int
    record: dict
    documents: dict
    configs: dict

    @property
    def config(self) -> ExperimentConfig:
        """The first variant that validates, preferring the printed numbers."""
        for label in (AS_PRINTED, ADJUSTED):
            cfg = self.configs[label]
            if isinstance(cfg, ExperimentConfig):
                return cfg
        raise self.configs[ADJUSTED]

    def variant(self, label: str) -> ExperimentConfig:
        cfg = self.configs[label]
        if isinstance(cfg, ConfigError):
            raise cfg
        return cfg


def preset_figure(which: int) -> FigurePreset:
    if which not in _RECORDS:
        raise ValueError(f"no preset for figure {which!r}; choose 1, 2 or 3")
    record = dict(_RECORDS[which])
    printed = _figure_document(which, record["a"])
    # a = 0.25 > 2q keeps a + 2q cos 2t positive; figure 1 is already valid
    adjusted = printed if which == 1 else _figure_document(which, 0.25)
    documents = {AS_PRINTED: printed, ADJUSTED: adjusted}
    configs = {}
    for label, doc in documents.items():
        try:
            configs[label] = parse_config(json.dumps(doc))
        except ConfigError as exc:
            configs[label] = exc
    return FigurePreset(which, record, documents, configs)
