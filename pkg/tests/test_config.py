import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curlmod.config import (
    ADJUSTED,
    AS_PRINTED,
    DEFAULT_HOPF,
    DEFAULT_SWEEP,
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
    preset_figure,
)
from curlmod.models import Constant, CosineSquared, CubicQuartic, Harmonic, SimpleSaddlePair, SqrtCosine

MINIMAL = {
    "system": "oscillator",
    "modulation": {"variant": "constant", "omega0": 1.0},
    "initial_state": {"x": 1.0, "vx": 0.0},
    "t_span": [0, 10],
}


def _parse(doc):
    return parse_config(json.dumps(doc, indent=2))


def test_minimal_document_gets_defaults():
    cfg = _parse(MINIMAL)
    assert cfg.system == "oscillator"
    assert cfg.profile == Constant(1.0)
    assert isinstance(cfg.potential, Harmonic)
    assert cfg.initial.t == 0.0 and cfg.initial.q.tolist() == [1.0] and cfg.initial.v.tolist() == [0.0]
    assert cfg.t_span == (0.0, 10.0)
    assert (cfg.integrator.rtol, cfg.integrator.atol) == (1e-10, 1e-12)
    assert cfg.analysis.escape_radius is None and cfg.analysis.invariants
    assert (cfg.outputs.format, cfg.outputs.svg, cfg.outputs.samples) == ("csv", True, 2000)
    assert cfg.outputs.prefix == "oscillator"


def test_negative_ratio_rejected_with_positivity_message():
    doc = dict(MINIMAL, system="mathieu", modulation={"variant": "cosine-squared", "a": 0.01, "b": 0.02, "Omega": 1.0})
    with pytest.raises(ConfigError, match="positivity") as exc:
        _parse(doc)
    assert exc.value.field == "modulation"


def test_window_zero_is_rejected():
    # a = b touches zero at t = pi / Omega, inside this span
    doc = dict(
        MINIMAL, system="mathieu", t_span=[0, 400],
        modulation={"variant": "cosine-squared", "a": 0.01, "b": 0.01, "Omega": 0.01},
    )
    with pytest.raises(ConfigError, match="positivity"):
        _parse(doc)


def test_unknown_field_is_named_with_its_line():
    text = json.dumps(dict(MINIMAL, modulation={"variant": "constant", "omega0": 1.0, "omega_squared": 2.0}), indent=2)
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field == "modulation.omega_squared"
    assert exc.value.line == text.splitlines().index('    "omega_squared": 2.0') + 1
    assert "omega_squared" in str(exc.value)


def test_unknown_top_level_field():
    with pytest.raises(ConfigError) as exc:
        _parse(dict(MINIMAL, colour="red"))
    assert exc.value.field == "colour"


def test_malformed_json_reports_line():
    text = '{\n  "system": "oscillator",\n  "t_span": [0, 10,\n}\n'
    with pytest.raises(ConfigError, match="malformed") as exc:
        parse_config(text)
    assert exc.value.line == 4


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"system": "pendulum"}, "system"),
        ({"t_span": [10, 0]}, "t_span"),
        ({"t_span": [0, "ten"]}, "t_span"),
        ({"initial_state": {"x": 1.0}}, "initial_state.vx"),
        ({"initial_state": {"x": 1.0, "vx": 0.0, "t0": 20.0}}, "initial_state.t0"),
        ({"integrator": {"rtol": -1}}, "integrator.rtol"),
        ({"integrator": {"method": "euler"}}, "integrator.method"),
        ({"outputs": {"format": "xml"}}, "outputs.format"),
        ({"outputs": {"samples": 1}}, "outputs.samples"),
        ({"outputs": {"prefix": "../escape"}}, "outputs.prefix"),
        ({"analysis": {"escape_radius": 0}}, "analysis.escape_radius"),
        ({"seed": -3}, "seed"),
        ({"potential": {"alpha1": 1.0}}, "potential"),
    ],
)
def test_field_errors(patch, field):
    with pytest.raises(ConfigError) as exc:
        _parse(dict(MINIMAL, **patch))
    assert exc.value.field == field


def test_wrong_variant_parameter():
    with pytest.raises(ConfigError) as exc:
        _parse(dict(MINIMAL, modulation={"variant": "constant", "a": 1.0}))
    assert exc.value.field == "modulation.a"


def test_two_dimensional_systems():
    doc = dict(
        MINIMAL, system="kapitza",
        modulation={"variant": "cosine-squared", "a": 2, "b": 1, "Omega": 1},
        initial_state={"x": 0.3, "vx": 0.1, "y": -0.2, "vy": 0.05},
    )
    cfg = _parse(doc)
    assert isinstance(cfg.potential, SimpleSaddlePair)
    assert cfg.initial.q.tolist() == [0.3, -0.2] and cfg.initial.v.tolist() == [0.1, 0.05]
    with pytest.raises(ConfigError):
        _parse(dict(doc, initial_state={"x": 0.3, "vx": 0.1}))


def test_nonlinear_mathieu_potential():
    doc = dict(MINIMAL, system="nonlinear-mathieu", potential={"alpha1": 0.1, "alpha2": 0.2})
    assert _parse(doc).potential == CubicQuartic(0.1, 0.2)


def test_floquet_period():
    assert _parse(dict(MINIMAL, floquet={"period": 3.0})).period == 3.0
    with pytest.raises(ConfigError):
        _parse(dict(MINIMAL, floquet={"period": 0}))


def test_hopf_and_sweep_defaults():
    hopf = parse_config(json.dumps(DEFAULT_HOPF))
    assert hopf.hopf.forcing.frequency == 30.0 and hopf.hopf.omega0 == 25.0
    assert hopf.hopf.horizon == 2000.0 and hopf.integrator.rtol == 1e-6
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"system": "hopf", "hopf": {"x0": 0, "y0": 0}}))
    sweep = parse_config(json.dumps(DEFAULT_SWEEP))
    assert sweep.system == "sweep"
    assert (sweep.sweep.axis1.count, sweep.sweep.axis2.count) == (26, 21)
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"sweep": {"axis1": {"min": 1, "max": 0, "count": 2}, "axis2": {"min": 0, "max": 1, "count": 2}}}))


@pytest.mark.parametrize(
    "doc",
    [
        MINIMAL,
        dict(MINIMAL, system="monkey-kapitza", modulation={"variant": "sqrt-cosine", "a": 2, "q": 0.3},
             initial_state={"t0": 1.0, "x": 0.01, "vx": 0.0, "y": 0.02, "vy": 0.0},
             analysis={"escape_radius": 4.0, "per_coordinate": False}, seed=7, label="m"),
        dict(MINIMAL, system="nonlinear-mathieu", potential={"alpha1": 0.1, "alpha2": 0.2},
             integrator={"method": "rk4-fixed", "dt": 0.01}, outputs={"format": "json", "svg": False}),
        DEFAULT_HOPF,
        DEFAULT_SWEEP,
    ],
    ids=["minimal", "monkey", "nonlinear", "hopf", "sweep"],
)
def test_normalised_document_round_trips(doc):
    cfg = _parse(doc)
    again = parse_config(cfg.to_json())
    assert again.to_dict() == cfg.to_dict()


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.json")


# --- presets ---------------------------------------------------------------


def test_figure_one_preset():
    p = preset_figure(1)
    cfg = p.config
    assert cfg.profile == CosineSquared(0.01, 0.01, 0.01)
    assert cfg.initial.q.tolist() == [0.0] and cfg.initial.v.tolist() == [0.1]
    assert cfg.t_span == (-50.0, 50.0)
    assert p.documents[AS_PRINTED] == p.documents[ADJUSTED]


def test_figure_three_preset_keeps_the_printed_record():
    p = preset_figure(3)
    assert p.record == {"q": 0.1, "a": 0.01, "x0": 0.0, "vx0": 0.1, "y0": 0.0, "vy0": 0.1}
    assert isinstance(p.configs[AS_PRINTED], ConfigError)
    assert p.documents[AS_PRINTED]["modulation"] == {"variant": "sqrt-cosine", "a": 0.01, "q": 0.1}
    cfg = p.variant(ADJUSTED)
    assert cfg.profile == SqrtCosine(0.25, 0.1)
    assert cfg.initial.as_array().tolist() == [0.0, 0.0, 0.1, 0.1]
    with pytest.raises(ConfigError):
        p.variant(AS_PRINTED)


def test_figure_two_preset():
    p = preset_figure(2)
    assert p.record["alpha1"] == p.record["alpha2"] == 0.1
    assert p.config.potential == CubicQuartic(0.1, 0.1)
    with pytest.raises(ValueError):
        preset_figure(4)


# --- totality --------------------------------------------------------------

_scalars = st.one_of(st.none(), st.booleans(), st.integers(-5, 5), st.floats(allow_nan=True), st.text(max_size=4))
_values = st.recursive(
    _scalars, lambda inner: st.lists(inner, max_size=3) | st.dictionaries(st.text(max_size=6), inner, max_size=3),
    max_leaves=8,
)


@settings(max_examples=200, deadline=None)
@given(
    st.fixed_dictionaries(
        {},
        optional={
            "system": st.sampled_from(["oscillator", "mathieu", "kapitza", "hopf", "x"]) | _values,
            "modulation": st.fixed_dictionaries(
                {"variant": st.sampled_from(["constant", "cosine-squared", "sqrt-cosine"])},
                optional={k: st.floats(-3, 3) | _values for k in ("omega0", "a", "b", "q", "Omega")},
            ) | _values,
            "initial_state": st.dictionaries(st.sampled_from(["x", "vx", "y", "vy", "t0"]), st.floats(-2, 2) | _values),
            "t_span": st.lists(st.floats(-20, 20) | _values, max_size=3),
            "integrator": st.dictionaries(st.sampled_from(["rtol", "atol", "method", "dt"]), _values),
            "outputs": st.dictionaries(st.sampled_from(["format", "samples", "svg", "prefix"]), _values),
            "extra": _values,
        },
    )
)
def test_parsing_is_total(doc):
    try:
        cfg = parse_config(json.dumps(doc))
    except ConfigError:
        return
    assert isinstance(cfg, ExperimentConfig)
    if cfg.system not in ("hopf", "sweep"):
        lo, hi = cfg.t_span
        assert lo < hi and lo <= cfg.initial.t <= hi
        assert cfg.profile.window_min(lo, hi) > 0
