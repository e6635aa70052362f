import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from curlmod.ode import (
    CapabilityError,
    IntegratorConfig,
    NumericalFailure,
    OutOfRangeError,
    State,
    Trajectory,
    integrate,
    integrate_span,
    join,
    sample_dense,
    solve,
    solve_span,
)


def harmonic(t, y):
    return np.array([y[1], -y[0]])


TIGHT = IntegratorConfig(rtol=1e-12, atol=1e-14)


# --- State / config validation ---------------------------------------------


def test_state_is_validated_and_read_only():
    s = State(0.0, [1.0, 2.0], [3.0, 4.0])
    assert s.d == 2
    np.testing.assert_array_equal(s.as_array(), [1, 2, 3, 4])
    with pytest.raises(ValueError):
        s.q[0] = 5.0
    with pytest.raises(ValueError):
        State(0.0, [1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        State(0.0, [np.nan], [0.0])
    assert State.from_array(0.0, [1, 2, 3, 4]) == s
    assert State(0.0, [1.0, 2.0], [3.0, 4.5]) != s


def test_state_round_trip_through_array():
    s = State(0.5, [1.0, -2.0], [0.25, 4.0])
    back = State.from_array(s.t, s.as_array())
    np.testing.assert_array_equal(back.q, s.q)
    np.testing.assert_array_equal(back.v, s.v)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"method": "euler"},
        {"method": "rk4-fixed"},
        {"method": "rk4-fixed", "dt": -1e-3},
        {"rtol": 0.0},
        {"atol": -1.0},
        {"max_steps": 0},
    ],
)
def test_integrator_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        IntegratorConfig(**kwargs)


# --- integrate ---------------------------------------------------------------


def test_harmonic_full_period_returns_to_start():
    traj = integrate(harmonic, State(0.0, [1.0], [0.0]), 2 * math.pi, IntegratorConfig(rtol=1e-10))
    assert traj.t_end == 2 * math.pi
    assert abs(traj.q[-1, 0] - 1.0) <= 1e-8
    assert traj.failure is None


def test_zero_field_keeps_state():
    s0 = State(0.0, [0.3, -0.7], [1.5, 2.0])
    traj = integrate(lambda t, y: np.zeros_like(y), s0, 5.0)
    assert traj.t_end == 5.0
    np.testing.assert_array_equal(traj.y[-1], s0.as_array())


def test_rk4_and_adaptive_agree():
    s0 = State(0.0, [1.0], [0.0])
    a = integrate(harmonic, s0, 10.0, IntegratorConfig(method="rk4-fixed", dt=1e-3))
    b = integrate(harmonic, s0, 10.0, TIGHT)
    assert np.max(np.abs(a.y[-1] - b.y[-1])) <= 1e-8


def test_rk4_convergence_order():
    errors = []
    for n in (640, 1280, 2560, 5120):
        dt = 2 * math.pi / n
        assert 1e-3 <= dt <= 1e-2
        traj = integrate(harmonic, State(0.0, [1.0], [0.0]), 2 * math.pi, IntegratorConfig(method="rk4-fixed", dt=dt))
        errors.append(abs(traj.q[-1, 0] - 1.0) + abs(traj.v[-1, 0]))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    assert all(12 <= r <= 20 for r in ratios), ratios


def test_adaptive_steps_respect_tolerance():
    traj = integrate(harmonic, State(0.0, [1.0], [0.0]), 20.0)
    assert traj.meta["max_error_ratio"] <= 1.0
    assert traj.meta["accepted"] == len(traj) - 1
    for key in ("method", "rtol", "atol", "rejected", "nfev"):
        assert key in traj.meta


def test_time_reversal_recovers_initial_state():
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    fwd = solve(harmonic, 0.0, [1.0, 0.0], 10.0, cfg)
    back = solve(harmonic, 10.0, fwd.y[-1], 0.0, cfg)
    assert np.max(np.abs(back.y[-1] - [1.0, 0.0])) <= 100 * (cfg.atol + cfg.rtol)


def test_deterministic():
    a = solve(harmonic, 0.0, [1.0, 0.3], 17.0)
    b = solve(harmonic, 0.0, [1.0, 0.3], 17.0)
    assert a.t.tobytes() == b.t.tobytes()
    assert a.y.tobytes() == b.y.tobytes()


def test_backward_run_is_monotone_decreasing():
    traj = solve(harmonic, 0.0, [1.0, 0.0], -3.0)
    assert np.all(np.diff(traj.t) < 0)
    assert traj.t_end == -3.0
    assert abs(traj.q[-1, 0] - math.cos(3.0)) < 1e-8


def test_start_equals_end_rejected():
    with pytest.raises(ValueError):
        solve(harmonic, 1.0, [1.0, 0.0], 1.0)


def test_trajectory_rejects_unordered_times():
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0, 0.5], np.zeros((3, 2)))


def test_trajectory_is_immutable():
    traj = solve(harmonic, 0.0, [1.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        traj.y[0, 0] = 2.0


# --- failures ----------------------------------------------------------------


def test_blow_up_is_reported_with_partial_data():
    # y' = y^2 from y(0)=1 reaches infinity at t = 1
    traj = solve(lambda t, y: y * y, 0.0, [1.0], 2.0)
    assert traj.failure is not None
    assert traj.failure.kind in ("step-underflow", "non-finite", "max-steps")
    assert 0.9 < traj.failure.t <= 1.0 + 1e-6
    assert traj.t_end < 1.0 + 1e-6
    assert len(traj) > 10
    with pytest.raises(NumericalFailure):
        traj.raise_for_failure()


def test_non_finite_field_records_time():
    def rhs(t, y):
        return np.array([np.nan if t > 0.5 else 1.0])

    traj = solve(rhs, 0.0, [0.0], 1.0, IntegratorConfig(method="rk4-fixed", dt=0.1))
    assert traj.failure.kind == "non-finite"
    assert traj.failure.t > 0.5
    assert traj.t_end <= 0.5 + 1e-12


def test_max_steps_exceeded():
    traj = solve(harmonic, 0.0, [1.0, 0.0], 100.0, IntegratorConfig(max_steps=5))
    assert traj.failure.kind == "max-steps"
    assert len(traj) <= 6


def test_non_finite_initial_state_rejected():
    with pytest.raises(ValueError):
        solve(harmonic, 0.0, [np.inf, 0.0], 1.0)


# --- dense output ----------------------------------------------------------


def test_dense_output_quarter_period():
    traj = integrate(harmonic, State(0.0, [1.0], [0.0]), 2 * math.pi)
    (s,) = sample_dense(traj, [math.pi / 2])
    assert abs(s.q[0]) <= 1e-7
    assert s.t == math.pi / 2


def test_dense_output_at_start_is_exact():
    s0 = State(0.0, [1.0], [0.0])
    traj = integrate(harmonic, s0, 3.0)
    (s,) = sample_dense(traj, [traj.t_start])
    np.testing.assert_array_equal(s.as_array(), s0.as_array())


def test_dense_output_matches_reintegration_at_midpoints():
    cfg = IntegratorConfig(rtol=1e-10, atol=1e-12)
    traj = solve(harmonic, 0.0, [1.0, 0.0], 10.0, cfg)
    mids = 0.5 * (traj.t[:-1] + traj.t[1:])
    got = traj.sample(mids[::5])
    for m, y in zip(mids[::5], got):
        ref = solve(harmonic, 0.0, [1.0, 0.0], m, cfg).y[-1]
        assert np.max(np.abs(y - ref)) <= 10 * (cfg.atol + cfg.rtol * np.max(np.abs(ref)))


def test_hermite_fallback_for_fixed_step():
    traj = solve(harmonic, 0.0, [1.0, 0.0], 2.0, IntegratorConfig(method="rk4-fixed", dt=1e-2))
    assert traj.coef is None
    t = np.linspace(0, 2, 37)
    assert np.max(np.abs(traj.sample(t)[:, 0] - np.cos(t))) < 1e-8


def test_dense_output_errors():
    traj = solve(harmonic, 0.0, [1.0, 0.0], 1.0)
    with pytest.raises(OutOfRangeError):
        traj.sample([1.5])
    sparse = solve(harmonic, 0.0, [1.0, 0.0], 1.0, IntegratorConfig(dense=False))
    with pytest.raises(CapabilityError):
        sparse.sample([0.5])


def test_stops_become_nodes():
    stops = np.linspace(0.0, 5.0, 41)
    traj = solve(harmonic, 0.0, [1.0, 0.0], 5.0, IntegratorConfig(), stops=stops)
    assert set(stops.tolist()) <= set(traj.t.tolist())
    np.testing.assert_array_equal(traj.resample(stops).y, traj.y[np.isin(traj.t, stops)])


# --- two-sided spans -------------------------------------------------------


@pytest.mark.parametrize("t0", [0.0, -7.0, 9.0, 2.5])
def test_span_runs_from_interior_point(t0):
    traj = solve_span(harmonic, t0, [math.cos(t0), -math.sin(t0)], (-7.0, 9.0))
    assert traj.t_start == -7.0 and traj.t_end == 9.0
    assert np.all(np.diff(traj.t) > 0)
    assert traj.meta["t_origin"] == t0
    g = np.linspace(-7, 9, 801)
    assert np.max(np.abs(traj.sample(g)[:, 0] - np.cos(g))) < 1e-8


def test_span_requires_t0_inside():
    with pytest.raises(ValueError):
        integrate_span(harmonic, State(10.0, [1.0], [0.0]), (0.0, 5.0))


def test_join_requires_common_start():
    a = solve(harmonic, 0.0, [1.0, 0.0], -1.0)
    b = solve(harmonic, 0.5, [1.0, 0.0], 1.0)
    with pytest.raises(ValueError):
        join(a, b)


def test_window_keeps_interpolation():
    traj = solve(harmonic, 0.0, [1.0, 0.0], 10.0)
    w = traj.window(2.0, 6.0)
    assert w.t_start >= 2.0 and w.t_end <= 6.0
    t = np.linspace(w.t_start, w.t_end, 50)
    np.testing.assert_allclose(w.sample(t), traj.sample(t), atol=1e-14)


# --- property: linear systems against the matrix exponential ---------------


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4),
    st.lists(st.floats(-1.0, 1.0), min_size=2, max_size=2),
    st.floats(0.5, 5.0),
)
def test_linear_flow_matches_matrix_exponential(entries, y0, t_end):
    A = np.array(entries).reshape(2, 2)
    traj = solve(lambda t, y: A @ y, 0.0, y0, t_end, TIGHT)
    exact = expm(A * t_end) @ np.array(y0)
    assert np.max(np.abs(traj.y[-1] - exact)) <= 1e-9 * max(1.0, np.max(np.abs(exact)))
