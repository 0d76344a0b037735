import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import beta

from torusquant.classical import (
    ActionAngleChart,
    CanonicalShift,
    ClassicalState,
    ExtendedState,
    SystemDef,
    action_by_quadrature,
    canonical_shift,
    extended_energy_drift,
    extended_flow,
    first_integral_drift,
    fit_hamiltonian,
    frequency_correspondence,
    hamilton_flow,
    monte_carlo_action,
)
from torusquant.errors import FitFailure, InputError, NonFiniteDerivative, OpenOrbit
from torusquant.fourier import TruncationWindow
from torusquant.operators import Representation

OSC = "(p1^2 + q1^2)/2"
QUARTIC = "p1^2/2 + q1^4/4"


def quartic_action(E):
    # I = (2/pi) q+ sqrt(2E) int_0^1 sqrt(1 - u^4) du,  q+ = (4E)^(1/4)
    return 2 / math.pi * (4 * E) ** 0.25 * math.sqrt(2 * E) * beta(0.25, 1.5) / 4


# ---------------------------------------------------------------- flows

def test_oscillator_returns_after_one_period():
    sys = SystemDef(OSC)
    tr = hamilton_flow(sys, ClassicalState(0.0, (1.0,), (0.0,)), 2 * math.pi, 2 * math.pi / 2000)
    assert abs(tr.t[-1] - 2 * math.pi) <= 1e-12
    assert abs(tr.q[-1][0] - 1.0) <= 1e-6 and abs(tr.p[-1][0]) <= 1e-6


def test_oscillator_matches_closed_form():
    sys = SystemDef(OSC)
    tr = hamilton_flow(sys, ClassicalState(0.0, (0.3,), (0.4,)), 3.0, 1e-3)
    t = np.asarray(tr.t)
    q_exact = 0.3 * np.cos(t) + 0.4 * np.sin(t)
    assert np.max(np.abs(np.asarray(tr.q)[:, 0] - q_exact)) <= 1e-10


def test_zero_hamiltonian_is_stationary():
    tr = hamilton_flow(SystemDef("0", 2), ClassicalState(0.0, (0.5, -1.0), (2.0, 3.0)), 1.0, 0.1)
    assert np.all(np.asarray(tr.q) == [0.5, -1.0]) and np.all(np.asarray(tr.p) == [2.0, 3.0])


def test_free_particle_moves_linearly():
    tr = hamilton_flow(SystemDef("p1^2/2"), ClassicalState(0.0, (0.0,), (1.0,)), 1.0, 0.01)
    assert abs(tr.q[-1][0] - 1.0) <= 1e-12 and abs(tr.p[-1][0] - 1.0) <= 1e-15


def test_singular_field_raises():
    sys = SystemDef("p1^2/2 + 1/q1")
    with pytest.raises(NonFiniteDerivative):
        hamilton_flow(sys, ClassicalState(0.0, (0.0,), (0.0,)), 1.0, 0.1)


def test_unknown_symbol_is_input_error():
    with pytest.raises(InputError):
        SystemDef("p1^2/2 + q2", 1)


def test_first_integral_drift_table():
    sys = SystemDef(OSC, first_integrals=[OSC, "7", "q1"])
    tr = hamilton_flow(sys, ClassicalState(0.0, (1.0,), (0.0,)), 4.0, 1e-3)
    d_energy, d_const, d_q = first_integral_drift(sys, tr)
    assert d_energy <= 1e-8 * 4.0
    assert d_const == 0.0
    assert abs(d_q - 2.0) <= 1e-6


def test_quartic_drift_per_unit_time():
    sys = SystemDef(QUARTIC, first_integrals=[QUARTIC])
    tr = hamilton_flow(sys, ClassicalState(0.0, (1.5,), (0.0,)), 10.0, 1e-3)
    assert first_integral_drift(sys, tr)[0] / 10.0 <= 1e-8


def test_rk4_drift_order():
    # energy error of RK4 should shrink by about 2^4 when dt halves; measured 19.5 here
    sys = SystemDef(QUARTIC, first_integrals=[QUARTIC])
    x0 = ClassicalState(0.0, (1.5,), (0.0,))
    coarse = first_integral_drift(sys, hamilton_flow(sys, x0, 10.0, 0.01))[0]
    fine = first_integral_drift(sys, hamilton_flow(sys, x0, 10.0, 0.005))[0]
    assert 14.0 <= coarse / fine <= 24.0


def test_trajectory_serialisation():
    tr = hamilton_flow(SystemDef(OSC), ClassicalState(0.0, (1.0,), (0.0,)), 0.2, 0.1)
    lines = tr.to_csv().splitlines()
    assert lines[0].split(",")[:3] == ["t", "q1", "p1"]
    assert len(lines) == 1 + len(tr)
    d = tr.to_dict()
    assert len(d["t"]) == len(tr)


# ---------------------------------------------------------------- extended lift

def test_extended_lift_time_independent_keeps_p0():
    sys = SystemDef(OSC)
    tr = extended_flow(sys, ExtendedState(0.0, (1.0,), (0.0,), 0.7), 2.0, 0.01)
    assert np.max(np.abs(np.asarray(tr.p0) - 0.7)) <= 1e-15


def test_extended_lift_time_dependent():
    sys = SystemDef(OSC + " + 0.1*t")
    tr = extended_flow(sys, ExtendedState(0.0, (1.0,), (0.0,), 0.0), 2.0, 1e-3)
    t, p0 = np.asarray(tr.t), np.asarray(tr.p0)
    assert np.max(np.abs(p0 + 0.1 * t)) <= 1e-12
    assert extended_energy_drift(sys, tr) <= 1e-8


def test_extended_lift_projects_onto_ordinary_flow():
    sys = SystemDef("(p1^2 + q1^2)/2 + 0.3*sin(t)*q1")
    ext = extended_flow(sys, ExtendedState(0.5, (1.0,), (0.2,), 0.0), 3.0, 1e-2)
    plain = hamilton_flow(sys, ClassicalState(0.5, (1.0,), (0.2,)), 3.0, 1e-2)
    assert np.max(np.abs(np.asarray(ext.q) - np.asarray(plain.q))) <= 1e-12
    assert np.max(np.abs(np.asarray(ext.p) - np.asarray(plain.p))) <= 1e-12


# ---------------------------------------------------------------- actions

def test_oscillator_action():
    assert abs(action_by_quadrature(SystemDef(OSC), 0.5) - 0.5) <= 1e-10
    assert action_by_quadrature(SystemDef(OSC), 1e-10) <= 1e-9


@pytest.mark.parametrize("E", [0.1, 1.0, 3.7])
def test_quartic_action_closed_form(E):
    assert abs(action_by_quadrature(SystemDef(QUARTIC), E) - quartic_action(E)) <= 1e-9


def test_quartic_action_value():
    assert abs(quartic_action(1.0) - 1.1128357888987641) <= 1e-14


def test_monte_carlo_agrees_with_quadrature():
    sys = SystemDef(QUARTIC)
    assert abs(monte_carlo_action(sys, 1.0, seed=3) - action_by_quadrature(sys, 1.0)) <= 1e-3


@pytest.mark.parametrize("H", ["p1^2/2", "p1^2/2 - q1^2/2"])
def test_open_orbits(H):
    with pytest.raises(OpenOrbit):
        action_by_quadrature(SystemDef(H), 1.0)


def test_period_is_derivative_of_action():
    chart = ActionAngleChart(SystemDef(QUARTIC))
    E, h = 1.3, 1e-5
    dIdE = (chart.action(E + h) - chart.action(E - h)) / (2 * h)
    assert abs(chart.period(E) - 2 * math.pi * dIdE) <= 1e-6


def test_chart_round_trip():
    chart = ActionAngleChart(SystemDef(QUARTIC))
    rng = np.random.default_rng(5)
    for q, p in rng.uniform(-1.2, 1.2, size=(8, 2)):
        phi, I = chart.forward(q, p)
        q2, p2 = chart.inverse(phi, I)
        assert abs(q2 - q) <= 1e-6 and abs(p2 - p) <= 1e-6


def test_action_angle_dynamics_are_linear():
    sys = SystemDef(QUARTIC)
    chart = ActionAngleChart(sys)
    tr = hamilton_flow(sys, ClassicalState(0.0, (0.9,), (0.4,)), 6.0, 1e-3)
    sample = range(0, len(tr), 500)
    pairs = [chart.forward(tr.q[i][0], tr.p[i][0]) for i in sample]
    t = np.array([tr.t[i] for i in sample])
    phi = np.unwrap([a for a, _ in pairs])
    I = np.array([b for _, b in pairs])
    assert np.max(np.abs(I - I[0])) <= 1e-6
    omega = 2 * math.pi / chart.period(sys.energy(0.0, (0.9,), (0.4,)))
    assert np.max(np.abs(phi - phi[0] - omega * t)) <= 1e-5


# ---------------------------------------------------------------- fits and correspondence

def test_fit_picks_smallest_degree():
    I = np.linspace(0.1, 3.0, 9)
    spec, info = fit_hamiltonian(I, 1 + 2 * I + 3 * I**2)
    assert info["degree"] == 2
    assert np.allclose(info["coefficients"], [1, 2, 3], atol=1e-10)
    assert spec.m == 1


def test_fit_failures():
    with pytest.raises(FitFailure):
        fit_hamiltonian([], [])
    with pytest.raises(FitFailure):
        fit_hamiltonian([1.0], [2.0])


@pytest.mark.parametrize("H,energies,slope", [
    (OSC, np.linspace(0.2, 8.0, 9), None),
    ("((p1^2 + q1^2)/2)^2", np.linspace(0.04, 64.0, 12), 2.0),
])
def test_frequency_correspondence(H, energies, slope):
    out = frequency_correspondence(SystemDef(H), Representation((0.0,)), TruncationWindow(1, 8), energies)
    assert out["comparisons"]
    assert out["max_discrepancy"] <= 1e-9
    if slope is None:
        assert all(abs(r["quantum_spacing"] - 1.0) <= 1e-9 for r in out["comparisons"])
    else:
        assert all(abs(r["classical_frequency"] - slope * r["action"]) <= 1e-8 for r in out["comparisons"])


def test_correspondence_needs_energies():
    with pytest.raises(FitFailure):
        frequency_correspondence(SystemDef(OSC), Representation((0.0,)), TruncationWindow(1, 4), [])


# ---------------------------------------------------------------- canonical shifts

def test_zero_shift_is_identity():
    out = canonical_shift([0.3], [1.0, 2.0], [0.5], [0.1, 0.2], ["0"])
    assert [list(v) for v in out] == [[0.3], [1.0, 2.0], [0.5], [0.1, 0.2]]


def test_rotating_frame():
    t = 0.8
    x, phi, Ia, Ik = canonical_shift([t], [0.4], [2.0], [1.5], ["I1"])
    assert x[0] == t and abs(phi[0] - (0.4 + t)) <= 1e-15
    assert abs(Ia[0] - 0.5) <= 1e-15 and Ik[0] == 1.5


def test_exact_and_fd_jacobians_agree():
    cs = CanonicalShift(["I1^2*I2 + sin(I2)", "I1*I2"], 2)
    z = np.random.default_rng(1).uniform(-1, 1, cs.size)
    assert np.max(np.abs(cs.jacobian(z) - cs.jacobian(z, h=1e-6))) <= 1e-8


@settings(max_examples=20)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_shift_is_symplectic(c, seed):
    F = [f"{c[0]!r}*I1^2 + {c[1]!r}*I1*I2 + {c[2]!r}*cos(I2)"]
    cs = CanonicalShift(F, 2)
    z = np.random.default_rng(seed).uniform(-2, 2, cs.size)
    assert cs.symplectic_error(z) <= 1e-12
    assert cs.symplectic_error(z, h=1e-6) <= 1e-8
