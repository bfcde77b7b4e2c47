import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from ionrot.ansatz import RotationAnsatz
from ionrot.chain import BE9, CA40, IonPair
from ionrot.ode import TabulatedDrive, integrate_mode
from ionrot.sta import (DesignResult, IntegrationError, ModeDrive, ModeState, RegimeError, ResolutionError,
                        auxiliary_series, build_elementary_solution, design_equal_ions, equal_ion_drives,
                        equal_ion_excess, invariant_value, lewis_riesenfeld_phase, mode_energy, mode_excess,
                        solve_auxiliary)
from ionrot.units import HBAR

W0 = 2 * math.pi * 1.41
CA = IonPair(CA40, CA40)


def const(value):
    return lambda t: np.full_like(np.asarray(t, float), value)


def test_constant_drive_stays_stationary():
    t = np.linspace(0.0, 10.0, 101)
    st_ = solve_auxiliary(ModeDrive(const(W0**2), const(0.0), W0**2), 10.0, t_eval=t)
    assert np.abs(st_.b - 1).max() < 1e-9
    assert np.abs(st_.alpha).max() < 1e-12


@pytest.mark.parametrize("w1", [0.5 * W0, 1.7 * W0])
def test_frequency_step_closed_form(w1):
    t = np.linspace(0.0, 10.0, 201)
    st_ = solve_auxiliary(ModeDrive(const(w1**2), const(0.0), W0**2), 10.0, t_eval=t)
    assert np.abs(st_.b - oracles.ermakov_step_b(t, W0, w1)).max() < 1e-8


def test_forced_oscillator_matches_duhamel():
    w = 7.0
    force = lambda s: 3.0 * math.sin(2.0 * s) * s
    drive = ModeDrive(const(w * w), lambda t: 3.0 * np.sin(2.0 * np.asarray(t)) * t, w * w)
    t = np.array([0.0, 0.8, 1.9, 3.0])
    st_ = solve_auxiliary(drive, 3.0, t_eval=t, n_table=20001)
    for i, ti in enumerate(t[1:], 1):
        a, ad = oracles.forced_oscillator(ti, w, force)
        assert st_.alpha[i] == pytest.approx(a, abs=1e-9)
        assert st_.alpha_dot[i] == pytest.approx(ad, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.5, 3.0), st.lists(st.floats(-0.01, 0.01), min_size=4, max_size=4))
def test_equal_ion_drives_against_scipy(t_f, c):
    a = RotationAnsatz(math.pi, t_f, *c)
    for drive in equal_ion_drives(a, CA40, W0):
        ref = oracles.auxiliary_by_solve_ivp(lambda t: float(drive.omega_sq(t)), lambda t: float(drive.p0_dot(t)),
                                             drive.omega0_sq, t_f)
        got = solve_auxiliary(drive, t_f).final
        assert [got.b, got.b_dot, got.alpha, got.alpha_dot] == pytest.approx(ref, abs=2e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.5, 3.0), st.lists(st.floats(-0.01, 0.01), min_size=4, max_size=4))
def test_reversibility(t_f, c):
    a = RotationAnsatz(math.pi, t_f, *c)
    plus, _ = equal_ion_drives(a, CA40, W0)
    fwd = solve_auxiliary(plus, t_f).final
    y_end = (fwd.b, fwd.b_dot, fwd.alpha, fwd.alpha_dot)
    back = solve_auxiliary(plus, t_f, t_eval=[t_f, 0.0], y0=y_end).final
    assert [back.b, back.b_dot, back.alpha, back.alpha_dot] == pytest.approx([1, 0, 0, 0], abs=1e-8)


@settings(max_examples=10, deadline=None)
@given(st.floats(1.5, 3.0), st.lists(st.floats(-0.01, 0.01), min_size=4, max_size=4))
def test_objective_blind_to_rotation_sense(t_f, c):
    # only theta_dot^2 enters, so reversing the rotation leaves the excitation unchanged
    e1 = equal_ion_excess(RotationAnsatz(math.pi, t_f, *c), CA40, W0)
    e2 = equal_ion_excess(RotationAnsatz(-math.pi, t_f, *[-x for x in c]), CA40, W0)
    assert e1 == pytest.approx(e2, rel=1e-12, abs=1e-20)


def test_adiabatic_limit():
    fast = sum(equal_ion_excess(RotationAnsatz(math.pi, 1.0), CA40, W0)) / (HBAR * W0)
    slow = sum(equal_ion_excess(RotationAnsatz(math.pi, 30.0), CA40, W0)) / (HBAR * W0)
    assert fast > 0.01
    assert slow < 1e-6


def test_ground_state_energy_closed_form():
    for n in range(4):
        e = mode_energy(n, ModeState(1.0, 0.0, 0.0, 0.0), W0**2, 0.0, W0**2)
        assert e == pytest.approx((n + 0.5) * HBAR * W0, rel=1e-15)
        assert mode_excess(ModeState(1.0, 0.0, 0.0, 0.0), W0**2, 0.0, W0**2, n=n) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(-3.0, 3.0), st.floats(-1.0, 1.0), st.floats(-5.0, 5.0),
       st.floats(-20.0, 20.0), st.integers(0, 3))
def test_excess_consistent_and_non_negative(b, bd, a, ad, f, n):
    s = ModeState(b, bd, a, ad)
    w = W0**2
    ex = mode_excess(s, w, f, w, n=n)
    assert ex >= 0.0
    full = mode_energy(n, s, w, f, w) - (n + 0.5) * HBAR * W0
    assert ex == pytest.approx(full, rel=1e-9, abs=1e-12 * mode_energy(n, s, w, f, w))


def test_excess_small_frequency_guard():
    # W -> 0 with a vanishing force stays finite
    s = ModeState(1.0, 0.0, 0.3, 0.1)
    assert math.isfinite(float(mode_excess(s, 0.0, 0.0, W0**2)))


def test_static_phase():
    t = np.linspace(0.0, 2.0, 401)
    drive = ModeDrive(const(W0**2), const(0.0), W0**2)
    traj = solve_auxiliary(drive, 2.0, t_eval=t)
    for n in (0, 2):
        phase = lewis_riesenfeld_phase(n, traj, drive)
        assert np.allclose(phase, -(n + 0.5) * W0 * t, rtol=1e-9, atol=1e-12)


def _h_apply(psi, s, w, f):
    k = 2 * np.pi * np.fft.fftfreq(s.size, s[1] - s[0])
    kin = np.fft.ifft(0.5 * (HBAR * k) ** 2 * np.fft.fft(psi))
    return kin + 0.5 * w * (s - f / w) ** 2 * psi


@pytest.mark.parametrize("n", [0, 1])
def test_elementary_solution_solves_schroedinger(n):
    a = RotationAnsatz(math.pi, 1.5, 0.01)
    plus, _ = equal_ion_drives(a, CA40, W0)
    t = np.linspace(0.0, 1.5, 30001)
    traj = solve_auxiliary(plus, 1.5, t_eval=t, rtol=1e-12, atol=1e-14)
    phase = lewis_riesenfeld_phase(n, traj, plus)
    s = np.linspace(-2.0, 2.0, 2048, endpoint=False)
    i = 14000
    psi = lambda j: build_elementary_solution(n, traj[j], plus.omega0_sq, s, phase[j])
    dt = t[1] - t[0]
    lhs = 1j * HBAR * (-psi(i + 2) + 8 * psi(i + 1) - 8 * psi(i - 1) + psi(i - 2)) / (12 * dt)
    rhs = _h_apply(psi(i), s, float(plus.omega_sq(t[i])), float(plus.p0_dot(t[i])))
    assert np.linalg.norm(lhs - rhs) < 1e-8 * np.linalg.norm(rhs)


def test_elementary_solution_resolution():
    s = np.linspace(-0.01, 0.01, 64)
    with pytest.raises(ResolutionError):
        build_elementary_solution(0, ModeState(1.0, 0.0, 0.0, 0.0), W0**2, s)


def test_invariant_conserved_along_classical_motion():
    from scipy.integrate import solve_ivp

    a = RotationAnsatz(math.pi, 1.5, 0.02, -0.01)
    plus, _ = equal_ion_drives(a, CA40, W0)
    t = np.linspace(0.0, 1.5, 61)
    traj = solve_auxiliary(plus, 1.5, t_eval=t, rtol=1e-12, atol=1e-14)
    sol = solve_ivp(lambda tt, y: [y[1], -float(plus.omega_sq(tt)) * y[0] + float(plus.p0_dot(tt))],
                    (0.0, 1.5), [0.05, -0.2], t_eval=t, method="DOP853", rtol=1e-12, atol=1e-14)
    inv = invariant_value(traj, sol.y[0], sol.y[1], plus.omega0_sq)
    assert np.ptp(inv) < 1e-8 * inv[0]


def test_non_finite_drive_reports_time():
    bad = ModeDrive(const(W0**2), lambda t: np.where(np.asarray(t) > 0.5, np.nan, 0.0), W0**2)
    with pytest.raises(IntegrationError) as err:
        solve_auxiliary(bad, 1.0)
    assert 0.5 <= err.value.time <= 0.51


def test_step_limit_status():
    tab = TabulatedDrive(const(W0**2), const(0.0), 0.0, 10.0, 101)
    _, status, t_stop, steps = integrate_mode(np.array([1.0, 0, 0, 0]), np.array([0.0, 10.0]), tab, W0**2,
                                              1e-10, 1e-12, 5)
    assert status == 2 and steps == 5 and 0 < t_stop < 10


def test_regime_error():
    a = RotationAnsatz(math.pi, 0.3)
    assert a.max_speed() > W0
    with pytest.raises(RegimeError):
        equal_ion_excess(a, CA40, W0)


def test_design_trivial_rotation():
    res = design_equal_ions(CA, W0, 1.0, 0.0, 2, max_iter=50)
    assert res.objective == 0.0
    assert isinstance(res, DesignResult)


def test_design_n_free_zero_is_evaluation():
    res = design_equal_ions(CA, W0, 2.0, math.pi, 0)
    assert list(res.coefficients) == [0, 0, 0, 0]
    ex = equal_ion_excess(RotationAnsatz(math.pi, 2.0), CA40, W0)
    assert res.objective == pytest.approx(sum(ex), rel=1e-14)


def test_design_improves_and_trace_monotone():
    base = design_equal_ions(CA, W0, 2.0, math.pi, 0).objective_quanta
    res = design_equal_ions(CA, W0, 2.0, math.pi, 2, max_iter=400)
    assert res.objective_quanta < 0.1 * base
    assert np.all(np.diff(res.trace) <= 0)
    assert res.trace[-1] <= res.objective_quanta + 1e-12
    assert res.objective_quanta >= 0.0
    assert res.ansatz().coefficients.tolist() == res.coefficients.tolist()
    assert res.energy_unit == pytest.approx(HBAR * W0)


def test_design_rejects_bad_inputs():
    with pytest.raises(ValueError):
        design_equal_ions(IonPair(CA40, BE9), W0, 2.0, math.pi, 1)
    with pytest.raises(ValueError):
        design_equal_ions(CA, W0, 2.0, math.pi, 5)


def test_auxiliary_series_columns():
    cols = auxiliary_series(RotationAnsatz(math.pi, 2.0, 0.01), CA40, W0, 51)
    lengths = {len(v) for v in cols.values()}
    assert lengths == {51}
    assert cols["b_plus"][0] == 1.0 and cols["theta"][-1] == pytest.approx(math.pi, abs=1e-12)
