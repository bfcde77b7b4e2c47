import json
import math

import numpy as np
import pytest

import oracles
from ionrot.ansatz import RotationAnsatz
from ionrot.chain import BE9, CA40, IonPair, RigidHarmonicTrap
from ionrot.quantum import (ConvergenceError, Grid2D, RigidHarmonic, SimConfig, TiltedDoubleWell,
                            Wavefunction2D, _gradient, _hessian, classical_excess, dump_snapshot,
                            gaussian_excess,
                            excess_energy, ground_state, make_grid, potential_at, propagate)
from ionrot.sta import ResolutionError
from ionrot.units import CC, HBAR

W0 = 2 * math.pi * 1.41
CA = IonPair(CA40, CA40)
CABE = IonPair(CA40, BE9)
K = CA40 * W0**2
SMALL = SimConfig(n1=64, n2=64, half_width=10.0, samples=11)


@pytest.fixture(scope="module")
def ca_ground():
    model = RigidHarmonic(K, CA)
    psi, e = ground_state(model, sim=SMALL)
    return model, psi, e


def test_potential_matches_oracle():
    m = RigidHarmonic(K, CABE)
    assert potential_at(m, -2.0, 2.5) == pytest.approx(oracles.potential(K, K, CC, -2.0, 2.5), rel=1e-15)
    dw = TiltedDoubleWell(-100.0, 0.3, CABE, gamma=lambda t: 5.0)
    assert potential_at(dw, -2.0, 2.5) == pytest.approx(
        oracles.potential(-100.0, -100.0, CC, -2.0, 2.5, gamma=5.0, beta=0.3), rel=1e-14)


def test_clamp():
    m = RigidHarmonic(K, CA)
    assert potential_at(m, 0.0, 0.001, eps=0.1) == pytest.approx(CC / 0.1 + 0.5 * K * 1e-6)


@pytest.mark.parametrize("model", [RigidHarmonic(K, CABE, theta_dot=lambda t: 2.0),
                                   TiltedDoubleWell(-100.0, 0.3, CABE, gamma=lambda t: 5.0,
                                                    theta_dot=lambda t: 1.0)])
def test_derivatives_against_finite_differences(model):
    s = np.array([-3.0, 4.0])
    f = lambda x: potential_at(model, x[0], x[1])
    h = 1e-5
    g = [(f(s + h * e) - f(s - h * e)) / (2 * h) for e in np.eye(2)]
    assert _gradient(model, s, 0.0) == pytest.approx(g, rel=1e-7, abs=1e-6)
    assert np.allclose(_hessian(model, s, 0.0), oracles.fd_hessian(f, s, 1e-3), rtol=1e-6)


def test_grid_validation():
    with pytest.raises(ValueError, match="powers of two"):
        Grid2D(100, 64, -1, 1, -1, 1)
    with pytest.raises(ValueError):
        Grid2D(64, 64, 1, -1, -1, 1)
    g = Grid2D(8, 16, -1.0, 1.0, -2.0, 2.0)
    assert g.ds1 == 0.25 and g.ds2 == 0.25
    k1, _ = g.wavenumbers()
    assert k1[1] == pytest.approx(2 * math.pi / 2.0)


def test_grid_scales_with_ground_state_width():
    g = make_grid(RigidHarmonic(K, CABE), SimConfig(n1=64, n2=64, half_width=8.0))
    w_ca = 8.0 * math.sqrt(HBAR / (2 * CA40 * W0))
    w_be = 8.0 * math.sqrt(HBAR / (2 * BE9 * math.sqrt(K / BE9)))
    assert g.s1_max == pytest.approx(w_ca) and g.s2_max == pytest.approx(w_be)


def test_ground_energy_equal_ions(ca_ground):
    _, psi, e = ca_ground
    est = oracles.equal_ion_ground_energy(CA40, W0, CC, HBAR)
    assert abs(e - est) < 1e-3 * HBAR * W0
    assert psi.norm == pytest.approx(1.0, abs=1e-12)


def test_ground_state_mixed_species_centred():
    model = RigidHarmonic(K, CABE)
    psi, e = ground_state(model, sim=SMALL)
    y1, y2 = psi.grid.axes
    rho = np.abs(psi.amplitudes) ** 2 * psi.grid.cell
    # anharmonic shift of the mean is far below the grid spacing
    assert abs((rho.sum(axis=1) * y1).sum()) < 1e-2 * psi.grid.ds1
    assert abs((rho.sum(axis=0) * y2).sum()) < 1e-2 * psi.grid.ds2
    # harmonic estimate from the mass-weighted Hessian
    x0 = model.equilibrium()
    v = _hessian(model, x0, 0.0) / np.sqrt(np.outer(CABE.masses, CABE.masses))
    est = potential_at(model, *x0) + 0.5 * HBAR * np.sqrt(np.linalg.eigvalsh(v)).sum()
    assert abs(e - est) < 1e-3 * HBAR * W0


def test_ground_state_convergence_error():
    sim = SimConfig(n1=64, n2=64, half_width=10.0, gs_max_steps=5)
    with pytest.raises(ConvergenceError) as err:
        ground_state(RigidHarmonic(K, CA), sim=sim)
    assert len(err.value.energies) > 0


def test_static_evolution(ca_ground):
    model, psi, _ = ca_ground
    traj = propagate(model, psi, RotationAnsatz(0.0, 1.0), SMALL)
    assert np.abs(traj.norm - 1).max() < 1e-10
    assert np.ptp(traj.energy) < 1e-9 * abs(traj.energy[0])
    assert np.ptp(traj.energy) < 1e-6 * HBAR * W0
    assert abs(excess_energy(traj)) < 1e-6 * HBAR * W0
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(1.0)


def test_rotation_excites_and_tracks_classical(ca_ground):
    model, psi, _ = ca_ground
    protocol = RotationAnsatz(math.pi, 1.5)
    traj = propagate(model, psi, protocol, SMALL)
    ex = excess_energy(traj) / (HBAR * W0)
    cl = classical_excess(model, protocol) / (HBAR * W0)
    assert ex > 0.05
    # the c = 0 protocol mostly excites the classical stretch motion
    assert ex == pytest.approx(cl, rel=0.1)


def test_gaussian_excess_tracks_simulation(ca_ground):
    model, psi, _ = ca_ground
    protocol = RotationAnsatz(math.pi, 1.5, 0.01)
    exact = excess_energy(propagate(model, psi, protocol, SMALL))
    lin = gaussian_excess(model, protocol)
    assert lin == pytest.approx(exact, rel=1e-2)
    assert lin > classical_excess(model, protocol)
    assert abs(gaussian_excess(model, RotationAnsatz(0.0, 1.0))) < 1e-9 * HBAR * W0


def test_classical_excess_against_oracle():
    protocol = RotationAnsatz(math.pi, 2.0)
    got = classical_excess(RigidHarmonic(K, CA), protocol)
    ref = oracles.classical_final_energy(CA40, CA40, K, CC, protocol.theta_dot, 2.0)
    assert got == pytest.approx(ref, rel=1e-6)


def test_leak_detection(ca_ground):
    model, psi, _ = ca_ground
    strict = SimConfig(n1=64, n2=64, half_width=10.0, leak_tol=1e-300)
    with pytest.raises(ResolutionError, match="edge"):
        propagate(model, psi, RotationAnsatz(0.0, 0.1), strict)


def test_origin_mismatch(ca_ground):
    model, psi, _ = ca_ground
    moved = Wavefunction2D(psi.amplitudes, psi.grid, psi.origin + 0.1, psi.momentum)
    with pytest.raises(ValueError):
        propagate(model, moved, RotationAnsatz(0.0, 0.1), SMALL)


def test_snapshot_format(ca_ground, tmp_path):
    _, psi, _ = ca_ground
    path, side = dump_snapshot(psi, tmp_path / "psi.bin")
    raw = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(64, 64, 2)
    amp = raw[..., 0] + 1j * raw[..., 1]
    meta = json.loads(side.read_text())
    assert meta["n1"] == 64 and meta["order"] == "s1-major"
    assert np.sum(np.abs(amp) ** 2) * meta["ds1_um"] * meta["ds2_um"] == pytest.approx(1.0, abs=1e-12)
    assert meta["s1_first_um"] == pytest.approx(psi.lab_axes()[0][0])
    # density peaks at the lab-frame equilibrium of the first ion
    i, j = np.unravel_index(np.argmax(np.abs(amp)), amp.shape)
    s1 = meta["s1_first_um"] + i * meta["ds1_um"]
    assert abs(s1 - psi.origin[0]) <= meta["ds1_um"]
