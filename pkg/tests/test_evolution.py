import numpy as np
import pytest
import scipy.linalg as la

import dipolarbus as db
from dipolarbus.basis import build_basis, vacuum_index
from dipolarbus.evolution import (
    PropagationError,
    ProtocolSchedule,
    expm_apply,
    hold,
    propagate_ramp,
    run_protocol,
)
from dipolarbus.geometry import make_equidistant
from dipolarbus.hamiltonian import (
    ALL_SECTORS,
    SECTOR_DD,
    SECTOR_UD,
    DriveParams,
    assemble,
)
from dipolarbus.spectral import lowest_two


@pytest.fixture(scope="module")
def small_system():
    geo = make_equidistant(6, 3.0)
    basis = build_basis(geo)
    params = DriveParams(omega0=1.0, delta0=2.3, t0=10.0, c_p=100.0, p=3)
    return geo, basis, params


# --- Krylov propagator against the dense matrix exponential oracle


def test_expm_apply_matches_dense(small_system):
    geo, basis, params = small_system
    h = assemble(basis, geo, SECTOR_UD, 0.8, 1.4, params)
    rng = np.random.default_rng(2)
    v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    v /= np.linalg.norm(v)
    dense = h.to_dense()
    for duration in (0.003, 0.2, 2.0, 25.0):
        w = expm_apply(h, v, duration, tol=1e-12)
        w_ref = la.expm(-1j * duration * dense) @ v
        assert np.linalg.norm(w - w_ref) < 5e-10
        assert abs(np.linalg.norm(w) - 1.0) < 1e-12


def test_expm_apply_zero_duration_and_zero_vector(small_system):
    geo, basis, params = small_system
    h = assemble(basis, geo, SECTOR_DD, 0.5, 0.5, params)
    v = np.zeros(basis.dim, dtype=complex)
    np.testing.assert_array_equal(expm_apply(h, v, 1.0), v)
    v[3] = 1.0
    np.testing.assert_array_equal(expm_apply(h, v, 0.0), v)


def test_expm_apply_diagonal_phase(small_system):
    geo, basis, params = small_system
    h = assemble(basis, geo, SECTOR_DD, 0.0, 1.1, params)  # diagonal
    v = np.zeros(basis.dim, dtype=complex)
    v[5] = 1.0
    w = expm_apply(h, v, 3.7, tol=1e-13)
    expected = np.exp(-1j * h.diag[5] * 3.7)
    assert w[5] == pytest.approx(expected, abs=1e-10)
    assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-13)


# --- schedule validation


def test_schedule_validation():
    with pytest.raises(ValueError):
        ProtocolSchedule(t0=0.0)
    with pytest.raises(ValueError):
        ProtocolSchedule(t0=10.0, t_pi=-1.0)
    with pytest.raises(ValueError):
        ProtocolSchedule(t0=10.0, reversal="backwards")
    with pytest.raises(ValueError):
        ProtocolSchedule(t0=10.0, dt=0.2)  # dt > t0/100
    s = ProtocolSchedule(t0=10.0)
    assert s.step == pytest.approx(10.0 / 2048)


# --- ramp legs


def test_zero_drive_vacuum_gets_phase_only(small_system):
    geo, basis, _ = small_system
    params = DriveParams(omega0=1e-300, delta0=2.3, t0=10.0, c_p=100.0, p=3)
    sched = ProtocolSchedule(t0=10.0, t_pi=0.0)
    traj = propagate_ramp(basis, geo, SECTOR_DD, params, sched, "forward")
    pops = np.abs(traj.final_state) ** 2
    assert pops[vacuum_index(basis)] == pytest.approx(1.0, abs=1e-12)
    assert abs(traj.overlap_with_initial) == pytest.approx(1.0, abs=1e-12)


def test_forward_reverse_identity(small_system):
    geo, basis, params = small_system
    sched = ProtocolSchedule(t0=10.0, t_pi=0.0)
    fwd = propagate_ramp(basis, geo, SECTOR_UD, params, sched, "forward")
    back = propagate_ramp(
        basis, geo, SECTOR_UD, params, sched, "reverse", initial_state=fwd.final_state
    )
    fid = abs(back.final_state[vacuum_index(basis)]) ** 2
    assert fid >= 1.0 - 1e-6
    assert back.norm_drift <= 1e-9


def test_dt_halving_self_convergence(small_system):
    geo, basis, params = small_system
    final = {}
    for factor in (1, 2):
        sched = ProtocolSchedule(t0=10.0, t_pi=0.0, dt=10.0 / (1024 * factor))
        traj = propagate_ramp(basis, geo, SECTOR_UD, params, sched, "forward")
        final[factor] = traj.final_state
    fid = abs(np.vdot(final[1], final[2])) ** 2
    assert abs(1.0 - fid) < 1e-6


# --- hold


def test_hold_zero_duration_is_identity(small_system):
    geo, basis, params = small_system
    rng = np.random.default_rng(3)
    state = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
    state /= np.linalg.norm(state)
    traj = hold(state, basis, geo, SECTOR_DD, params, duration=0.0)
    np.testing.assert_array_equal(traj.final_state, state)


def test_hold_eigenstate_pure_phase(small_system):
    geo, basis, params = small_system
    h = assemble(
        basis, geo, SECTOR_UD,
        db.ramp_omega(params.t0, params),
        db.ramp_delta(params.t0, params),
        params,
    )
    r = lowest_two(h, tol=1e-13)
    duration = 7.3
    traj = hold(r.psi0.astype(complex), basis, geo, SECTOR_UD, params, duration=duration)
    expected = np.exp(-1j * r.e0 * duration)
    overlap = np.vdot(r.psi0, traj.final_state)
    assert overlap == pytest.approx(expected, abs=1e-8)


def test_hold_rejects_negative_duration(small_system):
    geo, basis, params = small_system
    state = np.zeros(basis.dim, dtype=complex)
    state[0] = 1.0
    with pytest.raises(ValueError):
        hold(state, basis, geo, SECTOR_DD, params, duration=-1.0)


# --- full protocol


def test_protocol_sectors_identical_at_large_d(small_system):
    _, _, params = small_system
    geo = make_equidistant(6, 1e5)
    basis = build_basis(geo)
    sched = ProtocolSchedule(t0=10.0, t_pi=1.0)
    res = run_protocol(basis, geo, params, sched)
    states = [res.trajectories[s.label].final_state for s in ALL_SECTORS]
    for other in states[1:]:
        assert abs(np.vdot(states[0], other)) == pytest.approx(1.0, abs=1e-9)


def test_protocol_mirror_symmetry(small_system):
    geo, basis, params = small_system
    sched = ProtocolSchedule(t0=10.0, t_pi=2.0)
    res = run_protocol(basis, geo, params, sched)
    # ud and du trajectories are equal under site reflection
    ud = res.trajectories["ud"].final_state
    du = res.trajectories["du"].final_state
    n = geo.n_sites
    reflect = np.empty(basis.dim, dtype=int)
    for i, cfg in enumerate(basis.configs):
        rev = int("".join(reversed(format(int(cfg), f"0{n}b"))), 2)
        reflect[i] = basis.index_of(rev)
    assert abs(np.vdot(ud[reflect], du)) == pytest.approx(1.0, abs=1e-9)


def test_protocol_auto_hold_time(small_system):
    geo, basis, params = small_system
    sched = ProtocolSchedule(t0=10.0)  # t_pi auto
    res = run_protocol(basis, geo, params, sched)
    assert res.e_int is not None
    assert res.t_pi == pytest.approx(np.pi / abs(res.e_int))
    assert res.t_g == pytest.approx(2 * 10.0 + res.t_pi)
    for traj in res.trajectories.values():
        assert traj.norm_drift <= 1e-9


def test_protocol_no_interaction_rejected(small_system):
    _, _, params = small_system
    geo = make_equidistant(6, 1e6)  # qubits decoupled
    basis = build_basis(geo)
    sched = ProtocolSchedule(t0=10.0)
    with pytest.raises(PropagationError):
        run_protocol(basis, geo, params, sched)


def test_reversal_modes_agree(small_system):
    # sign_flip vs reversed_profile produce nearly identical gate fidelity
    geo, basis, params = small_system
    from dipolarbus.gate_analysis import gate_fidelity, qubit_density_matrix

    fids = {}
    for mode in ("sign_flip", "reversed_profile"):
        sched = ProtocolSchedule(t0=10.0, reversal=mode)
        res = run_protocol(basis, geo, params, sched)
        fids[mode] = gate_fidelity(qubit_density_matrix(res.trajectories))
    assert abs(fids["sign_flip"] - fids["reversed_profile"]) < 2e-2
