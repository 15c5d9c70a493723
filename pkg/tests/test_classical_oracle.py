import itertools

import numpy as np
import pytest

import dipolarbus as db
from dipolarbus.classical_oracle import (
    continuum_interaction_energy,
    continuum_relax,
    crystal_spacing,
    lattice_ground_state,
    optimal_excitation_count,
    scaling_rows,
)
from dipolarbus.geometry import make_disordered, make_equidistant
from dipolarbus.hamiltonian import (
    SECTOR_DD,
    SECTOR_UD,
    SECTOR_UU,
    assemble,
)
from dipolarbus.basis import build_basis


def test_crystal_spacing_reference_value():
    # zeta(3)*(3+1)*100/2.3, cube root: direct evaluation
    zeta3 = 1.2020569031595943
    expected = (zeta3 * 4 * 100.0 / 2.3) ** (1.0 / 3.0)
    assert crystal_spacing(3, 100.0, 2.3) == pytest.approx(expected, rel=1e-12)
    assert crystal_spacing(3, 100.0, 2.3) == pytest.approx(5.935, abs=2e-3)


def test_crystal_spacing_scalings():
    a = crystal_spacing(3, 10.0, 1.0)
    assert crystal_spacing(3, 80.0, 1.0) == pytest.approx(2 * a, rel=1e-12)
    assert crystal_spacing(3, 10.0, 1e9) < 1e-2
    with pytest.raises(ValueError):
        crystal_spacing(3, 10.0, 0.0)
    # p = 6 uses zeta(6)
    zeta6 = 1.0173430619844492
    assert crystal_spacing(6, 50.0, 2.0) == pytest.approx(
        (zeta6 * 7 * 50.0 / 2.0) ** (1 / 6), rel=1e-12
    )


def test_lattice_vacuum_at_negative_detuning():
    geo = make_equidistant(8, 3.0)
    gs = lattice_ground_state(geo, SECTOR_DD, 100.0, 3, delta=-2.0)
    assert gs.config == 0
    assert gs.n_excitations == 0
    # energy of the fully polarized state: -(delta/2) * (-N)
    assert gs.energy == pytest.approx((-2.0 / 2) * 8)


def test_lattice_two_site_bookkeeping():
    # two sites 1 apart: both excite iff delta > C_3
    geo = make_equidistant(2, 1e9)
    gs_weak = lattice_ground_state(geo, SECTOR_DD, c_p=3.0, p=3, delta=4.0)
    assert gs_weak.n_excitations == 2
    gs_strong = lattice_ground_state(geo, SECTOR_DD, c_p=5.0, p=3, delta=4.0)
    assert gs_strong.n_excitations == 1


def test_lattice_matches_hamiltonian_diagonal(fig2_params):
    # cross-module equivalence: enumeration minimum == diagonal minimum
    from dipolarbus.hamiltonian import ramp_delta

    delta = ramp_delta(fig2_params.t0, fig2_params)
    for seed in (None, 3, 7):
        if seed is None:
            geo = make_equidistant(12, 3.0)
        else:
            geo = make_disordered(12, 3.0, seed=seed)
        basis = build_basis(geo)
        for sector in (SECTOR_DD, SECTOR_UD, SECTOR_UU):
            gs = lattice_ground_state(geo, sector, 100.0, 3, delta)
            h = assemble(basis, geo, sector, 0.0, delta, fig2_params)
            assert gs.energy == pytest.approx(float(np.min(h.diag)), abs=1e-10)
            assert gs.config == int(basis.configs[int(np.argmin(h.diag))])


def test_lattice_budget_guard():
    geo = make_equidistant(12, 3.0)
    with pytest.raises(RuntimeError):
        lattice_ground_state(geo, SECTOR_DD, 100.0, 3, 2.0, budget=100)


def test_continuum_two_excitations_at_endpoints():
    gs = continuum_relax(2, 10.0, SECTOR_DD, d=1.0, c_p=50.0, p=3)
    np.testing.assert_allclose(gs.excitation_positions, [0.0, 10.0], atol=1e-8)


def test_continuum_single_excitation_centered():
    gs = continuum_relax(1, 10.0, SECTOR_UU, d=1.0, c_p=50.0, p=3)
    assert gs.excitation_positions[0] == pytest.approx(5.0, abs=1e-8)


def test_continuum_relax_is_stationary():
    # interior excitations sit at zero-gradient points of the energy
    from dipolarbus.classical_oracle import _coordinate_derivatives

    gs = continuum_relax(4, 18.0, SECTOR_UD, d=1.5, c_p=80.0, p=3)
    x = gs.excitation_positions
    for i in range(1, 3):
        g, _ = _coordinate_derivatives(x.copy(), i, x[i], 18.0, SECTOR_UD, 1.5, 80.0, 3)
        assert abs(g) < 1e-8


def test_optimal_count_tracks_crystal_spacing():
    # acceptance-5 mechanism: relaxed spacing within 10% of a_R over a grid
    # of interaction-to-detuning ratios, p in {3, 6}
    for p, c_p, delta in (
        (3, 100.0, 2.0),
        (3, 40.0, 1.0),
        (6, 200.0, 1.5),
        (6, 800.0, 0.8),
    ):
        a_r = crystal_spacing(p, c_p, delta)
        span = 8.0 * a_r
        n, _, gs = optimal_excitation_count(span, 0.5 * a_r, SECTOR_DD, c_p, p, delta)
        spacing = np.mean(np.diff(gs.excitation_positions))
        assert spacing == pytest.approx(a_r, rel=0.10)


def test_interaction_scaling_d2_over_l():
    # span doubling at fixed crystal density: E_int * L / d^2 drifts by
    # less than 15% per doubling for d << a_R
    delta = 2.089
    a_r = crystal_spacing(3, 100.0, delta)
    rows = scaling_rows([4 * a_r, 8 * a_r, 16 * a_r], d=0.5, c_p=100.0, p=3, delta=delta)
    ratios = [r["e_int_times_span_over_d2"] for r in rows]
    assert all(r > 0 for r in ratios)
    for a, b in zip(ratios, ratios[1:]):
        assert abs(b - a) / abs(a) < 0.15


def test_continuum_interaction_positive_in_crystal_regime():
    delta = 2.089
    ci = continuum_interaction_energy(6.13 * 8, 1.0, 100.0, 3, delta)
    assert ci.e_int > 0


def test_disordered_lattice_spacings_follow_a_r():
    # regression: ground-state excitation spacings on disordered chains stay
    # within the disorder scale of a_R (frozen empirical bound: 35%)
    delta = 2.089
    a_r = crystal_spacing(3, 100.0, delta)
    rel_devs = []
    for seed in range(8):
        geo = make_disordered(16, 3.0, seed=seed)
        gs = lattice_ground_state(geo, SECTOR_DD, 100.0, 3, delta, n_max=5)
        sites = [i for i in range(16) if (gs.config >> i) & 1]
        pos = geo.positions[sites]
        if len(pos) >= 2:
            rel_devs.extend(abs(np.diff(pos) / a_r - 1.0))
    assert np.mean(rel_devs) < 0.35
