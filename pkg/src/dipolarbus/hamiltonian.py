"""Driven power-law spin-chain Hamiltonian with qubit-sector boundary potentials.

Internal units: hbar = 1, lengths in units of the lattice spacing a, energies
and angular frequencies in units of a reference Rabi frequency.  The chain
Hamiltonian at one ramp instant is

    H = -(Delta/2) sum_i sigma_i^z + (Omega/2) sum_i sigma_i^x
        + sum_{i<j} C_p / |r_i - r_j|^p  P_i P_j
        + sum_i v_i P_i

with P_i the up-state projector and v_i the diagonal potential exerted by
whichever boundary qubits are excited in the given sector.  |up> carries
sigma^z = +1, so at large negative detuning the fully polarized down state
is the ground state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import BasisSet
from .geometry import ChainGeometry


@dataclass(frozen=True)
class DriveParams:
    """Ramp amplitudes: Rabi scale omega0, detuning scale delta0, ramp
    duration t0, interaction coefficient c_p and power-law exponent p."""

    omega0: float
    delta0: float
    t0: float
    c_p: float
    p: int

    def __post_init__(self):
        if self.omega0 <= 0 or self.delta0 <= 0 or self.t0 <= 0 or self.c_p <= 0:
            raise ValueError("omega0, delta0, t0, c_p must all be positive")
        if self.p not in (3, 6):
            raise ValueError("p must be 3 (dipolar) or 6 (van der Waals)")


@dataclass(frozen=True)
class QubitSector:
    """Joint z-basis state of the boundary qubits; conserved by the dynamics."""

    alpha: str  # qubit A: "up" | "down"
    beta: str   # qubit B: "up" | "down"

    def __post_init__(self):
        if self.alpha not in ("up", "down") or self.beta not in ("up", "down"):
            raise ValueError("sector states must be 'up' or 'down'")

    @property
    def alpha_up(self) -> bool:
        return self.alpha == "up"

    @property
    def beta_up(self) -> bool:
        return self.beta == "up"

    @property
    def index(self) -> int:
        """Position in the canonical order (dd, du, ud, uu)."""
        return 2 * self.alpha_up + self.beta_up

    @property
    def label(self) -> str:
        return ("u" if self.alpha_up else "d") + ("u" if self.beta_up else "d")


SECTOR_DD = QubitSector("down", "down")
SECTOR_DU = QubitSector("down", "up")
SECTOR_UD = QubitSector("up", "down")
SECTOR_UU = QubitSector("up", "up")
ALL_SECTORS = (SECTOR_DD, SECTOR_DU, SECTOR_UD, SECTOR_UU)


def ramp_omega(t, params: DriveParams):
    """Nonlinear Rabi ramp Omega(t) = Omega_0 sin^2( (8t/t0) / (1+16(t/t0)^2) )."""
    x = np.asarray(t, dtype=float) / params.t0
    val = params.omega0 * np.sin(8.0 * x / (1.0 + 16.0 * x**2)) ** 2
    return float(val) if np.isscalar(t) else val


def ramp_delta(t, params: DriveParams):
    """Detuning ramp Delta(t) = Delta_0 [1 - 5 exp(-4t/t0)]."""
    x = np.asarray(t, dtype=float) / params.t0
    val = params.delta0 * (1.0 - 5.0 * np.exp(-4.0 * x))
    return float(val) if np.isscalar(t) else val


def boundary_potential(
    geometry: ChainGeometry, sector: QubitSector, params: DriveParams
) -> np.ndarray:
    """Per-site diagonal energy from the excited boundary qubits,
    v_i = [A up] C_p/|r_A - r_i|^p + [B up] C_p/|r_B - r_i|^p."""
    da, db = geometry.qubit_distances()
    v = np.zeros(geometry.n_sites)
    if sector.alpha_up:
        v += params.c_p / da**params.p
    if sector.beta_up:
        v += params.c_p / db**params.p
    return v


@dataclass(frozen=True)
class SparseHamiltonian:
    """One qubit sector at one ramp instant: a real diagonal plus a
    single-spin-flip pattern with shared amplitude sign*Omega/2."""

    diag: np.ndarray
    flip_pattern: sp.csr_matrix
    amplitude: float
    basis: BasisSet

    @property
    def dim(self) -> int:
        return self.diag.size

    def matvec(self, vec: np.ndarray) -> np.ndarray:
        if self.amplitude == 0.0:
            return self.diag * vec
        out = self.flip_pattern @ vec
        out *= self.amplitude
        out += self.diag * vec
        return out

    def to_csr(self) -> sp.csr_matrix:
        h = sp.diags(self.diag, format="csr")
        if self.amplitude != 0.0:
            h = h + self.amplitude * self.flip_pattern
        return h.tocsr()

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def norm_bound(self) -> float:
        """Cheap upper bound on ||H|| for residual scaling."""
        return float(np.max(np.abs(self.diag)) + abs(self.amplitude) * self.basis.n_sites)


class HamiltonianTerms:
    """Drive-independent pieces of the sector Hamiltonians, precomputed once
    per (basis, c_p, p): popcounts, pair-interaction diagonal, boundary
    projections onto qubit A/B potentials, and the spin-flip pattern."""

    def __init__(self, basis: BasisSet, params: DriveParams):
        geo = basis.geometry
        bits = basis.bit_table().astype(float)
        self.basis = basis
        self.n_sites = geo.n_sites
        self.popcounts = basis.popcounts().astype(float)

        dist = geo.pair_distances()
        with np.errstate(divide="ignore"):
            w = params.c_p / dist**params.p
        np.fill_diagonal(w, 0.0)
        self.pair_energy = 0.5 * np.einsum("ci,ij,cj->c", bits, w, bits)

        da, db = geo.qubit_distances()
        self.pot_a = bits @ (params.c_p / da**params.p)
        self.pot_b = bits @ (params.c_p / db**params.p)
        self.flip_pattern = _flip_pattern(basis)

    def assemble(
        self, sector: QubitSector, omega: float, delta: float, sign: int = 1
    ) -> SparseHamiltonian:
        diag = -(delta / 2.0) * (2.0 * self.popcounts - self.n_sites) + self.pair_energy
        if sector.alpha_up:
            diag = diag + self.pot_a
        if sector.beta_up:
            diag = diag + self.pot_b
        return SparseHamiltonian(
            diag=sign * diag,
            flip_pattern=self.flip_pattern,
            amplitude=sign * omega / 2.0,
            basis=self.basis,
        )

    def assemble_stacked(
        self, sectors: tuple, omega: float, delta: float, sign: int = 1
    ) -> SparseHamiltonian:
        """Block-diagonal Hamiltonian over several sectors; the sectors only
        differ on the diagonal, so one Krylov propagation serves them all."""
        key = ("stacked_pattern", len(sectors))
        if key not in self.basis._cache:
            self.basis._cache[key] = sp.block_diag(
                [self.flip_pattern] * len(sectors), format="csr"
            )
        diag = np.concatenate(
            [self.assemble(s, omega, delta, sign).diag for s in sectors]
        )
        return SparseHamiltonian(
            diag=diag,
            flip_pattern=self.basis._cache[key],
            amplitude=sign * omega / 2.0,
            basis=self.basis,
        )


def _flip_pattern(basis: BasisSet) -> sp.csr_matrix:
    """Symmetric 0/1 pattern connecting configs that differ in one bit.
    Flips leaving a truncated basis are dropped (projected truncation)."""
    key = "flip_pattern"
    if key in basis._cache:
        return basis._cache[key]
    cfg = basis.configs
    dim = cfg.size
    rows, cols = [], []
    idx = np.arange(dim)
    for site in range(basis.n_sites):
        flipped = cfg ^ np.uint64(1 << site)
        pos = np.searchsorted(cfg, flipped)
        pos_clipped = np.minimum(pos, dim - 1)
        hit = (cfg[pos_clipped] == flipped) & (flipped > cfg)
        rows.append(idx[hit])
        cols.append(pos_clipped[hit])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    data = np.ones(r.size)
    upper = sp.coo_matrix((data, (r, c)), shape=(dim, dim))
    pattern = (upper + upper.T).tocsr()
    basis._cache[key] = pattern
    return pattern


def precompute_terms(basis: BasisSet, params: DriveParams) -> HamiltonianTerms:
    """Cached HamiltonianTerms for this basis and interaction (c_p, p)."""
    key = ("terms", params.c_p, params.p)
    if key not in basis._cache:
        basis._cache[key] = HamiltonianTerms(basis, params)
    return basis._cache[key]


def assemble(
    basis: BasisSet,
    geometry: ChainGeometry,
    sector: QubitSector,
    omega: float,
    delta: float,
    params: DriveParams,
    sign: int = 1,
) -> SparseHamiltonian:
    """Sector Hamiltonian at explicit (omega, delta); sign=-1 negates H."""
    if basis.geometry is not geometry:
        raise ValueError("basis was built on a different geometry")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return precompute_terms(basis, params).assemble(sector, omega, delta, sign)
