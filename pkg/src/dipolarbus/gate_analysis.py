"""Gate-level quantities from sector trajectories: the qubits' reduced
density matrix, disentanglement fidelity, conditional phase, and the
exponential fit of fidelity versus gap * ramp-time."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .basis import BasisSet
from .evolution import ProtocolResult, ProtocolSchedule, run_protocol
from .geometry import ChainGeometry
from .hamiltonian import ALL_SECTORS, DriveParams
from .spectral import GapScan, interaction_energy, min_gap_over_ramp

SECTOR_LABELS = ("dd", "du", "ud", "uu")


class SweepError(RuntimeError):
    """A sweep member failed; completed points are kept on .records."""

    def __init__(self, message: str, records: list):
        super().__init__(message)
        self.records = records


def overlap_matrix(trajectories: dict) -> np.ndarray:
    """4x4 matrix of <chi_{a'b'} | chi_{ab}> in the order (dd, du, ud, uu);
    Hermitian with unit diagonal for norm-preserved trajectories."""
    first = trajectories[SECTOR_LABELS[0]].basis
    states = []
    for label in SECTOR_LABELS:
        traj = trajectories[label]
        if traj.basis is not first:
            raise ValueError("sector trajectories were computed on different bases")
        states.append(traj.final_state)
    m = np.empty((4, 4), dtype=complex)
    for i in range(4):
        for j in range(4):
            m[i, j] = np.vdot(states[j], states[i])
    return m


def qubit_density_matrix(trajectories: dict) -> np.ndarray:
    """Reduced density matrix of the boundary qubits after the protocol,
    for the worst-case initial qubit state (|+>|+>):
    rho[(ab),(a'b')] = <chi_{a'b'}|chi_{ab}> / 4."""
    return overlap_matrix(trajectories) / 4.0


def gate_fidelity(rho: np.ndarray) -> float:
    """Disentanglement fidelity F = sqrt(tr rho^2) = sqrt(sum |rho_mn|^2)."""
    return float(np.sqrt(np.sum(np.abs(rho) ** 2)))


def conditional_phase(trajectories: dict) -> float:
    """Sector-phase combination phi = arg<uu> - arg<ud> - arg<du> + arg<dd>
    of the vacuum overlaps, reduced to (-pi, pi].

    Requires an adiabatic return: every vacuum-overlap modulus must exceed
    0.5, otherwise the phase is meaningless and an error is raised.
    """
    overlaps = {}
    for label in SECTOR_LABELS:
        o = trajectories[label].overlap_with_initial
        if abs(o) <= 0.5:
            raise ValueError(
                f"non-adiabatic run: |<vacuum|chi_{label}>| = {abs(o):.3f} <= 0.5"
            )
        overlaps[label] = o
    phi = (
        np.angle(overlaps["uu"])
        - np.angle(overlaps["ud"])
        - np.angle(overlaps["du"])
        + np.angle(overlaps["dd"])
    )
    # reduce to (-pi, pi]
    phi = -((-phi + np.pi) % (2.0 * np.pi) - np.pi)
    return float(phi)


@dataclass(frozen=True)
class GateResult:
    """One full protocol run reduced to gate-level numbers."""

    fidelity: float
    conditional_phase: float
    e_int: float
    gap: float
    t0: float
    t_pi: float
    t_g: float
    overlaps: np.ndarray


def run_gate(
    geometry: ChainGeometry,
    basis: BasisSet,
    params: DriveParams,
    schedule: ProtocolSchedule,
    grid_points: int = 64,
    gap_scan: GapScan | None = None,
) -> GateResult:
    """Protocol run plus spectral bookkeeping: minimum gap over the ramp,
    interaction energy at the hold point, fidelity and conditional phase."""
    if gap_scan is None:
        gap_scan = min_gap_over_ramp(geometry, basis, params, grid_points=grid_points)
    result = run_protocol(basis, geometry, params, schedule)
    e_int = result.e_int
    if e_int is None:
        e_int = interaction_energy(geometry, basis, params).e_int
    rho = qubit_density_matrix(result.trajectories)
    try:
        phi = conditional_phase(result.trajectories)
    except ValueError:
        phi = float("nan")
    return GateResult(
        fidelity=gate_fidelity(rho),
        conditional_phase=phi,
        e_int=float(e_int),
        gap=gap_scan.gap,
        t0=result.t0,
        t_pi=result.t_pi,
        t_g=result.t_g,
        overlaps=overlap_matrix(result.trajectories),
    )


@dataclass(frozen=True)
class LZFit:
    """Exponential fidelity model F = 1 - b exp(-c * gap * t0 / hbar)."""

    b: float
    c: float
    r_squared: float
    points: list  # (gap * t0, fidelity) pairs


def fit_lz(points: list[tuple[float, float]]) -> LZFit:
    """Damped least squares of 1-F against b*exp(-c x) on (log b, log c),
    initialized from a log-linear regression of log(1-F)."""
    x = np.asarray([p[0] for p in points], dtype=float)
    y = 1.0 - np.asarray([p[1] for p in points], dtype=float)
    if x.size < 2:
        raise ValueError("fit requires at least 2 points")

    y_floor = np.maximum(y, 1e-15)
    slope, intercept = np.polyfit(x, np.log(y_floor), 1)
    c0 = max(-slope, 1e-6)
    b0 = min(max(np.exp(intercept), 1e-12), 1.0)

    def resid(theta):
        b, c = np.exp(theta)
        return b * np.exp(-c * x) - y

    sol = least_squares(
        resid,
        x0=[np.log(b0), np.log(c0)],
        bounds=([-np.inf, -np.inf], [0.0, np.inf]),
        method="trf",
    )
    b, c = np.exp(sol.x)
    ss_res = float(np.sum(resid(sol.x) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LZFit(b=float(b), c=float(c), r_squared=r2, points=[(float(a), float(1 - f)) for a, f in zip(x, y)])


@dataclass(frozen=True)
class SweepPoint:
    omega0: float
    gap: float
    t0: float
    gap_t0_product: float
    fidelity: float
    conditional_phase: float
    e_int: float
    t_pi: float


SWEEP_CSV_COLUMNS = (
    "omega0",
    "gap",
    "t0",
    "gap_t0_product",
    "fidelity",
    "conditional_phase",
    "e_int",
    "t_pi",
)


def lz_sweep(
    geometry: ChainGeometry,
    basis: BasisSet,
    params: DriveParams,
    schedule: ProtocolSchedule,
    omega0_values: list[float],
    grid_points: int = 64,
) -> tuple[LZFit, list[SweepPoint]]:
    """Vary the Rabi amplitude at fixed geometry, interaction, detuning and
    ramp time, run the full protocol per point, and fit the fidelity to the
    exponential law in gap * t0."""
    if len(omega0_values) < 5:
        raise ValueError("fit requires >= 5 points")
    records: list[SweepPoint] = []
    for omega0 in omega0_values:
        pt_params = replace(params, omega0=float(omega0))
        try:
            res = run_gate(geometry, basis, pt_params, schedule, grid_points=grid_points)
        except Exception as exc:
            raise SweepError(f"sweep point omega0={omega0} failed: {exc}", records) from exc
        records.append(
            SweepPoint(
                omega0=float(omega0),
                gap=res.gap,
                t0=res.t0,
                gap_t0_product=res.gap * res.t0,
                fidelity=res.fidelity,
                conditional_phase=res.conditional_phase,
                e_int=res.e_int,
                t_pi=res.t_pi,
            )
        )
    fit = fit_lz([(r.gap_t0_product, r.fidelity) for r in records])
    return fit, records
