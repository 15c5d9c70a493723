"""Time-dependent propagation through ramp-up, hold, and reversal.

Each time step freezes the Hamiltonian at the step midpoint and applies the
step unitary exp(-i H dt) with a small Lanczos subspace whose size adapts
until an a-posteriori error estimate passes the requested accuracy; steps
that fail to converge at the maximum subspace size are split recursively.
The sign-flip reversal propagates the negated generator over the mirrored
midpoints, so ramp-up followed by reversal telescopes to the identity up to
subspace tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
from numba import njit

from .basis import BasisSet, vacuum_index
from .geometry import ChainGeometry
from .hamiltonian import (
    ALL_SECTORS,
    DriveParams,
    QubitSector,
    SparseHamiltonian,
    precompute_terms,
    ramp_delta,
    ramp_omega,
)

NORM_DRIFT_LIMIT = 1e-9
DEFAULT_STEPS = 2048


class PropagationError(RuntimeError):
    """Step accuracy unreachable or unitarity lost during propagation."""


@njit(cache=True)
def _lanczos_iteration(indptr, indices, diag, amp, vj, vjm1, beta_prev, w):
    """One fused Lanczos step: w = H vj (unit flip pattern times amp plus
    diagonal), three-term recurrence, one Gram-Schmidt correction pass
    against vj.  Returns (alpha_j, beta_j); w holds the unnormalized next
    basis vector."""
    dim = vj.size
    for i in range(dim):
        acc = 0.0j
        for k in range(indptr[i], indptr[i + 1]):
            acc += vj[indices[k]]
        w[i] = amp * acc + diag[i] * vj[i]
    alpha = 0.0
    for i in range(dim):
        alpha += (vj[i].conjugate() * w[i]).real
    for i in range(dim):
        w[i] -= alpha * vj[i] + beta_prev * vjm1[i]
    corr = 0.0j
    for i in range(dim):
        corr += vj[i].conjugate() * w[i]
    bsq = 0.0
    for i in range(dim):
        w[i] -= corr * vj[i]
        bsq += (w[i].conjugate() * w[i]).real
    return alpha, np.sqrt(bsq)


def expm_apply(
    h: SparseHamiltonian,
    vec: np.ndarray,
    duration: float,
    tol: float = 1e-12,
    m_max: int = 40,
) -> np.ndarray:
    """Apply exp(-i H duration) to vec via an adaptive Lanczos propagator.

    Durations with ||H|| dt beyond what one m_max-dimensional subspace can
    resolve are split into equal substeps sized from the norm bound; the
    per-substep tolerance is scaled so the total stays within tol.
    """
    if duration == 0.0:
        return vec.copy()
    scale = h.norm_bound()
    chunk = min(abs(duration), 0.4 * m_max / scale) * np.sign(duration)
    done = 0.0
    out = vec
    attempts = 0
    while abs(done) < abs(duration):
        attempts += 1
        if attempts > 2_000_000 or abs(chunk) < 1e-9 * abs(duration):
            raise PropagationError("Lanczos chunking failed to make progress")
        chunk = np.sign(duration) * min(abs(chunk), abs(duration) - abs(done))
        chunk_tol = max(tol * abs(chunk / duration), 5e-15)
        res = _expm_single(h, out, chunk, chunk_tol, m_max)
        if res is None:
            # subspace cap hit: shrink the chunk
            chunk = chunk / 2.0
            continue
        out, m_used = res
        done += chunk
        if m_used < 0.6 * m_max:
            # converged comfortably: the state samples a narrower spectral
            # band than the norm bound, so try a larger chunk next
            chunk = chunk * 2.0
    return out


def _expm_single(
    h: SparseHamiltonian,
    vec: np.ndarray,
    duration: float,
    tol: float,
    m_max: int,
) -> tuple[np.ndarray, int] | None:
    """One Lanczos application of exp(-i H duration); None if m_max is not
    enough.

    No global reorthogonalization (Expokit-style local recurrence plus one
    Gram-Schmidt correction pass); the tridiagonal exponential is evaluated
    by dense eigendecomposition once a cheap running series bound says
    convergence is plausible, and the standard residual estimate
    beta_m |u_m| decides acceptance.
    """
    norm0 = float(np.linalg.norm(vec))
    if norm0 == 0.0 or duration == 0.0:
        return vec.copy(), 0

    dim = vec.size
    m_cap = min(m_max, dim)
    v = np.empty((m_cap + 1, dim), dtype=complex)
    v[0] = np.asarray(vec, dtype=complex) / norm0
    w = np.empty(dim, dtype=complex)
    alphas = np.empty(m_cap)
    betas = np.empty(m_cap)
    pattern = h.flip_pattern
    scale = h.norm_bound()
    tiny = 1e-14 * max(scale, 1.0)
    tol = max(tol, 1e-15)
    log_tol = np.log(tol)
    log_dt = np.log(abs(duration))
    log_series = 0.0  # log of prod(beta_i |dt|) / m!
    checking = False

    for j in range(m_cap):
        a, b = _lanczos_iteration(
            pattern.indptr,
            pattern.indices,
            h.diag,
            complex(h.amplitude),
            v[j],
            v[j - 1] if j > 0 else v[0],
            betas[j - 1] if j > 0 else 0.0,
            w,
        )
        alphas[j] = a
        m = j + 1

        happy = b <= tiny
        log_series += np.log(max(b, 1e-300)) + log_dt - np.log(m)
        checking = checking or log_series <= log_tol
        if happy or checking or m == m_cap:
            u_small = _tridiag_expm_col0(alphas[:m], betas[: m - 1], duration)
            err = 0.0 if happy else abs(b * duration * u_small[-1])
            if happy or err <= tol:
                return norm0 * (u_small @ v[:m]), m
            if m == m_cap:
                return None
        betas[j] = b
        np.divide(w, b, out=v[j + 1])
    return None


def _tridiag_expm_col0(alphas: np.ndarray, betas: np.ndarray, duration: float) -> np.ndarray:
    """First column of exp(-i T duration) for the Lanczos tridiagonal T."""
    m = len(alphas)
    if m == 1:
        return np.array([np.exp(-1j * alphas[0] * duration)])
    w, q = la.eigh_tridiagonal(alphas, betas[: m - 1], check_finite=False)
    return q @ (np.exp(-1j * w * duration) * q[0, :])


@dataclass(frozen=True)
class ProtocolSchedule:
    """Timing of one protocol run: ramp duration t0, hold time t_pi (None =
    auto from the interaction energy), reversal mode, and step size dt
    (None = t0/2048)."""

    t0: float
    t_pi: float | None = None
    reversal: str = "sign_flip"
    dt: float | None = None
    hold_hamiltonian_frozen: bool = True
    step_tol: float = 1e-12

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.t_pi is not None and self.t_pi < 0:
            raise ValueError("t_pi must be >= 0")
        if self.reversal not in ("sign_flip", "reversed_profile"):
            raise ValueError("reversal must be 'sign_flip' or 'reversed_profile'")
        if self.dt is not None and self.dt > self.t0 / 100.0:
            raise ValueError("dt must be <= t0/100")
        if not self.hold_hamiltonian_frozen:
            raise ValueError("only the frozen hold Hamiltonian is supported")

    @property
    def step(self) -> float:
        return self.t0 / DEFAULT_STEPS if self.dt is None else self.dt


@dataclass(frozen=True)
class SectorTrajectory:
    """Final chain state of one qubit sector after a propagation leg."""

    final_state: np.ndarray
    overlap_with_initial: complex
    norm_drift: float
    basis: BasisSet


def _check_norm(state: np.ndarray) -> float:
    drift = abs(float(np.linalg.norm(state)) - 1.0)
    if drift > NORM_DRIFT_LIMIT:
        raise PropagationError(f"norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT}")
    return drift


def propagate_ramp(
    basis: BasisSet,
    geometry: ChainGeometry,
    sector: QubitSector,
    params: DriveParams,
    schedule: ProtocolSchedule,
    direction: str = "forward",
    initial_state: np.ndarray | None = None,
) -> SectorTrajectory:
    """Integrate the ramp leg in one sector.

    forward: H(+1) with profiles Omega(t), Delta(t) from the vacuum (unless
    an initial state is supplied).  reverse: either the sign-flipped
    generator -H on the mirrored profiles (exact inverse of the forward
    integrator) or, with reversal='reversed_profile', +H on the time-reversed
    profiles.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError("direction must be 'forward' or 'reverse'")
    terms = precompute_terms(basis, params)
    dim = basis.dim

    if initial_state is None:
        state = np.zeros(dim, dtype=complex)
        state[vacuum_index(basis)] = 1.0
    else:
        state = np.asarray(initial_state, dtype=complex).copy()
    initial = state.copy()

    t0 = schedule.t0
    n_steps = max(int(round(t0 / schedule.step)), 100)
    dt = t0 / n_steps
    if direction == "forward" or schedule.reversal == "reversed_profile":
        sign = 1
    else:
        sign = -1

    for k in range(n_steps):
        t_mid = (k + 0.5) * dt
        if direction == "reverse":
            t_mid = t0 - t_mid
        h = terms.assemble(sector, ramp_omega(t_mid, params), ramp_delta(t_mid, params), sign=sign)
        state = expm_apply(h, state, dt, tol=schedule.step_tol)

    drift = _check_norm(state)
    return SectorTrajectory(
        final_state=state,
        overlap_with_initial=complex(np.vdot(initial, state)),
        norm_drift=drift,
        basis=basis,
    )


def hold(
    state: np.ndarray,
    basis: BasisSet,
    geometry: ChainGeometry,
    sector: QubitSector,
    params: DriveParams,
    at_time: float | None = None,
    duration: float = 0.0,
    step_tol: float = 1e-12,
) -> SectorTrajectory:
    """Free evolution under the frozen Hamiltonian of the given ramp instant
    (default: the hold point t0)."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    t = params.t0 if at_time is None else at_time
    terms = precompute_terms(basis, params)
    h = terms.assemble(sector, ramp_omega(t, params), ramp_delta(t, params))
    initial = np.asarray(state, dtype=complex)
    out = expm_apply(h, initial, duration, tol=step_tol) if duration > 0 else initial.copy()
    drift = _check_norm(out)
    return SectorTrajectory(
        final_state=out,
        overlap_with_initial=complex(np.vdot(initial, out)),
        norm_drift=drift,
        basis=basis,
    )


@dataclass(frozen=True)
class ProtocolResult:
    """All four sector trajectories plus the realized protocol times."""

    trajectories: dict  # sector label -> SectorTrajectory
    t0: float
    t_pi: float
    t_g: float
    e_int: float | None  # None when t_pi was supplied explicitly


def run_protocol(
    basis: BasisSet,
    geometry: ChainGeometry,
    params: DriveParams,
    schedule: ProtocolSchedule,
    sectors: tuple[QubitSector, ...] = ALL_SECTORS,
) -> ProtocolResult:
    """Full gate sequence per sector: vacuum -> ramp-up -> hold -> reverse.

    With t_pi unset, the hold time is pi/|E_int| from the four sector ground
    energies at the hold point; |E_int| below 1e-12 aborts (no effective
    interaction, the hold time would diverge).  The sectors share every
    off-diagonal matrix element, so all of them propagate together through
    one block-diagonal Krylov recurrence.
    """
    e_int_val = None
    t_pi = schedule.t_pi
    if t_pi is None:
        from .spectral import interaction_energy

        e_int_val = interaction_energy(geometry, basis, params).e_int
        if abs(e_int_val) < 1e-12:
            raise PropagationError("no effective interaction: |E_int| < 1e-12")
        t_pi = np.pi / abs(e_int_val)

    terms = precompute_terms(basis, params)
    dim = basis.dim
    vac = vacuum_index(basis)
    state = np.zeros(len(sectors) * dim, dtype=complex)
    for i in range(len(sectors)):
        state[i * dim + vac] = 1.0

    t0 = schedule.t0
    n_steps = max(int(round(t0 / schedule.step)), 100)
    dt = t0 / n_steps
    rev_sign = -1 if schedule.reversal == "sign_flip" else 1

    for k in range(n_steps):  # ramp up
        t_mid = (k + 0.5) * dt
        h = terms.assemble_stacked(
            sectors, ramp_omega(t_mid, params), ramp_delta(t_mid, params), sign=1
        )
        state = expm_apply(h, state, dt, tol=schedule.step_tol)
    if t_pi > 0:  # hold at the frozen ramp endpoint
        h = terms.assemble_stacked(
            sectors, ramp_omega(t0, params), ramp_delta(t0, params), sign=1
        )
        state = expm_apply(h, state, t_pi, tol=schedule.step_tol)
    for k in range(n_steps):  # reverse
        t_mid = t0 - (k + 0.5) * dt
        h = terms.assemble_stacked(
            sectors, ramp_omega(t_mid, params), ramp_delta(t_mid, params), sign=rev_sign
        )
        state = expm_apply(h, state, dt, tol=schedule.step_tol)

    trajectories = {}
    for i, sector in enumerate(sectors):
        final = state[i * dim : (i + 1) * dim].copy()
        drift = _check_norm(final)
        trajectories[sector.label] = SectorTrajectory(
            final_state=final,
            overlap_with_initial=complex(final[vac]),
            norm_drift=drift,
            basis=basis,
        )

    return ProtocolResult(
        trajectories=trajectories,
        t0=schedule.t0,
        t_pi=float(t_pi),
        t_g=float(2.0 * schedule.t0 + t_pi),
        e_int=e_int_val,
    )
