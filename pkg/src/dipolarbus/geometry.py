"""1D chain geometries: bus-spin positions plus two boundary qubits.

All lengths are expressed in units of the average interparticle spacing a.
The boundary qubits sit a distance d outside the first and last bus spin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_R_MIN = 0.1
MAX_RESAMPLE_ATTEMPTS = 10_000


@dataclass(frozen=True)
class ChainGeometry:
    """Sorted bus-spin coordinates and boundary-qubit positions (units of a)."""

    positions: np.ndarray
    qubit_a_pos: float
    qubit_b_pos: float
    offset_d: float
    r_min: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 1 or pos.size < 1:
            raise ValueError("need at least 1 site")
        if pos.size >= 2 and np.any(np.diff(pos) <= 0):
            raise ValueError("positions must be strictly increasing")
        if self.span_l <= 0:
            raise ValueError("qubit span must be positive")

    @property
    def n_sites(self) -> int:
        return self.positions.size

    @property
    def span_l(self) -> float:
        """Total qubit-to-qubit length L."""
        return self.qubit_b_pos - self.qubit_a_pos

    def pair_distances(self) -> np.ndarray:
        """Matrix of |r_i - r_j| with zeros on the diagonal."""
        return np.abs(self.positions[:, None] - self.positions[None, :])

    def qubit_distances(self) -> tuple[np.ndarray, np.ndarray]:
        """Site distances to qubit A and qubit B."""
        return (
            np.abs(self.positions - self.qubit_a_pos),
            np.abs(self.positions - self.qubit_b_pos),
        )


def _from_positions(pos: np.ndarray, offset_d: float, r_min: float) -> ChainGeometry:
    return ChainGeometry(
        positions=pos,
        qubit_a_pos=float(pos[0] - offset_d),
        qubit_b_pos=float(pos[-1] + offset_d),
        offset_d=float(offset_d),
        r_min=float(r_min),
    )


def make_equidistant(n_sites: int, offset_d: float) -> ChainGeometry:
    """Regular lattice: site i at coordinate i, qubits at -d and (N-1)+d."""
    if n_sites < 2:
        raise ValueError("n_sites must be >= 2")
    if offset_d <= 0:
        raise ValueError("offset_d must be positive")
    return _from_positions(np.arange(n_sites, dtype=float), offset_d, r_min=1.0)


def make_disordered(
    n_sites: int,
    offset_d: float,
    seed: int,
    r_min: float = DEFAULT_R_MIN,
) -> ChainGeometry:
    """Uniformly random chain on [0, N-1] with a minimum-separation floor.

    N coordinates are drawn i.i.d. uniform on [0, N-1] and sorted; the whole
    configuration is resampled until the smallest gap is >= r_min, which keeps
    the distribution well-defined (no per-point adjustment).  Deterministic
    for a given seed.
    """
    if n_sites < 2:
        raise ValueError("n_sites must be >= 2")
    if offset_d <= 0:
        raise ValueError("offset_d must be positive")
    if not 0 <= r_min < 1:
        raise ValueError("r_min must satisfy 0 <= r_min < 1")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        pos = np.sort(rng.uniform(0.0, n_sites - 1, size=n_sites))
        if r_min == 0.0:
            if np.all(np.diff(pos) > 0):
                return _from_positions(pos, offset_d, r_min)
        elif np.min(np.diff(pos)) >= r_min:
            return _from_positions(pos, offset_d, r_min)
    raise RuntimeError(
        f"no configuration with min separation {r_min} after "
        f"{MAX_RESAMPLE_ATTEMPTS} attempts; r_min too large for density"
    )


def make_jittered(
    n_sites: int,
    offset_d: float,
    seed: int,
    width: float,
    r_min: float = DEFAULT_R_MIN,
) -> ChainGeometry:
    """Alternative disorder mode: uniform jitter of half-width `width` about
    the regular lattice sites.  Used for robustness studies; the interval
    model (make_disordered) is the default elsewhere."""
    if n_sites < 2:
        raise ValueError("n_sites must be >= 2")
    if offset_d <= 0:
        raise ValueError("offset_d must be positive")
    if not 0 <= width < 0.5:
        raise ValueError("width must satisfy 0 <= width < 0.5")
    rng = np.random.default_rng(seed)
    base = np.arange(n_sites, dtype=float)
    for _ in range(MAX_RESAMPLE_ATTEMPTS):
        pos = np.sort(base + rng.uniform(-width, width, size=n_sites))
        if np.min(np.diff(pos)) >= max(r_min, 1e-12):
            return _from_positions(pos, offset_d, r_min)
    raise RuntimeError("jitter resampling failed; r_min too large for width")
