"""Many-body basis enumeration with excitation-count and blockade truncation.

Configurations are bitmasks over the N chain sites (bit i set = site i
excited), stored in ascending bitmask order so that the fully polarized
vacuum is always index 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ChainGeometry

DEFAULT_MAX_DIM = 4_000_000


@dataclass(frozen=True)
class TruncationPolicy:
    """Basis truncation: keep configs with popcount <= n_max and no two
    excited sites closer than r_cut.  n_max=None means the full 2^N space."""

    n_max: int | None = None
    r_cut: float = 0.0

    @property
    def is_full(self) -> bool:
        return self.n_max is None


FULL = TruncationPolicy()


@dataclass(frozen=True)
class BasisSet:
    """Enumerated configurations of one chain geometry, ascending bitmask order."""

    configs: np.ndarray
    policy: TruncationPolicy
    geometry: ChainGeometry
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        cfg = np.asarray(self.configs, dtype=np.uint64)
        cfg.setflags(write=False)
        object.__setattr__(self, "configs", cfg)

    @property
    def dim(self) -> int:
        return self.configs.size

    @property
    def n_sites(self) -> int:
        return self.geometry.n_sites

    def index_of(self, config: int) -> int:
        """Dense index of a configuration; raises KeyError if absent."""
        i = int(np.searchsorted(self.configs, np.uint64(config)))
        if i >= self.dim or int(self.configs[i]) != int(config):
            raise KeyError(f"config {config:#x} not in basis")
        return i

    def contains(self, config: int) -> bool:
        i = int(np.searchsorted(self.configs, np.uint64(config)))
        return i < self.dim and int(self.configs[i]) == int(config)

    def popcounts(self) -> np.ndarray:
        """Excitation count per config (cached)."""
        key = "popcounts"
        if key not in self._cache:
            bits = self.bit_table()
            self._cache[key] = bits.sum(axis=1).astype(np.int64)
        return self._cache[key]

    def bit_table(self) -> np.ndarray:
        """(dim, N) int8 table of occupation bits (cached)."""
        key = "bits"
        if key not in self._cache:
            shifts = np.arange(self.n_sites, dtype=np.uint64)
            bits = (self.configs[:, None] >> shifts[None, :]) & np.uint64(1)
            self._cache[key] = bits.astype(np.int8)
        return self._cache[key]


def vacuum_index(basis: BasisSet) -> int:
    """Index of the all-down configuration (the initial state of every run)."""
    return basis.index_of(0)


def _enumerate_truncated(
    positions: np.ndarray, n_max: int, r_cut: float, max_dim: int
) -> list[int]:
    # Positions are sorted, so the pairwise constraint reduces to consecutive
    # chosen sites being >= r_cut apart; depth-first over site index.
    n = positions.size
    out: list[int] = []
    stack = [(0, 0, 0, -math.inf)]  # (site, mask, count, last_pos)
    while stack:
        site, mask, count, last_pos = stack.pop()
        if site == n:
            out.append(mask)
            if len(out) > max_dim:
                raise RuntimeError(
                    f"basis dimension exceeds cap {max_dim}; request infeasible"
                )
            continue
        # excited branch pushed first so the skip branch is explored first
        if count < n_max and positions[site] - last_pos >= r_cut:
            stack.append((site + 1, mask | (1 << site), count + 1, positions[site]))
        stack.append((site + 1, mask, count, last_pos))
    return out


def build_basis(
    geometry: ChainGeometry,
    policy: TruncationPolicy = FULL,
    max_dim: int = DEFAULT_MAX_DIM,
) -> BasisSet:
    """Enumerate all configurations admitted by the policy.

    Raises RuntimeError when the dimension would exceed max_dim.
    """
    n = geometry.n_sites
    if policy.is_full:
        if 2**n > max_dim:
            raise RuntimeError(
                f"full basis 2^{n} exceeds cap {max_dim}; use a truncation policy"
            )
        configs = np.arange(2**n, dtype=np.uint64)
    else:
        if policy.n_max < 0 or policy.n_max > n:
            raise ValueError("n_max must be in [0, N]")
        masks = _enumerate_truncated(
            geometry.positions, policy.n_max, policy.r_cut, max_dim
        )
        configs = np.sort(np.asarray(masks, dtype=np.uint64))
    return BasisSet(configs=configs, policy=policy, geometry=geometry)


def default_truncation(geometry: ChainGeometry, c_p: float, p: int, delta: float) -> TruncationPolicy:
    """Physical truncation sized from the crystal spacing at detuning delta:
    n_max = ceil(L / a_R) + 2 and r_cut = a_R / 2."""
    from .classical_oracle import crystal_spacing

    a_r = crystal_spacing(p, c_p, delta)
    n_max = min(geometry.n_sites, math.ceil(geometry.span_l / a_r) + 2)
    return TruncationPolicy(n_max=n_max, r_cut=a_r / 2.0)
