"""Disorder-ensemble orchestration: many seeded realizations, aggregate
statistics with nearest-rank percentile bands, deterministic regardless of
worker count."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .basis import TruncationPolicy, build_basis
from .error_model import budget_from_gap, optimize_t0
from .evolution import ProtocolSchedule
from .gate_analysis import run_gate
from .geometry import DEFAULT_R_MIN, make_disordered, make_equidistant
from .hamiltonian import DriveParams
from .spectral import interaction_energy, min_gap_over_ramp

PIPELINES = ("gap_and_eint", "full_gate", "error_curve")


@dataclass(frozen=True)
class EnsembleSpec:
    """Inputs shared by every realization; realization k uses seed
    base_seed + k."""

    realizations: int
    base_seed: int
    n_sites: int
    offset_d: float
    params: DriveParams
    geometry_mode: str = "disordered"      # "disordered" | "equidistant"
    r_min: float = DEFAULT_R_MIN
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    grid_points: int = 32
    # full_gate pipeline
    schedule: ProtocolSchedule | None = None
    # error_curve pipeline (internal units)
    gamma0: float | None = None
    l0: float | None = None
    delta_exp: float = 1.0
    b: float = 0.62
    c: float = 0.32

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.geometry_mode not in ("disordered", "equidistant"):
            raise ValueError("geometry_mode must be 'disordered' or 'equidistant'")


@dataclass(frozen=True)
class EnsembleReport:
    records: list        # per-realization dicts, ordered by realization index
    failures: list       # (index, seed, reason) triples
    aggregates: dict     # field -> {mean, std, p05, p95}
    pipeline: str
    total: int

    @property
    def n_success(self) -> int:
        return len(self.records)


def nearest_rank_percentile(sorted_values: list[float], pct: float) -> float:
    """Nearest-rank percentile: value at rank ceil(p/100 * M), 1-indexed."""
    m = len(sorted_values)
    if m == 0:
        raise ValueError("empty sample")
    rank = max(1, min(m, math.ceil(pct / 100.0 * m)))
    return float(sorted_values[rank - 1])


def _realize(spec: EnsembleSpec, pipeline: str, k: int) -> dict:
    seed = spec.base_seed + k
    if spec.geometry_mode == "equidistant":
        geo = make_equidistant(spec.n_sites, spec.offset_d)
    else:
        geo = make_disordered(spec.n_sites, spec.offset_d, seed=seed, r_min=spec.r_min)
    basis = build_basis(geo, spec.policy)
    record = {"index": k, "seed": seed, "span_l": geo.span_l, "dim": basis.dim}

    scan = min_gap_over_ramp(geo, basis, spec.params, grid_points=spec.grid_points)
    e_int = interaction_energy(geo, basis, spec.params).e_int
    record["gap"] = scan.gap
    record["e_int"] = e_int

    if pipeline == "full_gate":
        schedule = spec.schedule or ProtocolSchedule(t0=spec.params.t0)
        res = run_gate(geo, basis, spec.params, schedule, gap_scan=scan)
        record.update(
            fidelity=res.fidelity,
            conditional_phase=res.conditional_phase,
            t_pi=res.t_pi,
            t_g=res.t_g,
        )
    elif pipeline == "error_curve":
        if spec.gamma0 is None or spec.l0 is None:
            raise ValueError("error_curve pipeline needs gamma0 and l0")
        budget = budget_from_gap(
            gap=scan.gap, span_l=geo.span_l, l0=spec.l0, gamma0=spec.gamma0,
            delta_exp=spec.delta_exp, b=spec.b, c=spec.c,
        )
        opt = optimize_t0(budget, e_int, scan.gap)
        record.update(f_max=opt.f_max, t0_opt=opt.t0_opt, t_g=opt.t_g)
    elif pipeline != "gap_and_eint":
        raise ValueError(f"unknown pipeline '{pipeline}'")
    return record


_AGGREGATE_SKIP = ("index", "seed")


def _aggregate(records: list[dict]) -> dict:
    if not records:
        return {}
    out = {}
    for key in records[0]:
        if key in _AGGREGATE_SKIP:
            continue
        values = [float(r[key]) for r in records]
        finite = [v for v in values if math.isfinite(v)]
        if not finite:
            continue
        ordered = sorted(finite)
        out[key] = {
            "mean": float(np.mean(finite)),
            "std": float(np.std(finite)),
            "p05": nearest_rank_percentile(ordered, 5.0),
            "p95": nearest_rank_percentile(ordered, 95.0),
        }
    return out


def run_ensemble(
    spec: EnsembleSpec, pipeline: str = "gap_and_eint", workers: int = 1
) -> EnsembleReport:
    """Run every realization, aggregate the successes, and account for every
    failure.  Records are reduced in realization order, so the report is
    identical for any worker count."""
    if pipeline not in PIPELINES:
        raise ValueError(f"pipeline must be one of {PIPELINES}")
    indices = list(range(spec.realizations))
    results: dict[int, dict] = {}
    failures: list[tuple[int, int, str]] = []

    if workers <= 1:
        for k in indices:
            try:
                results[k] = _realize(spec, pipeline, k)
            except Exception as exc:
                failures.append((k, spec.base_seed + k, f"{type(exc).__name__}: {exc}"))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {k: pool.submit(_realize, spec, pipeline, k) for k in indices}
            for k in indices:
                try:
                    results[k] = futures[k].result()
                except Exception as exc:
                    failures.append((k, spec.base_seed + k, f"{type(exc).__name__}: {exc}"))

    records = [results[k] for k in indices if k in results]
    if not records:
        raise RuntimeError(f"all {spec.realizations} realizations failed: {failures}")
    return EnsembleReport(
        records=records,
        failures=failures,
        aggregates=_aggregate(records),
        pipeline=pipeline,
        total=spec.realizations,
    )
