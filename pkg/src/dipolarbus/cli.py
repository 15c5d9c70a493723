"""Command-line entry point: JSON configs in, JSON/CSV reports out.

Commands: gate-run, lz-sweep, ensemble, error-curve, oracle.  Every report
embeds the config hash, seed, and library versions; reruns with identical
inputs are byte-identical.  Exit codes: 0 success, 1 usage/config error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .basis import TruncationPolicy, build_basis, default_truncation
from .classical_oracle import (
    continuum_relax,
    crystal_spacing,
    lattice_ground_state,
    scaling_rows,
)
from .ensemble import EnsembleSpec, run_ensemble
from .error_model import (
    ERROR_CURVE_COLUMNS,
    error_curve_rows,
    get_preset,
)
from .evolution import PropagationError, ProtocolSchedule
from .gate_analysis import (
    SWEEP_CSV_COLUMNS,
    SweepError,
    lz_sweep,
    run_gate,
)
from .geometry import DEFAULT_R_MIN, make_disordered, make_equidistant
from .hamiltonian import ALL_SECTORS, DriveParams, QubitSector
from .spectral import ConvergenceError

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------

_GEOMETRY_KEYS = {"mode", "n_sites", "offset_d", "seed", "r_min", "jitter_width"}
_BASIS_KEYS = {"policy", "n_max", "r_cut", "max_dim"}
_DRIVE_KEYS = {"omega0", "delta0", "t0", "c_p", "p"}
_PROTOCOL_KEYS = {"reversal", "dt", "t_pi", "step_tol"}
_ANALYSIS_KEYS = {
    "grid_points",
    "omega0_grid",
    "gamma0_grid",
    "realizations",
    "base_seed",
    "pipeline",
    "gamma0",
    "l0",
    "delta_exp",
    "b",
    "c",
    "disordered_pairs",
}
_UNITS_KEYS = {"mode", "preset"}
_TOP_KEYS = {"schema_version", "geometry", "basis", "drive", "protocol", "analysis", "units"}


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"missing required key '{path}.{key}'")
    return cfg[key]


def _reject_unknown(cfg: dict, allowed: set, path: str):
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path}'")


def load_config(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            cfg = json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(cfg, _TOP_KEYS, "$")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
    for section, allowed in (
        ("geometry", _GEOMETRY_KEYS),
        ("basis", _BASIS_KEYS),
        ("drive", _DRIVE_KEYS),
        ("protocol", _PROTOCOL_KEYS),
        ("analysis", _ANALYSIS_KEYS),
        ("units", _UNITS_KEYS),
    ):
        if section in cfg:
            if not isinstance(cfg[section], dict):
                raise ConfigError(f"'{section}' must be an object")
            _reject_unknown(cfg[section], allowed, section)
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def build_geometry(cfg: dict, seed_override: int | None = None):
    geo_cfg = _require(cfg, "geometry", "$")
    mode = _require(geo_cfg, "mode", "geometry")
    n = int(_require(geo_cfg, "n_sites", "geometry"))
    d = float(_require(geo_cfg, "offset_d", "geometry"))
    if mode == "equidistant":
        return make_equidistant(n, d)
    if mode == "disordered":
        seed = seed_override if seed_override is not None else geo_cfg.get("seed")
        if seed is None:
            raise ConfigError("missing required key 'geometry.seed' for disordered mode")
        return make_disordered(n, d, seed=int(seed), r_min=float(geo_cfg.get("r_min", DEFAULT_R_MIN)))
    raise ConfigError(f"geometry.mode must be 'equidistant' or 'disordered', got '{mode}'")


def build_drive(cfg: dict) -> DriveParams:
    units = cfg.get("units", {"mode": "internal"})
    mode = units.get("mode", "internal")
    drive_cfg = _require(cfg, "drive", "$")
    t0 = float(_require(drive_cfg, "t0", "drive"))
    if mode == "preset":
        preset = get_preset(_require(units, "preset", "units"))
        base = preset.drive_params(t0)
        merged = {**asdict(base), **{k: drive_cfg[k] for k in drive_cfg if k != "t0"}}
        return DriveParams(**merged)
    if mode != "internal":
        raise ConfigError("units.mode must be 'internal' or 'preset'")
    for key in ("omega0", "delta0", "c_p", "p"):
        _require(drive_cfg, key, "drive")
    return DriveParams(
        omega0=float(drive_cfg["omega0"]),
        delta0=float(drive_cfg["delta0"]),
        t0=t0,
        c_p=float(drive_cfg["c_p"]),
        p=int(drive_cfg["p"]),
    )


def build_policy(cfg: dict, geometry, params: DriveParams) -> TruncationPolicy:
    basis_cfg = cfg.get("basis", {"policy": "full"})
    policy = basis_cfg.get("policy", "full")
    if policy == "full":
        return TruncationPolicy()
    if policy == "default_truncation":
        from .hamiltonian import ramp_delta

        return default_truncation(geometry, params.c_p, params.p, ramp_delta(params.t0, params))
    if policy == "truncated":
        return TruncationPolicy(
            n_max=int(_require(basis_cfg, "n_max", "basis")),
            r_cut=float(basis_cfg.get("r_cut", 0.0)),
        )
    raise ConfigError("basis.policy must be 'full', 'truncated', or 'default_truncation'")


def build_schedule(cfg: dict, params: DriveParams) -> ProtocolSchedule:
    proto = cfg.get("protocol", {})
    return ProtocolSchedule(
        t0=params.t0,
        t_pi=proto.get("t_pi"),
        reversal=proto.get("reversal", "sign_flip"),
        dt=proto.get("dt"),
        step_tol=proto.get("step_tol", 1e-12),
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _provenance(cfg: dict, seed: int | None = None) -> dict:
    return {
        "config_hash": config_hash(cfg),
        "seed": seed if seed is not None else cfg.get("geometry", {}).get("seed"),
        "versions": {
            "dipolarbus": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


def write_csv(path: Path, columns: tuple, rows: list[dict]):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_gate_run(cfg: dict, out_dir: Path, args) -> int:
    geometry = build_geometry(cfg, args.seed)
    params = build_drive(cfg)
    basis = build_basis(geometry, build_policy(cfg, geometry, params))
    schedule = build_schedule(cfg, params)
    grid = int(cfg.get("analysis", {}).get("grid_points", 64))
    result = run_gate(geometry, basis, params, schedule, grid_points=grid)
    payload = {
        "fidelity": result.fidelity,
        "conditional_phase": result.conditional_phase,
        "e_int": result.e_int,
        "gap": result.gap,
        "t0": result.t0,
        "t_pi": result.t_pi,
        "t_g": result.t_g,
        "overlaps_re": np.real(result.overlaps).tolist(),
        "overlaps_im": np.imag(result.overlaps).tolist(),
        "basis_dim": basis.dim,
        "span_l": geometry.span_l,
        "provenance": _provenance(cfg, args.seed),
    }
    write_json(out_dir / "gate_result.json", payload)
    print(f"gate-run: F={result.fidelity:.6f} phi={result.conditional_phase:+.4f} "
          f"-> {out_dir / 'gate_result.json'}")
    return EXIT_OK


def _cmd_lz_sweep(cfg: dict, out_dir: Path, args) -> int:
    geometry = build_geometry(cfg, args.seed)
    params = build_drive(cfg)
    basis = build_basis(geometry, build_policy(cfg, geometry, params))
    schedule = build_schedule(cfg, params)
    grid = int(cfg.get("analysis", {}).get("grid_points", 64))

    if args.omega0_grid:
        values = [float(x) for x in args.omega0_grid.split(",")]
    else:
        values = cfg.get("analysis", {}).get("omega0_grid")
        if values is None:
            raise ConfigError("missing required key 'analysis.omega0_grid' (or --omega0-grid)")
    deduped = sorted(set(values))
    if len(deduped) < len(values):
        print("warning: duplicate omega0 values removed", file=sys.stderr)
    if len(deduped) < 5:
        raise ConfigError("fit requires >= 5 points")

    fit, records = lz_sweep(geometry, basis, params, schedule, deduped, grid_points=grid)
    rows = [asdict(r) for r in records]
    write_csv(out_dir / "lz_sweep.csv", SWEEP_CSV_COLUMNS, rows)
    write_json(
        out_dir / "lz_fit.json",
        {
            "b": fit.b,
            "c": fit.c,
            "r_squared": fit.r_squared,
            "points": fit.points,
            "provenance": _provenance(cfg, args.seed),
        },
    )
    print(f"lz-sweep: {len(records)} points, fit b={fit.b:.4f} c={fit.c:.4f} "
          f"r2={fit.r_squared:.4f} -> {out_dir}")
    return EXIT_OK


def _cmd_ensemble(cfg: dict, out_dir: Path, args) -> int:
    params = build_drive(cfg)
    geo_cfg = _require(cfg, "geometry", "$")
    analysis = cfg.get("analysis", {})
    realizations = args.realizations or analysis.get("realizations")
    if realizations is None:
        raise ConfigError("missing required key 'analysis.realizations' (or --realizations)")
    base_seed = args.seed if args.seed is not None else analysis.get("base_seed", 0)

    geometry_probe = build_geometry(cfg, base_seed if geo_cfg.get("mode") == "disordered" else None)
    policy = build_policy(cfg, geometry_probe, params)
    spec = EnsembleSpec(
        realizations=int(realizations),
        base_seed=int(base_seed),
        n_sites=int(geo_cfg["n_sites"]),
        offset_d=float(geo_cfg["offset_d"]),
        params=params,
        geometry_mode=geo_cfg.get("mode", "disordered"),
        r_min=float(geo_cfg.get("r_min", DEFAULT_R_MIN)),
        policy=policy,
        grid_points=int(analysis.get("grid_points", 32)),
        schedule=build_schedule(cfg, params) if analysis.get("pipeline") == "full_gate" else None,
        gamma0=analysis.get("gamma0"),
        l0=analysis.get("l0"),
        delta_exp=float(analysis.get("delta_exp", 1.0)),
        b=float(analysis.get("b", 0.62)),
        c=float(analysis.get("c", 0.32)),
    )
    pipeline = analysis.get("pipeline", "gap_and_eint")
    report = run_ensemble(spec, pipeline=pipeline, workers=args.workers)

    payload = {
        "pipeline": report.pipeline,
        "total": report.total,
        "n_success": report.n_success,
        "failures": [
            {"index": i, "seed": s, "reason": r} for (i, s, r) in report.failures
        ],
        "records": report.records,
        "aggregates": report.aggregates,
        "provenance": _provenance(cfg, base_seed),
    }
    write_json(out_dir / "ensemble_report.json", payload)
    if report.records:
        columns = tuple(report.records[0].keys())
        write_csv(out_dir / "ensemble_records.csv", columns, report.records)
    print(f"ensemble: {report.n_success}/{report.total} succeeded -> {out_dir}")
    return EXIT_OK


def _cmd_error_curve(cfg: dict | None, out_dir: Path, args) -> int:
    if args.preset:
        preset = get_preset(args.preset)
        analysis = cfg.get("analysis", {}) if cfg else {}
    elif cfg is not None:
        units = cfg.get("units", {})
        if units.get("mode") != "preset":
            raise ConfigError("error-curve needs --preset or units.mode='preset' in config")
        preset = get_preset(_require(units, "preset", "units"))
        analysis = cfg.get("analysis", {})
    else:
        raise ConfigError("error-curve needs --preset or --config")

    if args.gamma0_grid:
        gamma0_values = [float(x) for x in args.gamma0_grid.split(",")]
    else:
        gamma0_values = analysis.get("gamma0_grid")
        if gamma0_values is None:
            raise ConfigError("missing required key 'analysis.gamma0_grid' (or --gamma0-grid)")

    pairs = analysis.get("disordered_pairs")
    rows = error_curve_rows(
        preset,
        gamma0_values,
        disordered_pairs=[tuple(p) for p in pairs] if pairs else None,
        b=float(analysis.get("b", 0.62)),
        c=float(analysis.get("c", 0.32)),
    )
    write_csv(out_dir / "error_curve.csv", ERROR_CURVE_COLUMNS, rows)
    print(f"error-curve: {len(rows)} gamma0 points ({preset.name}) -> {out_dir}")
    return EXIT_OK


def _cmd_oracle(cfg: dict | None, out_dir: Path, args) -> int:
    sub = args.oracle_command
    if sub == "spacing":
        a_r = crystal_spacing(args.p, args.c_p, args.delta)
        write_json(out_dir / "crystal_spacing.json",
                   {"p": args.p, "c_p": args.c_p, "delta": args.delta, "a_r": a_r})
        print(f"oracle spacing: a_R = {a_r!r}")
        return EXIT_OK
    if sub == "lattice-ground-state":
        if cfg is None:
            raise ConfigError("oracle lattice-ground-state needs --config (geometry block)")
        geometry = build_geometry(cfg, args.seed)
        sector = _parse_sector(args.sector)
        gs = lattice_ground_state(geometry, sector, args.c_p, args.p, args.delta)
        write_json(
            out_dir / "lattice_ground_state.json",
            {
                "energy": gs.energy,
                "n_excitations": gs.n_excitations,
                "config_bits": format(gs.config, f"0{geometry.n_sites}b"),
                "provenance": _provenance(cfg, args.seed),
            },
        )
        print(f"oracle lattice-ground-state: E = {gs.energy!r}, n = {gs.n_excitations}")
        return EXIT_OK
    if sub == "continuum-relax":
        sector = _parse_sector(args.sector)
        gs = continuum_relax(args.n_exc, args.span, sector, args.d, args.c_p, args.p)
        write_json(
            out_dir / "continuum_relax.json",
            {
                "energy": gs.energy,
                "n_excitations": gs.n_excitations,
                "positions": list(gs.excitation_positions),
            },
        )
        print(f"oracle continuum-relax: E = {gs.energy!r}")
        return EXIT_OK
    if sub == "scaling":
        spans = [float(x) for x in args.spans.split(",")]
        rows = scaling_rows(spans, args.d, args.c_p, args.p, args.delta)
        columns = ("span", "d", "n_exc", "e_uu", "e_ud", "e_du", "e_dd",
                   "e_int", "e_int_times_span_over_d2")
        write_csv(out_dir / "continuum_scaling.csv", columns, rows)
        print(f"oracle scaling: {len(rows)} spans -> {out_dir}")
        return EXIT_OK
    raise ConfigError(f"unknown oracle subcommand '{sub}'")


def _parse_sector(text: str) -> QubitSector:
    text = text.strip().lower()
    for sector in ALL_SECTORS:
        if sector.label == text:
            return sector
    raise ConfigError(f"sector must be one of dd, du, ud, uu; got '{text}'")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dipolarbus",
        description="Adiabatic dipolar-crystal quantum-bus gate simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, help="JSON run configuration")
        p.add_argument("--out", type=str, default="out", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (default: DIPOLARBUS_WORKERS or 1)")
        p.add_argument("--seed", type=int, default=None, help="override geometry/base seed")
        p.add_argument("--dry-run", action="store_true",
                       help="validate and echo the config, no computation")

    p = sub.add_parser("gate-run", help="single protocol run -> gate_result.json")
    common(p)
    p = sub.add_parser("lz-sweep", help="fidelity vs gap*t0 sweep -> CSV + fit JSON")
    common(p)
    p.add_argument("--omega0-grid", type=str, help="comma-separated Rabi amplitudes")
    p = sub.add_parser("ensemble", help="disorder ensemble -> report JSON + CSV")
    common(p)
    p.add_argument("--realizations", type=int, default=None)
    p = sub.add_parser("error-curve", help="fidelity vs gamma0 curve -> CSV")
    common(p)
    p.add_argument("--preset", choices=["rydberg", "nv"], default=None)
    p.add_argument("--gamma0-grid", type=str, help="comma-separated gamma0 values (SI 1/s)")

    p = sub.add_parser("oracle", help="classical-limit ground-truth solvers")
    sub_oracle = p.add_subparsers(dest="oracle_command", required=True)
    for name in ("spacing", "lattice-ground-state", "continuum-relax", "scaling"):
        q = sub_oracle.add_parser(name)
        common(q)
        q.add_argument("--c-p", dest="c_p", type=float, default=100.0)
        q.add_argument("--p", type=int, default=3)
        q.add_argument("--delta", type=float, default=2.089)
        if name in ("lattice-ground-state", "continuum-relax"):
            q.add_argument("--sector", type=str, default="dd")
        if name == "continuum-relax":
            q.add_argument("--n-exc", dest="n_exc", type=int, required=True)
            q.add_argument("--span", type=float, required=True)
            q.add_argument("--d", type=float, default=1.0)
        if name == "scaling":
            q.add_argument("--spans", type=str, required=True)
            q.add_argument("--d", type=float, default=1.0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)

    if args.workers is None:
        env = os.environ.get("DIPOLARBUS_WORKERS")
        args.workers = int(env) if env else 1

    try:
        cfg = load_config(args.config) if args.config else None
        if args.command in ("gate-run", "lz-sweep", "ensemble") and cfg is None:
            raise ConfigError(f"{args.command} requires --config")
        if args.dry_run:
            print(json.dumps(cfg, indent=1, sort_keys=True) if cfg else "{}")
            return EXIT_OK
        out_dir = Path(args.out)
        if args.command == "gate-run":
            return _cmd_gate_run(cfg, out_dir, args)
        if args.command == "lz-sweep":
            return _cmd_lz_sweep(cfg, out_dir, args)
        if args.command == "ensemble":
            return _cmd_ensemble(cfg, out_dir, args)
        if args.command == "error-curve":
            return _cmd_error_curve(cfg, out_dir, args)
        if args.command == "oracle":
            return _cmd_oracle(cfg, out_dir, args)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, PropagationError, SweepError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
