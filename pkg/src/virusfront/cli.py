"""Command-line driver.

Subcommands
-----------
simulate     integrate the moving-front problem, write trajectory/snapshot
             CSVs plus a manifest
equilibrium  build the equilibrium bound chain (optionally the fully
             coupled steady state), write per-link CSVs and a JSON summary
classify     simulate, build the chain when needed, and emit the regime
             verdict with all measured margins as JSON
sweep        classify over a parameter grid, one CSV row per point
eigen        print the principal eigenvalue and the domain-length predicate
             for one or more interval lengths

All numeric work is configured through a single JSON file; every tolerance
and resolution has a default, so a minimal config is just the six kinetic
constants.  Exit codes: 0 on success, 2 for configuration problems, 3 for
solver failures; failures also emit a machine-readable JSON object on
stderr.  Identical configs produce byte-identical CSV/JSON outputs.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .behavior import classify
from .bvp import write_profile_csv
from .equilibrium import build_chain, solve_full_equilibrium
from .errors import ConfigError, SolverError, ThresholdError
from .fbsim import InitialData, run, write_snapshot_csv, write_trajectory_csv
from .model import (
    ModelParams,
    basic_reproduction_number,
    domain_length_condition,
    principal_eigenvalue,
)

log = logging.getLogger("virusfront")

_SIM_DEFAULTS = {
    "T": None,  # 200 / min(c, q) when unset
    "dt": None,
    "n": 400,
    "observers": 201,
    "snapshots": [],
    "amplitudes": [0.5, 0.2, 0.2],
}
_EQ_DEFAULTS = {
    "window": 10.0,
    "n": 400,
    "rtol": 1e-6,
    "full": False,
    "right_bc": "chain",
}
_CLS_DEFAULTS = {
    "window": 10.0,
    "slack_rel": 0.02,
    "slack_abs": 1e-3,
    "extinction_tol": 1e-4,
}
_TOP_KEYS = {"params", "simulate", "equilibrium", "classify", "sweep", "figures", "out"}


def _merge(block: dict | None, defaults: dict, name: str) -> dict:
    block = dict(block or {})
    unknown = set(block) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {name!r} block: {sorted(unknown)}")
    out = dict(defaults)
    out.update(block)
    return out


def _load_config(path: str | None) -> dict:
    if path is None:
        raise ConfigError("--config is required")
    try:
        raw = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path!r}: {err}") from err
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path!r} is not valid JSON: {err}") from err
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    if "params" not in cfg:
        raise ConfigError("config must contain a 'params' block")
    return cfg


def _params(cfg: dict) -> ModelParams:
    try:
        return ModelParams.from_dict(cfg["params"])
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _default_T(p: ModelParams) -> float:
    return 200.0 / min(p.c, p.q)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _run_simulation(p: ModelParams, sc: dict):
    T = sc["T"] if sc["T"] is not None else _default_T(p)
    init = InitialData(amplitudes=tuple(float(a) for a in sc["amplitudes"]))
    return run(
        init,
        p,
        T=float(T),
        dt=None if sc["dt"] is None else float(sc["dt"]),
        n=int(sc["n"]),
        num_observers=int(sc["observers"]),
        snapshot_times=tuple(float(s) for s in sc["snapshots"]),
    )


def cmd_simulate(cfg: dict, out: Path, figures: bool) -> int:
    p = _params(cfg)
    sc = _merge(cfg.get("simulate"), _SIM_DEFAULTS, "simulate")
    traj = _run_simulation(p, sc)
    write_trajectory_csv(traj, out / "trajectory.csv")
    snap_entries = []
    for i, snap in enumerate(traj.snapshots):
        name = f"snapshot_{i:03d}.csv"
        write_snapshot_csv(snap, out / name)
        snap_entries.append({"t": snap.t, "h": snap.h, "file": name})
    written = []
    if figures:
        from .report import render_trajectory

        written = [f.name for f in render_trajectory(traj, out)]
    manifest = {
        "command": "simulate",
        "trajectory": "trajectory.csv",
        "snapshots": snap_entries,
        "figures": written,
        "n": traj.n,
        "T": float(traj.t[-1]),
        "h_final": float(traj.h[-1]),
        "clipped_mass": traj.clipped_mass,
    }
    _write_json(out / "manifest.json", manifest)
    log.info("simulate: wrote %d snapshots to %s", len(snap_entries), out)
    return 0


def cmd_equilibrium(cfg: dict, out: Path, figures: bool) -> int:
    p = _params(cfg)
    ec = _merge(cfg.get("equilibrium"), _EQ_DEFAULTS, "equilibrium")
    try:
        chain = build_chain(
            p, window=float(ec["window"]), n=int(ec["n"]), rtol=float(ec["rtol"])
        )
    except ThresholdError:
        summary = {
            "R0": basic_reproduction_number(p),
            "regime_hint": "no positive solution",
        }
        _write_json(out / "summary.json", summary)
        log.info("equilibrium: below threshold, wrote hint summary")
        return 0
    files = {
        "upper_u1": chain.upper_u1,
        "upper_u23": chain.upper_u23,
        "lower_u1": chain.lower_u1,
    }
    if chain.complete:
        files["lower_u23"] = chain.lower_u23
    for name, sol in files.items():
        write_profile_csv(sol.profile, out / f"chain_{name}.csv")
    summary = chain.summary()
    if ec["full"]:
        full = solve_full_equilibrium(
            p,
            window=float(ec["window"]),
            n=int(ec["n"]),
            rtol=float(ec["rtol"]),
            right_bc=str(ec["right_bc"]),
        )
        write_profile_csv(full.profile, out / "full_equilibrium.csv")
        summary["full_equilibrium"] = {
            "farfield": list(full.farfield),
            "converged_l": full.converged_l,
        }
    if figures:
        from .report import render_chain

        render_chain(chain, out)
    _write_json(out / "summary.json", summary)
    log.info("equilibrium: chain complete=%s", chain.complete)
    return 0


def cmd_classify(cfg: dict, out: Path, figures: bool) -> int:
    p = _params(cfg)
    sc = _merge(cfg.get("simulate"), _SIM_DEFAULTS, "simulate")
    cc = _merge(cfg.get("classify"), _CLS_DEFAULTS, "classify")
    traj = _run_simulation(p, sc)
    write_trajectory_csv(traj, out / "trajectory.csv")
    chain = None
    if basic_reproduction_number(p) > 1.0:
        chain = build_chain(p, window=float(cc["window"]), n=int(sc["n"]))
    result = classify(
        p,
        traj,
        chain=chain,
        window=float(cc["window"]),
        slack_rel=float(cc["slack_rel"]),
        slack_abs=float(cc["slack_abs"]),
        extinction_tol=float(cc["extinction_tol"]),
    )
    _write_json(out / "classification.json", result.to_json_dict())
    if figures:
        from .report import render_classification

        render_classification(result, traj, chain, out)
    log.info("classify: regime=%s", result.regime)
    print(result.regime)
    return 0


def _axis_values(name: str, spec) -> list[float]:
    if isinstance(spec, list):
        vals = [float(v) for v in spec]
    elif isinstance(spec, dict):
        unknown = set(spec) - {"start", "stop", "points"}
        if unknown:
            raise ConfigError(f"unknown keys in sweep axis {name!r}: {sorted(unknown)}")
        try:
            vals = np.linspace(
                float(spec["start"]), float(spec["stop"]), int(spec["points"])
            ).tolist()
        except KeyError as err:
            raise ConfigError(f"sweep axis {name!r} needs start/stop/points") from err
    else:
        raise ConfigError(f"sweep axis {name!r} must be a list or start/stop/points")
    if not vals:
        raise ConfigError(f"sweep axis {name!r} is empty")
    return vals


_MARGIN_COLUMNS = {
    "extinction_sup_u2": "margin_extinction_sup_u2",
    "extinction_sup_u3": "margin_extinction_sup_u3",
    "u1_converges_to_virus_free_profile": "margin_u1_convergence",
    "upper_squeeze_u1": "margin_upper_u1",
    "upper_squeeze_u2": "margin_upper_u2",
    "upper_squeeze_u3": "margin_upper_u3",
    "lower_squeeze_u1": "margin_lower_u1",
    "lower_squeeze_u2": "margin_lower_u2",
    "lower_squeeze_u3": "margin_lower_u3",
}


def cmd_sweep(cfg: dict, out: Path, figures: bool) -> int:
    base = _params(cfg)
    sw = cfg.get("sweep")
    if not isinstance(sw, dict) or "axes" not in sw or not sw["axes"]:
        raise ConfigError("sweep requires a 'sweep' block with a nonempty 'axes' map")
    unknown = set(sw) - {"axes"}
    if unknown:
        raise ConfigError(f"unknown keys in 'sweep' block: {sorted(unknown)}")
    sc = _merge(cfg.get("simulate"), _SIM_DEFAULTS, "simulate")
    cc = _merge(cfg.get("classify"), _CLS_DEFAULTS, "classify")
    param_fields = [
        "theta", "a", "b", "c", "k", "q",
        "d1", "d2", "d3", "mu1", "mu2", "mu3", "h0",
    ]
    axes = list(sw["axes"].items())
    for name, _ in axes:
        if name not in param_fields:
            raise ConfigError(f"sweep axis {name!r} is not a model parameter")
    grids = [_axis_values(name, spec) for name, spec in axes]
    axis_names = [name for name, _ in axes]

    rows = []
    for combo in itertools.product(*grids):  # row-major: last axis fastest
        overrides = dict(zip(axis_names, combo))
        p = ModelParams(**{**{f: getattr(base, f) for f in param_fields}, **overrides})
        traj = _run_simulation(p, sc)
        chain = None
        if basic_reproduction_number(p) > 1.0:
            chain = build_chain(p, window=float(cc["window"]), n=int(sc["n"]))
        result = classify(
            p, traj, chain=chain,
            window=float(cc["window"]),
            slack_rel=float(cc["slack_rel"]),
            slack_abs=float(cc["slack_abs"]),
            extinction_tol=float(cc["extinction_tol"]),
        )
        row = {f: getattr(p, f) for f in param_fields}
        row["R0"] = result.r0
        row["cond_2_26"] = result.persistence_ok
        row["regime"] = result.regime
        for key, col in _MARGIN_COLUMNS.items():
            row[col] = result.evidence[key].margin if key in result.evidence else ""
        rows.append(row)
        log.info("sweep point %s -> %s", overrides, result.regime)

    columns = param_fields + ["R0", "cond_2_26", "regime"] + list(_MARGIN_COLUMNS.values())
    with open(out / "sweep.csv", "w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row[col]
                if isinstance(v, bool):
                    cells.append("true" if v else "false")
                elif isinstance(v, float):
                    cells.append(f"{v:.17g}")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
    if figures:
        from .report import render_sweep

        render_sweep(rows, axis_names, out)
    log.info("sweep: wrote %d rows", len(rows))
    return 0


def cmd_eigen(cfg: dict, args) -> int:
    p = _params(cfg)
    beta = args.beta if args.beta is not None else p.theta / p.a
    if not args.l:
        raise ConfigError("eigen requires at least one --l")
    records = []
    for l in args.l:
        records.append(
            {
                "l": l,
                "lambda1": principal_eigenvalue(l),
                "condition": domain_length_condition(p, l, args.eps, beta),
            }
        )
    print(json.dumps(records, sort_keys=True, indent=2))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="virusfront",
        description="Moving-front infection model: simulation, equilibria, classification",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "integrate the moving-front problem and write CSV outputs"),
        ("equilibrium", "build the equilibrium bound chain"),
        ("classify", "simulate and classify the long-run regime"),
        ("sweep", "classify over a parameter grid"),
        ("eigen", "principal eigenvalue and domain-length predicate"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to JSON config")
        sp.add_argument("--out", default="out", help="output directory (default: ./out)")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
        sp.add_argument(
            "--no-figures", action="store_true", help="skip matplotlib figure rendering"
        )
        if name == "eigen":
            sp.add_argument("--l", action="append", type=float,
                            help="interval length (repeatable)")
            sp.add_argument("--eps", type=float, default=0.0,
                            help="margin subtracted from beta (default 0)")
            sp.add_argument("--beta", type=float, default=None,
                            help="driving cell level (default theta/a)")
    return parser


def _emit_error(category: str, err: Exception) -> None:
    payload = {
        "error": {
            "category": category,
            "type": type(err).__name__,
            "message": str(err),
        }
    }
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stdout,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load_config(args.config)
        figures = bool(cfg.get("figures", True)) and not args.no_figures
        if args.command == "eigen":
            return cmd_eigen(cfg, args)
        out = Path(cfg.get("out", args.out) if args.out == "out" else args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, figures)
        if args.command == "equilibrium":
            return cmd_equilibrium(cfg, out, figures)
        if args.command == "classify":
            return cmd_classify(cfg, out, figures)
        if args.command == "sweep":
            return cmd_sweep(cfg, out, figures)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as err:
        _emit_error("config", err)
        return 2
    except SolverError as err:
        _emit_error("solver", err)
        return 3


if __name__ == "__main__":
    sys.exit(main())
