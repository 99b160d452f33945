"""Command-line entry point.

Every subcommand reads an optional JSON config, lets flags override it,
writes JSON/CSV artifacts into ``--out`` and prints one summary line. Each
artifact carries the resolved config (JSON reports under ``"config"``, CSV
tables in a ``.json`` sidecar). Exit codes: 0 success, 1 input error,
2 constraint or feasibility error, 64 unknown subcommand.
"""

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONSTRAINT = 2
EXIT_USAGE = 64

WORKERS_ENV = "FRACTAL_RIESZ_WORKERS"


class InputError(ValueError):
    """Bad command line or config."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return obj.value
    return obj


def _write_json(path, payload):
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_table(out, name, header, rows, fmt, config):
    """Write a table as CSV (plus a config sidecar) or as one JSON document."""
    if fmt == "json":
        path = out / f"{name}.json"
        _write_json(path, {"config": config, "columns": header, "rows": rows})
        return path
    path = out / f"{name}.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    _write_json(out / f"{name}.json", {"config": config, "columns": header})
    return path


def _load_config(args):
    cfg = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise InputError(f"config file not found: {path}")
        try:
            cfg = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
        cfg["_base_dir"] = str(path.parent)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    return cfg


def _base(cfg):
    return Path(cfg.get("_base_dir", "."))


def _resolved(cfg, args):
    out = {k: v for k, v in cfg.items() if not k.startswith("_")}
    out["workers"] = args.workers
    return out


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise InputError(f"config is missing keys: {missing}")


def _field_from_cfg(cfg, key="field_csv"):
    from .measures import SampledField

    _require(cfg, key)
    return SampledField.from_csv(_base(cfg) / cfg[key])


# ------------------------------------------------------------ subcommands


def cmd_simulate(args, cfg, out):
    from .fields import FieldSpec, make_bridge, sample_fbf

    for key in ("H", "k", "n", "m", "seeds"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    _require(cfg, "H")
    cfg.setdefault("k", 1)
    cfg.setdefault("n", 1)
    cfg.setdefault("m", 1025)
    cfg.setdefault("seeds", 1)
    cfg.setdefault("bridge", False)
    config = _resolved(cfg, args)
    spec = FieldSpec(float(cfg["H"]), int(cfg["k"]), int(cfg["n"]), int(cfg["m"]), int(cfg["seed"]))
    count = int(cfg["seeds"])
    if count < 1:
        raise InputError("seeds must be >= 1")
    width = max(4, len(str(count - 1)))
    for i in range(count):
        path_ = sample_fbf(spec, i)
        if cfg["bridge"]:
            path_ = make_bridge(path_, spec.H)
        path_.meta.update({"path_index": i, "config": config})
        name = f"path_{i:0{width}d}"
        if args.format == "json":
            _write_json(out / f"{name}.json", {"config": config, "path_index": i,
                                               "params": path_.params(), "values": path_.points()})
        else:
            path_.to_csv(out / f"{name}.csv")
    _write_json(out / "metadata.json", {"config": config, "count": count,
                                        "backend": path_.meta.get("backend")})
    return f"simulate: wrote {count} paths (H={spec.H}, k={spec.k}, n={spec.n}, m={spec.m}) to {out}"


def _measure_from_cfg(cfg, key_csv, key_field):
    from .measures import DiscreteMeasure, occupation_measure

    if cfg.get(key_csv):
        return DiscreteMeasure.from_csv(_base(cfg) / cfg[key_csv])
    if cfg.get(key_field):
        return occupation_measure(_field_from_cfg(cfg, key_field))
    raise InputError(f"config needs {key_csv} or {key_field}")


def cmd_energy(args, cfg, out):
    from .measures import Diagonal, mutual_energy, self_energy

    _require(cfg, "alpha")
    mu = _measure_from_cfg(cfg, "measure_csv", "field_csv")
    alpha = float(cfg["alpha"])
    if cfg.get("other_measure_csv") or cfg.get("other_field_csv"):
        nu = _measure_from_cfg(cfg, "other_measure_csv", "other_field_csv")
        value = mutual_energy(mu, nu, alpha)
        kind = "mutual"
    else:
        diag = Diagonal(cfg.get("diagonal", Diagonal.EXCLUDE.value))
        cfg["diagonal"] = diag.value
        value = self_energy(mu, alpha, diag)
        kind = "self"
    config = _resolved(cfg, args)
    _write_json(out / "energy.json", {"config": config, "kind": kind, "energy": value,
                                      "atoms": len(mu), "mass": mu.mass})
    return f"energy: {kind} energy {value:.10g} over {len(mu)} atoms"


def cmd_potential(args, cfg, out):
    from .measures import bessel_potential, riesz_potential

    _require(cfg, "alpha", "points_csv")
    mu = _measure_from_cfg(cfg, "measure_csv", "field_csv")
    pts = np.loadtxt(_base(cfg) / cfg["points_csv"], delimiter=",", skiprows=1, ndmin=2)[:, : mu.n]
    kernel = cfg.setdefault("kernel", "riesz")
    if kernel == "riesz":
        U = riesz_potential(mu, pts, float(cfg["alpha"]))
    elif kernel == "bessel":
        U = bessel_potential(mu, pts, float(cfg["alpha"]))
    else:
        raise InputError(f"unknown kernel {kernel!r}; use riesz or bessel")
    config = _resolved(cfg, args)
    header = [f"x_{i + 1}" for i in range(mu.n)] + ["potential"]
    rows = [list(p) + [float(u)] for p, u in zip(pts, U)]
    _write_table(out, "potential", header, rows, args.format, config)
    return f"potential: {len(rows)} points, sup {float(np.max(U)):.10g}"


def cmd_minimize(args, cfg, out):
    from .minimize import MinimizeOptions, ProblemSpec, minimize
    from .witness import feasible_init

    problem_cfg = cfg.get("problem", {k: v for k, v in cfg.items()
                                      if k not in ("options", "seed", "init_csv") and not k.startswith("_")})
    problem = ProblemSpec.from_dict(problem_cfg, base_dir=_base(cfg))
    opts = dict(cfg.get("options", {}))
    opts.setdefault("seed", int(cfg["seed"]))
    options = MinimizeOptions(**opts)
    if cfg.get("init_csv"):
        init = _field_from_cfg(cfg, "init_csv")
    else:
        init = feasible_init(problem, seed=int(cfg["seed"]))
    result = minimize(problem, init, options)
    config = _resolved(cfg, args)
    config["options"] = {k: getattr(options, k) for k in options.__dataclass_fields__}
    payload = result.to_dict()
    payload["config"] = config
    payload["problem"] = problem.to_dict()
    _write_json(out / "result.json", payload)
    result.field.meta["config"] = config
    result.field.to_csv(out / "field.csv")
    _write_table(out, "trace", ["iteration", "objective", "violation"],
                 [list(t) for t in result.trace], "csv", config)
    rep = result.constraint_report
    if not rep.get("feasible", False):
        raise _ConstraintFailure(
            f"minimize: result infeasible (holder {rep.get('holder_seminorm')})"
        )
    return (f"minimize: {problem.objective.value} {result.init_objective:.6g} -> "
            f"{result.objective_value:.6g}, holder {rep['holder_seminorm']:.10g}, feasible")


class _ConstraintFailure(RuntimeError):
    pass


def cmd_dimension(args, cfg, out):
    from .analysis import box_dimension

    if cfg.get("field_csv"):
        pts = _field_from_cfg(cfg).points()
    elif cfg.get("points_csv"):
        pts = np.loadtxt(_base(cfg) / cfg["points_csv"], delimiter=",", skiprows=1, ndmin=2)
    else:
        raise InputError("config needs field_csv or points_csv")
    cfg.setdefault("polyline", False)
    res = box_dimension(pts, scales=cfg.get("scales"), polyline=bool(cfg["polyline"]),
                        min_window=int(cfg.get("min_window", 4)))
    config = _resolved(cfg, args)
    _write_json(out / "dimension.json", {"config": config, **res.to_dict()})
    rows = [[float(s), int(c)] for s, c in zip(res.scales, res.counts)]
    _write_table(out, "box_counts", ["scale", "count"], rows, args.format, config)
    flag = " (degenerate)" if res.degenerate else ""
    return f"dimension: estimate {res.estimate:.4f}, R^2 {res.r_squared:.4f}{flag}"


def cmd_moduli(args, cfg, out):
    from .analysis import bdpot_diagnostic, oscillation_moduli

    _require(cfg, "h_values", "kappa_plus", "kappa_minus")
    field_ = _field_from_cfg(cfg)
    rep = oscillation_moduli(field_, cfg["h_values"], float(cfg["kappa_plus"]), float(cfg["kappa_minus"]))
    config = _resolved(cfg, args)
    payload = {"config": config, "moduli": rep.to_dict()}
    if cfg.get("alpha") is not None:
        payload["potential_diagnostic"] = bdpot_diagnostic(
            field_, float(cfg["alpha"]), float(cfg["kappa_minus"]), cfg["h_values"]).to_dict()
    _write_json(out / "moduli.json", payload)
    return f"moduli: {len(cfg['h_values'])} scales evaluated"


def cmd_constants(args, cfg, out):
    from .constants import constants_table

    if args.grid:
        path = Path(args.grid)
        if not path.exists():
            raise InputError(f"grid file not found: {path}")
        grid = json.loads(path.read_text(encoding="utf-8"))
        cfg["grid"] = grid
    _require(cfg, "grid")
    grid = dict(cfg["grid"])
    M = grid.pop("M", None)
    reports = constants_table(grid)
    params = sorted({k for r in reports for k in r.inputs})
    header = ["name"] + params + ["value", "method", "error_estimate", "violated"]
    if M is not None:
        header.append("event_probability_bound")
    rows = []
    for rep in reports:
        row = [rep.name] + [rep.inputs.get(p, "") for p in params]
        row += [float(rep.value), rep.method, float(rep.error_estimate), rep.violated or ""]
        if M is not None:
            # Markov: P(A0(M)) >= 1 - M0 / M
            row.append(max(0.0, 1.0 - rep.value / float(M)) if rep.name == "M0" else "")
        rows.append(row)
    config = _resolved(cfg, args)
    _write_table(out, "constants", header, rows, args.format, config)
    bad = sum(1 for r in reports if r.violated)
    return f"constants: {len(reports)} reports ({bad} inadmissible) written to {out}"


def _phi_from_cfg(cfg):
    from .composition import BVGridFunction

    spec = cfg.get("phi")
    if isinstance(spec, str):
        return BVGridFunction.from_csv(_base(cfg) / spec)
    if not isinstance(spec, dict):
        raise InputError("config needs phi (grid CSV path or a shape description)")
    kind = spec.get("kind")
    box = (spec.get("lower", [-2.0, -2.0]), spec.get("upper", [2.0, 2.0]))
    shape = spec.get("shape", [64, 64])
    if kind == "disc":
        return BVGridFunction.disc_indicator(spec["center"], spec["radius"], *box, shape)
    if kind == "square":
        return BVGridFunction.square_indicator(spec["lo"], spec["hi"], *box, shape)
    raise InputError(f"unknown phi kind {kind!r}; use disc, square or a CSV path")


def _u_from_cfg(cfg):
    from .fields import FieldSpec, sample_fbf

    spec = cfg.get("u")
    if isinstance(spec, str):
        cfg["field_csv"] = spec
        return _field_from_cfg(cfg)
    if isinstance(spec, dict) and spec.get("kind") == "fbm":
        return sample_fbf(FieldSpec(float(spec["H"]), 1, int(spec.get("n", 2)),
                                    int(spec.get("m", 1025)), int(cfg["seed"])))
    raise InputError("config needs u (field CSV path or {kind: fbm, H, n, m})")


def cmd_compose_verify(args, cfg, out):
    from .composition import CompositionParams, verify_main_estimate

    _require(cfg, "params")
    params = CompositionParams(**{k: float(v) for k, v in cfg["params"].items()})
    phi = _phi_from_cfg(cfg)
    u = _u_from_cfg(cfg)
    rep = verify_main_estimate(phi, u, params)
    config = _resolved(cfg, args)
    _write_json(out / "compose_report.json", {"config": config, **rep})
    return f"compose-verify: ratio {rep['ratio']:.6g} (lhs {rep['lhs']:.6g})"


def cmd_witness(args, cfg, out):
    from .analysis import box_dimension
    from .minimize import ProblemSpec
    from .witness import KochSpec, biholder_constants, feasible_init, koch_curve

    kind = cfg.setdefault("kind", "koch")
    if kind == "koch":
        _require(cfg, "gamma", "level")
        spec = KochSpec(float(cfg["gamma"]), int(cfg["level"]))
        field_ = koch_curve(spec)
        lo, hi = biholder_constants(field_, spec.gamma)
        dim = box_dimension(field_.points(), polyline=True)
        report = {"biholder_min": lo, "biholder_max": hi, "box_dimension": dim.to_dict()}
    elif kind == "fbf":
        problem = ProblemSpec.from_dict(cfg["problem"], base_dir=_base(cfg))
        field_ = feasible_init(problem, seed=int(cfg["seed"]))
        report = {"raw_holder": field_.meta["raw_holder"], "H": field_.meta["H"]}
    else:
        raise InputError(f"unknown witness kind {kind!r}; use koch or fbf")
    config = _resolved(cfg, args)
    field_.meta["config"] = config
    field_.to_csv(out / "witness.csv")
    _write_json(out / "witness_report.json", {"config": config, **report})
    return f"witness: {kind} with {field_.points().shape[0]} points written to {out}"


COMMANDS = {
    "simulate": (cmd_simulate, "sample fractional Brownian fields or bridges"),
    "energy": (cmd_energy, "self or mutual Riesz energy of a measure"),
    "potential": (cmd_potential, "Riesz or Bessel potential at points"),
    "minimize": (cmd_minimize, "Holder-constrained energy minimization"),
    "dimension": (cmd_dimension, "box-counting dimension of an image"),
    "moduli": (cmd_moduli, "oscillation moduli and potential diagnostic"),
    "constants": (cmd_constants, "table of explicit constants over a grid"),
    "compose-verify": (cmd_compose_verify, "check the composition estimate on an instance"),
    "witness": (cmd_witness, "Koch or fractional Brownian feasibility witness"),
}


def build_parser():
    parser = _Parser(prog="fractal-riesz", description="Riesz energies of fractal fields.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument("--seed", type=int, help="base seed (overrides config)")
        p.add_argument("--workers", type=int, help=f"worker count (fallback: ${WORKERS_ENV})")
        p.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
        if name == "simulate":
            p.add_argument("--H", type=float)
            p.add_argument("--k", type=int)
            p.add_argument("--n", type=int)
            p.add_argument("--m", type=int)
            p.add_argument("--seeds", type=int, help="number of paths")
        if name == "constants":
            p.add_argument("action", nargs="?", choices=("table",), default="table")
            p.add_argument("--grid", help="JSON parameter grid")
    return parser


def _resolve_workers(value):
    if value is None:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise InputError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        else:
            value = 1
    if value < 1:
        raise InputError("--workers must be >= 1")
    # recorded in every artifact; the numerical kernels are single-threaded,
    # so results do not depend on it
    return value


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"fractal-riesz: unknown subcommand {argv[0]!r}\n")
        return EXIT_USAGE
    from .composition import CompositionError, ParameterGateError
    from .minimize import InfeasibleProblemError, ProjectionError

    try:
        args = parser.parse_args(argv)
        if args.command is None:
            sys.stderr.write(parser.format_usage())
            return EXIT_USAGE
        args.workers = _resolve_workers(args.workers)
        cfg = _load_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        func = COMMANDS[args.command][0]
        print(func(args, cfg, out))
        return EXIT_OK
    except (InfeasibleProblemError, ProjectionError, CompositionError, ParameterGateError,
            _ConstraintFailure) as exc:
        sys.stderr.write(f"fractal-riesz: {exc}\n")
        return EXIT_CONSTRAINT
    except (InputError, ValueError, KeyError, TypeError, OSError) as exc:
        sys.stderr.write(f"fractal-riesz: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
