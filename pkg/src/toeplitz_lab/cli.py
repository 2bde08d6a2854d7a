"""Command-line front end: ``toeplitz-lab <subcommand> --config cfg.json --out dir``.

Each subcommand reads a JSON config, validates it against a schema that
rejects unknown fields, runs the experiment and writes CSV and/or JSON
artifacts. JSON outputs are deterministic for a fixed config and seed; the
wall-clock timestamp lives only in ``manifest.json``.

Exit codes: 0 success, 2 configuration or parameter error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ParameterError, TheoremInapplicableError, ToeplitzLabError
from .spectral_models import LINE, density_from_dict

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(Exception):
    """Invalid or unreadable configuration."""


# ---------------------------------------------------------------------------
# schemas
# ---------------------------------------------------------------------------

_DENSITY = {
    "type": "object",
    "properties": {
        "kind": {"type": "string"},
        "params": {"type": "object"},
        "domain": {"enum": ["circle", "line"]},
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_GRID = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_TOLERANCES = {"type": "object", "additionalProperties": {"type": "number"}}


def _schema(properties, required=()):
    props = {"experiment": {"type": "string"}, "tolerances": _TOLERANCES}
    props.update(properties)
    return {
        "type": "object",
        "properties": props,
        "required": list(required),
        "additionalProperties": False,
    }


_TRACE_PROPS = {
    "model_id": {"type": "string"},
    "models": {"type": "array", "items": _DENSITY, "minItems": 1},
    "exponents": {"type": "array", "items": {"enum": [1, -1]}},
    "grid": _GRID,
    "method": {"enum": ["auto", "dense", "fastm2", "fft", "exact", "nystrom"]},
}

SCHEMAS = {
    "trace-approx": _schema(_TRACE_PROPS, ("models", "grid")),
    "rate-fit": _schema(
        dict(_TRACE_PROPS, theorem={"type": "string"}, p={"type": "array", "items": {"type": "number"}}),
        ("models",),
    ),
    "second-order": _schema(
        {
            "kind": {"enum": ["discrete", "continuous"]},
            "params": {
                "type": "object",
                "properties": {
                    k: {"type": "number"}
                    for k in ("d1", "d2", "sigma2_1", "sigma2_2", "alpha1", "alpha2", "beta1", "beta2", "C1", "C2")
                },
                "additionalProperties": False,
            },
            "grid": _GRID,
        },
        ("kind", "params", "grid"),
    ),
    "clt-sim": _schema(
        {
            "f": _DENSITY,
            "g": _DENSITY,
            "T": {"type": "integer", "minimum": 2},
            "replicates": {"type": "integer", "minimum": 2},
            "seed": _SEED,
            "z": {"type": "array", "items": {"type": "number"}},
        },
        ("f", "g", "T"),
    ),
    "ldp": _schema(
        {
            "f": _DENSITY,
            "g": _DENSITY,
            "x": {
                "oneOf": [
                    {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    {
                        "type": "object",
                        "properties": {
                            "start": {"type": "number"},
                            "stop": {"type": "number"},
                            "num": {"type": "integer", "minimum": 1},
                        },
                        "required": ["start", "stop", "num"],
                        "additionalProperties": False,
                    },
                ]
            },
            "normalization": {"enum": ["formula", "matrix"]},
        },
        ("f", "g", "x"),
    ),
    "kernel-check": _schema({"T": _GRID, "full": {"type": "boolean"}}),
}

DEFAULT_REPLICATES = 10000


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the last key on a schema-error path."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = json.dumps(keys[-1])
    pos = text.find(needle)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def load_config(command: str, path: str | None) -> dict:
    """Read and validate a config file; a missing path yields ``{}``."""
    if path is None:
        text = "{}"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            extra_path = list(err.absolute_path)
            if err.validator == "additionalProperties":
                extra = [k for k in err.instance if k not in err.schema.get("properties", {})]
                extra_path += extra[:1]
            line = _line_of(text, extra_path)
            loc = f"line {line}: " if line else ""
            lines.append(f"{loc}{where}: {err.message}")
        raise ConfigError("schema validation failed:\n  " + "\n  ".join(lines))
    exp = cfg.get("experiment")
    if exp is not None and exp != command:
        raise ConfigError(f"config is for {exp!r}, not {command!r}")
    return cfg


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def dumps_csv(fields, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([_csv_cell(row[k]) for k in fields])
    return buf.getvalue()


def _csv_cell(v):
    v = _plain(v)
    return repr(v) if isinstance(v, float) else v


class Writer:
    """Collects artifacts and writes them to the output directory."""

    def __init__(self, out: Path, fmt: str, command: str):
        self.out = out
        self.fmt = fmt
        self.command = command
        self.files = []

    def table(self, name, fields, rows):
        if self.fmt in ("csv", "both"):
            self._write(f"{name}.csv", dumps_csv(fields, rows))

    def document(self, name, payload):
        if self.fmt in ("json", "both"):
            body = {"schema_version": SCHEMA_VERSION, "command": self.command}
            body.update(payload)
            self._write(f"{name}.json", dumps_json(body))

    def plot(self, name, fields, rows):
        # plot data is always CSV
        self._write(f"{name}.csv", dumps_csv(fields, rows))

    def _write(self, name, text):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text, newline="")
        self.files.append(name)

    def manifest(self, argv):
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "argv": list(argv),
            "files": sorted(self.files),
            "version": __version__,
            "timestamp": stamp,
        }
        (self.out / "manifest.json").write_text(dumps_json(payload))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _densities(cfg, key="models"):
    try:
        return [density_from_dict(obj) for obj in cfg[key]]
    except (ParameterError, KeyError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _density(cfg, key):
    try:
        return density_from_dict(cfg[key])
    except (ParameterError, KeyError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _trace_spec(cfg):
    from .toeplitz_continuous import OperatorTraceSpec
    from .toeplitz_discrete import TraceSpec

    gens = _densities(cfg)
    model_id = cfg.get("model_id", "")
    try:
        if all(h.domain == LINE for h in gens):
            if any(t != 1 for t in cfg.get("exponents", ())):
                raise ParameterError("operator traces take no inverse factors")
            return OperatorTraceSpec(tuple(gens), model_id)
        return TraceSpec(tuple(gens), tuple(cfg.get("exponents", ())), model_id)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def _rows(spec, grid, method, threads):
    from .toeplitz_continuous import OperatorTraceSpec, operator_rows
    from .toeplitz_discrete import trace_rows

    if isinstance(spec, OperatorTraceSpec):
        return operator_rows(spec, grid, method)
    if any(float(T) != int(T) for T in grid):
        raise ConfigError("discrete traces need integer T")
    return trace_rows(spec, [int(T) for T in grid], method, workers=threads)


def cmd_trace_approx(cfg, args, writer):
    from .toeplitz_discrete import ExperimentRow

    spec = _trace_spec(cfg)
    rows = _rows(spec, cfg["grid"], cfg.get("method", "auto"), args.threads)
    dicts = [r.as_dict() for r in rows]
    writer.table("trace-approx", ExperimentRow.FIELDS, dicts)
    writer.document("trace-approx", {"config": cfg, "rows": dicts})
    deltas = [r.delta for r in rows]
    return f"{spec.model_id}: {len(rows)} rows, M = {rows[0].M:.12g}, max Delta = {max(deltas):.3e}"


def cmd_rate_fit(cfg, args, writer):
    from .rate_lab import CONTINUOUS_GRID, DISCRETE_GRID, run_rate_experiment
    from .toeplitz_continuous import OperatorTraceSpec
    from .toeplitz_discrete import ExperimentRow

    spec = _trace_spec(cfg)
    continuous = isinstance(spec, OperatorTraceSpec)
    grid = cfg.get("grid", CONTINUOUS_GRID if continuous else DISCRETE_GRID)
    if not continuous and any(float(T) != int(T) for T in grid):
        raise ConfigError("discrete traces need integer T")
    rows = []
    fit = run_rate_experiment(spec, grid, cfg.get("theorem", ""), cfg.get("p"), cfg.get("method", "auto"), rows)
    writer.table("rate-fit", ExperimentRow.FIELDS, [r.as_dict() for r in rows])
    writer.document("rate-fit", {"config": cfg, "fit": fit.as_dict()})
    gamma = "none" if fit.theoretical_gamma is None else f"{fit.theoretical_gamma:.4g}"
    return (
        f"{fit.model_id}: slope {fit.fitted_slope:.4f} +/- {fit.slope_stderr:.4f}, "
        f"predicted -{gamma}, verdict {fit.verdict}"
    )


def cmd_second_order(cfg, args, writer):
    from .rate_lab import SecondOrderRow, run_second_order_experiment

    table = run_second_order_experiment(cfg["kind"], cfg["params"], cfg["grid"])
    dicts = [r.as_dict() for r in table.rows]
    writer.table("second-order", SecondOrderRow.FIELDS, dicts)
    writer.document(
        "second-order",
        {"config": cfg, "rows": dicts, "decreasing": table.decreasing, "reduction": table.reduction},
    )
    return f"{cfg['kind']}: normalized residual reduced {table.reduction:.3f}x, decreasing = {table.decreasing}"


def cmd_clt_sim(cfg, args, writer):
    from .quadratic_forms import QuadraticFormSpec, berry_esseen_limit, clt_monte_carlo
    from scipy import stats

    f, g = _density(cfg, "f"), _density(cfg, "g")
    seed = cfg.get("seed", 0) if args.seed is None else args.seed
    replicates = cfg.get("replicates", DEFAULT_REPLICATES)
    try:
        spec = QuadraticFormSpec(f, g, cfg["T"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    study = clt_monte_carlo(spec, replicates, seed)
    z = np.asarray(cfg.get("z", np.linspace(-3, 3, 61)), dtype=float)
    scaled = np.sort(study.samples / study.samples.std(ddof=1))
    ecdf = np.searchsorted(scaled, z, side="right") / scaled.size
    gap = math.sqrt(spec.T) * (ecdf - stats.norm.cdf(z))
    try:
        limit = berry_esseen_limit(f, g, z)
    except ToeplitzLabError:
        limit = np.full_like(z, np.nan)
    curve = [{"z": a, "empirical_gap": b, "be3_limit": c} for a, b, c in zip(z, gap, limit)]
    writer.plot("clt-sim-gap", ("z", "empirical_gap", "be3_limit"), curve)
    summary = study.summary()
    summary["spec"] = {"f": cfg["f"], "g": cfg["g"], "T": spec.T}
    summary["verdicts"] = {"ks_below_0.02": study.ks_distance < 0.02}
    writer.document("clt-sim", summary)
    writer.table(
        "clt-sim",
        ("seed", "R", "T", "mean", "variance", "sigma0_sq", "chi2_T", "ks"),
        [{
            "seed": seed, "R": replicates, "T": spec.T, "mean": study.mean, "variance": study.variance,
            "sigma0_sq": study.sigma0_sq, "chi2_T": study.chi2_T, "ks": study.ks_distance,
        }],
    )
    return (
        f"variance {study.variance:.4f} (sigma0^2 = {study.sigma0_sq:.4f}, chi2_T = {study.chi2_T:.4f}), "
        f"KS {study.ks_distance:.4f}, seed {seed}"
    )


def cmd_ldp(cfg, args, writer):
    from .quadratic_forms import ldp_cgf, ldp_rate_function

    f, g = _density(cfg, "f"), _density(cfg, "g")
    xs = cfg["x"]
    if isinstance(xs, dict):
        xs = np.linspace(xs["start"], xs["stop"], xs["num"])
    norm = cfg.get("normalization", "formula")
    try:
        table = ldp_rate_function(f, g, xs, normalization=norm)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    ys = np.linspace(-table.y_max, table.y_max, 41)[:-1]
    vs = ldp_cgf(f, g, ys, normalization=norm)
    rows = [{"x": x, "rate": r} for x, r in zip(table.x, table.rate)]
    writer.table("ldp", ("x", "rate"), rows)
    writer.plot("ldp-cgf", ("y", "V"), [{"y": y, "V": v} for y, v in zip(ys, np.atleast_1d(vs))])
    writer.document(
        "ldp",
        {"config": cfg, "rows": rows, "mean": table.mean, "sup_fg": table.sup_fg, "y_max": table.y_max},
    )
    at_mean = ldp_rate_function(f, g, [table.mean], normalization=norm).rate[0]
    return f"mean {table.mean:.6g}, sup fg {table.sup_fg:.6g}, I(mean) = {at_mean:.2e}"


def cmd_kernel_check(cfg, args, writer):
    from .kernels import kernel_checks

    Ts = cfg.get("T", (10.0, 100.0, 1000.0, 10000.0))
    checks = kernel_checks(Ts, full=cfg.get("full", True))
    dicts = [c.as_dict() for c in checks]
    fields = ("name", "passed", "achieved", "tolerance", "detail")
    writer.table("kernel-check", fields, dicts)
    writer.document("kernel-check", {"config": cfg, "checks": dicts, "all_passed": all(c.passed for c in checks)})
    width = max(len(c.name) for c in checks)
    lines = [
        f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}  achieved {c.achieved:.3e}  tol {c.tolerance:.3e}"
        for c in checks
    ]
    return "\n".join(lines)


COMMANDS = {
    "trace-approx": cmd_trace_approx,
    "rate-fit": cmd_rate_fit,
    "second-order": cmd_second_order,
    "clt-sim": cmd_clt_sim,
    "ldp": cmd_ldp,
    "kernel-check": cmd_kernel_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toeplitz-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=None, help="PRNG seed, overrides the config")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
        p.add_argument("--format", choices=("csv", "json", "both"), default="both")
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    writer = Writer(Path(args.out), args.format, args.command)
    try:
        cfg = load_config(args.command, args.config)
        summary = COMMANDS[args.command](copy.deepcopy(cfg), args, writer)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, TheoremInapplicableError) as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ToeplitzLabError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    writer.manifest(argv)
    print(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
