"""Command-line front end: tables, sums, constants, residual scans and exports.

Exit codes: 0 ok, 1 usage, 2 resource, 3 inconsistency between routes.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, constants, oracle, summation, verify
from .constants import ConstantEstimate
from .errors import HypsumError, InconsistencyError, UsageError
from .formulas import FormulaId, parse_formula
from .sieve import STANDARD_NAMES, FunctionSpec, SetS, TableStore

OUTPUTS = ("table", "csv", "json")
CONSTANT_METHODS = ("accelerated", "direct", "both")
NAMED = (
    "gamma",
    "C_log",
    "D_log",
    "C_logkappa",
    "D_logkappa",
    "C_omega",
    "D_omega",
    "C_Omega",
    "D_Omega",
    "M",
    "K_omega",
    "K_Omega",
    "C1_tau_lcm",
    "C_divisor",
    "D_recip",
    "E_lcm",
)
ORACLE_REL = 1e-12


# --------------------------------------------------------------------------
# run configuration


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by all subcommands; file values are overridden by flags."""

    n_max: int | None = None
    grid: str | None = None
    formulas: tuple = ()
    spec: str | None = None
    S: str | None = None
    eta: float | None = None
    beta: float | None = None
    delta: float | None = None
    lambda_c: float = verify.LAMBDA_C
    output: str = "table"
    cache_dir: str | None = None

    def __post_init__(self):
        # normalise every field so that equal settings give equal text
        if self.n_max is not None:
            n = _as_int(self.n_max, "n_max")
            if n < 1:
                raise UsageError("n_max must be >= 1")
            object.__setattr__(self, "n_max", n)
        if self.grid is not None:
            object.__setattr__(self, "grid", _canonical_grid(self.grid))
        fs = self.formulas
        if isinstance(fs, str):
            fs = [t for t in fs.split(",") if t.strip()]
        object.__setattr__(self, "formulas", tuple(parse_formula(t).value for t in fs))
        if self.S is not None:
            object.__setattr__(self, "S", str(SetS.parse(str(self.S))))
        for name in ("eta", "beta", "delta", "lambda_c"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, float(v))
        if self.eta is not None and self.eta < 0:
            raise UsageError("eta must be >= 0")
        if self.lambda_c <= 0:
            raise UsageError("lambda_c must be > 0")
        if self.output not in OUTPUTS:
            raise UsageError(f"output must be one of {OUTPUTS}")
        if self.spec is not None:
            object.__setattr__(self, "spec", str(FunctionSpec.parse(self.spec)))
        self.function_spec()  # reject inconsistent spec parameters early

    def function_spec(self) -> FunctionSpec | None:
        """The f selected by --spec, or by --S/--eta, or by --beta/--delta."""
        if self.spec is not None:
            return FunctionSpec.parse(self.spec)
        if self.beta is not None or self.delta is not None:
            if self.S is not None:
                raise UsageError("give either --S/--eta or --beta/--delta, not both")
            return FunctionSpec.power_log(self.beta or 0.0, self.delta or 0.0)
        if self.S is not None:
            return FunctionSpec.s_eta(self.S, self.eta or 0.0)
        return None

    def grid_points(self) -> list | None:
        return verify.parse_grid(self.grid) if self.grid is not None else None

    def to_text(self) -> str:
        """Canonical key=value form: sorted keys, unset values omitted."""
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            v = getattr(self, f.name)
            if v is None or v == ():
                continue
            if isinstance(v, tuple):
                v = ",".join(v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> RunConfig:
        known = {f.name for f in fields(cls)}
        vals = {}
        for num, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise UsageError(f"config line {num}: expected key=value with key in {sorted(known)}")
            vals[key] = value.strip()
        return cls(**vals)

    def merged(self, **overrides) -> RunConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def store(self) -> TableStore:
        return TableStore(self.cache_dir)


def _as_int(v, name):
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise UsageError(f"{name} must be a number, got {v!r}") from None
    if not math.isfinite(f) or f != int(f):
        raise UsageError(f"{name} must be an integer, got {v!r}")
    return int(f)


def _canonical_grid(text) -> str:
    pts = verify.parse_grid(str(text))
    text = str(text).strip()
    if ":" in text:
        a, b, n = text.split(":")
        return f"{float(a):g}:{float(b):g}:{int(float(n))}"
    return ",".join(repr(p) for p in pts)


def _number(text) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


# --------------------------------------------------------------------------
# output


def _cell(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    if v is None:
        return ""
    return str(v)


def emit(rows: list, fmt: str, out, metadata: dict | None = None):
    """Write rows as an aligned table, CSV, or JSON (rows plus metadata)."""
    if fmt == "json":
        doc = {"metadata": metadata or {}, "rows": rows}
        out.write(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
        return
    cols = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    if fmt == "csv":
        for k, v in (metadata or {}).items():
            out.write(f"# {k}={_cell(v)}\n")
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(r.get(k)) for k in cols})
        out.write(buf.getvalue())
        return
    cells = [[_cell(r.get(k)) for k in cols] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(cols)]
    out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
    for row in cells:
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    for k, v in (metadata or {}).items():
        out.write(f"{k}: {_cell(v)}\n")


def _estimate_row(est: ConstantEstimate) -> dict:
    row = est.as_row()
    row["version"] = __version__
    return row


# --------------------------------------------------------------------------
# subcommands


def cmd_table(cfg: RunConfig, args, out) -> int:
    """Build (and cache) a table of f or a standard function, print its first values."""
    if cfg.n_max is None:
        raise UsageError("table needs --n-max")
    store = cfg.store()
    spec = cfg.function_spec()
    if args.name is not None:
        if args.name not in STANDARD_NAMES:
            raise UsageError(f"unknown table {args.name!r}; choose from {', '.join(STANDARD_NAMES)}")
        table = store.standard(args.name, cfg.n_max)
    else:
        spec = spec or FunctionSpec.id()
        table = store.f(spec, cfg.n_max)
    show = min(args.show, table.n_max)
    rows = [{"n": n, "value": table[n].item(), "version": __version__} for n in range(1, show + 1)]
    meta = {
        "table": table.name,
        "kind": table.kind,
        "n_max": table.n_max,
        "summatory": table.summatory(table.n_max),
        "version": __version__,
    }
    emit(rows, cfg.output, out, meta)
    return 0


def _oracle_value(F: FormulaId, spec, x):
    kind = summation.formula_kind(F)
    if kind == "gcd":
        return oracle.brute_hyperbolic("gcd_f", summation.formula_spec(F, spec), x).value
    if kind == "lcm":
        return oracle.brute_hyperbolic("lcm_f", summation.formula_spec(F, spec), x).value
    if kind == "ratio":
        return oracle.brute_hyperbolic("ratio", None, x).value
    if kind == "rect":
        name = {FormulaId.RECT_GCD: "gcd", FormulaId.RECT_LCM: "lcm", FormulaId.RECT_RATIO: "ratio"}[F]
        return oracle.brute_rectangular(name, x).value
    raise UsageError(f"no oracle for {F.value}")


def _same(a, b) -> bool:
    if isinstance(a, int) and isinstance(b, int):
        return a == b
    scale = max(abs(a), abs(b), 1.0)
    return abs(a - b) <= ORACLE_REL * scale


def cmd_sum(cfg: RunConfig, args, out) -> int:
    """Exact sum(s) at x; several routes are compared when requested."""
    forms = cfg.formulas or ("generic_gcd",)
    spec = cfg.function_spec()
    if spec is None and any(parse_formula(f).needs_spec for f in forms):
        spec = FunctionSpec.id()
    store = cfg.store()
    rows, mismatch = [], []
    for tag in forms:
        F = parse_formula(tag)
        fspec = summation.formula_spec(F, spec)
        if args.method == "all":
            methods = summation.methods_for(F, spec)
        elif args.method is None:
            methods = summation.methods_for(F, spec)[:1]
        else:
            methods = (args.method,)
        vals = []
        for m in methods:
            v = summation.exact_sum(F, args.x, spec, store, method=m)
            vals.append(v)
            rows.append(_sum_row(F, fspec, args.x, v, m))
        if args.oracle:
            v = _oracle_value(F, spec, args.x)
            vals.append(v)
            rows.append(_sum_row(F, fspec, args.x, v, "oracle"))
        if any(not _same(vals[0], v) for v in vals[1:]):
            mismatch.append(F.value)
    emit(rows, cfg.output, out, {"version": __version__})
    if mismatch:
        raise InconsistencyError(f"routes disagree for {', '.join(mismatch)}")
    return 0


def _sum_row(F, spec, x, value, method):
    exact = isinstance(value, int)
    return {
        "formula": F.value,
        "spec": str(spec) if spec is not None else "",
        "x": x,
        "value": value.item() if isinstance(value, np.generic) else value,
        # integer sums are exact; float sums carry summation rounding only
        "error_bound": 0.0 if exact else _float_sum_bound(value, x),
        "method": method,
        "version": __version__,
    }


def _float_sum_bound(value, x):
    # compensated summation over at most x log x terms
    return float(4 * constants.EPS * abs(value) * max(1.0, math.log2(max(x, 2.0))))


def _constant_by(name, method, p_max):
    if method == "accelerated":
        return constants.named_constant(name)
    return constants.direct_counterpart(name, p_max)


def cmd_constants(cfg: RunConfig, args, out) -> int:
    """Named constants, H_S/K_S, a formula's coefficients, or the printed-decimal check."""
    rows, meta = [], {"version": __version__}
    if args.check_paper:
        bad = []
        for name, printed in constants.PUBLISHED_DECIMALS.items():
            est = constants.named_constant(name)
            ok = abs(est.value - printed) <= 1e-6
            bad += [] if ok else [name]
            row = _estimate_row(est)
            row.update(printed=f"{printed:.6f}", deviation=f"{abs(est.value - printed):.3e}", ok=ok)
            rows.append(row)
        meta["tolerance"] = 1e-6
        meta["result"] = "pass" if not bad else "fail"
        emit(rows, cfg.output, out, meta)
        if bad:
            raise InconsistencyError(f"printed decimals not reproduced: {', '.join(bad)}")
        return 0
    if cfg.formulas:
        spec = cfg.function_spec()
        for tag in cfg.formulas:
            rows += [_estimate_row(e) for e in constants.coefficient_estimates(tag, spec)]
        emit(rows, cfg.output, out, meta)
        return 0
    names = args.name or list(NAMED)
    for name in names:
        if name in ("H_S", "K_S"):
            rows.append(_estimate_row(_hs_ks_estimate(name, cfg, args)))
            continue
        if name not in NAMED:
            raise UsageError(f"unknown constant {name!r}; choose from {', '.join(NAMED + ('H_S', 'K_S'))}")
        if args.method == "both":
            a = _constant_by(name, "accelerated", args.p_max)
            d = _constant_by(name, "direct", args.p_max)
            rows += [_estimate_row(a), _estimate_row(d)]
            if not a.agrees(d):
                emit(rows, cfg.output, out, meta)
                raise InconsistencyError(f"{name}: routes disagree beyond their bounds")
        else:
            rows.append(_estimate_row(_constant_by(name, args.method, args.p_max)))
    emit(rows, cfg.output, out, meta)
    return 0


def _hs_ks_estimate(name, cfg, args) -> ConstantEstimate:
    if args.p is None:
        raise UsageError(f"{name} needs --p")
    S = SetS.parse(cfg.S or "1")
    H, K = constants.hs_ks(args.p, S)
    v = H if name == "H_S" else K
    label = f"{name}(p={args.p:g};S={S})"
    # closed forms; the bound covers a few roundings per term
    return ConstantEstimate(label, v, 16 * constants.EPS * abs(v), "composite")


def cmd_verify(cfg: RunConfig, args, out) -> int:
    """Residual scan per formula; with --fit, fitted constants and their stability."""
    if not cfg.formulas:
        raise UsageError("verify needs --formula")
    spec = cfg.function_spec()
    grid = cfg.grid_points()
    store = cfg.store()
    for i, tag in enumerate(cfg.formulas):
        F = parse_formula(tag)
        if i:
            out.write("\n")
        fitted = None
        fit_rows = []
        if args.fit:
            model = verify.build_model(F, spec)
            if model.fit_keys:
                rep = verify.fit_parameters(F, grid, spec, store)
                fitted = rep.values
                fit_rows = rep.rows()
        report = verify.residual_scan(F, grid, spec, cfg.lambda_c, fitted=fitted, store=store)
        _emit_report(report, fit_rows, cfg.output, out)
    return 0


def _emit_report(report, fit_rows, fmt, out):
    meta = report.summary()
    if fit_rows:
        meta["stability_tolerance"] = verify.FIT_STABILITY
        meta["stable"] = all(r["rel_diff"] <= verify.FIT_STABILITY for r in fit_rows)
    if fmt == "json":
        meta["constants"] = report.constants
        meta["fit"] = fit_rows
        emit(report.rows(), fmt, out, meta)
        return
    emit(report.rows(), fmt, out, meta)
    if fit_rows:
        out.write("\n")
        emit(fit_rows, fmt, out)
    out.write("\n")
    emit([dict(r, version=__version__) for r in report.constants], fmt, out)


def cmd_export(cfg: RunConfig, args, out) -> int:
    """Write one residual report per formula into a directory (CSV or JSON)."""
    if not cfg.formulas:
        raise UsageError("export needs --formula")
    fmt = "json" if cfg.output == "json" else "csv"
    target = Path(args.out)
    target.mkdir(parents=True, exist_ok=True)
    spec = cfg.function_spec()
    grid = cfg.grid_points()
    store = cfg.store()
    written = []
    for tag in cfg.formulas:
        F = parse_formula(tag)
        fitted = None
        if verify.build_model(F, spec).fit_keys:
            fitted = verify.fit_parameters(F, grid, spec, store).values
        report = verify.residual_scan(F, grid, spec, cfg.lambda_c, fitted=fitted, store=store)
        path = target / f"{F.value}.{fmt}"
        path.write_text(report.to_json() + "\n" if fmt == "json" else report.to_csv())
        written.append({"formula": F.value, "path": str(path), "points": len(report.grid), "version": __version__})
    emit(written, "table" if cfg.output == "table" else cfg.output, out)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _common(p):
    p.add_argument("--config", help="key=value file; flags override its values")
    p.add_argument("--formula", action="append", help="formula tag (repeatable or comma list)")
    p.add_argument("--spec", help="function spec, e.g. tau, powerlog:0.5,1, seta:1,from:3;2")
    p.add_argument("--S", dest="S", help="set S as a comma list, e.g. 1,3,from:5 or all")
    p.add_argument("--eta", type=_number)
    p.add_argument("--beta", type=_number)
    p.add_argument("--delta", type=_number)
    p.add_argument("--grid", help="start:stop:points (geometric) or a comma list")
    p.add_argument("--lambda-c", type=_number, dest="lambda_c")
    p.add_argument("--n-max", dest="n_max", type=_number)
    p.add_argument("--output", choices=OUTPUTS)
    p.add_argument("--cache-dir", dest="cache_dir", help="table cache (default: $HYPSUM_CACHE)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypsum", description="Hyperbolic gcd/lcm sums and their asymptotics.")
    parser.add_argument("--version", action="version", version=f"hypsum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", help="build and cache a value table")
    _common(p)
    p.add_argument("--name", help="standard table name (default: the chosen spec)")
    p.add_argument("--show", type=int, default=20, help="number of leading values to print")
    p.set_defaults(handler=cmd_table)

    p = sub.add_parser("sum", help="exact sum at x")
    _common(p)
    p.add_argument("--x", type=_number, required=True)
    p.add_argument("--method", help="summation route, or 'all' to compare every route")
    p.add_argument("--oracle", action="store_true", help="cross-check with the brute-force reference")
    p.set_defaults(handler=cmd_sum)

    p = sub.add_parser("constants", help="constants with error bounds")
    _common(p)
    p.add_argument("--name", action="append", help="constant name (repeatable)")
    p.add_argument("--method", choices=CONSTANT_METHODS, default="accelerated")
    p.add_argument("--p", type=_number, help="prime for H_S / K_S")
    p.add_argument("--p-max", dest="p_max", type=int, default=constants.DEFAULT_P_MAX)
    p.add_argument("--check-paper", action="store_true", help="compare with the six published decimals")
    p.set_defaults(handler=cmd_constants)

    p = sub.add_parser("verify", help="residual scan against the error envelope")
    _common(p)
    p.add_argument("--fit", action="store_true", help="fit the coefficients that are not derived")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("export", help="write residual reports to a directory")
    _common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_export)
    return parser


def config_from_args(args) -> RunConfig:
    base = RunConfig()
    if args.config:
        try:
            base = RunConfig.from_text(Path(args.config).read_text())
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
    forms = None
    if args.formula:
        forms = tuple(t for item in args.formula for t in item.split(",") if t.strip())
    cache = args.cache_dir or os.environ.get("HYPSUM_CACHE") or None
    return base.merged(
        n_max=args.n_max,
        grid=args.grid,
        formulas=forms,
        spec=args.spec,
        S=args.S,
        eta=args.eta,
        beta=args.beta,
        delta=args.delta,
        lambda_c=args.lambda_c,
        output=args.output,
        cache_dir=cache,
    )


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    try:
        cfg = config_from_args(args)
        return args.handler(cfg, args, out)
    except HypsumError as e:
        print(f"hypsum: error: {e}", file=sys.stderr)
        return e.exit_code
    except MemoryError:
        print("hypsum: error: out of memory", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
