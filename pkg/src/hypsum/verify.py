"""Main-term models, residual scans against error envelopes, and fits of implicit constants.

A model is a list of (basis, coefficient) pairs. Coefficients are either
derived ConstantEstimates carrying an error bound, or fit-only placeholders
that must be filled by :func:`fit_parameters` before the model can be used.
A residual scan compares exact sums with the model on a grid and normalises
by the formula's error envelope, whose implied constant is unknown; what is
tested is that the normalised residual does not grow along the grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__, constants, summation
from .constants import ConstantEstimate
from .errors import ConditioningError, DomainError, StateError, UsageError
from .formulas import FormulaId, parse_formula
from .sieve import FunctionSpec

__all__ = [
    "FormulaId",
    "Envelope",
    "MainTermModel",
    "ResidualReport",
    "FitReport",
    "envelope_eval",
    "envelope_for",
    "build_model",
    "main_term",
    "residual_scan",
    "fit_parameters",
    "growth_exponent",
    "default_grid",
    "parse_grid",
]

LAMBDA_C = 0.2
NO_GROWTH_FACTOR = 1.5
CONSTANT_ERROR_SHARE = 0.01
FIT_STABILITY = 0.05
MAX_CONDITION = 1e12
SMALL_X_FLAG = 10.0


# --------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class Envelope:
    """x^power (log x)^log_power (log log x)^loglog_power, times lambda(x) if requested."""

    power: float = 0.0
    log_power: float = 0.0
    loglog_power: float = 0.0
    with_lambda: bool = False

    @property
    def uses_loglog(self) -> bool:
        return self.loglog_power != 0 or self.with_lambda

    def __call__(self, x, c=LAMBDA_C) -> float:
        return envelope_eval(self, x, c)

    def __str__(self):
        parts = []
        if self.power:
            parts.append(f"x^{self.power:g}")
        if self.log_power:
            parts.append(f"log^{self.log_power:g}")
        if self.loglog_power:
            parts.append(f"loglog^{self.loglog_power:g}")
        if self.with_lambda:
            parts.append("lambda")
        return "*".join(parts) or "1"

    @classmethod
    def parse(cls, text: str) -> Envelope:
        text = text.strip()
        if text in NAMED_ENVELOPES:
            return NAMED_ENVELOPES[text]
        if text == "1":
            return cls()
        kw = {}
        for part in text.split("*"):
            part = part.strip()
            if part == "lambda":
                kw["with_lambda"] = True
                continue
            base, _, expo = part.partition("^")
            key = {"x": "power", "log": "log_power", "loglog": "loglog_power"}.get(base)
            if key is None or not expo:
                raise UsageError(f"bad envelope term {part!r}")
            kw[key] = float(expo)
        return cls(**kw)


NAMED_ENVELOPES = {
    "sqrt": Envelope(0.5),
    "sqrt_log": Envelope(0.5, 1.0),
    "sqrt_lambda": Envelope(0.5, with_lambda=True),
    "sqrt_loglog": Envelope(0.5, loglog_power=1.0),
    "log2": Envelope(0.0, 2.0),
    "log3": Envelope(0.0, 3.0),
    "x": Envelope(1.0),
    "x_loglog": Envelope(1.0, loglog_power=1.0),
    "x0.4": Envelope(0.4),
    "x1.5": Envelope(1.5),
    "x1.5_lambda": Envelope(1.5, with_lambda=True),
    "x3_lcm": Envelope(3.0, 2.0 / 3.0, 1.0 / 3.0),
    "gcd_id": Envelope(547 / 832, 26947 / 8320),
}


def lam(x, c=LAMBDA_C) -> float:
    """exp(-c (log x)^(3/5) (log log x)^(-1/5))."""
    if x < 3:
        raise DomainError("lambda(x) needs x >= 3")
    if c <= 0:
        raise UsageError("lambda constant c must be > 0")
    L = math.log(x)
    return math.exp(-c * L**0.6 * math.log(L) ** -0.2)


def envelope_eval(descriptor, x, c: float = LAMBDA_C) -> float:
    env = descriptor if isinstance(descriptor, Envelope) else Envelope.parse(str(descriptor))
    x = float(x)
    if env.uses_loglog and x < 3:
        raise DomainError(f"envelope {env} needs x >= 3, got {x}")
    if env.log_power and x <= 1:
        raise DomainError(f"envelope {env} needs x > 1, got {x}")
    v = x**env.power
    if env.log_power:
        v *= math.log(x) ** env.log_power
    if env.loglog_power:
        v *= math.log(math.log(x)) ** env.loglog_power
    if env.with_lambda:
        v *= lam(x, c)
    return v


_ENVELOPES = {
    FormulaId.RECT_GCD: NAMED_ENVELOPES["x1.5"],
    FormulaId.HYP_GCD_ID: NAMED_ENVELOPES["gcd_id"],
    FormulaId.RECT_LCM: NAMED_ENVELOPES["x3_lcm"],
    FormulaId.RECT_RATIO: NAMED_ENVELOPES["log2"],
    FormulaId.TAU_GCD: NAMED_ENVELOPES["sqrt"],
    FormulaId.RECIP_GCD: NAMED_ENVELOPES["sqrt_lambda"],
    FormulaId.LOG_GCD: NAMED_ENVELOPES["sqrt_log"],
    FormulaId.LOGKAPPA_GCD: NAMED_ENVELOPES["sqrt_log"],
    FormulaId.OMEGA_GCD: NAMED_ENVELOPES["sqrt"],
    FormulaId.BIGOMEGA_GCD: NAMED_ENVELOPES["sqrt"],
    FormulaId.LCM_HYP: NAMED_ENVELOPES["x1.5_lambda"],
    FormulaId.LOG_LCM: NAMED_ENVELOPES["sqrt_log"],
    FormulaId.OMEGA_LCM: NAMED_ENVELOPES["x"],
    FormulaId.BIGOMEGA_LCM: NAMED_ENVELOPES["x"],
    FormulaId.TAU_LCM: NAMED_ENVELOPES["sqrt_log"],
    FormulaId.RATIO_HYP: NAMED_ENVELOPES["log3"],
    FormulaId.AUX_2OMEGA: NAMED_ENVELOPES["sqrt"],
    FormulaId.AUX_TAU: NAMED_ENVELOPES["x0.4"],
    FormulaId.AUX_JORDAN2: Envelope(2.0),
    FormulaId.AUX_OMEGA: Envelope(1.0, -1.0),
    FormulaId.AUX_TAU_LOG: NAMED_ENVELOPES["sqrt_log"],
    FormulaId.AUX_TAU2: NAMED_ENVELOPES["sqrt_log"],
}

# the error term as published, kept as report metadata only
CLAIMED_ERROR = {
    FormulaId.RECT_GCD: "x^(1+theta+eps)",
    FormulaId.HYP_GCD_ID: "x^(547/832) (log x)^(26947/8320)",
    FormulaId.RECT_LCM: "x^3 (log x)^(2/3) (log log x)^(1/3)",
    FormulaId.RECT_RATIO: "(log x)^2",
    FormulaId.TAU_GCD: "x^(63/178+eps)",
    FormulaId.RECIP_GCD: "x^(1/2) lambda(x)",
    FormulaId.LOG_GCD: "x^(1/2) log x",
    FormulaId.LOGKAPPA_GCD: "x^(1/2) log x",
    FormulaId.OMEGA_GCD: "x^(1/2)",
    FormulaId.BIGOMEGA_GCD: "x^(1/2)",
    FormulaId.LCM_HYP: "x^(3/2) lambda(x)",
    FormulaId.LOG_LCM: "x^(1/2) log x",
    FormulaId.OMEGA_LCM: "x",
    FormulaId.BIGOMEGA_LCM: "x",
    FormulaId.TAU_LCM: "x^(1/2+eps)",
    FormulaId.RATIO_HYP: "(log x)^3",
    FormulaId.AUX_2OMEGA: "x^(1/2) (RH: x^(221/608+eps))",
    FormulaId.AUX_TAU: "x^(theta+eps)",
    FormulaId.AUX_JORDAN2: "x^2",
    FormulaId.AUX_OMEGA: "x / log x",
    FormulaId.AUX_TAU_LOG: "x^(theta+eps) log x",
    FormulaId.AUX_TAU2: "x^(1/2+eps)",
}


def envelope_for(formula, spec: FunctionSpec | None = None) -> Envelope:
    """Error envelope of a formula; the generic gcd formula depends on the growth of f."""
    F = parse_formula(formula)
    if F in (FormulaId.GENERIC_GCD, FormulaId.FSETA_GCD):
        if spec is None:
            raise UsageError(f"{F.value} needs a function spec")
        seta = spec.as_s_eta()
        if seta is not None:
            return Envelope(0.5, seta.eta)
        if F is FormulaId.FSETA_GCD:
            raise UsageError(f"{spec} is not of the f_(S,eta) form")
        beta, delta = spec.growth
        if beta >= 1:
            raise UsageError(f"{spec} has beta={beta} >= 1; the generic gcd formula does not apply")
        if beta < 0:
            return Envelope(0.5, with_lambda=True)
        if beta == 0 and delta == -1:
            return Envelope(0.5, loglog_power=1.0)
        return Envelope((beta + 1) / 2, delta + 1)
    return _ENVELOPES[F]


def claimed_error(formula, spec=None) -> str:
    F = parse_formula(formula)
    if F in (FormulaId.GENERIC_GCD, FormulaId.FSETA_GCD):
        return str(envelope_for(F, spec))
    return CLAIMED_ERROR[F]


# --------------------------------------------------------------------------
# models


def _basis(key):
    L = lambda x: math.log(x)
    LL = lambda x: math.log(math.log(x))
    table = {
        "x4": ("x^4", lambda x: x**4),
        "x3": ("x^3", lambda x: x**3),
        "x2_log": ("x^2 log x", lambda x: x * x * L(x)),
        "x2": ("x^2", lambda x: x * x),
        "x_log3": ("x log^3 x", lambda x: x * L(x) ** 3),
        "x_log2": ("x log^2 x", lambda x: x * L(x) ** 2),
        "x_log_loglog": ("x log x loglog x", lambda x: x * L(x) * LL(x)),
        "x_log": ("x log x", lambda x: x * L(x)),
        "x_loglog": ("x loglog x", lambda x: x * LL(x)),
        "x": ("x", lambda x: x),
        "sqrt": ("x^(1/2)", math.sqrt),
    }
    alias = {"c1": "x_log", "c2": "x", "C2": "x_log2", "C3": "x_log", "C4": "x", "b": "x_log2", "c": "x_log", "d": "x"}
    return table[alias.get(key, key)]


def basis_label(key) -> str:
    return _basis(key)[0]


def basis_value(key, x) -> float:
    return _basis(key)[1](float(x))


@dataclass
class MainTermModel:
    formula: FormulaId
    terms: list  # (basis key, ConstantEstimate)
    envelope: Envelope
    spec: FunctionSpec | None = None
    fitted: dict = field(default_factory=dict)

    @property
    def fit_keys(self) -> list:
        return [k for k, c in self.terms if c.fit_only]

    @property
    def missing(self) -> list:
        return [k for k in self.fit_keys if k not in self.fitted]

    @property
    def uses_loglog(self) -> bool:
        return any("loglog" in k for k, _ in self.terms)

    def coefficient(self, key) -> ConstantEstimate:
        for k, c in self.terms:
            if k == key:
                if c.fit_only:
                    if key not in self.fitted:
                        raise StateError(f"{self.formula.value}: parameter {key} has not been fitted")
                    return ConstantEstimate(key, self.fitted[key], 0.0, "composite", fit_only=True)
                return c
        raise KeyError(key)

    def known_part(self, x):
        """(value, bound) of the derived terms only."""
        val, bound = [], []
        for k, c in self.terms:
            if c.fit_only:
                continue
            b = basis_value(k, x)
            val.append(c.value * b)
            bound.append(c.error_bound * abs(b))
        return math.fsum(val), math.fsum(bound)

    def evaluate(self, x):
        if self.missing:
            raise StateError(f"{self.formula.value}: fit {', '.join(self.missing)} before evaluating")
        val, bound = self.known_part(x)
        extra = math.fsum(self.fitted[k] * basis_value(k, x) for k in self.fit_keys)
        return val + extra, bound

    def describe(self) -> list:
        rows = []
        for k, c in self.terms:
            if c.fit_only:
                v = self.fitted.get(k, float("nan"))
                rows.append({"basis": basis_label(k), "key": k, "value": v, "error_bound": None, "method": "fit"})
            else:
                rows.append(
                    {"basis": basis_label(k), "key": k, "value": c.value, "error_bound": c.error_bound, "method": c.method}
                )
        return rows


def build_model(formula, spec: FunctionSpec | None = None, fitted=None) -> MainTermModel:
    F = parse_formula(formula)
    consts = constants.formula_constants(F, spec)
    return MainTermModel(F, list(consts.items()), envelope_for(F, spec), spec, dict(fitted or {}))


@dataclass(frozen=True)
class MainTermValue:
    value: float
    bound: float
    small_x: bool


def main_term(formula, x, spec: FunctionSpec | None = None, fitted=None, model=None) -> MainTermValue:
    """Main term at x with the propagated constant-error bound; small_x flags x < 10."""
    model = model or build_model(formula, spec, fitted)
    x = float(x)
    if x < 1:
        raise DomainError("main terms need x >= 1")
    if model.uses_loglog and x < 3:
        raise DomainError(f"{model.formula.value} uses log log x and needs x >= 3")
    v, b = model.evaluate(x)
    return MainTermValue(v, b, x < SMALL_X_FLAG)


# --------------------------------------------------------------------------
# grids


def default_grid(formula) -> list:
    F = parse_formula(formula)
    lo, hi = (1e2, 1e5) if F.rectangular else (1e3, 1e7)
    return [float(v) for v in np.geomspace(lo, hi, 12)]


def parse_grid(text: str) -> list:
    """'a:b:n' -> n geometric points from a to b (inclusive); or a comma list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("grid must look like start:stop:points")
        a, b, n = float(parts[0]), float(parts[1]), int(float(parts[2]))
        if not (0 < a < b) or n < 2:
            raise UsageError("grid needs 0 < start < stop and points >= 2")
        return [float(v) for v in np.geomspace(a, b, n)]
    vals = sorted(float(v) for v in text.split(",") if v.strip())
    if not vals:
        raise UsageError("empty grid")
    return vals


def _check_grid(grid, need_points=5, need_decades=2.0):
    if len(grid) < need_points:
        raise UsageError(f"grid needs at least {need_points} points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("grid must be strictly increasing")
    if math.log10(grid[-1] / grid[0]) < need_decades - 1e-9:
        raise UsageError(f"grid must span at least {need_decades:g} decades")


# --------------------------------------------------------------------------
# residual scans


@dataclass
class ResidualReport:
    formula: FormulaId
    grid: list
    exact: list
    main: list
    main_bound: list
    residual: list
    envelope: list
    normalized: list
    envelope_name: str
    lambda_c: float
    spec: str | None = None
    fitted: dict = field(default_factory=dict)
    constants: list = field(default_factory=list)
    claimed_error: str = ""
    version: str = __version__

    @property
    def sup_normalized(self) -> float:
        return max(abs(v) for v in self.normalized)

    def _halves(self):
        k = len(self.grid) // 2
        return self.normalized[:k], self.normalized[len(self.grid) - k :]

    @property
    def sup_bottom(self) -> float:
        return max(abs(v) for v in self._halves()[0])

    @property
    def sup_top(self) -> float:
        return max(abs(v) for v in self._halves()[1])

    @property
    def growth_ratio(self) -> float:
        lo = self.sup_bottom
        return self.sup_top / lo if lo > 0 else (math.inf if self.sup_top > 0 else 1.0)

    @property
    def no_growth(self) -> bool:
        return self.growth_ratio <= NO_GROWTH_FACTOR

    @property
    def constant_error_flags(self) -> list:
        """Grid points where the constants' error exceeds 1% of |residual|."""
        return [
            x for x, b, r in zip(self.grid, self.main_bound, self.residual) if b > CONSTANT_ERROR_SHARE * abs(r)
        ]

    @property
    def trend(self) -> float:
        return growth_exponent(self)

    def rows(self) -> list:
        return [
            {
                "x": x,
                "exact": e,
                "main": m,
                "main_bound": b,
                "residual": r,
                "envelope": v,
                "normalized": n,
                "version": self.version,
            }
            for x, e, m, b, r, v, n in zip(
                self.grid, self.exact, self.main, self.main_bound, self.residual, self.envelope, self.normalized
            )
        ]

    def summary(self) -> dict:
        try:
            trend = self.trend
        except UsageError:
            trend = float("nan")
        return {
            "formula": self.formula.value,
            "spec": self.spec,
            "envelope": self.envelope_name,
            "claimed_error": self.claimed_error,
            "lambda_c": self.lambda_c,
            "points": len(self.grid),
            "sup_normalized": self.sup_normalized,
            "sup_bottom": self.sup_bottom,
            "sup_top": self.sup_top,
            "growth_ratio": self.growth_ratio,
            "no_growth": self.no_growth,
            "constant_error_flags": self.constant_error_flags,
            "trend": trend,
            "fitted": self.fitted,
            "version": self.version,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["x", "exact", "main", "main_bound", "residual", "envelope", "normalized", "version"]
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def to_json(self) -> str:
        meta = self.summary()
        meta["constants"] = self.constants
        meta["grid"] = {"start": self.grid[0], "stop": self.grid[-1], "points": len(self.grid)}
        return json.dumps({"metadata": meta, "rows": self.rows()}, indent=2, sort_keys=True, default=_json_default)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not serialisable: {type(o)}")


def _residual(exact, main):
    # exact ints can exceed 2^53; subtract in the integer domain first
    if isinstance(exact, int):
        base = round(main)
        return float(exact - base) + (base - main)
    return float(exact) - main


def residual_scan(
    formula,
    grid=None,
    spec: FunctionSpec | None = None,
    lambda_c: float = LAMBDA_C,
    fitted=None,
    fit: bool = False,
    store=None,
) -> ResidualReport:
    """Exact sums minus main term along a grid, normalised by the formula's envelope."""
    F = parse_formula(formula)
    grid = sorted(float(g) for g in (grid if grid is not None else default_grid(F)))
    _check_grid(grid)
    model = build_model(F, spec, fitted)
    if model.missing:
        if not fit:
            raise StateError(f"{F.value} has fit-only parameters ({', '.join(model.missing)}); run with fit")
        model.fitted.update(fit_parameters(F, grid, spec, store=store).values)
    exact = summation.curve(F, grid, spec, store).exact
    main, bound, res, env, norm = [], [], [], [], []
    for x, e in zip(grid, exact):
        mt = main_term(F, x, model=model)
        r = _residual(e, mt.value)
        v = envelope_eval(model.envelope, x, lambda_c)
        main.append(mt.value)
        bound.append(mt.bound)
        res.append(r)
        env.append(v)
        norm.append(r / v)
    rows = [c.as_row() for c in constants.coefficient_estimates(F, spec)]
    return ResidualReport(
        formula=F,
        grid=grid,
        exact=exact,
        main=main,
        main_bound=bound,
        residual=res,
        envelope=env,
        normalized=norm,
        envelope_name=str(model.envelope),
        lambda_c=lambda_c,
        spec=str(spec) if spec is not None else None,
        fitted=dict(model.fitted),
        constants=rows,
        claimed_error=claimed_error(F, spec),
    )


def growth_exponent(report=None, grid=None, residual=None) -> float:
    """Least-squares slope of log|R| against log x; NaN when every residual is zero."""
    if report is not None:
        grid, residual = report.grid, report.residual
    pts = [(math.log(x), math.log(abs(r))) for x, r in zip(grid, residual) if r != 0]
    if not pts:
        return float("nan")
    if len(pts) < 5:
        raise UsageError("growth exponent needs at least 5 nonzero residuals")
    lx, lr = np.array(pts).T
    slope, _ = np.polyfit(lx, lr, 1)
    return float(slope)


# --------------------------------------------------------------------------
# fitting


@dataclass
class FitReport:
    formula: FormulaId
    params: list  # (name, value, residual-of-fit)
    front: dict
    back: dict
    condition: float
    derived: dict = field(default_factory=dict)  # closed-form counterparts, where known

    @property
    def values(self) -> dict:
        return {name: v for name, v, _ in self.params}

    @property
    def stability(self) -> dict:
        """Relative difference between the front-half and back-half fits, per parameter."""
        out = {}
        for name, v, _ in self.params:
            a, b = self.front[name], self.back[name]
            out[name] = abs(a - b) / max(abs(a), abs(b), 1e-300)
        return out

    @property
    def stable(self) -> bool:
        return all(d <= FIT_STABILITY for d in self.stability.values())

    def deviation_from_derived(self) -> dict:
        """Relative gap between each fitted value and its closed form, if one exists."""
        vals = self.values
        return {n: abs(vals[n] - d.value) / abs(d.value) for n, d in self.derived.items() if n in vals}

    def rows(self) -> list:
        st = self.stability
        return [
            {
                "parameter": n,
                "value": v,
                "fit_rms": r,
                "front": self.front[n],
                "back": self.back[n],
                "rel_diff": st[n],
                "derived": self.derived[n].value if n in self.derived else None,
                "version": __version__,
            }
            for n, v, r in self.params
        ]


def _lstsq(model: MainTermModel, grid, exact):
    keys = model.fit_keys
    A = np.array([[basis_value(k, x) for k in keys] for x in grid])
    w = np.array([1.0 / envelope_eval(model.envelope, x) for x in grid])
    b = np.array([_residual(e, model.known_part(x)[0]) for x, e in zip(grid, exact)])
    Aw, bw = A * w[:, None], b * w
    scale = np.linalg.norm(Aw, axis=0)
    if np.any(scale == 0):
        raise ConditioningError(f"basis column vanishes on the grid for {model.formula.value}")
    An = Aw / scale
    cond = float(np.linalg.cond(An))
    if not math.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(
            f"{model.formula.value}: scaled basis condition number {cond:.3g} on grid "
            f"[{grid[0]:g}, {grid[-1]:g}] ({len(grid)} points) exceeds {MAX_CONDITION:g}"
        )
    sol, *_ = np.linalg.lstsq(An, bw, rcond=None)
    coef = sol / scale
    rms = float(np.sqrt(np.mean((An @ sol - bw) ** 2)))
    return dict(zip(keys, (float(c) for c in coef))), rms, cond


def fit_parameters(formula, grid=None, spec: FunctionSpec | None = None, store=None, exact=None) -> FitReport:
    """Envelope-weighted least squares for the fit-only coefficients, derived ones held fixed.

    The fit is repeated on the front and back halves of the grid; their
    agreement is the stability check. ``exact`` may supply the sums directly
    (for synthetic data); otherwise they are computed.
    """
    F = parse_formula(formula)
    model = build_model(F, spec)
    keys = model.fit_keys
    if not keys:
        raise UsageError(f"{F.value} has no fit-only parameters")
    grid = sorted(float(g) for g in (grid if grid is not None else default_grid(F)))
    if len(grid) < 2 + len(keys):
        raise UsageError(f"need at least {2 + len(keys)} grid points to fit {len(keys)} parameters")
    if exact is None:
        exact = summation.curve(F, grid, spec, store).exact
    full, rms, cond = _lstsq(model, grid, exact)
    k = len(grid) // 2
    if k < len(keys):
        raise UsageError("each half-grid needs at least as many points as parameters")
    front, _, _ = _lstsq(model, grid[:k], exact[:k])
    back, _, _ = _lstsq(model, grid[len(grid) - k :], exact[len(grid) - k :])
    params = [(n, full[n], rms) for n in keys]
    return FitReport(F, params, front, back, cond, constants.derived_counterparts(F))
