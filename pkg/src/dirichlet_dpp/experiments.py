"""Convergence studies: replicate, estimate, regress log variance on log N.

For each N a balanced factor vector is chosen, R patterns are drawn, and the
unbiased empirical variance of the R estimates is recorded. An ordinary least
squares fit of ``log(variance)`` against ``log(N)`` gives the observed rate,
and the estimates at each N are checked for normality with the
Anderson-Darling test (estimated mean and variance), Holm-adjusted across N.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special, stats

from .estimator import (
    KappaVector,
    exact_variance_var2,
    kappa_from_design,
    lift_table,
    sigma2_asymptotic,
)
from .kernel import FactorVector, SubsetSelector, balanced_factorization
from .sampler import derive_seed, sample_pattern, SamplerConfig, SamplerError
from .testfuncs import TestFunctionSpec, coefficient_table, eval_test_function, parse_spec

__all__ = [
    "PlanError",
    "ExperimentPlan",
    "RegressionReport",
    "NormalityReport",
    "StudyResult",
    "anderson_darling",
    "normality_check",
    "holm_adjust",
    "loglog_regression",
    "expected_slope",
    "run_convergence_study",
    "convergence_result",
    "run_projection_study",
    "read_plan",
    "write_study",
]

METHOD = "anderson-darling"


class PlanError(ValueError):
    """Invalid plan; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("invalid plan:\n  " + "\n  ".join(self.errors))


@dataclass
class ExperimentPlan:
    """A declarative convergence study.

    ``mode="exact"`` replaces empirical variances by the exact finite-N
    variance of the truncated coefficient table (no sampling). For a
    projection study, ``iotas`` lists the projected dimensions; the kept
    coordinates are drawn at random from ``base_seed`` unless ``selector``
    fixes them.
    """

    function: TestFunctionSpec
    d: int
    N_values: list[int]
    R: int = 1000
    base_seed: int = 0
    selector: SubsetSelector | None = None
    iotas: list[int] | None = None
    kappa_policy: str = "largest"
    mode: str = "empirical"
    study: str = "convergence"
    level: float = 0.95
    tolerance: float = 0.15
    alpha: float = 0.05
    threads: int = 1

    def validate(self) -> None:
        errs = self.problems()
        if errs:
            raise PlanError(errs)

    def problems(self) -> list[str]:
        """Every validation problem found; empty when the plan is valid."""
        errs = []
        if self.d < 1:
            errs.append(f"d must be >= 1, got {self.d}")
        if len(set(self.N_values)) < 3:
            errs.append(f"need at least 3 distinct N values, got {self.N_values}")
        if any(n < 1 for n in self.N_values):
            errs.append("N values must be positive")
        if self.mode not in ("empirical", "exact"):
            errs.append(f"mode must be 'empirical' or 'exact', got {self.mode!r}")
        if self.mode == "empirical" and self.R < 2:
            errs.append(f"R must be >= 2, got {self.R}")
        if self.study not in ("convergence", "projection"):
            errs.append(f"study must be 'convergence' or 'projection', got {self.study!r}")
        if self.kappa_policy != "largest":
            errs.append(f"unsupported kappa policy {self.kappa_policy!r}")
        if not 0 < self.level < 1:
            errs.append(f"level must lie in (0, 1), got {self.level}")
        if self.selector is not None and self.d >= 1 and self.selector.indices[-1] > self.d:
            errs.append(f"selector {self.selector} out of range for d={self.d}")
        if self.study == "projection":
            if self.d < 2:
                errs.append("a projection study needs d > 1")
            for i in self.iotas or []:
                if not 1 <= i <= self.d:
                    errs.append(f"iota {i} outside 1..{self.d}")
        if self.study == "convergence" and self.function is not None:
            want = self.selector.iota if self.selector else self.d
            if self.function.dim != want:
                errs.append(f"function takes {self.function.dim} coordinates, selector/d gives {want}")
        return errs


@dataclass
class RegressionReport:
    slope: float
    intercept: float
    slope_ci: tuple[float, float, float]  # (level, lower, upper)
    N_values: list[int]
    variances: list[float]
    expected_slope: float
    tolerance: float

    @property
    def within_tolerance(self) -> bool:
        return abs(self.slope - self.expected_slope) <= self.tolerance

    @property
    def ci_contains_expected(self) -> bool:
        return self.slope_ci[1] <= self.expected_slope <= self.slope_ci[2]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["slope_ci"] = {"level": self.slope_ci[0], "lo": self.slope_ci[1], "hi": self.slope_ci[2]}
        out["within_tolerance"] = self.within_tolerance
        out["ci_contains_expected"] = self.ci_contains_expected
        return out


@dataclass
class NormalityReport:
    N_values: list[int]
    statistics: list[float]
    p_values: list[float]
    adjusted_p_values: list[float]
    method: str = METHOD

    def rejected(self, alpha: float = 0.05) -> list[bool]:
        return [p < alpha for p in self.adjusted_p_values]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StudyResult:
    """One regression (one iota) of a study, with its per-N records."""

    d: int
    iota: int
    selector: tuple[int, ...]
    regression: RegressionReport
    normality: NormalityReport | None
    factors: list[tuple[int, ...]]
    exact_variances: list[float | None] = field(default_factory=list)
    sigma2: float | None = None

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "iota": self.iota,
            "selector": list(self.selector),
            "factors": [list(f) for f in self.factors],
            "regression": self.regression.to_dict(),
            "normality": self.normality.to_dict() if self.normality else None,
            "exact_variances": self.exact_variances,
            "sigma2_asymptotic": self.sigma2,
        }


def anderson_darling(x) -> tuple[float, float]:
    """Anderson-Darling normality test with estimated mean and variance.

    Returns the small-sample corrected statistic ``A2 (1 + 0.75/n + 2.25/n^2)``
    and its p-value from the D'Agostino-Stephens approximation.
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    sd = x.std(ddof=1)
    if n < 2 or not sd > 0:
        raise ValueError("degenerate sample: zero variance")
    y = (x - x.mean()) / sd
    i = np.arange(1, n + 1)
    # log Phi(y_i) + log(1 - Phi(y_{n+1-i})), computed in the tails without cancellation
    s = np.sum((2 * i - 1) * (special.log_ndtr(y) + special.log_ndtr(-y[::-1])))
    a2 = -n - s / n
    a2 *= 1.0 + 0.75 / n + 2.25 / n**2
    if a2 >= 0.6:
        p = math.exp(1.2937 - 5.709 * a2 + 0.0186 * a2**2)
    elif a2 >= 0.34:
        p = math.exp(0.9177 - 4.279 * a2 - 1.38 * a2**2)
    elif a2 >= 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a2 - 59.938 * a2**2)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a2 - 223.73 * a2**2)
    return float(a2), min(max(p, 0.0), 1.0)


def normality_check(estimates) -> tuple[float, float]:
    """Normality test on the standardized estimates; needs at least 20 values."""
    est = np.asarray(estimates, dtype=float)
    if est.size < 20:
        raise ValueError(f"need at least 20 estimates, got {est.size}")
    return anderson_darling(est)


def holm_adjust(pvals) -> np.ndarray:
    """Holm step-down adjusted p-values, in the input order."""
    p = np.asarray(pvals, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 0.0
    for rank, k in enumerate(order):
        running = max(running, (m - rank) * p[k])
        adj[k] = min(1.0, running)
    return adj


def loglog_regression(N_values, variances, expected: float, level: float = 0.95,
                      tolerance: float = 0.15) -> RegressionReport:
    """OLS of ``log(variance)`` on ``log(N)`` with a Student-t interval for the slope."""
    x = np.log(np.asarray(N_values, dtype=float))
    v = np.asarray(variances, dtype=float)
    if np.any(v <= 0):
        raise ValueError("variances must be positive for a log-log fit")
    y = np.log(v)
    fit = stats.linregress(x, y)
    dof = x.size - 2
    half = stats.t.ppf(0.5 * (1 + level), dof) * fit.stderr if dof > 0 else 0.0
    return RegressionReport(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        slope_ci=(level, float(fit.slope - half), float(fit.slope + half)),
        N_values=[int(n) for n in N_values],
        variances=[float(a) for a in v],
        expected_slope=float(expected),
        tolerance=tolerance,
    )


def expected_slope(spec: TestFunctionSpec, d: int) -> float:
    """``-1 - 1/d`` for regular integrands, ``-1 - 2s/d`` below ``s = 1/2``."""
    s = spec.smoothness_class
    if s > 0.5 or (d == 1 and s >= 0.5):
        return -1.0 - 1.0 / d
    return -1.0 - 2.0 * s / d


def _table_radius(fvs: Sequence[FactorVector]) -> int:
    return max(max(fv.factors) for fv in fvs)


def _exact_variance(spec: TestFunctionSpec, selector: SubsetSelector, fv: FactorVector,
                    radius: int) -> float | None:
    if spec.family == "h_gamma":
        radius = spec.truncation_J
    if (2 * radius + 1) ** spec.dim > 2_000_000:
        return None
    tbl = coefficient_table(spec, radius)
    return exact_variance_var2(lift_table(tbl, selector, fv.d), fv)


def _sigma2(spec: TestFunctionSpec, selector: SubsetSelector, kappa: KappaVector,
            radius: int) -> float | None:
    if spec.family == "h_gamma" or (2 * radius + 1) ** spec.dim > 2_000_000:
        return None
    return sigma2_asymptotic(coefficient_table(spec, radius), selector, kappa)


def _random_selector(rng: np.random.Generator, d: int, iota: int) -> SubsetSelector:
    return SubsetSelector((rng.choice(d, size=iota, replace=False) + 1).tolist())


def _replicate(plan: ExperimentPlan, fv: FactorVector, N: int,
               evaluators: Sequence[tuple[TestFunctionSpec, SubsetSelector]]) -> np.ndarray:
    """R estimates for every (spec, selector) pair, all from the same patterns."""
    seed_N = derive_seed(plan.base_seed, N)
    out = np.empty((len(evaluators), plan.R))

    def one(r):
        try:
            p, _ = sample_pattern(fv, SamplerConfig(derive_seed(seed_N, r)))
        except SamplerError as exc:
            raise SamplerError(f"N={N}, replication {r}: {exc}", exc.point_index, r,
                               exc.diagnostics) from exc
        return [float(np.mean(eval_test_function(spec, p.points[:, list(sel.zero_based)])))
                for spec, sel in evaluators]

    if plan.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            rows = list(pool.map(one, range(plan.R)))
    else:
        rows = [one(r) for r in range(plan.R)]
    out[:] = np.asarray(rows).T
    return out


def _run(plan: ExperimentPlan, groups: list[tuple[TestFunctionSpec, SubsetSelector]]) -> list[StudyResult]:
    Ns = sorted(set(int(n) for n in plan.N_values))
    fvs = [balanced_factorization(N, plan.d) for N in Ns]
    kappa = kappa_from_design(fvs[-1])
    radius = _table_radius(fvs)
    variances = np.empty((len(groups), len(Ns)))
    exact = [[None] * len(Ns) for _ in groups]
    stats_ = np.full((len(groups), len(Ns)), np.nan)
    pvals = np.full((len(groups), len(Ns)), np.nan)
    for k, (N, fv) in enumerate(zip(Ns, fvs)):
        for g, (spec, sel) in enumerate(groups):
            exact[g][k] = _exact_variance(spec, sel, fv, radius)
        if plan.mode == "exact":
            for g in range(len(groups)):
                if exact[g][k] is None:
                    raise PlanError([f"no exact variance available for {groups[g][0].name}"])
                variances[g, k] = exact[g][k]
            continue
        est = _replicate(plan, fv, N, groups)
        variances[:, k] = est.var(axis=1, ddof=1)
        for g in range(len(groups)):
            if est.shape[1] >= 20:
                try:
                    stats_[g, k], pvals[g, k] = normality_check(est[g])
                except ValueError:
                    pass
    results = []
    for g, (spec, sel) in enumerate(groups):
        reg = loglog_regression(Ns, variances[g], expected_slope(spec, plan.d), plan.level,
                                plan.tolerance)
        norm = None
        if plan.mode == "empirical" and not np.all(np.isnan(pvals[g])):
            ok = ~np.isnan(pvals[g])
            adj = np.full(len(Ns), np.nan)
            adj[ok] = holm_adjust(pvals[g][ok])
            norm = NormalityReport(Ns, stats_[g].tolist(), pvals[g].tolist(), adj.tolist())
        results.append(StudyResult(
            d=plan.d, iota=sel.iota, selector=sel.indices, regression=reg, normality=norm,
            factors=[fv.factors for fv in fvs], exact_variances=exact[g],
            sigma2=_sigma2(spec, sel, kappa, radius),
        ))
    return results


def run_convergence_study(plan: ExperimentPlan) -> tuple[RegressionReport, NormalityReport | None]:
    """Full-dimensional (or fixed-selector) study; returns the regression and normality reports."""
    res = convergence_result(plan)
    return res.regression, res.normality


def convergence_result(plan: ExperimentPlan) -> StudyResult:
    plan.validate()
    sel = plan.selector or SubsetSelector.full(plan.d)
    return _run(plan, [(plan.function, sel)])[0]


def run_projection_study(plan: ExperimentPlan) -> list[StudyResult]:
    """One study per projected dimension, all estimates from the same patterns."""
    plan.validate()
    iotas = plan.iotas or list(range(1, plan.d + 1))
    rng = np.random.default_rng(np.random.SeedSequence(plan.base_seed, spawn_key=(2**31,)))
    groups = []
    for iota in iotas:
        if plan.selector is not None and plan.selector.iota == iota:
            sel = plan.selector
        elif iota == plan.d:
            sel = SubsetSelector.full(plan.d)
        else:
            sel = _random_selector(rng, plan.d, iota)
        spec = TestFunctionSpec(plan.function.family, iota, plan.function.gamma,
                                plan.function.truncation_J, plan.function.frequency)
        groups.append((spec, sel))
    return _run(plan, groups)


_PLAN_KEYS = {
    "study", "family", "gamma", "J", "truncation_J", "frequency", "d", "N", "R", "seed",
    "selector", "iota", "mode", "level", "tolerance", "alpha", "kappa", "threads",
}


def read_plan(path_or_text, is_text: bool = False) -> ExperimentPlan:
    """Parse a flat ``key = value`` plan; repeated keys (``N``, ``iota``) form lists.

    Every problem is collected and reported together in a :class:`PlanError`.
    """
    text = path_or_text if is_text else Path(path_or_text).read_text()
    vals: dict[str, list[str]] = {}
    errs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errs.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _PLAN_KEYS:
            errs.append(f"line {lineno}: unknown key {k!r}")
            continue
        if k in ("N", "iota", "selector"):
            # list keys: repeatable, and a line may hold several comma-separated values
            vals.setdefault(k, []).extend(v.replace(",", " ").split())
        else:
            vals.setdefault(k, []).append(v)

    def one(key, conv, default=None, required=False):
        if key not in vals:
            if required:
                errs.append(f"missing required key {key!r}")
            return default
        if len(vals[key]) > 1:
            errs.append(f"key {key!r} given {len(vals[key])} times")
        try:
            return conv(vals[key][-1])
        except ValueError:
            errs.append(f"bad value for {key!r}: {vals[key][-1]!r}")
            return default

    def many(key, required=False):
        if key not in vals:
            if required:
                errs.append(f"missing required key {key!r}")
            return None
        out = []
        for s in vals[key]:
            try:
                out.append(int(s))
            except ValueError:
                errs.append(f"bad integer for {key!r}: {s!r}")
        return out

    family = one("family", str, required=True)
    d = one("d", int, required=True)
    Ns = many("N", required=True)
    R = one("R", int, 1000)
    seed = one("seed", int, required=True)
    mode = one("mode", str, "empirical")
    study = one("study", str, "convergence")
    level = one("level", float, 0.95)
    tol = one("tolerance", float, 0.15)
    alpha = one("alpha", float, 0.05)
    threads = one("threads", int, 1)
    kappa = one("kappa", str, "largest")
    gamma = one("gamma", float)
    J = one("J", int) or one("truncation_J", int)
    freq = one("frequency", int)
    sel_idx = many("selector")
    iotas = many("iota")

    selector = None
    if sel_idx:
        try:
            selector = SubsetSelector(sel_idx)
        except ValueError as exc:
            errs.append(f"selector: {exc}")
    spec = None
    if family is not None and d is not None:
        dim = selector.iota if selector else d
        try:
            spec = parse_spec(None, family=family, dim=dim, gamma=gamma, J=J, frequency=freq)
        except ValueError as exc:
            errs.append(f"function: {exc}")
    plan = ExperimentPlan(
        function=spec, d=d if d is not None else 1, N_values=Ns or [], R=R, base_seed=seed,
        selector=selector, iotas=iotas, kappa_policy=kappa, mode=mode, study=study,
        level=level, tolerance=tol, alpha=alpha, threads=threads,
    )
    # structural checks run even when parsing failed, so the report is complete
    for e in plan.problems():
        if e not in errs:
            errs.append(e)
    if errs:
        raise PlanError(errs)
    return plan


def write_study(results: Sequence[StudyResult], plan: ExperimentPlan, csv_path, json_path) -> None:
    """Study CSV ``(d, iota, N, empirical_variance, p_value_adjusted)`` and JSON report."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["d", "iota", "N", "empirical_variance", "p_value_adjusted"])
        for res in results:
            adj = res.normality.adjusted_p_values if res.normality else [None] * len(res.regression.N_values)
            for N, v, p in zip(res.regression.N_values, res.regression.variances, adj):
                w.writerow([res.d, res.iota, N, f"{v:.17g}",
                            "" if p is None or (isinstance(p, float) and math.isnan(p)) else f"{p:.17g}"])
    report = {
        "plan": {
            "study": plan.study, "function": plan.function.name, "d": plan.d,
            "N": list(plan.N_values), "R": plan.R, "seed": plan.base_seed, "mode": plan.mode,
            "level": plan.level, "tolerance": plan.tolerance,
        },
        "results": [_clean(r.to_dict()) for r in results],
        "passed": all(r.regression.within_tolerance for r in results),
    }
    Path(json_path).write_text(json.dumps(report, indent=2))


def _clean(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj
