"""Benchmark problems, convergence sweeps, and report serialization.

The registry holds the standard test integrands with closed-form (or, for
the option basket, oracle-computed) reference values, cross-checked against
independent quadrature at build time.  ``convergence_sweep`` runs a
(method, N, seed) grid, streaming QR row updates (or running moments) along
the N axis wherever the method allows it, and records per-cell failures
instead of aborting.  Results serialize to CSV, to standalone gnuplot
scripts, and — optionally — to rendered matplotlib figures.
"""
from __future__ import annotations

import csv
import math
import re
import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .adaptive import antithetic_mcls, mclsa_run, sg_mclsa_run, stratified_mcls
from .basis import eval_basis_matrix, multi_index_set
from .core import HyperRect, Integrand, RngSpec, make_report
from .estimators import CHUNK_ROWS
from .linalg import cond2, ls_solve, qr_factor, qr_row_update
from .sampling import (
    ChristoffelSampler,
    StratumPartition,
    christoffel_batch,
    halton_batch,
    halton_points,
    uniform_batch,
)
from .sparsegrid import level_node_count, sg_build

__all__ = [
    "TestProblem",
    "register_standard_problems",
    "norm_inv_cdf",
    "basket_payoff",
    "METHOD_NAMES",
    "MethodSpec",
    "SweepRow",
    "SweepFailure",
    "SweepResult",
    "convergence_sweep",
    "fit_loglog_slope",
    "CSV_COLUMNS",
    "write_csv",
    "read_csv",
    "write_gnuplot",
    "render_plot",
]


# ---------------------------------------------------------------------------
# test problems


@dataclass
class TestProblem:
    """An integrand plus its reference value and bookkeeping tags.

    ``true_value`` is the closed form when one exists; otherwise
    ``oracle`` is a deterministic procedure producing a high-accuracy
    reference on demand (cached after the first call).
    """

    __test__ = False  # "Test" prefix is descriptive, not a pytest marker

    integrand: Integrand
    true_value: float | None
    tags: tuple[str, ...] = ()
    oracle: Callable[[], float] | None = None
    _ref: float | None = field(default=None, repr=False, compare=False)

    @property
    def name(self) -> str:
        return self.integrand.name

    @property
    def dim(self) -> int:
        return self.integrand.dim

    def reference_value(self) -> float:
        if self.true_value is not None:
            return self.true_value
        if self.oracle is None:
            raise ValueError(f"problem {self.name!r} has no reference value")
        if self._ref is None:
            self._ref = float(self.oracle())
        return self._ref


def _composite_simpson(fn: Callable[[np.ndarray], np.ndarray], a: float, b: float, n: int) -> float:
    """Composite Simpson rule with ``n`` (even) panels — the quadrature oracle."""
    if n % 2:
        raise ValueError("panel count must be even")
    x = np.linspace(a, b, n + 1)
    y = fn(x)
    h = (b - a) / n
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def make_runge1d(dim: int = 1) -> TestProblem:
    """``1 / (1 + 25 x^2)`` on ``[-1, 1]``; exact value ``(2/5) arctan(5)``."""
    if dim != 1:
        raise ValueError("runge1d is one-dimensional")
    domain = HyperRect((-1.0,), (1.0,))
    f = Integrand("runge1d", 1, domain, lambda pts: 1.0 / (1.0 + 25.0 * pts[:, 0] ** 2))
    return TestProblem(integrand=f, true_value=0.4 * math.atan(5.0), tags=("1d", "rational"))


def _genz1_true(dim: int) -> float:
    # product structure: Im[(int_0^1 e^{ix} dx)^d]
    factor = complex(math.sin(1.0), 1.0 - math.cos(1.0))
    return (factor**dim).imag


def make_genz1(dim: int) -> TestProblem:
    """Oscillatory sum: ``sin(x_1 + ... + x_d)`` on the unit cube."""
    domain = HyperRect.unit(dim)
    f = Integrand("genz1", dim, domain, lambda pts: np.sin(pts.sum(axis=1)))
    return TestProblem(integrand=f, true_value=_genz1_true(dim), tags=("oscillatory", "smooth"))


def make_genz5(dim: int) -> TestProblem:
    """Kink sum: ``sum_m exp(-|x_m - 1/2|)`` on the unit cube."""
    domain = HyperRect.unit(dim)
    f = Integrand("genz5", dim, domain, lambda pts: np.exp(-np.abs(pts - 0.5)).sum(axis=1))
    true = dim * 2.0 * (1.0 - math.exp(-0.5))
    return TestProblem(integrand=f, true_value=true, tags=("c0", "kink"))


# --- option basket ----------------------------------------------------------

BASKET_RATE = 0.05
BASKET_MATURITY = 1.0
BASKET_VOL = 0.2
BASKET_STRIKE = 10.0
BASKET_SPOT = 10.0
BASKET_CORR = 0.1
_CDF_CLAMP = 1e-12

# Acklam's rational approximation to the standard normal quantile
# (max relative error below 1.2e-9 over (0, 1)).
_ACK_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACK_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACK_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACK_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)
_ACK_PLOW = 0.02425


def norm_inv_cdf(u: np.ndarray) -> np.ndarray:
    """Standard normal quantile function on ``(0, 1)``, vectorized.

    Rational approximation with separate central and tail branches; inputs
    outside the open interval are an error (clamping is the caller's
    policy, not this function's).
    """
    u = np.asarray(u, dtype=float)
    if u.size and (u.min() <= 0.0 or u.max() >= 1.0):
        raise ValueError("quantile inputs must lie strictly inside (0, 1)")
    out = np.empty_like(u)

    lo = u < _ACK_PLOW
    hi = u > 1.0 - _ACK_PLOW
    mid = ~(lo | hi)

    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if mid.any():
        q = u[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        out[mid] = num * q / den
    if lo.any():
        q = np.sqrt(-2.0 * np.log(u[lo]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        out[lo] = num / den
    if hi.any():
        q = np.sqrt(-2.0 * np.log(1.0 - u[hi]))
        num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
        den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        out[hi] = -num / den
    return out


@lru_cache(maxsize=None)
def _basket_chol(dim: int) -> np.ndarray:
    cov = np.full((dim, dim), BASKET_CORR)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


def basket_payoff(x: np.ndarray) -> np.ndarray:
    """Discounted arithmetic-basket call payoff, driven by unit-cube points.

    Coordinates map through the normal quantile to correlated terminal
    log-returns (equicorrelated covariance, lower-Cholesky factor).
    Inputs exactly on the cube boundary are clamped inward by 1e-12 — with
    a warning, since a clamp silently truncates the tails.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    clipped = np.clip(x, _CDF_CLAMP, 1.0 - _CDF_CLAMP)
    if not np.array_equal(clipped, x):
        warnings.warn(
            "basket payoff clamped boundary coordinates into the open cube", stacklevel=2
        )
    z = norm_inv_cdf(clipped)
    y = z @ _basket_chol(x.shape[1]).T
    drift = (BASKET_RATE - 0.5 * BASKET_VOL**2) * BASKET_MATURITY
    s = BASKET_SPOT * np.exp(drift + BASKET_VOL * math.sqrt(BASKET_MATURITY) * y)
    disc = math.exp(-BASKET_RATE * BASKET_MATURITY)
    return disc * np.maximum(0.0, s.mean(axis=1) - BASKET_STRIKE)


@lru_cache(maxsize=None)
def _basket_reference(dim: int) -> float:
    # deterministic scrambled-QMC reference (no closed form exists)
    pts = halton_points(2**19, dim, start=0, seed=987654321, scramble=True)
    return float(np.mean(basket_payoff(pts)))


def make_basket(dim: int) -> TestProblem:
    """Arithmetic basket call, mapped to the unit cube; oracle-valued."""
    domain = HyperRect.unit(dim)
    f = Integrand("basket", dim, domain, basket_payoff)
    return TestProblem(
        integrand=f,
        true_value=None,
        tags=("finance", "kink"),
        oracle=lambda: _basket_reference(dim),
    )


_CLOSED_FORMS_CHECKED = False


def _check_closed_forms() -> None:
    """Cross-check every closed-form reference against quadrature (once)."""
    global _CLOSED_FORMS_CHECKED
    if _CLOSED_FORMS_CHECKED:
        return

    def ensure(name: str, closed: float, quad: float) -> None:
        if abs(closed - quad) > 1e-8 * abs(quad):
            raise RuntimeError(
                f"closed form for {name} ({closed}) disagrees with quadrature ({quad})"
            )

    quad_runge = _composite_simpson(lambda x: 1.0 / (1.0 + 25.0 * x * x), -1.0, 1.0, 2_000_000)
    ensure("runge1d", 0.4 * math.atan(5.0), quad_runge)

    cos1 = _composite_simpson(np.cos, 0.0, 1.0, 200_000)
    sin1 = _composite_simpson(np.sin, 0.0, 1.0, 200_000)
    for d in (1, 2, 3, 6):
        ensure(f"genz1 d={d}", _genz1_true(d), (complex(cos1, sin1) ** d).imag)

    # split the kink so each Simpson panel sees a smooth integrand
    half = _composite_simpson(lambda x: np.exp(-np.abs(x - 0.5)), 0.0, 0.5, 200_000)
    other = _composite_simpson(lambda x: np.exp(-np.abs(x - 0.5)), 0.5, 1.0, 200_000)
    for d in (1, 2, 3, 6, 10):
        ensure(f"genz5 d={d}", d * 2.0 * (1.0 - math.exp(-0.5)), d * (half + other))

    _CLOSED_FORMS_CHECKED = True


def register_standard_problems(validate: bool = True) -> dict[str, Callable[[int], TestProblem]]:
    """The named problem factories (each takes the dimension).

    With ``validate=True`` every closed-form reference value is checked
    against an independent quadrature oracle to 1e-8 relative before the
    registry is handed out (cached after the first call).
    """
    if validate:
        _check_closed_forms()
    return {
        "runge1d": make_runge1d,
        "genz1": make_genz1,
        "genz5": make_genz5,
        "basket": make_basket,
    }


# ---------------------------------------------------------------------------
# sweeps

METHOD_NAMES = ("mc", "mcls", "wmcls", "mclsa", "sgmcls", "qmc", "qmcls", "strat", "anti")

_STREAM_MEAN = {"mc": "uniform", "qmc": "halton"}
_STREAM_LS = {"mcls": "uniform", "qmcls": "halton", "wmcls": "christoffel"}


@dataclass(frozen=True)
class MethodSpec:
    """One method column of a sweep, with its knobs.

    ``label`` overrides the CSV method name, letting one sweep carry e.g.
    several polynomial degrees of the same estimator side by side.
    """

    name: str
    degree: int = 2
    kind: str = "total"
    level: int | None = None
    ratio: float = 10.0
    split: tuple[int, int] | None = None
    cuts: int = 2
    max_basis: int | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.name not in METHOD_NAMES:
            raise ValueError(f"unknown method {self.name!r}; expected one of {METHOD_NAMES}")

    @property
    def column(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class SweepRow:
    method: str
    problem: str
    dim: int
    n: int
    seed: int
    estimate: float
    ci_half: float
    sigma2: float
    kappa: float
    degree: int | None
    level: int | None
    wall_ms: float


@dataclass(frozen=True)
class SweepFailure:
    method: str
    problem: str
    n: int
    seed: int
    message: str


@dataclass
class SweepResult:
    rows: list[SweepRow]
    failures: list[SweepFailure] = field(default_factory=list)

    def sorted_rows(self) -> list[SweepRow]:
        return sorted(self.rows, key=lambda r: (r.method, r.problem, r.dim, r.n, r.seed))


def _wall_ms(t0: float) -> float:
    return float(round((time.perf_counter() - t0) * 1000.0, 3))


def _report_row(spec: MethodSpec, problem: TestProblem, rep, seed: int, wall: float) -> SweepRow:
    return SweepRow(
        method=spec.column,
        problem=problem.name,
        dim=problem.dim,
        n=rep.n_samples,
        seed=seed,
        estimate=rep.estimate,
        ci_half=rep.ci_half_width,
        sigma2=rep.sigma2,
        kappa=rep.kappa,
        degree=rep.degree,
        level=rep.level,
        wall_ms=wall,
    )


class _StreamLS:
    """Row buffer in front of the accumulate-mode QR state.

    Rows buffer until the first square-or-taller block can be factored;
    afterwards every block goes straight into a row update.
    """

    def __init__(self, m: int):
        self.m = m
        self.state = None
        self._pv: list[np.ndarray] | None = []
        self._pb: list[np.ndarray] | None = []
        self._pending = 0

    def add(self, v: np.ndarray, b: np.ndarray) -> None:
        if self.state is None:
            self._pv.append(v)
            self._pb.append(b)
            self._pending += v.shape[0]
            if self._pending >= self.m:
                self.state = qr_factor(np.vstack(self._pv), np.concatenate(self._pb))
                self._pv = self._pb = None
        else:
            self.state = qr_row_update(self.state, v, b)


def _lane_stream_mean(
    problem: TestProblem,
    spec: MethodSpec,
    grid: list[int],
    seed: int,
    rows: list[SweepRow],
    failures: list[SweepFailure],
) -> None:
    f = problem.integrand
    vol = f.domain.volume()
    rng0 = RngSpec(seed)
    use_halton = _STREAM_MEAN[spec.name] == "halton"
    done, s1, s2 = 0, 0.0, 0.0
    for n in grid:
        t0 = time.perf_counter()
        try:
            if n > done:
                gen = halton_batch if use_halton else uniform_batch
                batch = gen(f, n - done, rng0.advanced(done))
                s1 += float(np.sum(batch.fvals))
                s2 += float(batch.fvals @ batch.fvals)
                done = n
        except Exception as exc:  # point generation is stateful: abort the lane
            failures.append(SweepFailure(spec.column, problem.name, n, seed, str(exc)))
            return
        try:
            if n < 2:
                raise ValueError("a variance estimate needs at least two samples")
            mean = s1 / n
            var = max((s2 - n * mean * mean) / (n - 1), 0.0)
            rep = make_report(vol * mean, vol * vol * var, 1.0, n, 1, spec.column)
        except Exception as exc:
            failures.append(SweepFailure(spec.column, problem.name, n, seed, str(exc)))
            continue
        rows.append(_report_row(spec, problem, rep, seed, _wall_ms(t0)))


def _lane_stream_ls(
    problem: TestProblem,
    spec: MethodSpec,
    grid: list[int],
    seed: int,
    rows: list[SweepRow],
    failures: list[SweepFailure],
    sampler: ChristoffelSampler | None,
) -> None:
    f = problem.integrand
    vol = f.domain.volume()
    scheme = _STREAM_LS[spec.name]
    iset = multi_index_set(f.dim, spec.degree, spec.kind)
    m = iset.size
    rng0 = RngSpec(seed)
    acc = _StreamLS(m)
    segments: list[tuple[np.ndarray, np.ndarray, np.ndarray | None]] = []
    done = 0
    for n in grid:
        t0 = time.perf_counter()
        try:
            if n > done:
                delta = n - done
                if scheme == "uniform":
                    batch = uniform_batch(f, delta, rng0.advanced(done))
                elif scheme == "halton":
                    batch = halton_batch(f, delta, rng0.advanced(done))
                else:
                    batch = christoffel_batch(f, iset, delta, rng0.advanced(done), sampler=sampler)
                u = f.domain.to_unit(batch.points)
                segments.append((u, batch.fvals, batch.weights))
                for s in range(0, delta, CHUNK_ROWS):
                    v = eval_basis_matrix(u[s : s + CHUNK_ROWS], iset)
                    b = batch.fvals[s : s + CHUNK_ROWS]
                    if batch.weights is not None:
                        sw = np.sqrt(batch.weights[s : s + CHUNK_ROWS])
                        v = v * sw[:, None]
                        b = b * sw
                    acc.add(v, b)
                done = n
        except Exception as exc:
            failures.append(SweepFailure(spec.column, problem.name, n, seed, str(exc)))
            return
        try:
            if n <= m:
                raise ValueError(f"underdetermined fit: N={n} must exceed n+1={m}")
            c = ls_solve(acc.state)
            rss = 0.0
            for u, b, w in segments:
                for s in range(0, u.shape[0], CHUNK_ROWS):
                    r = b[s : s + CHUNK_ROWS] - eval_basis_matrix(u[s : s + CHUNK_ROWS], iset) @ c
                    if w is not None:
                        r = w[s : s + CHUNK_ROWS] * r
                    rss += float(r @ r)
            # only the constant basis function integrates to something nonzero
            est = vol * float(c[0])
            sigma2 = vol * vol * rss / (n - m)
            rep = make_report(est, sigma2, cond2(acc.state), n, m, spec.column, degree=spec.degree)
        except Exception as exc:
            failures.append(SweepFailure(spec.column, problem.name, n, seed, str(exc)))
            continue
        rows.append(_report_row(spec, problem, rep, seed, _wall_ms(t0)))


def _sg_level_and_budget(spec: MethodSpec, dim: int, n: int) -> tuple[int, int]:
    if spec.level is not None:
        return spec.level, n
    a, b = spec.split or (1, 1)
    target = n * a / (a + b)
    lvl = 1
    while level_node_count(dim, lvl + 1) <= target:
        lvl += 1
    n_reg = n - level_node_count(dim, lvl)
    if n_reg < 4:
        raise ValueError(f"budget {n} leaves only {n_reg} regression points at level {lvl}")
    return lvl, n_reg


def _lane_percell(
    problem: TestProblem,
    spec: MethodSpec,
    grid: list[int],
    seed: int,
    rows: list[SweepRow],
    failures: list[SweepFailure],
    shared: dict,
) -> None:
    f = problem.integrand
    for n in grid:
        t0 = time.perf_counter()
        try:
            if spec.name == "mclsa":
                rep = mclsa_run(
                    f,
                    n,
                    RngSpec(seed),
                    kind=spec.kind,
                    ratio=spec.ratio,
                    max_basis=spec.max_basis,
                    sampler_cache=shared.setdefault("samplers", {}),
                )
            elif spec.name == "sgmcls":
                level, n_reg = _sg_level_and_budget(spec, f.dim, n)
                grids = shared.setdefault("grids", {})
                if level not in grids:
                    grids[level] = sg_build(f, level)
                rep = sg_mclsa_run(f, level, n_reg, RngSpec(seed), interpolant=grids[level])
            elif spec.name == "strat":
                partition = StratumPartition.regular(f.domain, spec.cuts, n)
                iset = multi_index_set(f.dim, spec.degree, spec.kind)
                rep = stratified_mcls(f, partition, iset, RngSpec(seed))
            else:  # anti
                iset = multi_index_set(f.dim, spec.degree, spec.kind)
                rep = antithetic_mcls(f, iset, n // 2, RngSpec(seed))
        except Exception as exc:
            failures.append(SweepFailure(spec.column, problem.name, n, seed, str(exc)))
            continue
        rows.append(_report_row(spec, problem, rep, seed, _wall_ms(t0)))


def convergence_sweep(
    problem: TestProblem,
    methods: Sequence[MethodSpec],
    n_grid: Sequence[int],
    n_seeds: int = 1,
    seed0: int = 0,
) -> SweepResult:
    """Run every (method, N, seed) cell; never abort on a single failure.

    The N grid is deduplicated and ascending.  Methods whose estimate at
    ``N`` extends their estimate at ``N' < N`` (mc, qmc, mcls, qmcls,
    wmcls) stream along the grid — points are generated once and the QR
    factorization is row-updated — so a whole lane costs little more than
    its largest cell.  The remaining methods are refit per cell because
    their structure (degree, partition, pairing) changes with N.
    """
    grid = sorted({int(n) for n in n_grid})
    if any(n < 1 for n in grid):
        raise ValueError("sample sizes must be positive")
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    result = SweepResult(rows=[])
    if not grid:
        return result
    for spec in methods:
        shared: dict = {}
        sampler = None
        if spec.name == "wmcls":
            sampler = ChristoffelSampler.build(
                multi_index_set(problem.dim, spec.degree, spec.kind)
            )
        for j in range(n_seeds):
            seed = seed0 + j
            if spec.name in _STREAM_MEAN:
                _lane_stream_mean(problem, spec, grid, seed, result.rows, result.failures)
            elif spec.name in _STREAM_LS:
                _lane_stream_ls(problem, spec, grid, seed, result.rows, result.failures, sampler)
            else:
                _lane_percell(problem, spec, grid, seed, result.rows, result.failures, shared)
    return result


def fit_loglog_slope(
    result: SweepResult,
    field_name: str = "ci_half",
    method: str | None = None,
    problem: str | None = None,
    true_value: float | None = None,
) -> float:
    """Least-squares slope of ``log(median field)`` against ``log N``.

    ``field_name`` may be any numeric row field, or ``"error"`` for
    ``|estimate - true_value|``.  Non-positive medians cannot enter a
    log fit and are dropped with a warning; at least two surviving grid
    points are required.
    """
    rows = [
        r
        for r in result.rows
        if (method is None or r.method == method) and (problem is None or r.problem == problem)
    ]
    if field_name == "error":
        if true_value is None:
            raise ValueError("field 'error' needs true_value")
        value = lambda r: abs(r.estimate - true_value)
    else:
        value = lambda r: float(getattr(r, field_name))
    by_n: dict[int, list[float]] = {}
    for r in rows:
        by_n.setdefault(r.n, []).append(value(r))
    ns = sorted(by_n)
    meds = [float(np.median(by_n[n])) for n in ns]
    pairs = [(n, m) for n, m in zip(ns, meds) if m > 0.0]
    if len(pairs) < len(ns):
        warnings.warn("dropping non-positive medians from the log-log fit", stacklevel=2)
    if len(pairs) < 2:
        raise ValueError("need at least two grid points with positive medians")
    xs = np.log([p[0] for p in pairs])
    ys = np.log([p[1] for p in pairs])
    return float(np.polyfit(xs, ys, 1)[0])


# ---------------------------------------------------------------------------
# serialization

CSV_COLUMNS = (
    "method", "problem", "dim", "N", "seed",
    "estimate", "ci_half", "sigma2", "kappa", "degree", "level", "wall_ms",
)


def _fmt_opt(v: int | None) -> str:
    return "" if v is None else str(v)


def write_csv(result: SweepResult, path: str) -> None:
    """Serialize the sorted rows; identical sweeps give identical bytes
    everywhere outside the wall_ms column."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in result.sorted_rows():
            w.writerow(
                [
                    r.method, r.problem, r.dim, r.n, r.seed,
                    repr(r.estimate), repr(r.ci_half), repr(r.sigma2), repr(r.kappa),
                    _fmt_opt(r.degree), _fmt_opt(r.level), repr(r.wall_ms),
                ]
            )


def read_csv(path: str) -> SweepResult:
    """Parse a sweep CSV back into rows (failures are not serialized)."""
    rows: list[SweepRow] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header: {header}")
        for rec in reader:
            rows.append(
                SweepRow(
                    method=rec[0],
                    problem=rec[1],
                    dim=int(rec[2]),
                    n=int(rec[3]),
                    seed=int(rec[4]),
                    estimate=float(rec[5]),
                    ci_half=float(rec[6]),
                    sigma2=float(rec[7]),
                    kappa=float(rec[8]),
                    degree=int(rec[9]) if rec[9] else None,
                    level=int(rec[10]) if rec[10] else None,
                    wall_ms=float(rec[11]),
                )
            )
    return SweepResult(rows=rows)


def _median_curves(result: SweepResult, field_name: str) -> dict[str, list[tuple[int, float]]]:
    curves: dict[str, dict[int, list[float]]] = {}
    for r in result.rows:
        curves.setdefault(r.method, {}).setdefault(r.n, []).append(float(getattr(r, field_name)))
    return {
        method: [(n, float(np.median(vals[n]))) for n in sorted(vals)]
        for method, vals in sorted(curves.items())
    }


def write_gnuplot(result: SweepResult, path: str, field_name: str = "ci_half") -> None:
    """Emit a standalone gnuplot script with inline per-method median data."""
    curves = _median_curves(result, field_name)
    lines = [
        "# generated convergence plot script",
        "set terminal pngcairo size 900,600",
        f"set output '{_stem(path)}.png'",
        "set logscale xy",
        "set xlabel 'N'",
        f"set ylabel 'median {field_name}'",
        "set key top right",
    ]
    plot_parts = []
    for method, pts in curves.items():
        block = "$" + re.sub(r"\W", "_", method)
        lines.append(f"{block} << EOD")
        lines.extend(f"{n} {val!r}" for n, val in pts)
        lines.append("EOD")
        plot_parts.append(f"{block} using 1:2 with linespoints title '{method}'")
    lines.append("plot " + ", \\\n     ".join(plot_parts) if plot_parts else "# nothing to plot")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _stem(path: str) -> str:
    base = path.rsplit("/", 1)[-1]
    return base.rsplit(".", 1)[0] if "." in base else base


def render_plot(
    result: SweepResult,
    path: str,
    true_value: float | None = None,
    field_name: str = "ci_half",
) -> None:
    """Render a log-log convergence figure to ``path`` (headless backend).

    Solid lines are the per-method median interval half-widths (or the
    chosen field); with a reference value, dashed lines add the median
    absolute error.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for method, pts in _median_curves(result, field_name).items():
        ns = [p[0] for p in pts]
        vals = [p[1] for p in pts]
        (line,) = ax.loglog(ns, vals, marker="o", label=f"{method} {field_name}")
        if true_value is not None:
            errs: dict[int, list[float]] = {}
            for r in result.rows:
                if r.method == method:
                    errs.setdefault(r.n, []).append(abs(r.estimate - true_value))
            ens = sorted(errs)
            ax.loglog(
                ens,
                [float(np.median(errs[n])) for n in ens],
                linestyle="--",
                alpha=0.7,
                color=line.get_color(),
                label=f"{method} |error|",
            )
    ax.set_xlabel("samples N")
    ax.set_ylabel(field_name)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
