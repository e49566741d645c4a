"""Budget-adaptive drivers around the core estimators.

Degree schedules that grow the surrogate with the sample budget, the
sparse-grid control-variate pipeline, stratified fits with per-stratum
coefficients, and antithetic fits with the redundant parity-odd basis
functions removed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .basis import IndexSet, basis_integrals, eval_basis_matrix, multi_index_set
from .core import (
    CI_MULTIPLIER,
    EstimateReport,
    Integrand,
    RngSpec,
    make_report,
)
from .estimators import control_variate_estimate, mc_estimate, mcls_estimate, wls_mcls_estimate
from .linalg import cond2, ls_solve, qr_factor
from .sampling import (
    ChristoffelSampler,
    StratumPartition,
    antithetic_batch,
    christoffel_batch,
    stratified_batch,
    uniform_batch,
)
from .sparsegrid import SparseGridInterpolant, level_node_count, sg_build, sg_eval, sg_integral

__all__ = [
    "DegreeSchedule",
    "degree_for_budget",
    "BudgetSplit",
    "split_for_level",
    "level_for_budget",
    "mclsa_run",
    "sg_mclsa_run",
    "stratified_mcls",
    "even_index_subset",
    "antithetic_mcls",
]


@dataclass(frozen=True)
class DegreeSchedule:
    """How the surrogate degree grows with the sample budget.

    The ``ratio10`` rule picks the largest ``k`` whose *total-degree* count
    satisfies ``C(d+k, d) <= N / ratio`` — the binomial count is the yard-
    stick for every degree kind; ``kind`` only decides which index set is
    then built at that ``k``.
    """

    dim: int
    kind: str = "total"
    rule: str = "ratio10"
    ratio: float = 10.0

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.rule != "ratio10":
            raise ValueError(f"unknown schedule rule {self.rule!r}")
        if self.ratio <= 0.0:
            raise ValueError("ratio must be positive")


def degree_for_budget(schedule: DegreeSchedule, n: int) -> int:
    """Largest ``k`` with ``C(d+k, d) <= n / ratio``; 0 when nothing fits.

    Degree 0 is always admissible — it is the plain-MC fallback.
    """
    if n < 1:
        raise ValueError("n must be positive")
    budget = n / schedule.ratio
    k = 0
    while math.comb(schedule.dim + k + 1, schedule.dim) <= budget:
        k += 1
    return k


@dataclass(frozen=True)
class BudgetSplit:
    """A total evaluation budget split between grid build and regression."""

    n_total: int
    n_build: int
    n_regression: int

    def __post_init__(self) -> None:
        if self.n_build + self.n_regression != self.n_total:
            raise ValueError("build and regression budgets must sum to the total")
        if self.n_build < 0:
            raise ValueError("build budget cannot be negative")
        if self.n_regression < 4:
            raise ValueError("regression needs at least 4 points")


def split_for_level(dim: int, level: int, n_total: int) -> BudgetSplit:
    """Spend the grid's exact node count, regress with the remainder."""
    n_build = level_node_count(dim, level)
    return BudgetSplit(n_total=n_total, n_build=n_build, n_regression=n_total - n_build)


def level_for_budget(dim: int, n_total: int, build_share: float = 0.5) -> int:
    """Largest level whose node count fits ``build_share`` of the budget.

    Always at least 1; the caller is responsible for the budget being
    large enough that the remainder can still regress.
    """
    if not 0.0 < build_share < 1.0:
        raise ValueError("build_share must lie strictly between 0 and 1")
    target = build_share * n_total
    lvl = 1
    while level_node_count(dim, lvl + 1) <= target:
        lvl += 1
    return lvl


def mclsa_run(
    f: Integrand,
    n: int,
    rng: RngSpec,
    kind: str = "total",
    ratio: float = 10.0,
    max_basis: int | None = None,
    sampler_cache: dict | None = None,
) -> EstimateReport:
    """Adaptive-degree run: schedule the degree, sample adaptedly, fit.

    The degree comes from the ``ratio10`` schedule (optionally lowered
    until the basis fits under ``max_basis`` — the cost guard for budgets
    whose scheduled basis would be impractically large).  Degree 0 falls
    back to plain MC on uniform points with the *same* rng, so a forced
    fallback is bit-identical to ``mc_estimate``.  Positive degrees use
    basis-adapted sampling and the weighted fit.

    ``sampler_cache`` (a plain dict, keyed by ``(degree, kind)``) lets
    repeated runs over a budget grid reuse the inverse-CDF tables.
    """
    schedule = DegreeSchedule(dim=f.dim, kind=kind, ratio=ratio)
    k = degree_for_budget(schedule, n)
    if max_basis is not None:
        while k > 0 and multi_index_set(f.dim, k, kind).size > max_basis:
            k -= 1
    if k == 0:
        batch = uniform_batch(f, n, rng)
        rep = mc_estimate(batch)
        return replace(rep, method="mclsa", degree=0)
    iset = multi_index_set(f.dim, k, kind)
    sampler = None if sampler_cache is None else sampler_cache.get((k, kind))
    if sampler is None:
        sampler = ChristoffelSampler.build(iset)
        if sampler_cache is not None:
            sampler_cache[(k, kind)] = sampler
    batch = christoffel_batch(f, iset, n, rng, sampler=sampler)
    rep, _ = wls_mcls_estimate(batch, iset)
    return replace(rep, method="mclsa", degree=k)


def sg_mclsa_run(
    f: Integrand,
    level: int,
    n: int,
    rng: RngSpec,
    interpolant: "SparseGridInterpolant | None" = None,
) -> EstimateReport:
    """Sparse-grid control variate: build ``p_s``, regress ``f`` on ``[1, p_s]``.

    The grid costs ``level_node_count(dim, level)`` evaluations and its
    integral is exact; the regression then needs only the two-column fit.
    The report counts *all* evaluations (build + regression) in
    ``n_samples``, and the interval half-width is recomputed against that
    combined count.  A prebuilt ``interpolant`` (for this integrand and
    level) skips the grid construction.
    """
    if interpolant is not None:
        if interpolant.level != level or interpolant.dim != f.dim:
            raise ValueError("prebuilt interpolant does not match the requested grid")
        p = interpolant
    else:
        p = sg_build(f, level)
    batch = uniform_batch(f, n, rng)
    rep, _ = control_variate_estimate(batch, [(lambda pts: sg_eval(p, pts), sg_integral(p))])
    total = p.node_count + n
    ci = CI_MULTIPLIER * rep.kappa * math.sqrt(rep.sigma2) / math.sqrt(total)
    return replace(rep, n_samples=total, ci_half_width=ci, method="sgmcls", level=level)


def stratified_mcls(
    f: Integrand,
    partition: StratumPartition,
    iset: IndexSet | Sequence[IndexSet],
    rng: RngSpec,
    global_coeffs: bool = False,
) -> EstimateReport:
    """Per-stratum fits summed into one estimate.

    Each stratum gets its own coefficients, fitted in its own local
    coordinates; stratum estimates add, and the combined variance is
    ``N_total * sum_s sigma2_s / N_s`` so the usual report invariant
    yields the right combined interval (with the largest per-stratum
    ``kappa`` as the conservative inflation).  With the one-function basis
    this is classical stratified MC.

    ``global_coeffs=True`` is the comparison mode: one shared coefficient
    vector on the full domain, fitted to the union of the stratified
    points (i.e. plain MCLS on stratified points).
    """
    isets = list(iset) if not isinstance(iset, IndexSet) else [iset] * len(partition.strata)
    if len(isets) != len(partition.strata):
        raise ValueError("need one index set per stratum")
    batches = stratified_batch(f, partition, rng)

    if global_coeffs:
        if any(s is not isets[0] for s in isets):
            raise ValueError("global-coefficient mode uses a single index set")
        merged = np.vstack([b.points for b in batches])
        fvals = np.concatenate([b.fvals for b in batches])
        upts = f.domain.to_unit(merged)
        m = isets[0].size
        if len(fvals) <= m:
            raise ValueError(f"underdetermined fit: N={len(fvals)} must exceed n+1={m}")
        state = qr_factor(eval_basis_matrix(upts, isets[0]), fvals)
        c = ls_solve(state)
        r = fvals - eval_basis_matrix(upts, isets[0]) @ c
        vol = f.domain.volume()
        est = vol * float(c @ basis_integrals(isets[0]))
        sigma2 = vol * vol * float(r @ r) / (len(fvals) - m)
        return make_report(
            est, sigma2, cond2(state), len(fvals), m, "strat_global",
            degree=isets[0].degree_cap,
        )

    reports = []
    for batch, iset_s in zip(batches, isets):
        if batch.n < iset_s.size + 1:
            raise ValueError(
                f"stratum budget {batch.n} too small for {iset_s.size} basis functions"
            )
        rep, _ = mcls_estimate(batch, iset_s)
        reports.append(rep)
    n_total = sum(r.n_samples for r in reports)
    est = sum(r.estimate for r in reports)
    var_of_sum = sum(r.sigma2 / r.n_samples for r in reports)
    sigma2 = n_total * var_of_sum
    kappa = max(r.kappa for r in reports)
    degrees = {s.degree_cap for s in isets}
    return make_report(
        est,
        sigma2,
        kappa,
        n_total,
        sum(s.size for s in isets),
        "strat",
        degree=degrees.pop() if len(degrees) == 1 else None,
    )


def even_index_subset(iset: IndexSet) -> IndexSet:
    """The indices of even total degree — the ones surviving ``x -> 1-x``.

    Shifted Legendre factors satisfy ``L~_j(1-x) = (-1)^j L~_j(x)``, so a
    tensor function is parity-even exactly when its total degree is even.
    """
    kept = tuple(ix for ix in iset.indices if sum(ix) % 2 == 0)
    return IndexSet(indices=kept, kind=iset.kind, degree_cap=iset.degree_cap, dim=iset.dim)


def antithetic_mcls(f: Integrand, iset: IndexSet, n_pairs: int, rng: RngSpec) -> EstimateReport:
    """Antithetic-pair fit on the parity-even basis subset.

    Parity-odd basis functions average to zero over each exact pair, so
    they carry no information about the estimate and are removed before
    fitting.  The even functions take *equal* floating-point values on the
    two pair members, so the least-squares problem folds exactly onto one
    representative per pair with pair-averaged values — which is why a
    parity-odd integrand (whose pair averages are exact zeros) produces an
    exactly zero estimate.  Residuals and the variance still use all
    ``2 * n_pairs`` samples.
    """
    even = even_index_subset(iset)
    m = even.size
    if n_pairs <= m:
        raise ValueError(f"underdetermined fit: {n_pairs} pairs must exceed n+1={m}")
    batch = antithetic_batch(f, n_pairs, rng)
    upts = f.domain.to_unit(batch.points)
    reps = upts[0::2]
    fbar = 0.5 * (batch.fvals[0::2] + batch.fvals[1::2])
    state = qr_factor(eval_basis_matrix(reps, even), fbar)
    c = ls_solve(state)
    r = batch.fvals - eval_basis_matrix(upts, even) @ c
    vol = f.domain.volume()
    est = vol * float(c @ basis_integrals(even))
    n = batch.n
    sigma2 = vol * vol * float(r @ r) / (n - m)
    return make_report(est, sigma2, cond2(state), n, m, "anti", degree=iset.degree_cap)
