"""Integral estimators built on least-squares surrogates.

Plain Monte Carlo, the least-squares estimator (fit a polynomial surrogate
to the sampled values, integrate it exactly), its importance-weighted
variant, control variates with exactly known integrals, a two-stage
unbiased scheme, and the diagnostic bounds (bias, spectral-concentration
failure probability).

Reporting convention: the domain volume is folded into both the estimate
and ``sigma2`` (squared), so ``estimate +- 2*kappa*sqrt(sigma2/N)`` always
targets the integral itself; on the unit cube the factors are invisible.
The residual variance uses the degrees-of-freedom divisor ``N - (n+1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .basis import IndexSet, basis_integrals, eval_basis_matrix
from .core import EstimateReport, Integrand, RngSpec, SampleBatch, make_report
from .linalg import QRState, cond2, ls_solve, qr_factor, qr_row_update
from .sampling import uniform_batch

__all__ = [
    "CHUNK_ROWS",
    "CoefficientVector",
    "mc_estimate",
    "mcls_estimate",
    "wls_mcls_estimate",
    "control_variate_estimate",
    "two_stage_unbiased",
    "bias_bound",
    "chernoff_epsilon",
]

#: Rows per Vandermonde chunk when streaming a fit (bounds peak memory).
CHUNK_ROWS = 32768


@dataclass(frozen=True)
class CoefficientVector:
    """Fitted coefficients, paired with the index set that labels them.

    ``iset`` is ``None`` for control-variate fits, whose columns are the
    constant plus the supplied variates rather than basis functions.
    """

    c: np.ndarray
    iset: IndexSet | None


def mc_estimate(batch: SampleBatch) -> EstimateReport:
    """Plain Monte Carlo: sample mean and its variance-based interval."""
    if batch.weights is not None:
        raise ValueError("plain MC expects an unweighted batch")
    if batch.n < 2:
        raise ValueError("a variance estimate needs at least two samples")
    vol = batch.domain.volume()
    est = vol * float(np.mean(batch.fvals))
    sigma2 = vol * vol * float(np.var(batch.fvals, ddof=1))
    return make_report(est, sigma2, 1.0, batch.n, 1, "mc")


def _stream_fit(
    upts: np.ndarray,
    rhs: np.ndarray,
    iset: IndexSet,
    row_weights: np.ndarray | None,
    chunk: int,
) -> QRState:
    """Accumulate the (optionally sqrt-weighted) Vandermonde fit in chunks."""
    n = upts.shape[0]
    first = max(chunk, iset.size)  # the first block must be square-or-taller
    state: QRState | None = None
    s = 0
    while s < n:
        e = min(n, s + (first if state is None else chunk))
        v = eval_basis_matrix(upts[s:e], iset)
        b = rhs[s:e]
        if row_weights is not None:
            sw = np.sqrt(row_weights[s:e])
            v = v * sw[:, None]
            b = b * sw
        state = qr_factor(v, b) if state is None else qr_row_update(state, v, b)
        s = e
    assert state is not None
    return state


def _weighted_rss(
    upts: np.ndarray,
    fvals: np.ndarray,
    iset: IndexSet,
    c: np.ndarray,
    weights: np.ndarray | None,
    chunk: int,
) -> float:
    """Explicit residual pass: sum of (w_i r_i)^2, or r_i^2 when unweighted.

    The streaming Pythagorean identity cancels catastrophically on
    near-exact fits, so estimators re-walk the rows once instead.
    """
    total = 0.0
    for s in range(0, upts.shape[0], chunk):
        v = eval_basis_matrix(upts[s : s + chunk], iset)
        r = fvals[s : s + chunk] - v @ c
        if weights is not None:
            r = weights[s : s + chunk] * r
        total += float(r @ r)
    return total


def _ls_core(
    batch: SampleBatch,
    iset: IndexSet,
    weights: np.ndarray | None,
    method: str,
    chunk: int,
) -> tuple[EstimateReport, CoefficientVector]:
    if iset.dim != batch.domain.dim:
        raise ValueError("index set and batch dimensions differ")
    n, m = batch.n, iset.size
    if n <= m:
        raise ValueError(f"underdetermined fit: N={n} must exceed n+1={m}")
    upts = batch.domain.to_unit(batch.points)
    if weights is None and m == 1:
        # the constant-only LS fit is the sample mean in closed form; computing
        # it that way keeps degree-0 results bit-equal to plain MC means, which
        # the stratified combination relies on
        c = np.array([float(np.mean(batch.fvals))])
        kappa = 1.0
    else:
        state = _stream_fit(upts, batch.fvals, iset, weights, chunk)
        c = ls_solve(state)
        kappa = cond2(state)
    rss = _weighted_rss(upts, batch.fvals, iset, c, weights, chunk)
    vol = batch.domain.volume()
    est = vol * float(c @ basis_integrals(iset))
    sigma2 = vol * vol * rss / (n - m)
    rep = make_report(est, sigma2, kappa, n, m, method, degree=iset.degree_cap)
    return rep, CoefficientVector(c=np.asarray(c, dtype=float), iset=iset)


def mcls_estimate(
    batch: SampleBatch, iset: IndexSet, chunk: int = CHUNK_ROWS
) -> tuple[EstimateReport, CoefficientVector]:
    """Least-squares estimate: fit the basis to the batch, integrate the fit.

    Because only the constant basis function has a nonzero integral, the
    estimate is the fitted constant coefficient (volume-scaled); with the
    trivial one-function basis this is exactly the sample mean.  ``sigma2``
    is the residual mean square with divisor ``N - (n+1)``, and the
    interval half-width inflates by the fitted system's condition number.
    """
    if batch.weights is not None:
        raise ValueError("use wls_mcls_estimate for weighted batches")
    return _ls_core(batch, iset, None, "mcls", chunk)


def wls_mcls_estimate(
    batch: SampleBatch, iset: IndexSet, chunk: int = CHUNK_ROWS
) -> tuple[EstimateReport, CoefficientVector]:
    """Weighted least-squares estimate for importance-sampled batches.

    Rows are scaled by ``sqrt(w_i)`` before the fit; the residual variance
    sums the squared *weighted* residuals ``(w_i r_i)^2 / (N - n - 1)``.
    With the basis-adapted sampler the scaled system concentrates near
    orthonormality, which is what keeps the reported ``kappa`` near 1.
    """
    if batch.weights is None:
        raise ValueError("weighted estimation needs a batch with weights")
    return _ls_core(batch, iset, batch.weights, "wmcls", chunk)


def control_variate_estimate(
    batch: SampleBatch,
    variates: Sequence[tuple[Callable[[np.ndarray], np.ndarray], float]],
) -> tuple[EstimateReport, CoefficientVector]:
    """Regress ``f`` on ``[1, g_1, ..., g_q]`` with exactly known ``int g_j``.

    Each variate is a ``(function, integral)`` pair; functions take the
    batch's raw ``(N, d)`` points and the integrals are over the batch's
    domain.  The estimate is ``vol * c_0 + sum_j c_j * int g_j``; when a
    variate duplicates the constant (or another variate) the dependent
    column is zeroed with a warning, so the estimate degrades toward plain
    MC instead of failing.
    """
    if batch.weights is not None:
        raise ValueError("control variates expect an unweighted batch")
    if len(variates) == 0:
        raise ValueError("need at least one control variate")
    n = batch.n
    m = len(variates) + 1
    if n <= m:
        raise ValueError(f"underdetermined fit: N={n} must exceed {m}")
    cols = [np.ones(n)]
    integrals = [batch.domain.volume()]
    for fn, integral in variates:
        g = np.asarray(fn(batch.points), dtype=float)
        if g.shape != (n,):
            raise ValueError("control variate must return one value per point")
        if not np.all(np.isfinite(g)):
            raise ValueError("control variate returned non-finite values")
        cols.append(g)
        integrals.append(float(integral))
    a = np.column_stack(cols)
    state = qr_factor(a, batch.fvals)
    c = ls_solve(state)
    r = batch.fvals - a @ c
    vol = batch.domain.volume()
    est = float(c @ np.asarray(integrals))
    sigma2 = vol * vol * float(r @ r) / (n - m)
    rep = make_report(est, sigma2, cond2(state), n, m, "cv")
    return rep, CoefficientVector(c=np.asarray(c, dtype=float), iset=None)


def two_stage_unbiased(
    f: Integrand, iset: IndexSet, n1: int, n2: int, rng: RngSpec
) -> EstimateReport:
    """Unbiased split estimator: pilot fit, then plain MC on the residual.

    Stage one fits the surrogate ``p`` on ``n1`` pilot points; stage two
    averages ``f - p`` over ``n2`` fresh points (the stream advanced past
    the pilot) and adds back ``int p`` exactly.  Independence of the two
    stages is what removes the fit-twice bias; the reported variance comes
    from stage two alone, and ``n_samples`` is ``n2`` — the pilot shows up
    in the method label, not in the interval.
    """
    if n2 < 2:
        raise ValueError("stage two needs at least two samples")
    pilot = uniform_batch(f, n1, rng)
    _, coeffs = mcls_estimate(pilot, iset)
    fresh = uniform_batch(f, n2, rng.advanced(n1))
    upts = f.domain.to_unit(fresh.points)
    resid = np.empty(n2)
    for s in range(0, n2, CHUNK_ROWS):
        v = eval_basis_matrix(upts[s : s + CHUNK_ROWS], iset)
        resid[s : s + CHUNK_ROWS] = fresh.fvals[s : s + CHUNK_ROWS] - v @ coeffs.c
    vol = f.domain.volume()
    est = vol * (float(np.mean(resid)) + float(coeffs.c[0]))
    sigma2 = vol * vol * float(np.var(resid, ddof=1))
    return make_report(est, sigma2, 1.0, n2, iset.size, "two_stage", degree=iset.degree_cap)


def bias_bound(sigma: float, n: int) -> float:
    """First-order bias magnitude bound ``sigma / N`` of the one-batch fit.

    ``sigma`` is (an estimate of) the L2 residual norm ``||f - p||``; the
    bias of fitting and averaging on the same points is smaller by another
    ``1/sqrt(N)`` than the statistical error, hence negligible at scale.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    return float(sigma) / float(n)


def chernoff_epsilon(n_basis: int, n: int, big_k: float) -> float:
    """Spectral-concentration failure probability for the sampled Gram matrix.

    Probability bound that the scaled normal-equations matrix strays from
    identity far enough to push the fitted system's condition past
    ``big_k``: ``2 (n+1) exp(-c_delta N / (n+1))`` with
    ``delta = (K^2-1)/(K^2+1)`` and ``c_delta = delta + (1-delta) log(1-delta)``,
    clamped into ``[0, 1]``.  ``big_k`` must exceed 1 (at 1 the bound is
    vacuous: ``delta = 0`` forces ``c_delta = 0``).
    """
    if n_basis < 1 or n < 1:
        raise ValueError("n_basis and n must be positive")
    if not big_k > 1.0:
        raise ValueError("big_k must exceed 1")
    if math.isinf(big_k):
        return 0.0
    delta = (big_k**2 - 1.0) / (big_k**2 + 1.0)
    c_delta = delta + (1.0 - delta) * math.log1p(-delta)
    eps = 2.0 * n_basis * math.exp(-c_delta * n / n_basis)
    return min(max(eps, 0.0), 1.0)
