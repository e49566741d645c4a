"""Dense least-squares kernel with streaming updates.

Thin QR with a fixed sign convention (non-negative diagonal of R), row
updates by re-triangularizing the stacked ``[R; new rows]`` block, column
appends against a retained orthonormal factor, conjugate gradients on the
normal equations, and 2-norm condition numbers read off R.

Weights never appear in this module: weighted problems are pre-scaled by
``sqrt(w)`` before they get here.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as _sla
from scipy.linalg import solve_triangular

_ORMQR = _sla.get_lapack_funcs("ormqr", dtype=np.float64)

__all__ = [
    "RANK_TOL",
    "QRState",
    "qr_factor",
    "ls_solve",
    "qr_row_update",
    "qr_col_append",
    "residual_sq",
    "cond2",
    "CGResult",
    "cg_normal",
]

# |R_jj| below RANK_TOL * max|A_ij| flags column j as numerically dependent.
RANK_TOL = 1e-12


@dataclass
class QRState:
    """Thin QR factorization of every row seen so far.

    Two flavors:

    * ``"accumulate"`` keeps only ``R``, ``Q^T b`` and scalar accumulators —
      O(m^2) memory, supports row updates; this is what streaming
      estimators use.
    * ``"full"`` additionally retains the orthonormal factor and the raw
      right-hand side, which is what column appends and re-solves against
      fresh right-hand sides need.
    """

    r: np.ndarray
    qtb: np.ndarray
    rows_seen: int
    amax: float
    mode: str = "accumulate"
    q: np.ndarray | None = None
    rhs: np.ndarray | None = None
    rhs_sq: float = 0.0

    @property
    def ncols(self) -> int:
        return self.r.shape[1]

    def dependent_columns(self) -> np.ndarray:
        """Boolean mask of columns flagged as numerically dependent."""
        return np.abs(np.diag(self.r)) < RANK_TOL * self.amax


def _fix_signs(q: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # LAPACK's QR leaves diagonal signs arbitrary; force them >= 0 so the
    # factorization (and everything derived from it) is unique.
    s = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * s, s[:, None] * r


def _implicit_qtb(
    a: np.ndarray, b: np.ndarray, *, overwrite: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    # Householder QR keeps Q as reflectors and applies them straight to b:
    # O(N m) for Q^T b instead of the O(N m^2) it costs to materialize Q.
    # Sign convention (diag(R) >= 0) is applied before returning.
    n, m = a.shape
    if overwrite and a.flags.f_contiguous and a.dtype == np.float64:
        af = a
    else:
        af = np.array(a, dtype=np.float64, order="F")
    (qr_raw, tau), _ = _sla.qr(af, mode="raw", overwrite_a=True, check_finite=False)
    cf = np.asfortranarray(b.reshape(n, 1))
    _, work, info = _ORMQR("L", "T", qr_raw, tau, cf, lwork=-1)
    cq, _, info = _ORMQR("L", "T", qr_raw, tau, cf, lwork=int(work[0]))
    if info != 0:
        raise np.linalg.LinAlgError(f"ormqr failed with info={info}")
    r = np.triu(qr_raw[:m, :])
    s = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    r *= s[:, None]
    return r, s * cq[:m, 0]


def _check_matrix(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{what} must be a 2-D array")
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")
    return a


def qr_factor(a: np.ndarray, b: np.ndarray | None = None, mode: str = "accumulate") -> QRState:
    """Factor ``a = QR`` (thin) and absorb an optional right-hand side."""
    if mode not in ("accumulate", "full"):
        raise ValueError(f"unknown mode {mode!r}")
    a = _check_matrix(a, "matrix")
    n, m = a.shape
    if n < m:
        raise ValueError(f"need at least as many rows as columns, got {n} x {m}")
    if b is None:
        b = np.zeros(n)
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise ValueError("right-hand side length must match the row count")
    if mode == "full":
        q, r = np.linalg.qr(a)
        q, r = _fix_signs(q, r)
        qtb = q.T @ b
    else:
        r, qtb = _implicit_qtb(a, b)
    state = QRState(
        r=r,
        qtb=qtb,
        rows_seen=n,
        amax=float(np.abs(a).max(initial=0.0)),
        mode=mode,
        rhs_sq=float(b @ b),
    )
    if mode == "full":
        state.q = q
        state.rhs = b.copy()
    return state


def ls_solve(state: QRState, b: np.ndarray | None = None) -> np.ndarray:
    """Back-substitute ``R c = Q^T b`` for the least-squares coefficients.

    With ``b=None`` the accumulated right-hand side is used; a fresh ``b``
    needs a full-mode state (the orthonormal factor must be applied).
    Columns flagged as dependent get zero coefficients, with a warning —
    the fit silently degrades to the spanned subspace, never crashes.
    """
    if b is not None:
        if state.mode != "full":
            raise ValueError("solving against a fresh right-hand side needs mode='full'")
        b = np.asarray(b, dtype=float)
        if b.shape != (state.rows_seen,):
            raise ValueError("right-hand side length must match the rows seen")
        qtb = state.q.T @ b
    else:
        qtb = state.qtb
    dep = state.dependent_columns()
    if not dep.any():
        return solve_triangular(state.r, qtb)
    warnings.warn(
        f"rank-deficient least-squares system: zeroing {int(dep.sum())} dependent column(s)",
        stacklevel=2,
    )
    keep = ~dep
    c = np.zeros(state.ncols)
    c[keep] = np.linalg.lstsq(state.r[:, keep], qtb, rcond=None)[0]
    return c


def qr_row_update(state: QRState, new_rows: np.ndarray, new_rhs: np.ndarray) -> QRState:
    """Absorb more rows: re-triangularize ``[R; V2]`` at O(dN*m^2 + m^3).

    Returns a fresh accumulate-mode state whose solution matches a from-
    scratch factorization of the concatenated system. Zero new rows give
    the state back unchanged.
    """
    if state.mode != "accumulate":
        raise ValueError("row updates are for accumulate-mode states")
    rows = _check_matrix(new_rows, "new rows")
    if rows.shape[0] == 0:
        return state
    if rows.shape[1] != state.ncols:
        raise ValueError(
            f"new rows have {rows.shape[1]} columns, state has {state.ncols}"
        )
    rhs = np.asarray(new_rhs, dtype=float)
    if rhs.shape != (rows.shape[0],):
        raise ValueError("new right-hand side length must match the new row count")
    k = state.r.shape[0]
    stacked = np.empty((k + rows.shape[0], state.ncols), order="F")
    stacked[:k] = state.r
    stacked[k:] = rows
    r, qtb = _implicit_qtb(stacked, np.concatenate([state.qtb, rhs]), overwrite=True)
    return QRState(
        r=r,
        qtb=qtb,
        rows_seen=state.rows_seen + rows.shape[0],
        amax=max(state.amax, float(np.abs(rows).max(initial=0.0))),
        mode="accumulate",
        rhs_sq=state.rhs_sq + float(rhs @ rhs),
    )


def qr_col_append(state: QRState, new_cols: np.ndarray) -> QRState:
    """Extend a full-mode factorization with more columns.

    Orthogonalizes the new columns against the retained factor (with one
    re-orthogonalization pass for numerical safety), so no already-seen row
    is revisited.  Columns that are dependent on the existing ones surface
    as near-zero diagonal entries, to be handled at solve time.
    """
    if state.mode != "full":
        raise ValueError("column appends need the retained orthonormal factor (mode='full')")
    v2 = _check_matrix(new_cols, "new columns")
    if v2.shape[0] != state.rows_seen:
        raise ValueError(
            f"new columns have {v2.shape[0]} rows, state has seen {state.rows_seen}"
        )
    m1, m2 = state.ncols, v2.shape[1]
    if state.rows_seen < m1 + m2:
        raise ValueError("appending these columns would make the system underdetermined")
    q1 = state.q
    r12 = q1.T @ v2
    w = v2 - q1 @ r12
    # classical Gram-Schmidt needs a second pass to stay orthogonal
    corr = q1.T @ w
    w -= q1 @ corr
    r12 += corr
    q2, r22 = np.linalg.qr(w)
    q2, r22 = _fix_signs(q2, r22)
    r = np.zeros((m1 + m2, m1 + m2))
    r[:m1, :m1] = state.r
    r[:m1, m1:] = r12
    r[m1:, m1:] = r22
    return QRState(
        r=r,
        qtb=np.concatenate([state.qtb, q2.T @ state.rhs]),
        rows_seen=state.rows_seen,
        amax=max(state.amax, float(np.abs(v2).max(initial=0.0))),
        mode="full",
        q=np.hstack([q1, q2]),
        rhs=state.rhs,
        rhs_sq=state.rhs_sq,
    )


def residual_sq(state: QRState) -> float:
    """``||b - A c||^2`` of the accumulated fit, by the Pythagorean identity.

    Costs O(m) and no pass over old rows, but cancels catastrophically once
    the true residual is many orders below ``||b||`` — exact-fit detection
    should recompute residuals explicitly instead.  Clamped at zero.
    """
    return max(state.rhs_sq - float(state.qtb @ state.qtb), 0.0)


def cond2(state: QRState) -> float:
    """2-norm condition number of the factored matrix, from the SVD of R."""
    s = np.linalg.svd(state.r, compute_uv=False)
    if s.size == 0 or s[-1] <= 0.0 or not np.isfinite(s[0]):
        return math.inf
    return float(s[0] / s[-1])


class CGResult(NamedTuple):
    coeffs: np.ndarray
    iterations: int
    converged: bool


def cg_normal(a: np.ndarray, b: np.ndarray, tol: float = 1e-10, maxit: int = 100) -> CGResult:
    """Conjugate gradients on ``A^T A c = A^T b`` without forming ``A^T A``.

    Convergence is geometric with rate governed by ``kappa_2(A)``; with
    orthonormal columns it hits working precision in an iteration or two.
    Stops once ``||A^T (A c - b)|| <= tol * ||A^T b||``; non-convergence
    returns the flag set to False (with a warning) rather than raising.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    if maxit < 1:
        raise ValueError("maxit must be >= 1")
    a = _check_matrix(a, "matrix")
    b = np.asarray(b, dtype=float)
    if b.shape != (a.shape[0],):
        raise ValueError("right-hand side length must match the row count")
    c = np.zeros(a.shape[1])
    g = a.T @ b
    ref = float(np.linalg.norm(g))
    if ref == 0.0:
        return CGResult(c, 0, True)
    resid = g.copy()  # residual of the normal equations at c = 0
    p = resid.copy()
    rho = float(resid @ resid)
    for it in range(1, maxit + 1):
        ap = a.T @ (a @ p)
        alpha = rho / float(p @ ap)
        c = c + alpha * p
        resid = resid - alpha * ap
        rho_new = float(resid @ resid)
        if math.sqrt(rho_new) <= tol * ref:
            return CGResult(c, it, True)
        p = resid + (rho_new / rho) * p
        rho = rho_new
    warnings.warn(f"cg_normal did not converge in {maxit} iterations", stacklevel=2)
    return CGResult(c, maxit, False)
