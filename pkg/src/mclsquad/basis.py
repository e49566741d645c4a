r"""Tensor-product orthonormal Legendre bases on the unit cube.

Multi-index sets are truncated by total, Euclidean, or max degree and kept
in graded lexicographic order.  The 1-D building block is the shifted
orthonormal Legendre family

.. math:: \tilde L_j(x) = \sqrt{2j+1}\, P_j(2x - 1), \qquad x \in [0, 1],

evaluated with the three-term recurrence, so that
:math:`\int_0^1 \tilde L_i \tilde L_j \,dx = \delta_{ij}`.  A basis
function is the product :math:`\varphi_\lambda(x) = \prod_m
\tilde L_{\lambda_m}(x_m)`; the constant :math:`\varphi_0 \equiv 1` is
always the first column, and it is the only basis function with a nonzero
integral (namely 1), which is what makes the fitted constant coefficient
the integral estimate downstream.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAX_BASIS_SIZE",
    "DEGREE_KINDS",
    "IndexSet",
    "multi_index_set",
    "total_degree_size",
    "legendre_table",
    "eval_legendre_1d",
    "eval_basis_matrix",
    "basis_integrals",
]

#: Hard cap on the number of basis functions one set may hold.
MAX_BASIS_SIZE = 2_000_000

DEGREE_KINDS = ("total", "euclidean", "max")


@dataclass(frozen=True)
class IndexSet:
    """An ordered multi-index set defining a tensor-product basis.

    ``indices[0]`` is always the all-zero index (the constant function).
    The ordering is graded lexicographic: ascending total degree, ties
    broken with earlier coordinates carrying the larger entries first, so
    e.g. for ``d=2``, ``k=1``: ``(0,0), (1,0), (0,1)``.  The ordering is a
    pure function of ``(dim, degree_cap, kind)`` — two processes always
    agree on column numbering.
    """

    indices: tuple[tuple[int, ...], ...]
    kind: str
    degree_cap: int
    dim: int

    def __post_init__(self) -> None:
        if self.kind not in DEGREE_KINDS:
            raise ValueError(f"unknown degree kind {self.kind!r}")
        if not self.indices:
            raise ValueError("empty index set")
        if self.indices[0] != (0,) * self.dim:
            raise ValueError("first index must be the all-zero multi-index")

    @property
    def size(self) -> int:
        """Number of basis functions, i.e. ``n + 1``."""
        return len(self.indices)

    def degrees(self) -> np.ndarray:
        """The indices as an ``(size, dim)`` integer array."""
        return np.asarray(self.indices, dtype=np.int64)

    def max_component(self) -> int:
        """Largest 1-D degree appearing anywhere in the set."""
        return max(max(ix) for ix in self.indices)


def total_degree_size(dim: int, degree: int) -> int:
    """``C(dim + degree, degree)``: size of the total-degree set."""
    return math.comb(dim + degree, degree)


def _graded_key(ix: tuple[int, ...]):
    # Grade first; within a grade, larger leading entries come first.
    return (sum(ix), tuple(-j for j in ix))


def _total_indices(dim: int, cap: int):
    def rec(prefix: tuple[int, ...], budget: int, dims_left: int):
        if dims_left == 1:
            for j in range(budget + 1):
                yield prefix + (j,)
            return
        for j in range(budget + 1):
            yield from rec(prefix + (j,), budget - j, dims_left - 1)

    yield from rec((), cap, dim)


def _euclidean_indices(dim: int, cap: int):
    # Enumerate the lattice ball sum(j^2) <= cap^2 directly, dimension by
    # dimension, so nothing outside the ball is ever materialized.
    cap_sq = cap * cap

    def rec(prefix: tuple[int, ...], budget_sq: int, dims_left: int):
        if dims_left == 1:
            top = math.isqrt(budget_sq)
            for j in range(top + 1):
                yield prefix + (j,)
            return
        top = math.isqrt(budget_sq)
        for j in range(top + 1):
            yield from rec(prefix + (j,), budget_sq - j * j, dims_left - 1)

    yield from rec((), cap_sq, dim)


def multi_index_set(dim: int, degree: int, kind: str = "total") -> IndexSet:
    """Build the multi-index set of the given truncation kind.

    ``total`` keeps ``sum(j) <= degree`` (size ``C(d+k, k)``),
    ``euclidean`` keeps ``sqrt(sum(j^2)) <= degree``, and ``max`` keeps
    ``max(j) <= degree`` (size ``(k+1)^d``).  Sets larger than
    ``MAX_BASIS_SIZE`` raise with the offending size spelled out rather
    than exhausting memory.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if kind not in DEGREE_KINDS:
        raise ValueError(f"unknown degree kind {kind!r}; expected one of {DEGREE_KINDS}")

    if kind == "total":
        size = total_degree_size(dim, degree)
        if size > MAX_BASIS_SIZE:
            raise ValueError(
                f"total-degree set has {size} functions, exceeding the cap of "
                f"{MAX_BASIS_SIZE}"
            )
        raw = list(_total_indices(dim, degree))
    elif kind == "max":
        size = (degree + 1) ** dim
        if size > MAX_BASIS_SIZE:
            raise ValueError(
                f"max-degree set has {size} functions, exceeding the cap of "
                f"{MAX_BASIS_SIZE}"
            )
        raw = list(itertools.product(range(degree + 1), repeat=dim))
    else:
        raw = []
        for ix in _euclidean_indices(dim, degree):
            raw.append(ix)
            if len(raw) > MAX_BASIS_SIZE:
                raise ValueError(
                    f"euclidean-degree set exceeds the cap of {MAX_BASIS_SIZE} functions"
                )

    raw.sort(key=_graded_key)
    return IndexSet(indices=tuple(raw), kind=kind, degree_cap=degree, dim=dim)


def legendre_table(x: np.ndarray, max_degree: int) -> np.ndarray:
    r"""Values of :math:`\tilde L_0, \dots, \tilde L_{max\_degree}` at ``x``.

    Returns ``T`` of shape ``(len(x), max_degree + 1)`` with
    ``T[i, j] = sqrt(2j+1) * P_j(2 x_i - 1)``.  Uses the standard
    recurrence ``(j+1) P_{j+1}(t) = (2j+1) t P_j(t) - j P_{j-1}(t)`` on the
    unnormalized values, normalizing once at the end.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    x = np.asarray(x, dtype=float).ravel()
    return np.ascontiguousarray(_legendre_rows(x, max_degree).T)


def _legendre_rows(x: np.ndarray, max_degree: int) -> np.ndarray:
    # Transposed layout, one contiguous row per degree, so that gathering
    # rows by multi-index is a block copy rather than a strided one.
    t = 2.0 * x - 1.0
    out = np.empty((max_degree + 1, x.size), dtype=float)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = t
    for j in range(1, max_degree):
        out[j + 1] = ((2 * j + 1) * t * out[j] - j * out[j - 1]) / (j + 1)
    out *= np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)[:, None]
    return out


def eval_legendre_1d(degree: int, x) -> np.ndarray | float:
    """:math:`\\tilde L_{degree}` at scalar or array ``x`` in ``[0, 1]``."""
    arr = np.asarray(x, dtype=float)
    vals = legendre_table(arr.ravel(), degree)[:, degree]
    if arr.ndim == 0:
        return float(vals[0])
    return vals.reshape(arr.shape)


def eval_basis_matrix(points: np.ndarray, iset: IndexSet) -> np.ndarray:
    """Basis (Vandermonde-style) matrix ``V[i, j] = phi_j(points[i])``.

    Points must lie in the closed unit cube; the constant column comes
    first because ``indices[0]`` is the zero index.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != iset.dim:
        raise ValueError(f"expected points of shape (N, {iset.dim})")
    if pts.size and (pts.min() < -1e-12 or pts.max() > 1.0 + 1e-12):
        raise ValueError("basis evaluation requires points in the closed unit cube")
    degs = iset.degrees()
    # Build the transpose (one row per basis function) and hand back a view:
    # the result is then column-major, which is what the LAPACK-side solvers
    # consume without copying.
    vt = np.ones((iset.size, pts.shape[0]), dtype=float)
    for m in range(iset.dim):
        col_degs = degs[:, m]
        rows = _legendre_rows(pts[:, m], int(col_degs.max()))
        vt *= rows[col_degs]
    return vt.T


def basis_integrals(iset: IndexSet) -> np.ndarray:
    """Unit-cube integrals of the basis functions: ``(1, 0, ..., 0)``.

    Exact by orthogonality of every nonconstant factor against 1.
    """
    vec = np.zeros(iset.size, dtype=float)
    vec[0] = 1.0
    return vec
