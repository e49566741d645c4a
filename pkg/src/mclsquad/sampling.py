"""Point-set generators.

Uniform i.i.d. batches with counter-based reproducibility, Christoffel
(basis-adapted) importance sampling driven by tabulated inverse CDFs,
scrambled Halton sequences, exact antithetic pairs, and stratified
partitions.  Every generator evaluates the integrand once per point and
caches the values on the returned batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import qmc

from .basis import IndexSet, eval_basis_matrix, legendre_table
from .core import HyperRect, Integrand, RngSpec, SampleBatch

__all__ = [
    "MAX_HALTON_DIM",
    "TABLE_RESOLUTION",
    "uniform_batch",
    "ChristoffelSampler",
    "christoffel_weights",
    "christoffel_batch",
    "halton_points",
    "halton_batch",
    "antithetic_batch",
    "StratumPartition",
    "stratified_batch",
]

MAX_HALTON_DIM = 64

#: Cells per inverse-CDF table (each integrated with 8-point Gauss rules).
TABLE_RESOLUTION = 4096

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _raw_uniforms(rng: RngSpec, n_points: int, draws_per_point: int) -> np.ndarray:
    """``(n_points, draws_per_point)`` doubles; point ``i`` owns a fixed slice.

    The per-point budget is rounded up to the 4-draw granularity of the
    counter-based generator, so advancing ``stream`` by a point count lands
    exactly on the draws a longer run would have used — batches partition.
    """
    if n_points < 1:
        raise ValueError("need at least one point")
    per = 4 * ((draws_per_point + 3) // 4)
    bitgen = np.random.Philox(key=np.uint64(rng.seed))
    bitgen.advance(rng.stream * (per // 4))
    u = np.random.Generator(bitgen).random(n_points * per)
    return u.reshape(n_points, per)[:, :draws_per_point]


def _eval_checked(integrand: Integrand, points: np.ndarray) -> np.ndarray:
    vals = integrand(points)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise ValueError(
            f"integrand {integrand.name!r} returned a non-finite value "
            f"({vals[i]!r}) at point {points[i].tolist()}"
        )
    return vals


def uniform_batch(integrand: Integrand, n: int, rng: RngSpec) -> SampleBatch:
    """``n`` i.i.d. uniform points on the domain, values cached."""
    u = _raw_uniforms(rng, n, integrand.dim)
    pts = integrand.domain.from_unit(u)
    return SampleBatch(
        points=pts,
        fvals=_eval_checked(integrand, pts),
        weights=None,
        rng=rng,
        scheme="uniform",
        domain=integrand.domain,
    )


@dataclass(frozen=True, eq=False)
class ChristoffelSampler:
    """Sampler for the mixture density ``(1/(n+1)) * sum_j phi_j(x)^2``.

    One inverse-CDF table per distinct 1-D degree: the CDF of
    ``L~_j(x)^2`` is accumulated cell by cell with 8-point Gauss rules on a
    uniform grid of ``TABLE_RESOLUTION`` cells, then inverted by linear
    interpolation.  A draw picks a basis index uniformly and then each
    coordinate from the squared 1-D factor of that index.  Reported
    weights ``w(x) = (n+1) / sum_j phi_j(x)^2`` are recomputed exactly
    from the basis at the returned points — table error perturbs the
    proposal slightly, never the weights.
    """

    iset: IndexSet
    xgrid: np.ndarray
    cdfs: np.ndarray  # (max 1-D degree + 1, TABLE_RESOLUTION + 1)

    @classmethod
    def build(cls, iset: IndexSet, resolution: int = TABLE_RESOLUTION) -> "ChristoffelSampler":
        if resolution < 2:
            raise ValueError("resolution must be >= 2")
        jmax = iset.max_component()
        edges = np.linspace(0.0, 1.0, resolution + 1)
        half = 0.5 / resolution
        centers = edges[:-1] + half
        # per-cell Gauss nodes, flattened: (resolution * 8,)
        nodes = (centers[:, None] + half * _GAUSS_NODES[None, :]).ravel()
        table = legendre_table(nodes, jmax) ** 2
        dens = table.reshape(resolution, len(_GAUSS_NODES), jmax + 1)
        cell_mass = (dens * _GAUSS_WEIGHTS[None, :, None]).sum(axis=1) * half
        cdf = np.zeros((jmax + 1, resolution + 1))
        np.cumsum(cell_mass.T, axis=1, out=cdf[:, 1:])
        if np.any(np.diff(cdf, axis=1) <= 0.0):
            raise ValueError(
                "inverse-CDF table is not strictly increasing; raise the resolution"
            )
        cdf /= cdf[:, -1:]  # pin total mass to exactly 1
        return cls(iset=iset, xgrid=edges, cdfs=cdf)

    def sample(self, n: int, rng: RngSpec) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` unit-cube points; return ``(points, exact weights)``.

        Consumes ``dim + 1`` uniforms per point (index draw + one per
        coordinate), independent of which index came up.
        """
        d = self.iset.dim
        size = self.iset.size
        u = _raw_uniforms(rng, n, d + 1)
        which = np.minimum((u[:, 0] * size).astype(np.int64), size - 1)
        degs = self.iset.degrees()[which]
        pts = np.empty((n, d))
        for m in range(d):
            col = u[:, m + 1]
            dm = degs[:, m]
            for j in np.unique(dm):
                mask = dm == j
                pts[mask, m] = np.interp(col[mask], self.cdfs[j], self.xgrid)
        return pts, christoffel_weights(self.iset, pts)


def christoffel_weights(iset: IndexSet, unit_points: np.ndarray, chunk: int = 65536) -> np.ndarray:
    """``w(x) = (n+1) / sum_j phi_j(x)^2``, evaluated exactly from the basis."""
    pts = np.asarray(unit_points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], chunk):
        v = eval_basis_matrix(pts[s : s + chunk], iset)
        out[s : s + chunk] = iset.size / np.einsum("ij,ij->i", v, v)
    return out


def christoffel_batch(
    integrand: Integrand,
    iset: IndexSet,
    n: int,
    rng: RngSpec,
    sampler: ChristoffelSampler | None = None,
) -> SampleBatch:
    """``n`` points from the basis-adapted density, with importance weights.

    Pass a prebuilt ``sampler`` to amortize table construction across
    batches; it must have been built for the same index set.
    """
    if iset.dim != integrand.dim:
        raise ValueError("index set and integrand dimensions differ")
    if sampler is None:
        sampler = ChristoffelSampler.build(iset)
    elif sampler.iset.indices != iset.indices:
        raise ValueError("sampler was built for a different index set")
    upts, w = sampler.sample(n, rng)
    pts = integrand.domain.from_unit(upts)
    return SampleBatch(
        points=pts,
        fvals=_eval_checked(integrand, pts),
        weights=w,
        rng=rng,
        scheme="christoffel",
        domain=integrand.domain,
    )


def halton_points(
    n: int, dim: int, start: int = 0, seed: int | None = None, scramble: bool = True
) -> np.ndarray:
    """Points ``start+1 .. start+n`` of the (optionally scrambled) Halton sequence.

    Bases are the first ``dim`` primes.  The degenerate all-zero point at
    index 0 is always skipped, so the unscrambled 1-D sequence begins
    ``1/2, 1/4, 3/4, 1/8, ...``.  Scrambling permutes digits with an RNG
    derived from ``seed`` alone, which is why two slices of one stream
    agree with a single longer run.
    """
    if dim > MAX_HALTON_DIM:
        raise ValueError(f"Halton sampling supports at most {MAX_HALTON_DIM} dimensions")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n < 1:
        raise ValueError("need at least one point")
    sampler = qmc.Halton(d=dim, scramble=scramble, seed=np.random.default_rng(seed))
    sampler.fast_forward(int(start) + 1)
    return sampler.random(int(n))


def halton_batch(integrand: Integrand, n: int, rng: RngSpec, scramble: bool = True) -> SampleBatch:
    """A scrambled-Halton batch; ``rng.stream`` is the sequence offset."""
    upts = halton_points(n, integrand.dim, start=rng.stream, seed=rng.seed, scramble=scramble)
    pts = integrand.domain.from_unit(upts)
    return SampleBatch(
        points=pts,
        fvals=_eval_checked(integrand, pts),
        weights=None,
        rng=rng,
        scheme="halton",
        domain=integrand.domain,
    )


def antithetic_batch(integrand: Integrand, n_pairs: int, rng: RngSpec) -> SampleBatch:
    """``2 * n_pairs`` points in center-reflected pairs, interleaved.

    On the unit cube the partner of ``x`` is ``1 - x``, which is exact in
    floating point for generator output — that exactness is what makes
    parity-odd functions cancel identically downstream.  ``rng.stream``
    counts pairs.
    """
    u = _raw_uniforms(rng, n_pairs, integrand.dim)
    upts = np.empty((2 * n_pairs, integrand.dim))
    upts[0::2] = u
    upts[1::2] = 1.0 - u
    pts = integrand.domain.from_unit(upts)
    return SampleBatch(
        points=pts,
        fvals=_eval_checked(integrand, pts),
        weights=None,
        rng=rng,
        scheme="antithetic",
        domain=integrand.domain,
    )


@dataclass(frozen=True)
class StratumPartition:
    """Disjoint boxes covering a domain, with per-stratum sample budgets.

    Only volume coverage is validated (sum of stratum volumes equals the
    domain volume to relative 1e-12); callers are trusted on disjointness.
    """

    domain: HyperRect
    strata: tuple[HyperRect, ...]
    budgets: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.strata) == 0:
            raise ValueError("need at least one stratum")
        if len(self.strata) != len(self.budgets):
            raise ValueError("one budget per stratum")
        for rect in self.strata:
            if rect.dim != self.domain.dim:
                raise ValueError("stratum dimension differs from the domain")
        for b in self.budgets:
            if int(b) < 2:
                raise ValueError("every stratum budget must be at least 2")
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        total = sum(rect.volume() for rect in self.strata)
        if not math.isclose(total, self.domain.volume(), rel_tol=1e-12):
            raise ValueError(
                f"stratum volumes sum to {total}, domain volume is {self.domain.volume()}"
            )

    @property
    def n_total(self) -> int:
        return sum(self.budgets)

    @classmethod
    def regular(cls, domain: HyperRect, cuts: int, n_total: int) -> "StratumPartition":
        """Split every axis into ``cuts`` equal parts; budgets are equal
        (the cells all have the same volume), remainders going to the
        first cells in lexicographic order."""
        if cuts < 1:
            raise ValueError("cuts must be >= 1")
        d = domain.dim
        n_cells = cuts**d
        if n_total < 2 * n_cells:
            raise ValueError(
                f"budget {n_total} cannot give every one of {n_cells} cells two points"
            )
        lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)
        edges = [np.linspace(lo[m], hi[m], cuts + 1) for m in range(d)]
        strata = []
        for flat in range(n_cells):
            ix, rest = [], flat
            for _ in range(d):
                ix.append(rest % cuts)
                rest //= cuts
            ix = ix[::-1]
            strata.append(
                HyperRect(
                    tuple(edges[m][ix[m]] for m in range(d)),
                    tuple(edges[m][ix[m] + 1] for m in range(d)),
                )
            )
        base, rem = divmod(n_total, n_cells)
        budgets = tuple(base + (1 if i < rem else 0) for i in range(n_cells))
        return cls(domain=domain, strata=tuple(strata), budgets=budgets)


def stratified_batch(
    integrand: Integrand, partition: StratumPartition, rng: RngSpec
) -> list[SampleBatch]:
    """One uniform batch per stratum; the stream advances by points consumed.

    Each returned batch carries its stratum as its domain, so downstream
    fits are automatically relative to the stratum's own unit cube.
    """
    if partition.domain.dim != integrand.dim:
        raise ValueError("partition and integrand dimensions differ")
    batches = []
    offset = 0
    for rect, budget in zip(partition.strata, partition.budgets):
        sub = replace(integrand, domain=rect)
        batches.append(uniform_batch(sub, budget, rng.advanced(offset)))
        offset += budget
    return batches
