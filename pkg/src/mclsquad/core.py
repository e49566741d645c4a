"""Shared value types for the integration library.

Everything downstream (samplers, estimators, the benchmark harness) passes
these records around: axis-aligned box domains, integrands with their
domain metadata, sample batches that remember how they were drawn, and
estimate reports.

All approximation machinery works on the unit cube ``[0, 1]^d``; general
boxes are handled by the componentwise affine map plus a volume factor, so
the records here carry both representations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "SCHEMES",
    "CI_MULTIPLIER",
    "HyperRect",
    "Integrand",
    "RngSpec",
    "SampleBatch",
    "EstimateReport",
    "make_report",
    "volume",
    "to_unit_cube",
    "from_unit_cube",
]

#: Sampling schemes a batch may declare.
SCHEMES = ("uniform", "christoffel", "halton", "antithetic", "stratified")

#: Fixed half-width multiplier of the reported confidence interval
#: (two residual standard errors, inflated by the condition number).
CI_MULTIPLIER = 2.0


@dataclass(frozen=True)
class HyperRect:
    """Axis-aligned box ``[lo_1, hi_1] x ... x [lo_d, hi_d]``.

    Bounds must be finite with ``lo < hi`` strictly in every coordinate;
    degenerate (zero-width) boxes are rejected.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) == 0 or len(lo) != len(hi):
            raise ValueError("lo and hi must be non-empty and equally long")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("domain bounds must be finite")
            if not a < b:
                raise ValueError(f"need lo < hi in every coordinate, got [{a}, {b}]")

    @classmethod
    def unit(cls, dim: int) -> "HyperRect":
        """The unit cube ``[0, 1]^dim``."""
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def is_unit(self) -> bool:
        return all(a == 0.0 and b == 1.0 for a, b in zip(self.lo, self.hi))

    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.lo, dtype=float), np.asarray(self.hi, dtype=float)

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        """Map points of the closed box onto ``[0, 1]^d``.

        Points outside the closed domain are an error, not a silent clamp.
        On the unit cube this is the identity (bit-for-bit).
        """
        x = np.asarray(x, dtype=float)
        lo, hi = self._bounds()
        if np.any(x < lo) or np.any(x > hi) or not np.all(np.isfinite(x)):
            raise ValueError("point outside the closed domain")
        if self.is_unit():
            return x
        return (x - lo) / (hi - lo)

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map unit-cube points into the box (inverse of :meth:`to_unit`)."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0.0) or np.any(u > 1.0) or not np.all(np.isfinite(u)):
            raise ValueError("point outside the closed unit cube")
        if self.is_unit():
            return u
        lo, hi = self._bounds()
        # the affine image of [0,1] can overshoot hi by one rounding step;
        # clamp so downstream closed-domain checks stay strict
        return np.clip(lo + (hi - lo) * u, lo, hi)


def volume(domain: HyperRect) -> float:
    """Lebesgue volume of the box."""
    return domain.volume()


def to_unit_cube(domain: HyperRect, x: np.ndarray) -> np.ndarray:
    """Affine map of domain points onto the unit cube."""
    return domain.to_unit(x)


def from_unit_cube(domain: HyperRect, u: np.ndarray) -> np.ndarray:
    """Affine map of unit-cube points into the domain."""
    return domain.from_unit(u)


@dataclass(frozen=True)
class Integrand:
    """A d-variate real function together with its domain.

    ``fn`` must accept an ``(N, d)`` array of points and return an ``(N,)``
    array of values; wrap scalar functions with :meth:`from_pointwise`.
    Evaluation must be deterministic — batches cache values precisely so
    that nothing ever has to evaluate ``f`` twice at the same point.
    """

    name: str
    dim: int
    domain: HyperRect
    fn: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.domain.dim != self.dim:
            raise ValueError(
                f"domain dimension {self.domain.dim} != integrand dimension {self.dim}"
            )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"expected points of shape (N, {self.dim})")
        vals = np.asarray(self.fn(pts), dtype=float)
        if vals.shape != (pts.shape[0],):
            raise ValueError(
                f"integrand {self.name!r} returned shape {vals.shape}, "
                f"expected ({pts.shape[0]},)"
            )
        return vals

    @classmethod
    def from_pointwise(
        cls, name: str, dim: int, domain: HyperRect, f: Callable[[np.ndarray], float]
    ) -> "Integrand":
        """Wrap a one-point-at-a-time function into the vectorized contract."""

        def fn(pts: np.ndarray) -> np.ndarray:
            return np.array([float(f(p)) for p in pts])

        return cls(name=name, dim=dim, domain=domain, fn=fn)


@dataclass(frozen=True)
class RngSpec:
    """Counter-based RNG coordinates ``(seed, stream)``.

    ``stream`` counts points (pairs, for antithetic sampling) already
    consumed, so one batch of ``N`` points followed by ``advanced(N)``
    continues exactly the sequence a single batch of ``2N`` would have
    produced.  Each point owns a fixed, block-aligned budget of raw draws,
    which is what makes the partitioning exact rather than approximate.
    """

    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        seed = int(self.seed)
        stream = int(self.stream)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "stream", stream)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if stream < 0:
            raise ValueError("stream must be non-negative")

    def advanced(self, n_points: int) -> "RngSpec":
        """The spec addressing the draws after ``n_points`` more points."""
        n = int(n_points)
        if n < 0:
            raise ValueError("cannot advance by a negative point count")
        return RngSpec(self.seed, self.stream + n)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Points, cached integrand values, and their sampling provenance.

    Weights are present exactly for Christoffel-sampled batches (the
    importance ratios ``w(x_i)``); every other scheme is unweighted.
    """

    points: np.ndarray
    fvals: np.ndarray
    weights: np.ndarray | None
    rng: RngSpec
    scheme: str
    domain: HyperRect

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        vals = np.asarray(self.fvals, dtype=float)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "fvals", vals)
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown sampling scheme {self.scheme!r}")
        if pts.ndim != 2 or pts.shape[1] != self.domain.dim:
            raise ValueError("points must have shape (N, domain.dim)")
        if vals.shape != (pts.shape[0],):
            raise ValueError("fvals must have shape (N,)")
        if pts.shape[0] == 0:
            raise ValueError("empty batch")
        lo, hi = np.asarray(self.domain.lo), np.asarray(self.domain.hi)
        if np.any(pts < lo) or np.any(pts > hi) or not np.all(np.isfinite(pts)):
            raise ValueError("batch points must lie inside the closed domain")
        if self.scheme == "christoffel":
            if self.weights is None:
                raise ValueError("christoffel batches carry weights")
            w = np.asarray(self.weights, dtype=float)
            object.__setattr__(self, "weights", w)
            if w.shape != (pts.shape[0],):
                raise ValueError("weights must have shape (N,)")
            if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
                raise ValueError("weights must be finite and positive")
        elif self.weights is not None:
            raise ValueError(f"scheme {self.scheme!r} does not carry weights")
        if self.scheme == "antithetic" and pts.shape[0] % 2 != 0:
            raise ValueError("antithetic batches have an even number of points")

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class EstimateReport:
    """One integral estimate with its error diagnostics.

    ``ci_half_width`` always equals ``2 * kappa * sqrt(sigma2 / n_samples)``
    — build reports through :func:`make_report` so the invariant holds by
    construction.  ``sigma2`` is the residual variance with the domain
    volume squared folded in, so the interval targets the integral itself
    on any box.
    """

    estimate: float
    sigma2: float
    ci_half_width: float
    kappa: float
    n_samples: int
    n_basis: int
    method: str
    degree: int | None = None
    level: int | None = None


def make_report(
    estimate: float,
    sigma2: float,
    kappa: float,
    n_samples: int,
    n_basis: int,
    method: str,
    degree: int | None = None,
    level: int | None = None,
) -> EstimateReport:
    """Assemble a report, deriving the confidence half-width.

    Tiny negative ``sigma2`` values (possible when a streaming identity is
    used on an exact fit) are clamped to zero, so a zero residual reports a
    zero-width interval.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if n_basis < 1:
        raise ValueError("n_basis must be positive")
    if not math.isfinite(kappa) and not kappa == math.inf:
        raise ValueError("kappa must be finite or +inf")
    s2 = max(float(sigma2), 0.0)
    ci = CI_MULTIPLIER * float(kappa) * math.sqrt(s2) / math.sqrt(n_samples)
    return EstimateReport(
        estimate=float(estimate),
        sigma2=s2,
        ci_half_width=ci,
        kappa=float(kappa),
        n_samples=int(n_samples),
        n_basis=int(n_basis),
        method=method,
        degree=degree,
        level=level,
    )
