"""Binned probability mass functions built from Monte Carlo draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    edges: np.ndarray  # length B + 1, strictly increasing
    mass: np.ndarray  # length B, sums to 1
    sample_count: int

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        mass = np.asarray(self.mass, dtype=np.float64)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "mass", mass)
        if edges.ndim != 1 or mass.ndim != 1 or edges.size != mass.size + 1:
            raise ValueError("need B + 1 edges for B masses")
        if mass.size < 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing")
        if np.any(mass < 0) or abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError("mass must be nonnegative and sum to 1")

    @property
    def bins(self) -> int:
        return self.mass.size

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def same_support(self, other: "EmpiricalDistribution") -> bool:
        return self.edges.shape == other.edges.shape and bool(np.all(self.edges == other.edges))


def adaptive_edges(samples: np.ndarray, bins: int, pad_frac: float = 0.05) -> np.ndarray:
    lo, hi = float(np.min(samples)), float(np.max(samples))
    pad = (hi - lo) * pad_frac if hi > lo else 1e-6
    return np.linspace(lo - pad, hi + pad, bins + 1)


def fixed_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if not hi > lo:
        raise ValueError("empty range")
    return np.linspace(lo, hi, bins + 1)


def bin_counts(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Histogram counts of each row of ``values`` [n x k] over shared ``edges``.

    Values outside the edges land in the first/last bin; bins are half-open
    except the last, which includes its right edge (numpy convention).
    """
    values = np.atleast_2d(values)
    nbins = edges.size - 1
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = np.clip(idx, 0, nbins - 1)
    n = values.shape[0]
    flat = (idx + nbins * np.arange(n)[:, None]).reshape(-1)
    return np.bincount(flat, minlength=n * nbins).reshape(n, nbins)


def estimate_density(samples, bins: int = 64, edges=None) -> EmpiricalDistribution:
    """Normalised histogram of ``samples``.

    With ``edges=None`` the range adapts to the draws (min/max padded by 5% of
    the span, or 1e-6 when all draws coincide).  Passing ``edges`` fixes the
    support, which is what makes entropies comparable across inputs.
    """
    s = np.asarray(samples, dtype=np.float64).reshape(-1)
    if s.size < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite samples")
    if edges is None:
        if bins < 2:
            raise ValueError("need at least 2 bins")
        edges = adaptive_edges(s, bins)
    edges = np.asarray(edges, dtype=np.float64)
    counts = bin_counts(s[None, :], edges)[0]
    return EmpiricalDistribution(edges, counts / s.size, s.size)


def point_estimate(dist: EmpiricalDistribution, method: str = "mode") -> float:
    """Mode (midpoint of the heaviest bin, lowest index on ties), mean or median.

    The median interpolates linearly inside the bin where the CDF crosses 1/2.
    """
    mids = dist.midpoints
    if method == "mode":
        return float(mids[int(np.argmax(dist.mass))])
    if method == "mean":
        return float(np.dot(mids, dist.mass))
    if method == "median":
        cdf = np.cumsum(dist.mass)
        i = int(np.searchsorted(cdf, 0.5 - 1e-12))
        before = cdf[i - 1] if i > 0 else 0.0
        frac = (0.5 - before) / dist.mass[i]
        return float(dist.edges[i] + frac * (dist.edges[i + 1] - dist.edges[i]))
    raise ValueError(f"unknown point estimate {method!r}")
