"""Entropy (regression) and negative symmetric KL (classification) uncertainty."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cganuc.distributions import EmpiricalDistribution

KL_SMOOTHING = 1e-9
LOSS_CAP = 1e9


@dataclass(frozen=True, eq=False)
class UncertaintyValue:
    """``kind`` is ``"regression-entropy"`` (one entropy per target) or
    ``"classification-neg-sym-kl"`` (a single value <= 0)."""

    kind: str
    values: np.ndarray

    @property
    def scalar(self) -> float:
        if self.values.size != 1:
            raise ValueError("uncertainty has more than one component")
        return float(self.values[0])


def entropy(dist: EmpiricalDistribution) -> float:
    """Shannon entropy in nats; empty bins contribute nothing."""
    m = dist.mass[dist.mass > 0]
    return float(-np.sum(m * np.log(m)))


def entropies(masses: np.ndarray) -> np.ndarray:
    """Row-wise entropy of a stack of mass vectors."""
    masses = np.atleast_2d(masses)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(masses > 0, masses * np.log(np.where(masses > 0, masses, 1.0)), 0.0)
    return -terms.sum(axis=1)


def pool_other_classes(dists: Sequence[EmpiricalDistribution], l_x: int) -> EmpiricalDistribution:
    """Uniform mixture of every class distribution except ``l_x``."""
    if len(dists) < 2:
        raise ValueError("pooling needs at least two classes")
    ref = dists[0]
    for d in dists[1:]:
        if not ref.same_support(d):
            raise ValueError("class distributions do not share bin edges")
    others = [d for j, d in enumerate(dists) if j != l_x]
    mass = np.mean([d.mass for d in others], axis=0)
    mass = mass / mass.sum()
    return EmpiricalDistribution(ref.edges, mass, sum(d.sample_count for d in others))


def _smooth(mass: np.ndarray, eps: float) -> np.ndarray:
    m = mass + eps
    return m / m.sum(axis=-1, keepdims=True)


def symmetric_kl(p: EmpiricalDistribution, r: EmpiricalDistribution, eps: float = KL_SMOOTHING) -> float:
    """``KL(p||r) + KL(r||p)`` after adding ``eps`` to every bin and renormalising."""
    if not p.same_support(r):
        raise ValueError("distributions have different supports")
    return float(symmetric_kl_masses(p.mass, r.mass, eps))


def symmetric_kl_masses(p: np.ndarray, r: np.ndarray, eps: float = KL_SMOOTHING) -> np.ndarray:
    """Vectorised symmetric KL over the last axis of two mass arrays."""
    ps, rs = _smooth(np.asarray(p, dtype=np.float64), eps), _smooth(np.asarray(r, dtype=np.float64), eps)
    # (p - r) * log(p / r) summed is KL(p||r) + KL(r||p) and is symmetric term by term.
    return np.sum((ps - rs) * (np.log(ps) - np.log(rs)), axis=-1)


def uncertainty(prediction) -> UncertaintyValue:
    """eta for a prediction carrying ``task``, ``distributions`` and (classification) ``predicted_class``."""
    if prediction.task == "regression":
        return UncertaintyValue(
            "regression-entropy", np.array([entropy(d) for d in prediction.distributions])
        )
    l_x = prediction.predicted_class
    if l_x is None:
        raise ValueError("classification uncertainty needs the predicted class")
    dists = prediction.distributions
    pooled = pool_other_classes(dists, l_x)
    return UncertaintyValue(
        "classification-neg-sym-kl", np.array([-symmetric_kl(dists[l_x], pooled)])
    )


def softmax_loss_uncertainty(class_probs, l_x: int) -> float:
    """Cross-entropy baseline ``-ln p[l_x]``; capped at 1e9 when ``p[l_x] == 0``."""
    probs = np.asarray(class_probs, dtype=np.float64).reshape(-1)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError("class_probs is not a probability vector")
    p = probs[l_x]
    if p <= 0:
        return LOSS_CAP
    return -math.log(p)
