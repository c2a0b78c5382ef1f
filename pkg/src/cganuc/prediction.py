"""Monte Carlo prediction: sample the generator k times per input and summarise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cganuc import autodiff as ad
from cganuc.distributions import (
    EmpiricalDistribution,
    bin_counts,
    estimate_density,
    fixed_edges,
    point_estimate,
)
from cganuc.networks import ModelBundle, generator_graph
from cganuc.uncertainty import UncertaintyValue, entropies, symmetric_kl_masses, uncertainty

DEFAULT_K = 256
DEFAULT_BINS = 64
_CHUNK_ROWS = 65536


@dataclass(frozen=True, eq=False)
class PredictionSamples:
    values: np.ndarray  # [k x q]
    input_id: int | str | None = None

    @property
    def k(self) -> int:
        return self.values.shape[0]


@dataclass(eq=False)
class PredictionWithUncertainty:
    task: str
    point: np.ndarray
    distributions: list[EmpiricalDistribution]
    uncertainty: UncertaintyValue | None = None
    predicted_class: int | None = None
    class_means: np.ndarray | None = None

    @property
    def eta(self) -> float:
        return self.uncertainty.scalar


def _check_k(k: int):
    if k < 2:
        raise ValueError(f"need k >= 2 Monte Carlo draws, got {k}")


def mc_samples(model: ModelBundle, inputs, k: int, seed) -> np.ndarray:
    """Generator draws for a batch of inputs, shape [n x k x q].

    Noise is drawn from one stream seeded by ``seed`` in input order, so the
    result is deterministic for a given (inputs, k, seed).
    """
    _check_k(k)
    x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    cond = model.condition_values(x)
    n = x.shape[0]
    spec = model.generator
    rng = np.random.default_rng(seed)
    p = {name: ad.constant(v) for name, v in model.params.items() if name.startswith("gen.")}
    out = np.empty((n, k, spec.out_dim))
    per_chunk = max(1, _CHUNK_ROWS // k)
    for start in range(0, n, per_chunk):
        stop = min(n, start + per_chunk)
        z = rng.standard_normal(((stop - start) * k, spec.noise_dim))
        c = np.repeat(cond[start:stop], k, axis=0)
        y = generator_graph(spec, p, ad.constant(z), ad.constant(c)).value
        out[start:stop] = y.reshape(stop - start, k, spec.out_dim)
    return out


def mc_predict(model: ModelBundle, x, k: int = DEFAULT_K, seed=0) -> PredictionSamples:
    """``k`` generator draws at a single input ``x``."""
    return PredictionSamples(mc_samples(model, np.asarray(x).reshape(1, -1), k, seed)[0])


def regression_edges(model: ModelBundle, bins: int = DEFAULT_BINS) -> list[np.ndarray]:
    if not model.target_range:
        raise ValueError("model has no target range; was it trained?")
    return [fixed_edges(lo, hi, bins) for lo, hi in model.target_range]


def class_edges(bins: int = DEFAULT_BINS) -> np.ndarray:
    return fixed_edges(0.0, 1.0, bins)


def predict_class(model: ModelBundle, x, k: int = DEFAULT_K, seed=0, bins: int = DEFAULT_BINS):
    """Predicted class (argmax of mean softmax output) and per-class distributions on [0, 1]."""
    if model.task != "classification":
        raise ValueError("predict_class needs a classification model")
    draws = mc_predict(model, x, k, seed).values
    return class_from_draws(draws, bins)


def class_from_draws(draws: np.ndarray, bins: int = DEFAULT_BINS):
    _check_k(draws.shape[0])
    l_x = int(np.argmax(draws.mean(axis=0)))
    edges = class_edges(bins)
    dists = [estimate_density(draws[:, j], edges=edges) for j in range(draws.shape[1])]
    return l_x, dists


def predict(
    model: ModelBundle,
    inputs,
    k: int = DEFAULT_K,
    seed=0,
    bins: int = DEFAULT_BINS,
    point: str = "mode",
) -> list[PredictionWithUncertainty]:
    """Point estimate, distributions and uncertainty for every row of ``inputs``."""
    draws = mc_samples(model, inputs, k, seed)
    preds = []
    if model.task == "regression":
        edges = regression_edges(model, bins)
        for row in draws:
            dists = [estimate_density(row[:, j], edges=edges[j]) for j in range(row.shape[1])]
            pred = PredictionWithUncertainty(
                "regression", np.array([point_estimate(d, point) for d in dists]), dists
            )
            pred.uncertainty = uncertainty(pred)
            preds.append(pred)
    else:
        for row in draws:
            l_x, dists = class_from_draws(row, bins)
            pred = PredictionWithUncertainty(
                "classification", np.eye(row.shape[1])[l_x], dists,
                predicted_class=l_x, class_means=row.mean(axis=0),
            )
            pred.uncertainty = uncertainty(pred)
            preds.append(pred)
    return preds


@dataclass
class BatchSummary:
    """Compact per-input results for large evaluations (no distribution objects)."""

    point: np.ndarray  # [n x q] (regression) or predicted class [n]
    eta: np.ndarray  # [n]
    class_means: np.ndarray | None = None


def summarize(model: ModelBundle, inputs, k: int = DEFAULT_K, seed=0, bins: int = DEFAULT_BINS) -> BatchSummary:
    """Vectorised equivalent of :func:`predict` returning only points and eta.

    Regression eta here is the first target's entropy; use :func:`predict`
    for multi-target models.
    """
    draws = mc_samples(model, inputs, k, seed)
    n, _, q = draws.shape
    if model.task == "regression":
        edges = regression_edges(model, bins)
        points = np.empty((n, q))
        etas = np.empty((n, q))
        for j in range(q):
            mass = bin_counts(draws[:, :, j], edges[j]) / k
            mids = 0.5 * (edges[j][:-1] + edges[j][1:])
            points[:, j] = mids[np.argmax(mass, axis=1)]
            etas[:, j] = entropies(mass)
        return BatchSummary(points, etas[:, 0])
    edges = class_edges(bins)
    means = draws.mean(axis=1)
    labels = np.argmax(means, axis=1)
    masses = np.stack([bin_counts(draws[:, :, j], edges) / k for j in range(q)], axis=1)  # [n, q, B]
    own = masses[np.arange(n), labels]
    keep = np.ones((n, q), dtype=bool)
    keep[np.arange(n), labels] = False
    pooled = (masses * keep[:, :, None]).sum(axis=1) / (q - 1)
    pooled = pooled / pooled.sum(axis=1, keepdims=True)
    return BatchSummary(labels, -symmetric_kl_masses(own, pooled), means)
