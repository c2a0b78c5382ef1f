"""Correlation columns, correct-vs-wrong t statistics, accuracy and noise sweeps."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from cganuc.data import mix_noise
from cganuc.prediction import DEFAULT_BINS, DEFAULT_K, summarize


class UndefinedStatistic(ValueError):
    """Raised instead of returning a fabricated number (e.g. zero-variance correlation)."""


def _vec(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64).reshape(-1)


def pearson(a, b) -> float:
    a, b = _vec(a), _vec(b)
    if a.size != b.size:
        raise ValueError("pearson needs equal-length vectors")
    if a.size < 2:
        raise UndefinedStatistic("pearson needs at least two points")
    da, db = a - a.mean(), b - b.mean()
    sa, sb = math.sqrt(np.dot(da, da)), math.sqrt(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise UndefinedStatistic("correlation undefined: zero variance")
    return float(np.clip(np.dot(da, db) / (sa * sb), -1.0, 1.0))


def welch_t(a, b) -> float:
    """Unequal-variance t statistic of mean(a) - mean(b)."""
    a, b = _vec(a), _vec(b)
    if a.size < 2 or b.size < 2:
        raise UndefinedStatistic("each group needs at least two values")
    se2 = a.var(ddof=1) / a.size + b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    if se2 == 0:
        if diff == 0:
            return 0.0
        raise UndefinedStatistic("both groups have zero variance")
    return float(diff / math.sqrt(se2))


def prediction_errors(points, targets, kind: str = "absolute") -> np.ndarray:
    d = _vec(points) - _vec(targets)
    if kind == "absolute":
        return np.abs(d)
    if kind == "squared":
        return d * d
    raise ValueError(f"unknown error kind {kind!r}")


def uncertainty_error_correlation(preds, targets, error: str = "absolute") -> float:
    """pearson(eta, |point - target|) over single-target regression predictions."""
    etas = [p.eta for p in preds]
    points = [p.point[0] for p in preds]
    return pearson(etas, prediction_errors(points, targets, error))


@dataclass
class EvalReport:
    n: int
    pearson_point_vs_target: float | None = None
    pearson_uncertainty_vs_error: float | None = None
    accuracy: float | None = None
    t_wrong_vs_correct: float | None = None
    t_loss_wrong_vs_correct: float | None = None
    n_correct: int | None = None
    n_wrong: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedStatistic:
        return None


def evaluate_regression(model, dataset, k: int = DEFAULT_K, seed=0, bins: int = DEFAULT_BINS,
                        error: str = "absolute") -> EvalReport:
    s = summarize(model, dataset.inputs, k, seed, bins)
    y = dataset.targets[:, 0]
    return EvalReport(
        n=dataset.n,
        pearson_point_vs_target=_maybe(pearson, s.point[:, 0], y),
        pearson_uncertainty_vs_error=_maybe(pearson, s.eta, prediction_errors(s.point[:, 0], y, error)),
    )


def evaluate_classification(model, dataset, k: int = DEFAULT_K, seed=0, bins: int = DEFAULT_BINS) -> EvalReport:
    """Accuracy plus Welch t of eta (and of the softmax-loss baseline) for wrong vs correct."""
    s = summarize(model, dataset.inputs, k, seed, bins)
    correct = s.point == dataset.labels()
    # Cross-entropy baseline on the mean softmax output.
    chosen = s.class_means[np.arange(dataset.n), s.point]
    loss = -np.log(np.maximum(chosen, 1e-300))
    return EvalReport(
        n=dataset.n,
        accuracy=float(correct.mean()),
        t_wrong_vs_correct=_maybe(welch_t, s.eta[~correct], s.eta[correct]),
        t_loss_wrong_vs_correct=_maybe(welch_t, loss[~correct], loss[correct]),
        n_correct=int(correct.sum()),
        n_wrong=int((~correct).sum()),
    )


@dataclass
class SweepPoint:
    a: float
    accuracy: float
    median_eta: float
    etas: np.ndarray | None = None


def noise_sweep(model, dataset, a_values: Sequence[float], k: int = DEFAULT_K, seed=0,
                bins: int = DEFAULT_BINS, keep_etas: bool = False) -> list[SweepPoint]:
    """Accuracy and median eta of a classification model on noise-mixed inputs.

    Noise for level ``a_values[i]`` is seeded by ``[seed, i]``; Monte Carlo
    draws reuse ``seed`` so that ``a = 0`` reproduces plain evaluation.
    """
    if model.task != "classification":
        raise ValueError("noise_sweep needs a classification model")
    labels = dataset.labels()
    out = []
    for i, a in enumerate(a_values):
        x = mix_noise(dataset.inputs, float(a), np.random.default_rng([seed, i]))
        s = summarize(model, x, k, seed, bins)
        out.append(SweepPoint(
            float(a), float(np.mean(s.point == labels)), float(np.median(s.eta)),
            s.eta if keep_etas else None,
        ))
    return out


def sweep_is_monotone(medians: Sequence[float], eta_range: float, tolerance: float = 0.05,
                      allowed_violations: int = 1) -> bool:
    """Non-decreasing medians, permitting a few small adjacent drops (<= tolerance * eta_range)."""
    drops = [b - a for a, b in zip(medians, medians[1:]) if b < a]
    if len(drops) > allowed_violations:
        return False
    return all(-d <= tolerance * eta_range for d in drops)
