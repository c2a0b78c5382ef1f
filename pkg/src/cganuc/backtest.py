"""Long/short/neutral strategies driven by predictions and their uncertainty."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class Position(enum.IntEnum):
    SHORT = -1
    NEUTRAL = 0
    LONG = 1


@dataclass(frozen=True)
class StrategySpec:
    """``threshold=None`` is the prediction-only baseline."""

    threshold: float | None = None
    position_size: float = 1.0

    def __post_init__(self):
        if self.threshold is not None and math.isnan(self.threshold):
            raise ValueError("threshold must not be NaN")

    @property
    def name(self) -> str:
        return "baseline" if self.threshold is None else f"eta<={self.threshold!r}"


def signal_to_position(pred: float, eta: float | None, spec: StrategySpec) -> Position:
    if spec.threshold is not None:
        if eta is None:
            raise ValueError("thresholded strategy needs an uncertainty value")
        if eta > spec.threshold:
            return Position.NEUTRAL
    if pred > 0:
        return Position.LONG
    if pred < 0:
        return Position.SHORT
    return Position.NEUTRAL


@dataclass
class BacktestReport:
    positions: list[Position]
    daily_returns: np.ndarray
    cumulative: float
    std: float
    counts: dict[str, int] = field(default_factory=dict)
    threshold: float | None = None
    ids: list[str] | None = None

    def equity_curve(self) -> np.ndarray:
        return np.cumprod(1.0 + self.daily_returns) - 1.0


def run_backtest(positions: Sequence[Position], realized_returns, cost: float = 0.0,
                 ids: list[str] | None = None) -> BacktestReport:
    """Strategy return per period is ``position * r`` minus ``cost`` per unit position change.

    ``std`` is the population standard deviation (ddof=0) of those returns.
    """
    r = np.asarray(realized_returns, dtype=np.float64).reshape(-1)
    pos = [Position(p) for p in positions]
    if len(pos) != r.size:
        raise ValueError(f"{len(pos)} positions for {r.size} returns")
    sign = np.array([int(p) for p in pos], dtype=np.float64)
    daily = sign * r
    if cost:
        turnover = np.abs(np.diff(np.concatenate([[0.0], sign])))
        daily = daily - cost * turnover
    cumulative = float(np.prod(1.0 + daily) - 1.0) if daily.size else 0.0
    counts = {p.name.lower(): sum(1 for x in pos if x is p) for p in Position}
    return BacktestReport(pos, daily, cumulative, float(daily.std()) if daily.size else 0.0, counts, ids=ids)


def non_overlapping(n: int, horizon: int, offset: int = 0) -> np.ndarray:
    """Indices ``offset, offset + horizon, ...`` so consecutive holding periods do not overlap."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return np.arange(offset, n, horizon)


def compare_strategies(preds, etas, realized_returns, thresholds: Sequence[float] = (),
                       cost: float = 0.0, ids: list[str] | None = None) -> list[BacktestReport]:
    """Baseline first, then one report per threshold, all on the same inputs."""
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    etas = np.asarray(etas, dtype=np.float64).reshape(-1)
    if preds.size == 0:
        raise ValueError("no predictions")
    if preds.size != etas.size:
        raise ValueError("predictions and uncertainties differ in length")
    reports = []
    for spec in [StrategySpec(None)] + [StrategySpec(float(t)) for t in thresholds]:
        pos = [signal_to_position(p, e, spec) for p, e in zip(preds, etas)]
        rep = run_backtest(pos, realized_returns, cost, ids)
        rep.threshold = spec.threshold
        reports.append(rep)
    return reports
