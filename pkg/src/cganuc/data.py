"""Price ingestion, return windowing, synthetic benchmarks and input noise mixing."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class PriceSeries:
    dates: list[str]
    closes: np.ndarray

    def __post_init__(self):
        self.closes = np.asarray(self.closes, dtype=np.float64)
        if len(self.dates) != self.closes.size:
            raise DataError("dates and closes differ in length")
        if np.any(self.closes <= 0) or not np.all(np.isfinite(self.closes)):
            raise DataError("prices must be finite and positive")
        if any(a >= b for a, b in zip(self.dates, self.dates[1:])):
            raise DataError("dates must be strictly increasing")

    def __len__(self) -> int:
        return self.closes.size


@dataclass
class SupervisedDataset:
    """Row-aligned ``inputs`` [n x p] and ``targets`` [n x q].

    ``ids`` optionally labels rows (dates for market data); ``aux`` carries
    per-row side information such as ground-truth noise scale.
    """

    inputs: np.ndarray
    targets: np.ndarray
    split: str = "train"
    note: str = ""
    ids: list[str] | None = None
    aux: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        n = self.inputs.shape[0]
        if self.targets.shape[0] != n:
            raise DataError(f"{n} input rows but {self.targets.shape[0]} target rows")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise DataError("dataset contains non-finite values")
        if self.ids is not None and len(self.ids) != n:
            raise DataError("ids length does not match row count")
        for key, col in self.aux.items():
            self.aux[key] = np.asarray(col, dtype=np.float64)
            if self.aux[key].shape[0] != n:
                raise DataError(f"aux column {key!r} has wrong length")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def p(self) -> int:
        return self.inputs.shape[1]

    @property
    def q(self) -> int:
        return self.targets.shape[1]

    def take(self, idx, split: str | None = None) -> "SupervisedDataset":
        idx = np.asarray(idx)
        return SupervisedDataset(
            self.inputs[idx],
            self.targets[idx],
            split or self.split,
            self.note,
            [self.ids[i] for i in idx] if self.ids is not None else None,
            {k: v[idx] for k, v in self.aux.items()},
        )

    def labels(self) -> np.ndarray:
        """Class indices for one-hot targets."""
        return np.argmax(self.targets, axis=1)


def prices_to_returns(series: PriceSeries | np.ndarray) -> np.ndarray:
    """Simple returns ``(p_t - p_{t-1}) / p_{t-1}``."""
    prices = series.closes if isinstance(series, PriceSeries) else np.asarray(series, dtype=np.float64)
    if prices.size < 2:
        raise DataError("need at least two prices")
    if np.any(prices <= 0):
        raise DataError("prices must be positive")
    return np.diff(prices) / prices[:-1]


def make_windows(
    returns, lookback: int = 30, horizon: int = 5, ids: list[str] | None = None
) -> SupervisedDataset:
    """Sliding windows: ``lookback`` past returns in, compound ``horizon``-step forward return out.

    Row for decision index ``t`` uses ``returns[t-lookback+1 .. t]`` and targets
    ``prod(1 + returns[t+1 .. t+horizon]) - 1``.  ``ids`` (one per return) label
    each row with its decision index.
    """
    r = np.asarray(returns, dtype=np.float64)
    n = r.size
    count = n - lookback - horizon + 1
    if lookback < 1 or horizon < 1:
        raise DataError("lookback and horizon must be >= 1")
    if count < 1:
        raise DataError(f"series of length {n} too short for lookback {lookback} + horizon {horizon}")
    ts = np.arange(lookback - 1, lookback - 1 + count)
    inputs = np.stack([r[t - lookback + 1:t + 1] for t in ts])
    targets = np.array([np.prod(1.0 + r[t + 1:t + 1 + horizon]) - 1.0 for t in ts])
    return SupervisedDataset(
        inputs,
        targets.reshape(-1, 1),
        note=f"windows lookback={lookback} horizon={horizon}",
        ids=[ids[t] for t in ts] if ids is not None else None,
        aux={"t": ts.astype(np.float64)},
    )


def split_chronological(ds: SupervisedDataset, train_fraction: float = 0.8):
    """Leading rows become train, trailing rows test; no shuffling."""
    if not 0 < train_fraction < 1:
        raise DataError("train_fraction must lie in (0, 1)")
    cut = int(round(ds.n * train_fraction))
    if cut == 0 or cut == ds.n:
        raise DataError("split leaves an empty side")
    return ds.take(np.arange(cut), "train"), ds.take(np.arange(cut, ds.n), "test")


def mix_noise(x, a: float, seed: int | np.random.Generator) -> np.ndarray:
    """``(1 - a) * x + a * N`` with ``N ~ Unif[0, 1]`` elementwise."""
    if not 0.0 <= a <= 1.0:
        raise DataError(f"noise level a={a} outside [0, 1]")
    x = np.asarray(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 1.0, size=x.shape)
    return (1.0 - a) * x + a * noise


def heteroscedastic_sigma(x) -> np.ndarray:
    return 0.05 + 0.25 * np.abs(x) / 2.0


def synth_heteroscedastic(n: int, seed: int) -> SupervisedDataset:
    """``y = sin(2x) + sigma(x) * eps`` on ``x ~ U(-2, 2)``; true sigma kept in ``aux``."""
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=n)
    sigma = heteroscedastic_sigma(x)
    y = np.sin(2.0 * x) + sigma * rng.standard_normal(n)
    return SupervisedDataset(
        x.reshape(-1, 1), y.reshape(-1, 1),
        note=f"heteroscedastic sin(2x), sigma=0.05+0.125|x|, seed={seed}",
        aux={"sigma": sigma},
    )


def synth_bimodal(n: int, seed: int, spread: float = 0.1) -> SupervisedDataset:
    """Targets ``+-1 + N(0, spread)`` with a fair coin per row; inputs carry no information."""
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=n)
    sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
    y = sign + spread * rng.standard_normal(n)
    return SupervisedDataset(
        x.reshape(-1, 1), y.reshape(-1, 1),
        note=f"bimodal +-1, spread={spread}, seed={seed}", aux={"sign": sign},
    )


BLOB_RADIUS = 2.0
BLOB_STD = 0.5


def blob_centers(q: int) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(q) / q
    return BLOB_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def synth_blobs(n: int, q: int, seed: int, std: float = BLOB_STD) -> SupervisedDataset:
    """``q`` balanced Gaussian clusters in the plane, one-hot targets.

    Class ``c`` gets ``n // q`` rows (the first ``n % q`` classes one extra);
    rows are shuffled.
    """
    if q < 2:
        raise DataError("need at least two classes")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % q
    labels = labels[rng.permutation(n)]
    x = blob_centers(q)[labels] + std * rng.standard_normal((n, 2))
    return SupervisedDataset(
        x, np.eye(q)[labels], note=f"blobs q={q} std={std} radius={BLOB_RADIUS} seed={seed}"
    )


def to_unit_box(x, lo: float, hi: float) -> np.ndarray:
    """Affine map of ``[lo, hi]`` onto ``[0, 1]``, clipped."""
    return np.clip((np.asarray(x, dtype=np.float64) - lo) / (hi - lo), 0.0, 1.0)


def load_prices_csv(path) -> PriceSeries:
    """Read a ``date,close`` CSV; rows are sorted by date on return."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"price file not found: {path}")
    rows: dict[str, float] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "close"]:
            raise DataError(f"{path}:1: expected header 'date,close', got {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            date, close = row[0].strip(), row[1].strip()
            try:
                dt.date.fromisoformat(date)
                price = float(close)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: malformed row {row!r} ({exc})") from None
            if not np.isfinite(price) or price <= 0:
                raise DataError(f"{path}:{lineno}: close must be positive, got {close}")
            if date in rows:
                raise DataError(f"{path}:{lineno}: duplicate date {date}")
            rows[date] = price
    dates = sorted(rows)
    return PriceSeries(dates, np.array([rows[d] for d in dates]))
