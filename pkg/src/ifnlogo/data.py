"""Price ingestion, log-returns and the train/test resampling protocol."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .dependence import ObservationMatrix
from .errors import ConfigError, IngestionError
from .synthetic import make_rng

__all__ = [
    "PricePanel",
    "ResamplePlan",
    "read_prices_csv",
    "compute_log_returns",
    "read_observations_csv",
    "write_observations_csv",
    "resample",
]

MISSING = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class PricePanel:
    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    prices: NDArray[np.float64]

    def __post_init__(self) -> None:
        prices = np.asarray(self.prices, dtype=np.float64)
        if prices.shape != (len(self.dates), len(self.tickers)):
            raise IngestionError(
                f"prices shape {prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        for k in range(1, len(self.dates)):
            if self.dates[k] <= self.dates[k - 1]:
                raise IngestionError(f"dates not strictly increasing at row {k} ({self.dates[k]})")
        bad = np.argwhere(~(prices > 0.0))
        if bad.size:
            r, c = bad[0]
            raise IngestionError(
                f"non-positive or missing price {prices[r, c]} at row {r} ({self.dates[r]}), "
                f"ticker {self.tickers[c]!r}"
            )
        object.__setattr__(self, "prices", prices)


def read_prices_csv(path: str | Path) -> PricePanel:
    """Read ``date,<ticker>,...`` adjusted closes; rows with any missing
    price are dropped."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        if not header or header[0].strip().lower() != "date":
            raise IngestionError(f"{path}: first column must be 'date'")
        tickers = tuple(h.strip() for h in header[1:])
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            cells = [c.strip() for c in row[1:]]
            if any(c.lower() in MISSING for c in cells):
                continue
            try:
                date = dt.date.fromisoformat(row[0].strip())
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from exc
            dates.append(date)
            rows.append(values)
    prices = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(tickers))
    return PricePanel(tuple(dates), tickers, prices)


def compute_log_returns(panel: PricePanel) -> ObservationMatrix:
    if len(panel.dates) < 2:
        raise IngestionError("need at least two price rows")
    return ObservationMatrix(np.diff(np.log(panel.prices), axis=0), panel.tickers)


def read_observations_csv(path: str | Path) -> ObservationMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from exc
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header))
    return ObservationMatrix(values, tuple(h.strip() for h in header))


def write_observations_csv(obs: ObservationMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(obs.labels)
        for row in obs.values:
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class ResamplePlan:
    n_resamples: int = 100
    p_select: int = 100
    q_train: int = 600
    q_test: int = 600
    series_with_replacement: bool = True
    seed: int = 0
    # relative noise on repeated series; large enough to break Kendall rank ties
    jitter: float = 1e-3

    def __post_init__(self) -> None:
        if self.n_resamples < 1 or self.p_select < 1 or self.q_train < 1 or self.q_test < 0:
            raise ConfigError(f"invalid resample plan {self}")
        if self.jitter < 0:
            raise ConfigError("jitter must be non-negative")

    def check(self, q: int, p: int) -> None:
        if self.q_train + self.q_test > q:
            raise ConfigError(
                f"plan needs {self.q_train} + {self.q_test} observations, only {q} available"
            )
        if not self.series_with_replacement and self.p_select > p:
            raise ConfigError(f"cannot pick {self.p_select} distinct series out of {p}")


def resample(
    returns: ObservationMatrix, plan: ResamplePlan, resample_index: int
) -> tuple[ObservationMatrix, ObservationMatrix]:
    """Deterministic (train, test) split for one resample.

    Columns are drawn first (with replacement if the plan says so), then
    ``q_train + q_test`` distinct rows. Repeated columns get Gaussian noise
    of ``plan.jitter`` times the source column's standard deviation so they
    are not exact copies.
    """
    q, p = returns.values.shape
    plan.check(q, p)
    rng = make_rng(plan.seed, resample_index)
    if plan.series_with_replacement:
        cols = rng.integers(0, p, size=plan.p_select)
    else:
        cols = rng.choice(p, size=plan.p_select, replace=False)
    rows = rng.choice(q, size=plan.q_train + plan.q_test, replace=False)
    block = returns.values[np.ix_(rows, cols)].copy()
    labels = []
    seen: dict[int, int] = {}
    for k, c in enumerate(cols):
        c = int(c)
        copies = seen.get(c, 0)
        seen[c] = copies + 1
        if copies:
            sd = float(returns.values[:, c].std())
            block[:, k] += plan.jitter * sd * rng.standard_normal(block.shape[0])
            labels.append(f"{returns.labels[c]}#{copies + 1}")
        else:
            labels.append(returns.labels[c])
    labels_t = tuple(labels)
    return (
        ObservationMatrix(block[: plan.q_train], labels_t),
        ObservationMatrix(block[plan.q_train :], labels_t),
    )

