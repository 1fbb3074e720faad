"""Price bars and the Euler-Maruyama sample-path generator.

The sample-path generator doubles as the verification oracle for the fitting
and density code: paths with known drift/diffusion are simulated here and the
estimators are checked against the analytic answers.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    InvalidStep,
    MissingFile,
    NegativeDiffusion,
    NonMonotonicTimestamp,
    NonPositivePrice,
    NonUniformSpacing,
    ParseError,
)

DEFAULT_BAR_INTERVAL = 60.0


@dataclass(frozen=True)
class PriceSeries:
    """Uniformly spaced, strictly positive price bars for one instrument.

    ``timestamps`` are epoch seconds, strictly increasing with spacing equal
    to ``bar_interval``. Arrays are frozen after construction so instances can
    be shared freely between threads.
    """

    symbol: str
    timestamps: np.ndarray
    prices: np.ndarray
    bar_interval: float = DEFAULT_BAR_INTERVAL

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        px = np.asarray(self.prices, dtype=np.float64)
        if ts.ndim != 1 or px.ndim != 1 or len(ts) != len(px):
            raise ParseError(0, "timestamp/price columns have mismatched shapes")
        if len(ts) < 2:
            raise ParseError(len(ts), "need at least 2 bars")
        bad = np.nonzero(px <= 0)[0]
        if bad.size:
            raise NonPositivePrice(int(bad[0]) + 1, f"price {px[bad[0]]}")
        steps = np.diff(ts)
        bad = np.nonzero(steps <= 0)[0]
        if bad.size:
            raise NonMonotonicTimestamp(int(bad[0]) + 2, f"timestamp {ts[bad[0] + 1]}")
        bad = np.nonzero(steps != int(round(self.bar_interval)))[0]
        if bad.size:
            raise NonUniformSpacing(
                int(bad[0]) + 2,
                f"gap of {steps[bad[0]]}s where {self.bar_interval}s bars expected",
            )
        ts.setflags(write=False)
        px.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)

    def __len__(self):
        return len(self.prices)

    def prefix(self, n: int) -> "PriceSeries":
        """First ``n`` bars as a new series (used for causality audits)."""
        return replace(self, timestamps=self.timestamps[:n].copy(), prices=self.prices[:n].copy())

    def scaled(self, factor: float) -> "PriceSeries":
        return replace(self, prices=self.prices * factor)


@dataclass(frozen=True)
class SamplePath:
    """Realization of an Ito diffusion on a uniform grid of step ``dt``.

    ``values`` has shape (n_steps + 1, dims); regeneration with the same seed
    is bit-identical.
    """

    values: np.ndarray
    dt: float
    seed: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        if len(v) < 2:
            raise InvalidStep("path must contain at least 2 points")
        if self.dt <= 0:
            raise InvalidStep(f"dt must be positive, got {self.dt}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dims(self) -> int:
        return self.values.shape[1]


def load_bars(path, columns=None, symbol=None, gap_policy="reject") -> PriceSeries:
    """Read a delimited bar file (header row, ``timestamp,price`` columns).

    ``columns`` remaps the header names; ``gap_policy`` is ``reject`` (default)
    or ``forward_fill`` which re-inserts missing bars at the last seen price.
    Row numbers in errors are 1-based data rows (header excluded).
    """
    colmap = {"timestamp": "timestamp", "price": "price"}
    if columns:
        colmap.update(columns)
    if not os.path.exists(path):
        raise MissingFile(str(path))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or colmap["timestamp"] not in reader.fieldnames:
            raise ParseError(0, f"missing column {colmap['timestamp']!r}")
        if colmap["price"] not in reader.fieldnames:
            raise ParseError(0, f"missing column {colmap['price']!r}")
        ts, px = [], []
        for i, rec in enumerate(reader, start=1):
            try:
                t = int(float(rec[colmap["timestamp"]]))
                p = float(rec[colmap["price"]])
            except (TypeError, ValueError) as exc:
                raise ParseError(i, str(exc)) from exc
            if p <= 0:
                raise NonPositivePrice(i, f"price {p}")
            if ts and t <= ts[-1]:
                raise NonMonotonicTimestamp(i, f"timestamp {t} after {ts[-1]}")
            ts.append(t)
            px.append(p)
    if len(ts) < 2:
        raise ParseError(len(ts), "need at least 2 bars")
    interval = ts[1] - ts[0]
    if gap_policy == "forward_fill":
        ts, px = _forward_fill(ts, px, interval)
    elif gap_policy != "reject":
        raise ParseError(0, f"unknown gap_policy {gap_policy!r}")
    name = symbol or os.path.splitext(os.path.basename(path))[0]
    return PriceSeries(symbol=name, timestamps=np.array(ts), prices=np.array(px), bar_interval=float(interval))


def _forward_fill(ts, px, interval):
    out_t, out_p = [ts[0]], [px[0]]
    for t, p in zip(ts[1:], px[1:]):
        while t - out_t[-1] > interval:
            out_t.append(out_t[-1] + interval)
            out_p.append(out_p[-1])
        out_t.append(t)
        out_p.append(p)
    return out_t, out_p


def write_bars(series: PriceSeries, path) -> None:
    """Write a series in the same ``timestamp,price`` format ``load_bars`` reads."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "price"])
        for t, p in zip(series.timestamps, series.prices):
            w.writerow([int(t), repr(float(p))])


def simulate_sde(drift, diffusion, y0, dt, n_steps, seed) -> SamplePath:
    """Euler-Maruyama integration of dY = F(Y) dt + G(Y) dW (diagonal noise).

    ``drift`` and ``diffusion`` map an (dims,) state to (dims,) values;
    scalars broadcast. Gaussian variates come from NumPy's PCG64 generator
    seeded with ``seed``, so identical inputs reproduce the path bit-exactly.
    """
    if dt <= 0:
        raise InvalidStep(f"dt must be positive, got {dt}")
    if n_steps < 1:
        raise InvalidStep(f"n_steps must be >= 1, got {n_steps}")
    y = np.atleast_1d(np.asarray(y0, dtype=np.float64)).copy()
    dims = y.size
    rng = np.random.Generator(np.random.PCG64(seed))
    noise = rng.standard_normal((n_steps, dims))
    sq_dt = math.sqrt(dt)
    out = np.empty((n_steps + 1, dims))
    out[0] = y
    for k in range(n_steps):
        f = np.broadcast_to(np.asarray(drift(y), dtype=np.float64), (dims,))
        g = np.broadcast_to(np.asarray(diffusion(y), dtype=np.float64), (dims,))
        if np.any(g < 0):
            raise NegativeDiffusion(f"diffusion returned {g} at step {k}")
        y = y + f * dt + g * sq_dt * noise[k]
        out[k + 1] = y
    return SamplePath(values=out, dt=float(dt), seed=int(seed))


def make_ou_price_series(
    n_bars,
    seed,
    symbol="SYN",
    rate=0.05,
    vol=0.01,
    trend=0.0,
    base_price=100.0,
    bar_interval=DEFAULT_BAR_INTERVAL,
    start_time=0,
) -> PriceSeries:
    """Synthetic bars: mean-reverting log-price plus optional linear trend.

    log p(t) = log(base_price) + trend*t + x(t) with dx = -rate*x dt + vol dW,
    one model time unit per bar.
    """
    path = simulate_sde(lambda y: -rate * y, lambda y: vol, [0.0], 1.0, n_bars - 1, seed)
    x = path.values[:, 0]
    t_idx = np.arange(n_bars)
    prices = base_price * np.exp(trend * t_idx + x)
    timestamps = start_time + t_idx * int(round(bar_interval))
    return PriceSeries(symbol=symbol, timestamps=timestamps, prices=prices, bar_interval=bar_interval)
