"""Classical indicator strategies for profitability comparisons.

Price Channel, Bollinger Bands, MACD and RSI in their textbook forms:
channel breakouts against the prior-window extremes, band touches against a
rolling mean +/- width * population std (window includes the current bar),
EMA-crossover MACD (EMAs seeded with the first price), and Wilder-smoothed
RSI with threshold crossings. Parameters are tuned by exhaustive in-sample
grid search on final profitability, which deliberately hands the baselines a
hindsight advantage the causal model never gets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGrid, NotWarmedUp, UsageError
from .signals import Action, Signal, SignalTrace
from .timeseries import PriceSeries

KINDS = ("pc", "bb", "macd", "rsi")


@dataclass(frozen=True, order=True)
class IndicatorConfig:
    """One strategy cell: ``kind`` in {pc, bb, macd, rsi} plus its parameters.

    pc: (lookback,); bb: (lookback, width); macd: (fast, slow, signal);
    rsi: (lookback, lower, upper). Ordering is lexicographic on
    (kind, params), which is also the grid-search tie-break.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        p = self.params
        if self.kind == "pc":
            ok = len(p) == 1 and p[0] >= 2
        elif self.kind == "bb":
            ok = len(p) == 2 and p[0] >= 2 and p[1] > 0
        elif self.kind == "macd":
            ok = len(p) == 3 and 2 <= p[0] < p[1] and p[2] >= 2
        elif self.kind == "rsi":
            ok = len(p) == 3 and p[0] >= 2 and 0 < p[1] < p[2] < 100
        else:
            raise UsageError(f"unknown indicator kind {self.kind!r}")
        if not ok:
            raise UsageError(f"bad {self.kind} parameters {p}")

    @property
    def warmup(self) -> int:
        """First bar index at which a signal is defined."""
        if self.kind == "pc":
            return self.params[0]
        if self.kind == "bb":
            return self.params[0] - 1
        if self.kind == "macd":
            return self.params[1] + self.params[2]
        return self.params[0] + 1  # rsi: lookback changes plus a previous value


def ema(values, span: int) -> np.ndarray:
    """Exponential moving average, alpha = 2/(span+1), seeded with the first value."""
    x = np.asarray(values, dtype=np.float64)
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for i in range(1, len(x)):
        out[i] = alpha * x[i] + (1.0 - alpha) * out[i - 1]
    return out


def macd_lines(prices, fast: int, slow: int, signal: int):
    """(macd, signal_line) arrays over the whole series."""
    p = np.asarray(prices, dtype=np.float64)
    macd = ema(p, fast) - ema(p, slow)
    return macd, ema(macd, signal)


def bollinger(prices, lookback: int, width: float):
    """(mean, lower, upper) rolling bands; NaN before a full window.

    The window includes the current bar; std is the population std.
    """
    p = np.asarray(prices, dtype=np.float64)
    n = len(p)
    mean = np.full(n, np.nan)
    lower = np.full(n, np.nan)
    upper = np.full(n, np.nan)
    for t in range(lookback - 1, n):
        w = p[t - lookback + 1 : t + 1]
        mu = w.mean()
        sd = w.std()
        mean[t] = mu
        lower[t] = mu - width * sd
        upper[t] = mu + width * sd
    return mean, lower, upper


def channel_extremes(prices, lookback: int):
    """(prior_high, prior_low) over the previous ``lookback`` bars, current excluded."""
    p = np.asarray(prices, dtype=np.float64)
    n = len(p)
    hi = np.full(n, np.nan)
    lo = np.full(n, np.nan)
    for t in range(lookback, n):
        w = p[t - lookback : t]
        hi[t] = w.max()
        lo[t] = w.min()
    return hi, lo


def rsi_values(prices, lookback: int) -> np.ndarray:
    """Wilder RSI: seed averages are simple means of the first ``lookback``
    changes, then smoothed with alpha = 1/lookback. NaN before the seed.

    Zero average loss maps to 100, zero average gain to 0, both zero
    (flat prices) to the neutral 50.
    """
    p = np.asarray(prices, dtype=np.float64)
    n = len(p)
    out = np.full(n, np.nan)
    if n <= lookback:
        return out
    delta = np.diff(p)
    gain = np.clip(delta, 0.0, None)
    loss = np.clip(-delta, 0.0, None)
    avg_gain = gain[:lookback].mean()
    avg_loss = loss[:lookback].mean()
    out[lookback] = _rsi_from_averages(avg_gain, avg_loss)
    for t in range(lookback + 1, n):
        avg_gain = (avg_gain * (lookback - 1) + gain[t - 1]) / lookback
        avg_loss = (avg_loss * (lookback - 1) + loss[t - 1]) / lookback
        out[t] = _rsi_from_averages(avg_gain, avg_loss)
    return out


def _rsi_from_averages(avg_gain, avg_loss):
    if avg_loss == 0.0 and avg_gain == 0.0:
        return 50.0
    if avg_loss == 0.0:
        return 100.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def indicator_signal(cfg: IndicatorConfig, series: PriceSeries, t: int) -> Action:
    """Signal of one indicator at bar ``t`` (uses bars <= t only)."""
    if t < cfg.warmup or t >= len(series):
        raise NotWarmedUp(f"{cfg.kind} needs t >= {cfg.warmup}, got {t}")
    return _signal_array(cfg, series.prices[: t + 1])[t]


def _signal_array(cfg: IndicatorConfig, prices) -> list:
    """Signals for every bar of ``prices``; HOLD before warmup. Computing the
    whole array at once keeps the per-series tuner O(n) per config."""
    p = np.asarray(prices, dtype=np.float64)
    n = len(p)
    out = [Action.HOLD] * n
    if cfg.kind == "pc":
        (lookback,) = cfg.params
        hi, lo = channel_extremes(p, lookback)
        for t in range(lookback, n):
            if p[t] > hi[t]:
                out[t] = Action.BUY
            elif p[t] < lo[t]:
                out[t] = Action.SELL
    elif cfg.kind == "bb":
        lookback, width = cfg.params
        _, lower, upper = bollinger(p, lookback, width)
        for t in range(lookback - 1, n):
            if p[t] < lower[t]:
                out[t] = Action.BUY
            elif p[t] > upper[t]:
                out[t] = Action.SELL
    elif cfg.kind == "macd":
        fast, slow, signal = cfg.params
        macd, sig = macd_lines(p, fast, slow, signal)
        for t in range(slow + signal, n):
            if macd[t - 1] <= sig[t - 1] and macd[t] > sig[t]:
                out[t] = Action.BUY
            elif macd[t - 1] >= sig[t - 1] and macd[t] < sig[t]:
                out[t] = Action.SELL
    else:  # rsi
        lookback, lower_thr, upper_thr = cfg.params
        rsi = rsi_values(p, lookback)
        for t in range(lookback + 1, n):
            if rsi[t - 1] <= lower_thr and rsi[t] > lower_thr:
                out[t] = Action.BUY
            elif rsi[t - 1] >= upper_thr and rsi[t] < upper_thr:
                out[t] = Action.SELL
    return out


class IndicatorStrategy:
    """Adapter exposing an indicator as a backtestable signal source."""

    def __init__(self, cfg: IndicatorConfig):
        self.cfg = cfg

    @property
    def name(self) -> str:
        return self.cfg.kind.upper()

    def run(self, series: PriceSeries) -> SignalTrace:
        kinds = _signal_array(self.cfg, series.prices)
        start = min(self.cfg.warmup, len(series))
        signals = [Signal(kind, math.nan, math.nan) for kind in kinds[start:]]
        return SignalTrace(start=start, signals=signals)


def tune_baseline(grid, series: PriceSeries, cost_bps=0.0) -> IndicatorConfig:
    """Exhaustive in-sample search: the config with the highest final
    profitability wins; exact ties go to the lexicographically smallest
    (kind, params)."""
    from .backtest import run_backtest  # local import, backtest depends on this module

    grid = list(grid)
    if not grid:
        raise EmptyGrid("no indicator configurations to search")
    best = None
    best_z = -math.inf
    for cfg in sorted(grid):
        z = run_backtest(IndicatorStrategy(cfg), series, cost_bps=cost_bps).final_z
        if z > best_z:
            best, best_z = cfg, z
    return best


def default_grid(kind: str):
    """The stock parameter grid used by the comparison harness."""
    if kind == "pc":
        return [IndicatorConfig("pc", (lb,)) for lb in (10, 20, 40)]
    if kind == "bb":
        return [IndicatorConfig("bb", (lb, w)) for lb in (10, 20, 30) for w in (1.5, 2.0, 2.5)]
    if kind == "macd":
        return [IndicatorConfig("macd", p) for p in ((8, 17, 9), (12, 26, 9), (5, 35, 5))]
    if kind == "rsi":
        return [
            IndicatorConfig("rsi", (lb, lo, hi))
            for lb in (7, 14, 21)
            for lo, hi in ((30.0, 70.0), (20.0, 80.0))
        ]
    raise UsageError(f"unknown indicator kind {kind!r}")
