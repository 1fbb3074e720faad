"""Per-bar trade decisions gated by the quasi-stationarity test.

The rules consult the coarsest coefficient mode only: buy when the newest
coefficient increment is negative (prices recovering under the default Haar
sign convention) while the synthesized stationary mass below zero exceeds
1 - alpha1; sell on the mirrored condition against alpha1. Whenever the
displaced-window density is statistically distinguishable from the current
one, the bar is held and marked gated.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateWindow, GridMismatch, NonIntegrable, NotWarmedUp
from .sde_fit import fit_model
from .stationary import density_convolution, ks_quasistationarity, stationary_density
from .timeseries import PriceSeries
from .wavelets import WaveletFilter, make_wavelet


class Action(str, enum.Enum):
    BUY = "buy"
    SELL = "sell"
    HOLD = "hold"


@dataclass(frozen=True)
class Signal:
    kind: Action
    p_s: float
    dy1: float
    gated: bool = False

    def __post_init__(self):
        if self.kind is not Action.HOLD and self.gated:
            raise ValueError("only hold signals can be gated")


@dataclass(frozen=True)
class SignalConfig:
    """Trade-rule parameters.

    calib_len is the rolling fit window T0 (32-64 bars); shift_len is the
    displacement T used by the stationarity comparison and defaults to
    calib_len when left as None.
    """

    alpha1: float = 0.05
    alpha2: float = 0.05
    calib_len: int = 64
    shift_len: int | None = None
    density_mode: str = "plain"
    invert_sign: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha1 < 0.5:
            raise ValueError(f"alpha1 must be in (0, 0.5), got {self.alpha1}")
        if not 0.0 < self.alpha2 < 0.5:
            raise ValueError(f"alpha2 must be in (0, 0.5), got {self.alpha2}")
        if self.calib_len < 32:
            raise ValueError(f"calib_len must be >= 32, got {self.calib_len}")
        if self.density_mode not in ("plain", "convolution"):
            raise ValueError(f"density_mode must be plain|convolution, got {self.density_mode!r}")

    @property
    def displacement(self) -> int:
        return self.calib_len if self.shift_len is None else self.shift_len


def decide(dy1: float, p_s: float, ks_pass: bool, cfg: SignalConfig) -> Signal:
    """Apply the purchase/sale rules to one bar's inputs.

    Exactly one action comes back; a failed stationarity gate always holds.
    Both inequalities are strict, so dy1 == 0 never trades.
    """
    if not 0.0 <= p_s <= 1.0:
        raise ValueError(f"p_s must be in [0, 1], got {p_s}")
    if not ks_pass:
        return Signal(Action.HOLD, p_s, dy1, gated=True)
    if -dy1 > 0 and p_s > 1.0 - cfg.alpha1:
        return Signal(Action.BUY, p_s, dy1)
    if -dy1 < 0 and p_s < cfg.alpha1:
        return Signal(Action.SELL, p_s, dy1)
    return Signal(Action.HOLD, p_s, dy1)


@dataclass
class SignalTrace:
    """Signals aligned to bars ``start .. start + len(signals) - 1``."""

    start: int
    signals: list = field(default_factory=list)

    def at(self, t: int):
        i = t - self.start
        return self.signals[i] if 0 <= i < len(self.signals) else None


class SignalEngine:
    """Strictly causal per-instrument pipeline.

    Every pushed bar extends the coefficient history; once warm, each bar is
    fit over the trailing calib_len coefficient rows, its mode-1 stationary
    density synthesized and compared against the density computed shift_len
    bars earlier, and the trade rule evaluated. Bars whose window cannot be
    modeled (zero variance) or whose fitted drift is not confining
    (non-normalizable density) are held with gated=True.
    """

    def __init__(
        self,
        cfg: SignalConfig = SignalConfig(),
        wavelet: WaveletFilter | str = "haar",
        levels: int = 2,
        degree: int = 3,
        ks_k: float | None = None,
        grid_span: float = 5.0,
        n_grid: int = 1024,
        refit_stride: int = 1,
        dt: float = 1.0,
    ):
        self.cfg = cfg
        self.filter = make_wavelet(wavelet) if isinstance(wavelet, str) else wavelet
        self.levels = levels
        self.degree = degree
        self.ks_k = ks_k
        self.grid_span = grid_span
        self.n_grid = n_grid
        self.refit_stride = max(1, refit_stride)
        self.dt = dt

        self._support = self.filter.support_at(levels)
        self._prices: list[float] = []
        self._coeffs: list[np.ndarray] = []  # one (levels,) row per bar, NaN while unsupported
        self._densities: dict[int, object] = {}  # bar index -> mode-1 density or None
        self._last_fit_bar = -1
        self.degenerate_bars = 0

    @property
    def min_history(self) -> int:
        """Bars needed before the first decision: coarsest wavelet support,
        a full fit window, and the displaced fit window."""
        return self._support + self.cfg.calib_len + self.cfg.displacement - 1

    @property
    def n_bars(self) -> int:
        return len(self._prices)

    @property
    def ready(self) -> bool:
        return self.n_bars >= self.min_history

    def extend(self, price: float) -> None:
        """Append one bar without deciding (warm-up feeding)."""
        self._prices.append(float(price))
        self._coeffs.append(self._coeff_row())

    def _coeff_row(self) -> np.ndarray:
        t = len(self._prices) - 1
        row = np.full(self.levels, np.nan)
        sign = -1.0 if self.cfg.invert_sign else 1.0
        for m in range(1, self.levels + 1):
            taps = self.filter.dilated(self.levels - m + 1)
            s = len(taps)
            if t >= s - 1:
                window = np.asarray(self._prices[t - s + 1 : t + 1])
                row[m - 1] = sign * float(taps @ window)
        return row

    def _density_at(self, t: int, allow_reuse: bool = False):
        """Mode-1 density for the fit window ending at bar t (cached); None
        when the window is degenerate or the density non-normalizable.

        With refit_stride > 1 the frontier bar may reuse the most recent
        fitted density instead of refitting (``allow_reuse``); displaced
        lookups always get the exact historical fit."""
        if t in self._densities:
            return self._densities[t]
        if allow_reuse and 0 <= self._last_fit_bar and t - self._last_fit_bar < self.refit_stride:
            dens = self._densities.get(self._last_fit_bar)
        else:
            window = np.asarray(self._coeffs[t - self.cfg.calib_len + 1 : t + 1])
            try:
                model = fit_model(window, degree=self.degree, dt=self.dt)
                dens = stationary_density(model, mode=1, span=self.grid_span, n_grid=self.n_grid)
            except (DegenerateWindow, NonIntegrable):
                dens = None
            if allow_reuse:
                self._last_fit_bar = t
        self._densities[t] = dens
        stale = t - self.cfg.displacement - 2  # nothing older is ever looked up again
        self._densities.pop(stale, None)
        return dens

    def step(self, price: float) -> Signal:
        """Push one bar and decide it. Raises NotWarmedUp until enough bars
        have been fed for the full pipeline (including the displaced fit)."""
        self.extend(price)
        t = self.n_bars - 1
        if not self.ready:
            raise NotWarmedUp(f"have {self.n_bars} bars, need {self.min_history}")
        return self._decide_bar(t)

    def _decide_bar(self, t: int) -> Signal:
        y1_now = self._coeffs[t][0]
        y1_prev = self._coeffs[t - 1][0]
        dy1 = float(y1_now - y1_prev)
        d_now = self._density_at(t, allow_reuse=True)
        d_shift = self._density_at(t - self.cfg.displacement)
        if d_now is None or d_shift is None:
            self.degenerate_bars += 1
            return Signal(Action.HOLD, 0.5, dy1, gated=True)
        sample_points = np.asarray(self._coeffs[t - self.cfg.calib_len + 1 : t + 1])[:, 0]
        stat, ks_pass = ks_quasistationarity(
            d_now, d_shift, sample_points, alpha2=self.cfg.alpha2, k_override=self.ks_k
        )
        if self.cfg.density_mode == "convolution":
            try:
                p_s = density_convolution(d_now, d_shift).p_s
            except (NonIntegrable, GridMismatch):
                # distributions too far apart to compare: treat as gated
                self.degenerate_bars += 1
                return Signal(Action.HOLD, 0.5, dy1, gated=True)
        else:
            p_s = d_now.p_s
        return decide(dy1, p_s, ks_pass, self.cfg)

    def run(self, series: PriceSeries) -> SignalTrace:
        """Drive a whole series: warm up on the prefix, decide every later bar."""
        prices = series.prices
        warm_end = min(self.min_history - 1, len(prices))
        while self.n_bars < warm_end:
            self.extend(prices[self.n_bars])
        trace = SignalTrace(start=self.n_bars)
        while self.n_bars < len(prices):
            trace.signals.append(self.step(prices[self.n_bars]))
        return trace


def write_signals(trace: SignalTrace, path) -> None:
    """Signal log, one row per decided bar: ``t,kind,p_s,dy1,gated``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kind", "p_s", "dy1", "gated"])
        for i, s in enumerate(trace.signals):
            w.writerow([trace.start + i, s.kind.value, repr(float(s.p_s)), repr(float(s.dy1)), int(s.gated)])
