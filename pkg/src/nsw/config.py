"""Run configuration: a flat key=value file with strict key checking.

Defaults follow the minute-bar protocol the model was designed around:
dual-mode transform (levels=2), Hermite degree 3, 64-bar calibration window,
alpha levels 0.05, theta = 0.25, 60-second bars.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError


@dataclass
class RunConfig:
    # wavelet bank
    wavelet: str = "haar"
    wavelet_order: int = 0
    levels: int = 2  # number of coefficient modes (J)
    invert_sign: bool = False
    # SDE fit
    degree: int = 3  # max Hermite total degree (K)
    calib_len: int = 64  # rolling fit window T0, 32..64
    refit_stride: int = 1
    # stationary density / gate
    shift_len: int = 64  # stationarity displacement T
    density_mode: str = "plain"  # plain | convolution
    ks_k: float | None = None  # override for the Kolmogorov constant
    grid_span: float = 5.0
    n_grid: int = 1024
    # trade rules
    alpha1: float = 0.05
    alpha2: float = 0.05
    # parcel
    theta: float = 0.25
    rebalance_len: int = 256  # T1
    horizon: int | None = None  # return lag tau0; None = coarsest wavelet support
    # data / synthesis
    bar_interval: float = 60.0
    seed: int = 2009
    n_bars: int = 20000
    ou_rate: float = 0.05
    ou_vol: float = 0.01
    trend: float = 0.0
    base_price: float = 100.0
    gap_policy: str = "reject"
    cost_bps: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha1 < 0.5 or not 0.0 < self.alpha2 < 0.5:
            raise ConfigError(f"alpha levels must be in (0, 0.5): {self.alpha1}, {self.alpha2}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")
        if self.calib_len < 32:
            raise ConfigError(f"calib_len must be >= 32, got {self.calib_len}")
        if self.levels < 1 or self.degree < 1:
            raise ConfigError("levels and degree must be >= 1")
        if self.density_mode not in ("plain", "convolution"):
            raise ConfigError(f"density_mode must be plain|convolution, got {self.density_mode!r}")
        if self.gap_policy not in ("reject", "forward_fill"):
            raise ConfigError(f"gap_policy must be reject|forward_fill, got {self.gap_policy!r}")
        if self.rebalance_len < 2 or self.n_bars < 2:
            raise ConfigError("rebalance_len and n_bars must be >= 2")

    def resolved_horizon(self, filt) -> int:
        """tau0: explicit value, else the coarsest dilated support of the filter."""
        return self.horizon if self.horizon is not None else filt.support_at(self.levels)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_BOOL_STRINGS = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(name, raw):
    field = _FIELDS[name]
    text = raw.strip()
    if field.type in ("int", int):
        return int(text)
    if field.type in ("float", float):
        return float(text)
    if field.type in ("bool", bool):
        try:
            return _BOOL_STRINGS[text.lower()]
        except KeyError:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}") from None
    if field.type in ("int | None", "float | None"):
        if text.lower() in ("none", ""):
            return None
        return int(text) if field.type.startswith("int") else float(text)
    return text


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    values = dataclasses.asdict(base) if base else {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    return RunConfig(**values)


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    return parse_config(text, base=base)


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply CLI ``key=value`` overrides on top of a parsed config."""
    values = dataclasses.asdict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _coerce(key, raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
    return RunConfig(**values)


def format_config(cfg: RunConfig) -> str:
    """Self-describing dump in the same format parse_config reads."""
    lines = ["# resolved run configuration"]
    for name, value in cfg.as_dict().items():
        lines.append(f"{name} = {value if value is not None else 'none'}")
    return "\n".join(lines) + "\n"
