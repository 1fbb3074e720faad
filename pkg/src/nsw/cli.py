"""Command-line front end: synth | backtest | parcel | compare.

Every command resolves a single config (file plus ``--set`` overrides),
writes its outputs under a run directory, and drops a ``manifest.json``
echoing the fully resolved configuration for reproducibility. Exit codes:
0 success, 1 runtime failure, 2 usage/config errors.
"""

from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click

from .backtest import (
    DECISION_FRACTION_BAND,
    TraceSource,
    compare_strategies,
    run_backtest,
    run_parcel_backtest,
    write_equity,
    write_report_json,
    write_weights,
)
from .config import RunConfig, apply_overrides, format_config, load_config
from .errors import NswError, UsageError
from .signals import SignalConfig, SignalEngine, write_signals
from .timeseries import load_bars, make_ou_price_series, write_bars
from .wavelets import make_wavelet

log = logging.getLogger("nsw.cli")


def _resolve_config(config_path, overrides) -> RunConfig:
    cfg = load_config(config_path) if config_path else RunConfig()
    return apply_overrides(cfg, overrides or ())


def _engine(cfg: RunConfig) -> SignalEngine:
    return SignalEngine(
        cfg=SignalConfig(
            alpha1=cfg.alpha1,
            alpha2=cfg.alpha2,
            calib_len=cfg.calib_len,
            shift_len=cfg.shift_len,
            density_mode=cfg.density_mode,
            invert_sign=cfg.invert_sign,
        ),
        wavelet=make_wavelet(cfg.wavelet, cfg.wavelet_order or None),
        levels=cfg.levels,
        degree=cfg.degree,
        ks_k=cfg.ks_k,
        grid_span=cfg.grid_span,
        n_grid=cfg.n_grid,
        refit_stride=cfg.refit_stride,
    )


def _write_manifest(out: Path, command: str, cfg: RunConfig, inputs, outputs) -> None:
    manifest = {
        "command": command,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "config": cfg.as_dict(),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def _prepare_out(out, command) -> Path:
    path = Path(out) if out else Path("runs") / command
    path.mkdir(parents=True, exist_ok=True)
    return path


class _Command(click.Command):
    """Maps package errors onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except UsageError as exc:
            raise click.UsageError(str(exc)) from exc  # exit code 2
        except NswError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose):
    """Stochastic-wavelet trading model toolkit."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


_shared = [
    click.option("--config", "config_path", type=click.Path(), default=None, help="key=value config file"),
    click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="override a config key"),
    click.option("--out", default=None, help="run directory (default runs/<command>)"),
]


def _with_shared(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@main.command(cls=_Command)
@_with_shared
@click.option("--symbol", default="SYN", help="symbol name for the generated series")
def synth(config_path, overrides, out, symbol):
    """Generate a synthetic mean-reverting bar file."""
    cfg = _resolve_config(config_path, overrides)
    out_dir = _prepare_out(out, "synth")
    series = make_ou_price_series(
        cfg.n_bars,
        seed=cfg.seed,
        symbol=symbol,
        rate=cfg.ou_rate,
        vol=cfg.ou_vol,
        trend=cfg.trend,
        base_price=cfg.base_price,
        bar_interval=cfg.bar_interval,
    )
    bars_path = out_dir / f"bars_{symbol}.csv"
    write_bars(series, bars_path)
    with open(out_dir / "config.txt", "w") as fh:
        fh.write(format_config(cfg))
    _write_manifest(out_dir, "synth", cfg, [], [bars_path, out_dir / "config.txt"])
    click.echo(f"wrote {cfg.n_bars} bars to {bars_path}")


@main.command(cls=_Command)
@_with_shared
@click.option("--data", "data_path", required=True, type=click.Path(), help="bar file to trade")
def backtest(config_path, overrides, out, data_path):
    """Run the causal model over one instrument."""
    cfg = _resolve_config(config_path, overrides)
    out_dir = _prepare_out(out, "backtest")
    series = load_bars(data_path, gap_policy=cfg.gap_policy)
    trace = _engine(cfg).run(series)
    report = run_backtest(
        TraceSource(trace),
        series,
        cost_bps=cfg.cost_bps,
        decision_band=DECISION_FRACTION_BAND,
        strategy_name="NSW",
        config=cfg.as_dict(),
    )
    write_report_json(report, out_dir / "report.json")
    write_equity(report, out_dir / "equity.csv")
    write_signals(trace, out_dir / "signals.csv")
    _write_manifest(out_dir, "backtest", cfg, [data_path],
                    [out_dir / "report.json", out_dir / "equity.csv", out_dir / "signals.csv"])
    click.echo(f"final_Z {report.final_z:.4f} over {len(series)} bars "
               f"({len(report.trades)} trades, decision fraction {report.decision_fraction:.4f})")


@main.command(cls=_Command)
@_with_shared
@click.option("--data", "data_paths", required=True, multiple=True, type=click.Path(),
              help="bar file per instrument (repeat)")
def parcel(config_path, overrides, out, data_paths):
    """Multi-instrument parcel run with periodic weight re-optimization."""
    cfg = _resolve_config(config_path, overrides)
    out_dir = _prepare_out(out, "parcel")
    series_list = [load_bars(p, gap_policy=cfg.gap_policy) for p in data_paths]
    horizon = cfg.resolved_horizon(make_wavelet(cfg.wavelet, cfg.wavelet_order or None))
    report = run_parcel_backtest(
        [_engine(cfg) for _ in series_list],
        series_list,
        theta=cfg.theta,
        rebalance_len=cfg.rebalance_len,
        horizon=horizon,
        cost_bps=cfg.cost_bps,
        config=cfg.as_dict(),
    )
    write_weights(report, out_dir / "weights.csv")
    with open(out_dir / "report.json", "w") as fh:
        json.dump(
            {
                "symbols": list(report.symbols),
                "final_Z": report.final_z,
                "theta": cfg.theta,
                "rebalances": len(report.weight_trajectory),
                "instruments": [r.summary() for r in report.instrument_reports],
                "config": cfg.as_dict(),
            },
            fh,
            indent=2,
        )
    write_equity(report, out_dir / "equity.csv")
    _write_manifest(out_dir, "parcel", cfg, list(data_paths),
                    [out_dir / "report.json", out_dir / "weights.csv", out_dir / "equity.csv"])
    click.echo(f"parcel final_Z {report.final_z:.4f} ({len(report.weight_trajectory)} rebalances)")


@main.command(cls=_Command)
@_with_shared
@click.option("--data", "data_paths", required=True, multiple=True, type=click.Path(),
              help="bar file per instrument (repeat)")
@click.option("--show-reference", is_flag=True, help="print the published minute-bar reference table")
def compare(config_path, overrides, out, data_paths, show_reference):
    """Profitability table: tuned PC/BB/MACD/RSI baselines vs the causal model."""
    cfg = _resolve_config(config_path, overrides)
    out_dir = _prepare_out(out, "compare")
    series_list = [load_bars(p, gap_policy=cfg.gap_policy) for p in data_paths]
    table = compare_strategies(series_list, lambda: _engine(cfg), cost_bps=cfg.cost_bps)
    text = table.to_text(show_reference=show_reference)
    click.echo(text)
    (out_dir / "comparison.txt").write_text(text + "\n")
    (out_dir / "comparison.json").write_text(table.to_json() + "\n")
    _write_manifest(out_dir, "compare", cfg, list(data_paths),
                    [out_dir / "comparison.txt", out_dir / "comparison.json"])


if __name__ == "__main__":
    main()
