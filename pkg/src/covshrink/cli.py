"""Command-line front end: backtests, parameter sweeps, and synthetic panels.

Every run writes a manifest first (status "running"), then the result CSVs,
then finalizes the manifest with the emitted file list, so partial output
is always detectable. Configuration precedence is flags > config file >
built-in defaults; the defaults reproduce the headline experiment
(t_is=120, t_oos=6, 20 log-spaced penalties in [1e-8, 1e-1], oracle
half-life 24 months, evaluation 1985-01..2024-12).
"""

import functools
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import pandas as pd

from . import __version__
from .backtest import (
    AO_KINDS,
    BacktestConfig,
    EstimatorKind,
    EstimatorSpec,
    RIDGE_KINDS,
    generate_synthetic_panel,
    run_backtest,
    sweep_grid_lower_bound,
    sweep_window_length,
)
from .data_ingest import MISSING_POLICIES, load_returns_csv, panel_to_csv
from .errors import ConfigError, DataError, NumericError
from .ridge import log_grid
from .stats_tests import model_confidence_set, wilcoxon_test

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "t_is": 120,
    "t_oos": 6,
    "step": 1,
    "grid_lo": 1e-8,
    "grid_hi": 1e-1,
    "grid_n": 20,
    "half_life": 24.0,
    "eval_start": "1985-01",
    "eval_end": "2024-12",
    "estimators": "upsa,avgupsa,ao,upsa-ao,avgupsa-ao",
    "missing_policy": "drop-incomplete",
    "target_vol": 0.10,
    "alpha": 0.05,
    "block_len": 12,
    "n_boot": 5000,
    "seed": 0,
    "workers": os.cpu_count() or 1,
}

_KIND_ALIASES = {
    "upsa": EstimatorKind.UPSA,
    "avgupsa": EstimatorKind.AVG_UPSA,
    "ao": EstimatorKind.AO,
    "upsa-ao": EstimatorKind.UPSA_AO,
    "avgupsa-ao": EstimatorKind.AVG_UPSA_AO,
    "samplecov": EstimatorKind.SAMPLE_COV,
}


def _exit_guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except DataError as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except NumericError as exc:
            click.echo(f"numeric error: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)

    return wrapper


def _resolve(flags: dict, config_path) -> dict:
    settings = dict(DEFAULTS)
    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(DEFAULTS) - {"data", "out_dir"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        settings.update(file_cfg)
    settings.update({k: v for k, v in flags.items() if v is not None})
    return settings


def _parse_estimators(spec: str, grid, half_life, renormalize) -> list[EstimatorSpec]:
    specs = []
    for token in [t.strip().lower() for t in str(spec).split(",") if t.strip()]:
        if token not in _KIND_ALIASES:
            raise ConfigError(f"unknown estimator {token!r}; choices: {sorted(_KIND_ALIASES)}")
        kind = _KIND_ALIASES[token]
        specs.append(
            EstimatorSpec(
                kind=kind,
                grid=grid if kind in RIDGE_KINDS else None,
                half_life=half_life,
                renormalize_ao_diag=renormalize,
            )
        )
    if not specs:
        raise ConfigError("empty estimator list")
    return specs


def _period(value, label):
    try:
        return pd.Period(value, freq="M")
    except Exception as exc:
        raise ConfigError(f"bad {label} {value!r}: expected YYYY-MM") from exc


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class _Manifest:
    def __init__(self, out_dir: Path, command: str, settings: dict, dataset: dict):
        self.path = out_dir / "manifest.json"
        self.body = {
            "command": command,
            "package_version": __version__,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "config": {k: settings[k] for k in sorted(settings)},
            "dataset": dataset,
            "output_dir": str(out_dir),
            "status": "running",
            "files": [],
        }
        self._write()

    def _write(self):
        self.path.write_text(json.dumps(self.body, indent=2, default=str) + "\n")

    def add(self, path: Path):
        self.body["files"].append(path.name)

    def finalize(self):
        self.body["status"] = "completed"
        self.body["finished_utc"] = datetime.now(timezone.utc).isoformat()
        self._write()


def _emit(frame: pd.DataFrame, out_dir: Path, name: str, manifest: _Manifest) -> None:
    path = out_dir / name
    frame.to_csv(path, index=False)
    manifest.add(path)
    logger.info("wrote %s", path)


def _load_panel(settings, data_path):
    if data_path is None:
        raise ConfigError("--data is required (or 'data' in the config file)")
    return load_returns_csv(data_path, policy=settings["missing_policy"])


def _build_config(settings) -> BacktestConfig:
    grid = log_grid(float(settings["grid_lo"]), float(settings["grid_hi"]), int(settings["grid_n"]))
    estimators = _parse_estimators(
        settings["estimators"], grid, float(settings["half_life"]), not settings.get("no_ao_renormalize", False)
    )
    return BacktestConfig(
        t_is=int(settings["t_is"]),
        t_oos=int(settings["t_oos"]),
        step=int(settings["step"]),
        eval_start=_period(settings["eval_start"], "eval-start"),
        eval_end=_period(settings["eval_end"], "eval-end"),
        estimators=estimators,
        seed=int(settings["seed"]),
        target_vol=float(settings["target_vol"]),
    )


def _stats_frames(result, settings):
    names = list(result.series)
    sharpe = {n: result.series[n].sharpes for n in names}
    test_rows = []

    def one_sided(a: str, b: str):
        try:
            res = wilcoxon_test(sharpe[a] - sharpe[b])
        except DataError as exc:
            logger.warning("skipping wilcoxon %s vs %s: %s", a, b, exc)
            return
        test_rows.append(
            {
                "comparison": f"{a} vs {b}",
                "statistic": res.statistic,
                "p_value": res.p_value,
                "method": f"wilcoxon-{res.method}",
            }
        )

    baseline = EstimatorKind.UPSA.value
    headline = EstimatorKind.AVG_UPSA_AO.value
    if baseline in sharpe:
        for name in names:
            if name != baseline:
                one_sided(name, baseline)
    if headline in sharpe:
        for name in names:
            if name != headline and not (name == baseline and baseline in sharpe):
                one_sided(headline, name)
    tests = pd.DataFrame(test_rows, columns=["comparison", "statistic", "p_value", "method"])

    mcs_rows = []
    if len(names) >= 2 and len(result.dates) >= 30:
        losses = pd.DataFrame({n: -sharpe[n] for n in names})
        mcs = model_confidence_set(
            losses,
            alpha=float(settings["alpha"]),
            block_len=int(settings["block_len"]),
            n_boot=int(settings["n_boot"]),
            seed=int(settings["seed"]),
        )
        eliminated_at = {name: step + 1 for step, (name, _) in enumerate(mcs.elimination_order)}
        for name in names:
            mcs_rows.append(
                {
                    "estimator": name,
                    "eliminated_at": eliminated_at.get(name, ""),
                    "p_value": mcs.pvalues[name],
                    "survivor": name in mcs.survivors,
                }
            )
    else:
        logger.warning("MCS skipped: need >= 2 estimators and >= 30 dates")
    mcs_frame = pd.DataFrame(mcs_rows, columns=["estimator", "eliminated_at", "p_value", "survivor"])
    return tests, mcs_frame


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Enable info-level logging.")
@click.version_option(version=__version__)
def main(verbose):
    """Covariance-shrinkage backtesting toolkit."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


_out_dir_option = click.option(
    "--out-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Output directory [env COVSHRINK_OUT, default ./covshrink_out].",
)


def _resolve_out_dir(out_dir) -> Path:
    if out_dir is None:
        out_dir = Path(os.environ.get("COVSHRINK_OUT", "covshrink_out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


@main.command("backtest")
@click.option("--data", type=click.Path(path_type=Path), default=None, help="Panel CSV path.")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--t-is", type=int, default=None)
@click.option("--t-oos", type=int, default=None)
@click.option("--step", type=int, default=None)
@click.option("--grid-lo", type=float, default=None)
@click.option("--grid-hi", type=float, default=None)
@click.option("--grid-n", type=int, default=None)
@click.option("--half-life", type=float, default=None)
@click.option("--eval-start", type=str, default=None)
@click.option("--eval-end", type=str, default=None)
@click.option("--estimators", type=str, default=None, help="Comma list, e.g. 'upsa,ao'.")
@click.option("--missing-policy", type=click.Choice(MISSING_POLICIES), default=None)
@click.option("--target-vol", type=float, default=None)
@click.option("--alpha", type=float, default=None, help="MCS test size.")
@click.option("--block-len", type=int, default=None, help="MCS bootstrap block length.")
@click.option("--n-boot", type=int, default=None, help="MCS bootstrap replicas.")
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--no-ao-renormalize", is_flag=True, default=False,
              help="Keep the raw diagonal after oracle filtering.")
@_out_dir_option
@_exit_guard
def cmd_backtest(data, config_path, out_dir, no_ao_renormalize, **flags):
    """Run the walk-forward backtest and write all result CSVs."""
    settings = _resolve(flags, config_path)
    settings["no_ao_renormalize"] = no_ao_renormalize
    data = data or settings.get("data")
    out_dir = _resolve_out_dir(out_dir)
    panel = _load_panel(settings, data)
    config = _build_config(settings)
    manifest = _Manifest(
        out_dir,
        "backtest",
        settings,
        {"path": str(data), "sha256": _sha256(data), "assets": panel.n_assets, "months": panel.n_months},
    )
    result = run_backtest(panel, config, workers=int(settings["workers"]))
    _emit(result.summary_frame(), out_dir, "summary.csv", manifest)
    _emit(result.sharpe_frame(), out_dir, "sharpe_series.csv", manifest)
    _emit(result.cumulative_frame(), out_dir, "cumulative_returns.csv", manifest)
    for name, series in result.series.items():
        if series.ridge_weights is not None:
            safe = name.lower().replace("-", "_")
            _emit(result.weights_frame(name), out_dir, f"weights_{safe}.csv", manifest)
    tests, mcs_frame = _stats_frames(result, settings)
    _emit(tests, out_dir, "tests.csv", manifest)
    _emit(mcs_frame, out_dir, "mcs.csv", manifest)
    manifest.finalize()
    click.echo(result.summary_frame().to_string(index=False))


def _parse_value_list(text: str, kind=float):
    if text is None:
        return None
    text = text.strip()
    if ".." in text:
        body, _, step = text.partition(":")
        lo, _, hi = body.partition("..")
        try:
            lo, hi, step = int(lo), int(hi), int(step or 1)
        except ValueError as exc:
            raise ConfigError(f"bad range spec {text!r}: expected start..stop:step") from exc
        if step < 1 or hi < lo:
            raise ConfigError(f"bad range spec {text!r}")
        return list(range(lo, hi + 1, step))
    values = [kind(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise ConfigError("empty value list")
    return values


@main.command("sweep")
@click.option("--data", type=click.Path(path_type=Path), default=None)
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None)
@click.option("--grid-lo", "grid_lo_list", type=str, default=None,
              help="Comma list of penalty-grid lower bounds.")
@click.option("--window", "window_list", type=str, default=None,
              help="Calibration lengths: comma list or start..stop:step months.")
@click.option("--t-is", type=int, default=None)
@click.option("--t-oos", type=int, default=None)
@click.option("--step", type=int, default=None)
@click.option("--grid-hi", type=float, default=None)
@click.option("--grid-n", type=int, default=None)
@click.option("--half-life", type=float, default=None)
@click.option("--eval-start", type=str, default=None)
@click.option("--eval-end", type=str, default=None)
@click.option("--estimators", type=str, default=None)
@click.option("--missing-policy", type=click.Choice(MISSING_POLICIES), default=None)
@click.option("--target-vol", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None)
@_out_dir_option
@_exit_guard
def cmd_sweep(data, config_path, out_dir, grid_lo_list, window_list, **flags):
    """Sweep the penalty-grid lower bound or the calibration window length."""
    settings = _resolve(flags, config_path)
    if (grid_lo_list is None) == (window_list is None):
        raise ConfigError("provide exactly one of --grid-lo or --window")
    data = data or settings.get("data")
    out_dir = _resolve_out_dir(out_dir)
    panel = _load_panel(settings, data)
    config = _build_config(settings)
    manifest = _Manifest(
        out_dir,
        "sweep",
        settings,
        {"path": str(data), "sha256": _sha256(data), "assets": panel.n_assets, "months": panel.n_months},
    )
    workers = int(settings["workers"])
    if grid_lo_list is not None:
        values = _parse_value_list(grid_lo_list, float)
        frame = sweep_grid_lower_bound(panel, config, values, workers=workers)
        name = "sweep_grid_lo.csv"
    else:
        values = _parse_value_list(window_list, int)
        frame = sweep_window_length(panel, config, [int(v) for v in values], workers=workers)
        name = "sweep_window.csv"
    path = out_dir / name
    frame.to_csv(path)
    manifest.add(path)
    manifest.finalize()
    click.echo(frame.to_string())


@main.command("synth")
@click.option("--n", "n_assets", type=int, required=True)
@click.option("--months", type=int, required=True)
@click.option("--drift", type=float, default=0.0)
@click.option("--seed", type=int, default=0)
@click.option("--start", type=str, default="1970-01")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Panel CSV path [default <out-dir>/synthetic_panel.csv].")
@_out_dir_option
@_exit_guard
def cmd_synth(n_assets, months, drift, seed, start, out_path, out_dir):
    """Generate a reproducible synthetic monthly return panel."""
    panel = generate_synthetic_panel(n=n_assets, t_total=months, drift=drift, seed=seed, start=start)
    if out_path is None:
        out_dir = _resolve_out_dir(out_dir)
        out_path = out_dir / "synthetic_panel.csv"
    else:
        out_path.parent.mkdir(parents=True, exist_ok=True)
    panel_to_csv(panel, out_path)
    click.echo(f"wrote {out_path} ({panel.n_months} months x {panel.n_assets} assets)")


if __name__ == "__main__":
    main()
