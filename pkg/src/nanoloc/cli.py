"""Command-line front end.

Subcommands::

    nanoloc simulate     --config cfg.json --out results/ [--seed 42] [--runs 100]
    nanoloc spectrum     --event 1 --distance 0.5 --out results/
    nanoloc medium-info  --medium absorption.csv --out results/
    nanoloc compare      --medium absorption.csv --out results/

Exit codes: 0 success, 1 configuration error, 2 runtime error. Every output
is a UTF-8 CSV with a header row.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .array import SourceTruth, simulate_snapshot, write_snapshots_csv
from .channel import absorption_at, default_medium, flat_medium
from .classifier import spectral_centroid, write_psd_csv
from .config import config_from_dict, load_config, load_medium
from .doa import write_spectrum_csv
from .errors import ConfigError, IngestionError
from .harness import compare_with_reference, emit_report, process_trial, run_experiment, trial_seed
from .pulse import half_power_band


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


@dataclass
class CliConfig:
    subcommand: str
    config_path: Path | None
    output_dir: Path
    overrides: dict = field(default_factory=dict)


def _medium_from_flag(value: str | None):
    if value is None:
        return None
    if value == "synthetic":
        return default_medium()
    if value == "flat":
        return flat_medium(0.0)
    return load_medium({"source": "csv", "path": value})


def _experiment(cli: CliConfig, ula_mode: str | None = None):
    ov = cli.overrides
    medium = _medium_from_flag(ov.get("medium"))
    mode = ula_mode or ov.get("ula_mode")
    if cli.config_path is not None:
        config = load_config(cli.config_path, ula_mode=mode, medium=medium)
    else:
        config = config_from_dict({}, ula_mode=mode, medium=medium)
    changes = {}
    if ov.get("seed") is not None:
        changes["master_seed"] = ov["seed"]
    if ov.get("runs") is not None:
        changes["n_runs"] = ov["runs"]
    if ov.get("distances"):
        changes["distances"] = tuple(ov["distances"])
    return replace(config, **changes) if changes else config


def _prepare_out(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc}") from None
    if not path.is_dir():
        raise ConfigError(f"output path {path} is not a directory")
    return path


def cmd_simulate(cli: CliConfig) -> int:
    config = _experiment(cli)
    out = _prepare_out(cli.output_dir)
    report = run_experiment(config, workers=cli.overrides.get("workers", 1))
    paths = emit_report(report, out, trials_jsonl=cli.overrides.get("trials_jsonl", False))
    d_last = len(report.distances) - 1
    print(f"{config.ula_mode}: overall TPR at {report.distances[d_last]:g} m = "
          f"{report.overall_tpr(d_last, report.exclude):.3f} (excluding {list(report.exclude)})")
    for p in paths:
        print(p)
    return 0


def cmd_spectrum(cli: CliConfig) -> int:
    ov = cli.overrides
    config = _experiment(cli)
    out = _prepare_out(cli.output_dir)
    event_id = ov["event"]
    if event_id not in config.alphabet.event_ids:
        raise ConfigError(f"event {event_id} not in alphabet {config.alphabet.event_ids}")
    seed = trial_seed(config.master_seed, event_id, 0, ov.get("trial", 0))
    result, ula, _, spectrum, psd = process_trial(config, event_id, ov["distance"], seed)
    stem = f"{config.ula_mode}_e{event_id}"
    write_spectrum_csv(spectrum, out / f"spectrum_{stem}.csv")
    write_psd_csv(psd, out / f"psd_{stem}.csv")
    if ov.get("dump_snapshots"):
        spec = config.alphabet.spec(event_id)
        snaps = simulate_snapshot(ula, spec, config.medium, SourceTruth(config.theta_true, ov["distance"], event_id),
                                  config.K, seed, config.T0)
        write_snapshots_csv(snaps, out / f"snapshots_{stem}.csv")
    print(f"theta_hat_deg={float(result.theta_hat)!r}")
    print(f"f_cen_hz={spectral_centroid(psd)!r}")
    print(f"event_est={result.event_est}")
    return 0


def cmd_medium_info(cli: CliConfig) -> int:
    config = _experiment(cli)
    out = _prepare_out(cli.output_dir)
    table = config.medium
    rows, summary = [], []
    for event_id, spec in config.alphabet.symbols:
        lo, hi = half_power_band(spec.n, spec.sigma)
        inside = table.frequencies[(table.frequencies > lo) & (table.frequencies < hi)]
        grid = np.concatenate(([lo], inside, [hi]))
        grid = grid[(grid >= table.band_lo) & (grid <= table.band_hi)]
        k = absorption_at(table, grid) if grid.size else np.array([])
        rows.extend((event_id, f, kv) for f, kv in zip(grid, k))
        if k.size:
            summary.append((event_id, spec.center_frequency, lo, hi, float(k.max()),
                            float(grid[np.argmax(k)]), float(k.min()), float(k.mean())))
    with open(out / "medium_bands.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("event_id,frequency_hz,k_per_m\n")
        for event_id, f, kv in rows:
            fh.write(f"{event_id},{float(f)!r},{float(kv)!r}\n")
    with open(out / "medium_summary.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write("event_id,f_c_hz,band_lo_hz,band_hi_hz,k_max_per_m,f_at_max_hz,k_min_per_m,k_mean_per_m\n")
        for row in summary:
            fh.write(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]) + "\n")
    print("event  band_THz          k_max   k_min")
    for event_id, _, lo, hi, kmax, _, kmin, _ in summary:
        print(f"{event_id:5d}  {lo / 1e12:6.3f}-{hi / 1e12:6.3f}  {kmax:7.3g} {kmin:7.3g}")
    return 0


def cmd_compare(cli: CliConfig) -> int:
    out = _prepare_out(cli.output_dir)
    d_ref = cli.overrides.get("distance", 1.0)
    reports = {}
    for mode in ("single", "dual"):
        config = _experiment(cli, ula_mode=mode)
        config = replace(config, distances=(d_ref,))
        reports[mode] = run_experiment(config, workers=cli.overrides.get("workers", 1))
        emit_report(reports[mode], out)
    path = compare_with_reference(reports, out, d_ref)
    print(path)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "medium-info": cmd_medium_info,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--runs", type=int, help="trials per (event, distance) point")
    common.add_argument("--medium", help="'synthetic', 'flat' (k=0) or a k(f) CSV path")
    common.add_argument("--ula-mode", choices=("single", "dual"))
    common.add_argument("--distances", type=float, nargs="+", help="path lengths in m")
    common.add_argument("--workers", type=int, default=1)

    parser = _Parser(prog="nanoloc", description="Terahertz nanonetwork event localization simulator")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", parents=[common], help="run the Monte-Carlo sweep")
    p.add_argument("--trials-jsonl", action="store_true", help="also dump every trial as JSON lines")
    p = sub.add_parser("spectrum", parents=[common], help="IMUSIC spectrum and PSD of one trial")
    p.add_argument("--event", type=int, default=1)
    p.add_argument("--distance", type=float, default=1.0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--dump-snapshots", action="store_true")
    sub.add_parser("medium-info", parents=[common], help="absorption over each symbol's half-power band")
    p = sub.add_parser("compare", parents=[common], help="compare 1 m confusion counts with published values")
    p.add_argument("--distance", type=float, default=1.0)
    return parser


def parse_cli(argv=None) -> CliConfig:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
    if args.runs is not None and args.runs < 1:
        raise ConfigError(f"--runs must be >= 1, got {args.runs}")
    if args.workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {args.workers}")
    overrides = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config", "out")}
    return CliConfig(args.subcommand, args.config, args.out, overrides)


def main(argv=None) -> int:
    try:
        cli = parse_cli(argv)
        return COMMANDS[cli.subcommand](cli)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, IngestionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
