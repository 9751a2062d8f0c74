"""Monte-Carlo experiments: trial simulation, single/dual ULA routing, metrics.

Every trial draws its noise from a generator seeded by a pure function of
``(master_seed, event_id, distance_index, trial_index)``, so any subset of
trials reproduces exactly regardless of execution order or worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .array import SourceTruth, UlaConfig, simulate_snapshot
from .channel import DEFAULT_TEMPERATURE, AbsorptionTable
from .classifier import classify, estimate_psd, spectral_centroid
from .doa import DEFAULT_GRID_STEP, angle_grid, estimate_doa, imusic_spectrum, sample_covariance
from .errors import ConfigError
from .pulse import EventAlphabet

DEFAULT_THETA = -18.525  # degrees
DEFAULT_DISTANCES = (0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0)  # m
DEFAULT_RUNS = 100
DEFAULT_EXCLUDED_EVENTS = (4,)

# Published 1 m / 1 aJ confusion counts out of 100 pulses, rows = estimated
# symbol, columns = true symbol, for the six-symbol 0.5-7.7 THz alphabet.
REFERENCE_CONFUSION_1M = {
    "single": (
        (0, 0, 0, 0, 0, 0),
        (1, 0, 0, 0, 0, 0),
        (36, 3, 0, 0, 0, 0),
        (58, 90, 65, 3, 0, 0),
        (5, 7, 35, 97, 100, 48),
        (0, 0, 0, 0, 0, 52),
    ),
    "dual": (
        (98, 0, 0, 0, 0, 0),
        (2, 100, 0, 0, 0, 0),
        (0, 0, 100, 0, 0, 0),
        (0, 0, 0, 0, 0, 0),
        (0, 0, 0, 100, 100, 4),
        (0, 0, 0, 0, 0, 96),
    ),
}
REFERENCE_OVERALL_TPR_1M = {"single": 0.304, "dual": 0.988}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    In dual mode ``ulas[0]`` covers the low band and ``ulas[1]`` the high
    band; the split frequency is ``ulas[1].f_l`` and must equal ``ulas[0].f_h``.
    """

    ula_mode: str
    ulas: tuple
    alphabet: EventAlphabet
    medium: AbsorptionTable
    theta_true: float = DEFAULT_THETA
    distances: tuple = DEFAULT_DISTANCES
    n_runs: int = DEFAULT_RUNS
    master_seed: int = 0
    grid_step: float = DEFAULT_GRID_STEP
    snr_threshold_db: float | None = None
    refine: bool = False
    exclude: tuple = DEFAULT_EXCLUDED_EVENTS
    T0: float = DEFAULT_TEMPERATURE
    K: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ulas", tuple(self.ulas))
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        object.__setattr__(self, "exclude", tuple(self.exclude))
        if self.ula_mode not in ("single", "dual"):
            raise ConfigError(f"ula_mode must be 'single' or 'dual', got {self.ula_mode!r}")
        expected = 1 if self.ula_mode == "single" else 2
        if len(self.ulas) != expected:
            raise ConfigError(f"{self.ula_mode} mode needs {expected} ULA(s), got {len(self.ulas)}")
        if self.ula_mode == "dual" and self.ulas[0].f_h != self.ulas[1].f_l:
            raise ConfigError(
                f"dual mode needs ULA1 upper edge ({self.ulas[0].f_h:g} Hz) "
                f"== ULA2 lower edge ({self.ulas[1].f_l:g} Hz)"
            )
        if not -90 < self.theta_true < 90:
            raise ConfigError(f"theta_true must lie in (-90, 90), got {self.theta_true!r}")
        if self.n_runs < 1:
            raise ConfigError(f"n_runs must be >= 1, got {self.n_runs!r}")
        if any(d <= 0 for d in self.distances):
            raise ConfigError("distances must be > 0")
        unknown = set(self.exclude) - set(self.alphabet.event_ids)
        if unknown:
            raise ConfigError(f"excluded events {sorted(unknown)} are not in the alphabet")
        for event_id, spec in self.alphabet.symbols:
            ula = self.ulas[route_ula(spec.center_frequency, self)]
            if spec.duration > ula.delta_T:
                raise ConfigError(
                    f"event {event_id}: pulse does not fit observation window "
                    f"(T_p={spec.duration * 1e12:.3f} ps > delta_T={ula.delta_T * 1e12:.3f} ps)"
                )
            if ula.f_l < self.medium.band_lo or ula.f_h > self.medium.band_hi:
                raise ConfigError(
                    f"medium band [{self.medium.band_lo:g}, {self.medium.band_hi:g}] Hz does not "
                    f"cover ULA band [{ula.f_l:g}, {ula.f_h:g}] Hz"
                )

    @property
    def split_frequency(self) -> float | None:
        return self.ulas[1].f_l if self.ula_mode == "dual" else None


@dataclass(frozen=True)
class TrialResult:
    event_true: int
    event_est: int
    theta_hat: float
    f_cen: float
    d_r: float
    seed: int


@dataclass
class MetricsReport:
    """Aggregated metrics indexed ``[event_index, distance_index]``.

    ``confusion[d, est, true]`` counts trials at distance ``d``.
    """

    ula_mode: str
    event_ids: list
    center_frequencies: np.ndarray
    distances: tuple
    theta_true: float
    rmse_doa: np.ndarray
    rmse_fc: np.ndarray
    tpr: np.ndarray
    confusion: np.ndarray
    exclude: tuple = ()
    trials: list = field(default_factory=list, repr=False)

    def overall_tpr(self, d_index: int, exclude=()) -> float:
        cols = [i for i, e in enumerate(self.event_ids) if e not in exclude]
        conf = self.confusion[d_index][:, cols]
        total = conf.sum()
        correct = sum(self.confusion[d_index][i, i] for i in cols)
        return float(correct / total) if total else float("nan")

    def mean_rmse_doa(self, d_index: int, exclude=()) -> float:
        rows = [i for i, e in enumerate(self.event_ids) if e not in exclude]
        return float(np.mean(self.rmse_doa[rows, d_index]))

    def distance_index(self, d_r: float) -> int:
        for i, d in enumerate(self.distances):
            if math.isclose(d, d_r, rel_tol=1e-12):
                return i
        raise KeyError(f"distance {d_r!r} m not in sweep {self.distances}")


def route_ula(f_c: float, config: ExperimentConfig) -> int:
    """Index of the ULA that receives a pulse centred at ``f_c``.

    Dual mode uses ULA1 for ``f_c`` below the split and ULA2 from the split up.
    """
    if config.ula_mode == "single":
        index = 0
    else:
        index = 0 if f_c < config.split_frequency else 1
    if not config.ulas[index].contains(f_c):
        bands = ", ".join(f"[{u.f_l / 1e12:g}, {u.f_h / 1e12:g}]" for u in config.ulas)
        raise ConfigError(f"center frequency {f_c / 1e12:g} THz outside every ULA band ({bands} THz)")
    return index


def trial_seed(master_seed: int, event_id: int, d_index: int, trial: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(event_id), int(d_index), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0])


def process_trial(config: ExperimentConfig, event_id: int, d_r: float, seed: int, grid=None):
    """Run one pulse through the receiver chain and keep the intermediates.

    Returns ``(result, ula, covariances, spectrum, psd)``.
    """
    spec = config.alphabet.spec(event_id)
    ula = config.ulas[route_ula(spec.center_frequency, config)]
    truth = SourceTruth(config.theta_true, d_r, event_id)
    snaps = simulate_snapshot(ula, spec, config.medium, truth, config.K, seed, config.T0)
    covariances = sample_covariance(snaps.data)

    mask = None
    if config.snr_threshold_db is not None:
        with np.errstate(divide="ignore"):
            snr_db = 10 * np.log10(snaps.signal_power) - 10 * np.log10(snaps.noise_var)
        mask = snr_db >= config.snr_threshold_db
        if not mask.any():
            mask = None

    grid = angle_grid(config.grid_step) if grid is None else grid
    spectrum = imusic_spectrum(covariances, ula, grid, bin_mask=mask)
    theta_hat = estimate_doa(spectrum, refine=config.refine)
    psd = estimate_psd(covariances, ula, theta_hat)
    f_cen = spectral_centroid(psd)
    result = TrialResult(event_id, classify(f_cen, config.alphabet), theta_hat, f_cen, d_r, seed)
    return result, ula, covariances, spectrum, psd


def run_trial(config: ExperimentConfig, event_id: int, d_r: float, trial_seed: int, grid=None) -> TrialResult:
    return process_trial(config, event_id, d_r, trial_seed, grid)[0]


def _run_point(args) -> list[TrialResult]:
    config, event_id, d_index = args
    d_r = config.distances[d_index]
    grid = angle_grid(config.grid_step)
    return [
        run_trial(config, event_id, d_r, trial_seed(config.master_seed, event_id, d_index, t), grid)
        for t in range(config.n_runs)
    ]


def _rmse(estimates, truth: float) -> float:
    err = np.asarray(estimates, dtype=float) - truth
    scale = np.max(np.abs(err))
    if scale == 0:
        return 0.0
    # scaled so tiny errors do not underflow when squared
    return float(scale * np.sqrt(np.mean((err / scale) ** 2)))


def run_experiment(config: ExperimentConfig, workers: int = 1) -> MetricsReport:
    """Run ``n_runs`` trials for every (event, distance) pair and aggregate.

    ``workers > 1`` fans the (event, distance) points out to processes; the
    result is identical to a serial run.
    """
    event_ids = config.alphabet.event_ids
    M, D = len(event_ids), len(config.distances)
    tasks = [(config, e, d) for e in event_ids for d in range(D)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_run_point, tasks))
    else:
        batches = [_run_point(t) for t in tasks]

    fcs = config.alphabet.center_frequencies
    rmse_doa = np.zeros((M, D))
    rmse_fc = np.zeros((M, D))
    tpr = np.zeros((M, D))
    confusion = np.zeros((D, M, M), dtype=int)
    trials: list[TrialResult] = []
    for (_, event_id, d), batch in zip(tasks, batches):
        i = event_ids.index(event_id)
        rmse_doa[i, d] = _rmse([r.theta_hat for r in batch], config.theta_true)
        rmse_fc[i, d] = _rmse([r.f_cen for r in batch], fcs[i])
        tpr[i, d] = sum(r.event_est == event_id for r in batch) / len(batch)
        for r in batch:
            confusion[d, event_ids.index(r.event_est), i] += 1
        trials.extend(batch)
    return MetricsReport(
        config.ula_mode, list(event_ids), fcs, config.distances, config.theta_true,
        rmse_doa, rmse_fc, tpr, confusion, config.exclude, trials,
    )


def _thz(f: float) -> str:
    return f"{f / 1e12:.6g}"


def emit_report(report: MetricsReport, out_dir, fmt: str = "csv", trials_jsonl: bool = False) -> list[Path]:
    """Write ``metrics_<mode>.csv`` and ``confusion_<mode>.csv`` into ``out_dir``.

    The metrics file is long format (``ula_mode,f_c_thz,d_r_m,metric,value``).
    The confusion file repeats a block per distance with rows = estimated
    symbol and columns = true symbol, followed by a per-symbol TPR row.
    """
    if fmt != "csv":
        raise ConfigError(f"unsupported report format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"metrics_{report.ula_mode}.csv", out / f"confusion_{report.ula_mode}.csv"]
        with open(paths[0], "w", encoding="utf-8", newline="") as fh:
            fh.write("ula_mode,f_c_thz,d_r_m,metric,value\n")
            for d, d_r in enumerate(report.distances):
                for i, f_c in enumerate(report.center_frequencies):
                    for name, table in (("rmse_doa_deg", report.rmse_doa), ("rmse_fc_thz", report.rmse_fc / 1e12),
                                        ("tpr", report.tpr)):
                        fh.write(f"{report.ula_mode},{_thz(f_c)},{d_r!r},{name},{float(table[i, d])!r}\n")
                for name, value in (
                    ("overall_tpr", report.overall_tpr(d)),
                    ("overall_tpr_excluding", report.overall_tpr(d, report.exclude)),
                    ("mean_rmse_doa_deg", report.mean_rmse_doa(d)),
                    ("mean_rmse_doa_deg_excluding", report.mean_rmse_doa(d, report.exclude)),
                ):
                    fh.write(f"{report.ula_mode},all,{d_r!r},{name},{value!r}\n")

        labels = [_thz(f) for f in report.center_frequencies]
        with open(paths[1], "w", encoding="utf-8", newline="") as fh:
            fh.write("ula_mode,d_r_m,estimated_thz," + ",".join(labels) + "\n")
            for d, d_r in enumerate(report.distances):
                for row, label in enumerate(labels):
                    counts = ",".join(str(int(c)) for c in report.confusion[d, row])
                    fh.write(f"{report.ula_mode},{d_r!r},{label},{counts}\n")
                tprs = ",".join(repr(float(t)) for t in report.tpr[:, d])
                fh.write(f"{report.ula_mode},{d_r!r},tpr,{tprs}\n")

        if trials_jsonl:
            paths.append(out / f"trials_{report.ula_mode}.jsonl")
            with open(paths[-1], "w", encoding="utf-8", newline="") as fh:
                for r in report.trials:
                    fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write report under {out}: {exc}") from exc
    return paths


def compare_with_reference(reports: dict, out_dir, d_r: float = 1.0) -> Path:
    """Per-cell deviation of simulated 1 m confusion counts from the published table.

    ``reports`` maps ``"single"``/``"dual"`` to a :class:`MetricsReport` run
    with the six-symbol default alphabet. Simulated counts are rescaled to
    100 pulses per symbol before differencing.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "reference_comparison.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("ula_mode,row,true_thz,simulated,published,deviation\n")
        for mode in ("single", "dual"):
            if mode not in reports:
                continue
            rep = reports[mode]
            if len(rep.event_ids) != 6:
                raise ConfigError("reference comparison needs the six-symbol alphabet")
            d = rep.distance_index(d_r)
            conf = rep.confusion[d]
            per_100 = 100.0 * conf / conf.sum(axis=0, keepdims=True)
            labels = [_thz(f) for f in rep.center_frequencies]
            ref = np.array(REFERENCE_CONFUSION_1M[mode], dtype=float)
            for est in range(6):
                for true in range(6):
                    sim, pub = float(per_100[est, true]), float(ref[est, true])
                    fh.write(f"{mode},est_{labels[est]},{labels[true]},{sim!r},{pub!r},{sim - pub!r}\n")
            for true in range(6):
                sim, pub = float(rep.tpr[true, d]), float(ref[true, true]) / 100.0
                fh.write(f"{mode},tpr,{labels[true]},{sim!r},{pub!r},{sim - pub!r}\n")
            sim = rep.overall_tpr(d, rep.exclude)
            pub = REFERENCE_OVERALL_TPR_1M[mode]
            fh.write(f"{mode},overall_tpr_excluding,all,{sim!r},{pub!r},{sim - pub!r}\n")
    return path
