"""Default experiment setup and the JSON configuration file format.

Config files use lab-friendly units: THz, metres, aJ, degrees,
picoseconds. Example::

    {
      "medium":     {"source": "synthetic"},
      "pulse":      {"order": 6, "energy_aJ": 1.0},
      "alphabet":   {"centers_THz": [0.5, 1, 1.65, 2.75, 4.7, 7.7]},
      "ulas":       {"delta_T_ps": 9,
                     "single": [{"N": 8, "f_l_THz": 0.1, "f_h_THz": 10}],
                     "dual":   [{"N": 8, "f_l_THz": 0.2, "f_h_THz": 2},
                                {"N": 8, "f_l_THz": 2, "f_h_THz": 10}]},
      "experiment": {"ula_mode": "dual", "theta_deg": -18.525, "n_runs": 100,
                     "seed": 0, "distances_m": [0.005, 1.0]}
    }

Every section and key is optional; omitted values fall back to the defaults
below. ``medium.source`` is ``synthetic``, ``flat`` (with ``k_per_m``) or
``csv`` (with ``path``, resolved relative to the config file).
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .array import UlaConfig
from .channel import DEFAULT_TEMPERATURE, AbsorptionTable, default_medium, flat_medium, load_absorption_csv
from .errors import ConfigError
from .harness import DEFAULT_DISTANCES, DEFAULT_RUNS, DEFAULT_THETA, ExperimentConfig
from .pulse import EventAlphabet, build_alphabet

DEFAULT_DELTA_T = 9e-12  # s
DEFAULT_ORDER = 6
DEFAULT_ENERGY = 1e-18  # J
DEFAULT_CENTERS = (0.5e12, 1e12, 1.65e12, 2.75e12, 4.7e12, 7.7e12)
FULL_BAND = (0.1e12, 10e12)
DEFAULT_EXCLUDED_CENTER = 2.75e12

THZ = 1e12


def single_ula(delta_T: float = DEFAULT_DELTA_T) -> tuple[UlaConfig]:
    return (UlaConfig(8, 0.1e12, 10e12, delta_T),)


def dual_ulas(delta_T: float = DEFAULT_DELTA_T) -> tuple[UlaConfig, UlaConfig]:
    return UlaConfig(8, 0.2e12, 2e12, delta_T), UlaConfig(8, 2e12, 10e12, delta_T)


def default_alphabet(order: int = DEFAULT_ORDER, energy: float = DEFAULT_ENERGY, centers=DEFAULT_CENTERS,
                     delta_T: float = DEFAULT_DELTA_T, band=FULL_BAND) -> EventAlphabet:
    """Six-symbol alphabet normalized on the full-band receiver grid.

    All symbols share one normalization grid so that single and dual receivers
    see the same transmitted pulses.
    """
    return build_alphabet(order, centers, energy, band, 1.0 / delta_T)


def default_config(ula_mode: str = "dual", medium: AbsorptionTable | None = None, **overrides) -> ExperimentConfig:
    ulas = single_ula() if ula_mode == "single" else dual_ulas()
    alphabet = overrides.pop("alphabet", None) or default_alphabet()
    config = ExperimentConfig(
        ula_mode=ula_mode,
        ulas=ulas,
        alphabet=alphabet,
        medium=default_medium() if medium is None else medium,
        exclude=_excluded_ids(alphabet, [DEFAULT_EXCLUDED_CENTER]),
    )
    return replace(config, **overrides) if overrides else config


def _excluded_ids(alphabet: EventAlphabet, centers) -> tuple:
    return tuple(
        event_id
        for event_id, spec in alphabet.symbols
        if any(abs(spec.center_frequency - f) <= 1e-6 * f for f in centers)
    )


def load_medium(section: dict, base_dir: Path | None = None) -> AbsorptionTable:
    source = section.get("source", "synthetic")
    if source == "synthetic":
        return default_medium()
    if source == "flat":
        return flat_medium(float(section.get("k_per_m", 0.0)))
    if source == "csv":
        if "path" not in section:
            raise ConfigError("medium.source 'csv' needs a 'path'")
        path = Path(section["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"medium file not found: {path}")
        return load_absorption_csv(path)
    raise ConfigError(f"unknown medium source {source!r} (expected synthetic, flat or csv)")


def _ula_from_dict(d: dict, delta_T: float) -> UlaConfig:
    try:
        return UlaConfig(
            N=int(d.get("N", 8)),
            f_l=float(d["f_l_THz"]) * THZ,
            f_h=float(d["f_h_THz"]) * THZ,
            delta_T=delta_T,
            d_s=float(d["d_s_um"]) * 1e-6 if "d_s_um" in d else None,
            bins_override=d.get("bins_override"),
        )
    except KeyError as exc:
        raise ConfigError(f"ULA entry missing {exc.args[0]!r}") from None


def config_from_dict(doc: dict, base_dir: Path | None = None, ula_mode: str | None = None,
                     medium: AbsorptionTable | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a parsed config document."""
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(doc) - {"medium", "pulse", "alphabet", "ulas", "experiment"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    pulse = doc.get("pulse", {})
    alpha = doc.get("alphabet", {})
    ulas_doc = doc.get("ulas", {})
    exp = doc.get("experiment", {})

    delta_T = float(ulas_doc.get("delta_T_ps", DEFAULT_DELTA_T * 1e12)) * 1e-12
    mode = ula_mode or exp.get("ula_mode", "dual")
    if mode not in ("single", "dual"):
        raise ConfigError(f"ula_mode must be 'single' or 'dual', got {mode!r}")
    if mode in ulas_doc:
        ulas = tuple(_ula_from_dict(u, delta_T) for u in ulas_doc[mode])
    else:
        ulas = single_ula(delta_T) if mode == "single" else dual_ulas(delta_T)

    order = int(alpha.get("order", pulse.get("order", DEFAULT_ORDER)))
    energy = float(alpha.get("energy_aJ", pulse.get("energy_aJ", DEFAULT_ENERGY * 1e18))) * 1e-18
    centers = [float(f) * THZ for f in alpha.get("centers_THz", [f / THZ for f in DEFAULT_CENTERS])]
    band = (min(u.f_l for u in ulas), max(u.f_h for u in ulas))
    if mode == "dual":
        # normalize on the single-receiver band so both modes transmit identical pulses
        band = (min(band[0], FULL_BAND[0]), max(band[1], FULL_BAND[1]))
    alphabet = build_alphabet(order, centers, energy, band, 1.0 / delta_T)

    if medium is None:
        medium = load_medium(doc.get("medium", {}), base_dir)
    excl_centers = [float(f) * THZ for f in exp.get("exclude_THz", [DEFAULT_EXCLUDED_CENTER / THZ])]
    threshold = exp.get("snr_threshold_db")
    return ExperimentConfig(
        ula_mode=mode,
        ulas=ulas,
        alphabet=alphabet,
        medium=medium,
        theta_true=float(exp.get("theta_deg", DEFAULT_THETA)),
        distances=tuple(float(d) for d in exp.get("distances_m", DEFAULT_DISTANCES)),
        n_runs=int(exp.get("n_runs", DEFAULT_RUNS)),
        master_seed=int(exp.get("seed", 0)),
        grid_step=float(exp.get("grid_step_deg", 0.05)),
        snr_threshold_db=None if threshold is None else float(threshold),
        refine=bool(exp.get("parabolic_refinement", False)),
        exclude=_excluded_ids(alphabet, excl_centers),
        T0=float(doc.get("medium", {}).get("temperature_K", DEFAULT_TEMPERATURE)),
        K=int(exp.get("snapshots", 1)),
    )


def load_config(path, **kwargs) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(doc, path.parent, **kwargs)
