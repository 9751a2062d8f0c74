"""Terahertz channel: spreading/absorption response and molecular absorption noise.

The medium is described by a tabulated absorption coefficient ``k(f)`` (1/m).
Tables are either ingested from CSV (e.g. derived offline from line-by-line
spectroscopic data) or synthesized from Lorentzian resonance lines.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IngestionError

SPEED_OF_LIGHT = 2.99792458e8  # m/s
BOLTZMANN = 1.380649e-23  # J/K
DEFAULT_TEMPERATURE = 296.0  # K

# bin frequencies built as f_l + b/dT may overshoot the band edge by rounding
_BAND_SLACK = 1e-9


@dataclass(frozen=True)
class AbsorptionTable:
    """Medium absorption coefficient sampled on a strictly increasing grid.

    Attributes:
        frequencies: Sample frequencies in Hz.
        k: Absorption coefficient in 1/m at each frequency.
        band_lo: Lowest frequency the table may be queried at (Hz).
        band_hi: Highest frequency the table may be queried at (Hz).
    """

    frequencies: np.ndarray
    k: np.ndarray
    band_lo: float = field(default=None)  # type: ignore[assignment]
    band_hi: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if freqs.ndim != 1 or freqs.shape != k.shape or freqs.size < 2:
            raise ConfigError("absorption table needs >= 2 (frequency, k) entries of equal length")
        if not np.all(np.isfinite(freqs)) or not np.all(np.isfinite(k)):
            raise ConfigError("absorption table entries must be finite")
        if np.any(np.diff(freqs) <= 0):
            raise ConfigError("absorption table frequencies must be strictly increasing")
        if np.any(k < 0):
            raise ConfigError("absorption coefficients must be >= 0")
        lo = freqs[0] if self.band_lo is None else float(self.band_lo)
        hi = freqs[-1] if self.band_hi is None else float(self.band_hi)
        if not lo < hi:
            raise ConfigError(f"band_lo ({lo:g} Hz) must be below band_hi ({hi:g} Hz)")
        if lo < freqs[0] or hi > freqs[-1]:
            raise ConfigError(
                f"table [{freqs[0]:g}, {freqs[-1]:g}] Hz does not cover band [{lo:g}, {hi:g}] Hz"
            )
        freqs.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "frequencies", freqs)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "band_lo", lo)
        object.__setattr__(self, "band_hi", hi)

    def __len__(self):
        return self.frequencies.size

    @property
    def entries(self) -> list[tuple[float, float]]:
        return list(zip(self.frequencies.tolist(), self.k.tolist()))


@dataclass(frozen=True)
class ChannelParams:
    """Geometry and physical constants of one transmitter-receiver link.

    ``f_c`` is the transmitted pulse's center frequency; it sets the
    antenna aperture factor in both the path loss and the noise PSD.
    """

    d_r: float
    f_c: float
    T0: float = DEFAULT_TEMPERATURE
    c0: float = SPEED_OF_LIGHT

    def __post_init__(self):
        if not self.d_r > 0:
            raise ConfigError(f"path length must be > 0, got {self.d_r!r}")
        if not self.f_c > 0:
            raise ConfigError(f"center frequency must be > 0, got {self.f_c!r}")
        if not self.T0 > 0:
            raise ConfigError(f"temperature must be > 0, got {self.T0!r}")

    @property
    def spreading_gain(self) -> float:
        """Amplitude of the free-space spreading factor, c0 / (4 pi d_r f_c)."""
        return self.c0 / (4 * math.pi * self.d_r * self.f_c)


def absorption_at(table: AbsorptionTable, f):
    """Linearly interpolated absorption coefficient at ``f`` (scalar or array).

    Raises:
        ConfigError: If any frequency lies outside ``[band_lo, band_hi]``.
    """
    f_arr = np.asarray(f, dtype=float)
    slack = _BAND_SLACK * (table.band_hi - table.band_lo)
    if np.any(f_arr < table.band_lo - slack) or np.any(f_arr > table.band_hi + slack):
        bad = f_arr[(f_arr < table.band_lo - slack) | (f_arr > table.band_hi + slack)]
        raise ConfigError(
            f"frequency {float(np.ravel(bad)[0]):.6g} Hz outside absorption band "
            f"[{table.band_lo:.6g}, {table.band_hi:.6g}] Hz"
        )
    out = np.interp(f_arr, table.frequencies, table.k)
    return float(out) if out.ndim == 0 else out


def synth_absorption(peaks, baseline: float, grid, wing_cutoff: float | None = None) -> AbsorptionTable:
    """Sample a baseline plus a sum of Lorentzian lines on ``grid``.

    Each peak is ``(center_hz, amplitude_per_m, halfwidth_hz)`` and contributes
    ``amplitude * hw**2 / ((f - center)**2 + hw**2)``, i.e. ``amplitude`` at
    its center.

    With ``wing_cutoff`` (Hz) each line is truncated beyond that detuning and
    lowered by its value there, so the profile stays continuous and the far
    wings of strong lines do not leak into distant windows.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("synthetic absorption grid is empty")
    if baseline < 0:
        raise ConfigError(f"baseline must be >= 0, got {baseline!r}")
    k = np.full(grid.shape, float(baseline))
    for center, amplitude, hw in peaks:
        if amplitude <= 0 or hw <= 0:
            raise ConfigError(f"peak at {center:g} Hz needs amplitude > 0 and halfwidth > 0")
        shape = amplitude * hw**2 / ((grid - center) ** 2 + hw**2)
        if wing_cutoff is not None:
            edge = amplitude * hw**2 / (wing_cutoff**2 + hw**2)
            shape = np.where(np.abs(grid - center) < wing_cutoff, shape - edge, 0.0)
        k += shape
    return AbsorptionTable(grid, k)


def flat_medium(k_per_m: float = 0.0, band=(0.1e12, 10e12)) -> AbsorptionTable:
    """Frequency-independent medium; ``k_per_m=0`` is a transparent, noiseless channel."""
    return AbsorptionTable(np.array(band, dtype=float), np.array([k_per_m, k_per_m], dtype=float))


# (center THz, peak k 1/m, halfwidth GHz). Isolated lines below 2 THz and above
# 3.5 THz; a dense overlapping cluster across 2.1-3.5 THz.
_DEFAULT_LINES = (
    (0.557, 2.0, 3.0),
    (0.752, 1.5, 3.0),
    (0.988, 1.5, 3.0),
    (1.097, 2.5, 3.0),
    (1.163, 2.5, 3.0),
    (1.229, 2.0, 3.0),
    (1.411, 2.0, 3.0),
    (1.602, 3.0, 3.0),
    (1.717, 3.0, 3.0),
    (1.797, 3.0, 3.0),
    (1.867, 3.0, 3.0),
    (1.919, 3.5, 3.0),
    (3.80, 3.0, 6.0),
    (4.25, 2.0, 6.0),
    (5.10, 2.5, 6.0),
    (5.55, 2.0, 6.0),
    (6.20, 3.0, 6.0),
    (7.05, 2.0, 6.0),
    (8.30, 3.0, 6.0),
    (9.20, 2.5, 6.0),
)
_CLUSTER_START_THZ = 2.12
_CLUSTER_SPACING_THZ = 0.05
_CLUSTER_AMPLITUDES = (8.0, 12.0, 9.0, 14.0, 10.0, 7.0, 13.0, 11.0, 9.0, 15.0,
                       10.0, 12.0, 8.0, 14.0, 9.0, 11.0, 13.0, 10.0, 8.0, 12.0,
                       9.0, 11.0, 10.0, 13.0, 8.0, 10.0)
_CLUSTER_HALFWIDTH_GHZ = 18.0
_DEFAULT_BASELINE = 1e-3
# 25 cm^-1, the customary line-wing truncation of line-by-line absorption codes
DEFAULT_WING_CUTOFF = 0.75e12


def default_medium_lines() -> list[tuple[float, float, float]]:
    """Resonance lines of the shipped synthetic medium, in SI units."""
    lines = [(c * 1e12, a, hw * 1e9) for c, a, hw in _DEFAULT_LINES]
    for i, amp in enumerate(_CLUSTER_AMPLITUDES):
        center = _CLUSTER_START_THZ + i * _CLUSTER_SPACING_THZ
        lines.append((center * 1e12, amp, _CLUSTER_HALFWIDTH_GHZ * 1e9))
    return sorted(lines)


def default_medium(step: float = 1e9, band=(0.1e12, 10e12)) -> AbsorptionTable:
    """Synthetic humid-air stand-in used when no measured table is supplied.

    Resonances are densest inside the half-power band of a 2.75 THz pulse,
    leaving comparatively clear windows around the other default symbols.
    """
    n = int(round((band[1] - band[0]) / step)) + 1
    grid = band[0] + step * np.arange(n)
    grid[-1] = band[1]
    return synth_absorption(default_medium_lines(), _DEFAULT_BASELINE, grid, DEFAULT_WING_CUTOFF)


def load_absorption_csv(path) -> AbsorptionTable:
    """Read a two-column ``frequency_hz,k_per_m`` file.

    A first line starting with a non-numeric token is treated as a header.
    Rows must have strictly increasing frequencies and non-negative ``k``.

    Raises:
        IngestionError: On unreadable files or invalid rows; the message cites
            the 1-based data row and file line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read absorption file {path}: {exc}") from exc

    freqs: list[float] = []
    ks: list[float] = []
    row = 0
    for line_no, fields in enumerate(csv.reader(text.splitlines()), start=1):
        if not fields or all(not s.strip() for s in fields):
            continue
        if line_no == 1 and not _is_number(fields[0]):
            continue
        row += 1
        where = f"{path}: row {row} (line {line_no})"
        if len(fields) < 2:
            raise IngestionError(f"{where}: expected 2 columns, got {len(fields)}")
        try:
            f, k = float(fields[0]), float(fields[1])
        except ValueError:
            raise IngestionError(f"{where}: cannot parse {fields[:2]!r} as numbers") from None
        if not (math.isfinite(f) and math.isfinite(k)):
            raise IngestionError(f"{where}: non-finite value")
        if k < 0:
            raise IngestionError(f"{where}: negative absorption coefficient {k!r}")
        if freqs and f <= freqs[-1]:
            raise IngestionError(f"{where}: frequency {f!r} not above previous {freqs[-1]!r}")
        freqs.append(f)
        ks.append(k)
    if len(freqs) < 2:
        raise IngestionError(f"{path}: need at least 2 data rows, found {len(freqs)}")
    return AbsorptionTable(np.array(freqs), np.array(ks))


def write_absorption_csv(table: AbsorptionTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("frequency_hz,k_per_m\n")
        for f, k in zip(table.frequencies.tolist(), table.k.tolist()):
            fh.write(f"{f!r},{k!r}\n")


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def channel_response(params: ChannelParams, table: AbsorptionTable, f):
    """Complex frequency response: spreading loss times molecular absorption.

    ``H = c0/(4 pi d_r f_c) * exp(-j 2 pi f d_r / c0) * exp(-0.5 k(f) d_r)``
    """
    f_arr = np.asarray(f, dtype=float)
    k = absorption_at(table, f_arr)
    phase = np.exp(-2j * np.pi * f_arr * params.d_r / params.c0)
    h = params.spreading_gain * phase * np.exp(-0.5 * np.asarray(k) * params.d_r)
    return complex(h) if np.ndim(h) == 0 else h


def noise_psd(params: ChannelParams, table: AbsorptionTable, pulse_psd_at_f, f):
    """Molecular absorption noise PSD (W/Hz): background plus pulse-induced.

    The background term uses the saturated emissivity (the path-length limit),
    which is 1 wherever ``k(f) > 0`` and 0 in a transparent medium.
    """
    k = np.asarray(absorption_at(table, f))
    s_p = np.asarray(pulse_psd_at_f, dtype=float)
    if np.any(s_p < 0):
        raise ConfigError("pulse PSD must be >= 0")
    aperture = (params.c0 / (math.sqrt(4 * math.pi) * params.f_c)) ** 2
    background = BOLTZMANN * params.T0 * np.where(k > 0, 1.0, 0.0) * aperture
    emissivity = -np.expm1(-k * params.d_r)
    self_induced = s_p * emissivity * params.spreading_gain**2
    out = background + self_induced
    return float(out) if out.ndim == 0 else out


def cross_term_factor(k, d_r: float, f_c: float, c0: float = SPEED_OF_LIGHT):
    """Magnitude factor of the signal-noise cross term in the covariance.

    ``sqrt(1 - exp(-x)) / exp(0.5 x) * (c0 / (4 pi d_r f_c))**2`` with
    ``x = k d_r``; small values justify dropping the cross terms.
    """
    x = np.asarray(k, dtype=float) * d_r
    return np.sqrt(-np.expm1(-x)) * np.exp(-0.5 * x) * (c0 / (4 * math.pi * d_r * f_c)) ** 2
