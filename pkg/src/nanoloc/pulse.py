"""Gaussian-derivative pulses and the center-frequency event alphabet.

The n-th time derivative of a Gaussian with standard deviation ``sigma`` has
spectrum ``a_n (j 2 pi f)^n exp(-0.5 (2 pi sigma f)^2)`` whose magnitude peaks
at ``sqrt(n) / (2 pi sigma)``. Events are encoded by picking ``sigma`` so that
each event gets its own center frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import gammaln

from .bins import frequency_bins
from .errors import AlphabetError, ConfigError


@dataclass(frozen=True)
class PulseSpec:
    """One event symbol.

    Attributes:
        n: Derivative order.
        sigma: Gaussian standard deviation in seconds.
        a_n: Spectrum normalization; ``|P_n(f)|^2`` is an energy spectral
            density in J/Hz.
        energy: Pulse energy in J.
    """

    n: int
    sigma: float
    a_n: float
    energy: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"derivative order must be a positive integer, got {self.n!r}")
        if not self.sigma > 0:
            raise ConfigError(f"sigma must be > 0, got {self.sigma!r}")
        if not self.a_n > 0:
            raise ConfigError(f"a_n must be > 0, got {self.a_n!r}")
        if not self.energy > 0:
            raise ConfigError(f"energy must be > 0, got {self.energy!r}")

    @property
    def center_frequency(self) -> float:
        return center_frequency(self.n, self.sigma)

    @property
    def duration(self) -> float:
        return pulse_duration(self.sigma)


@dataclass(frozen=True)
class EventAlphabet:
    """Ordered ``(event_id, PulseSpec)`` pairs with increasing center frequency."""

    symbols: tuple

    def __post_init__(self):
        if not self.symbols:
            raise AlphabetError("alphabet must contain at least one symbol")
        fcs = [spec.center_frequency for _, spec in self.symbols]
        if any(b <= a for a, b in zip(fcs, fcs[1:])):
            raise AlphabetError("alphabet center frequencies must be strictly increasing")

    def __len__(self):
        return len(self.symbols)

    @property
    def event_ids(self) -> list[int]:
        return [event_id for event_id, _ in self.symbols]

    @property
    def center_frequencies(self) -> np.ndarray:
        return np.array([spec.center_frequency for _, spec in self.symbols])

    def spec(self, event_id: int) -> PulseSpec:
        for eid, spec in self.symbols:
            if eid == event_id:
                return spec
        raise KeyError(f"unknown event id {event_id!r}")

    def index(self, event_id: int) -> int:
        return self.event_ids.index(event_id)


def center_frequency(n: int, sigma: float) -> float:
    return math.sqrt(n) / (2 * math.pi * sigma)


def sigma_for_center(n: int, f_c: float) -> float:
    if not f_c > 0:
        raise ConfigError(f"center frequency must be > 0, got {f_c!r}")
    return math.sqrt(n) / (2 * math.pi * f_c)


def pulse_duration(sigma: float) -> float:
    """Duration holding 99.99% of the pulse energy, taken as ``10 sigma``."""
    return 10.0 * sigma


def _log_unit_magnitude(n: int, sigma: float, f: np.ndarray) -> np.ndarray:
    # log |P_n(f)| for a_n = 1; evaluated in logs so high orders do not overflow
    with np.errstate(divide="ignore"):
        return n * np.log(2 * np.pi * f) - 0.5 * (2 * np.pi * sigma * f) ** 2


def pulse_spectrum(spec: PulseSpec, f):
    """Complex spectrum ``P_n(f)`` at ``f >= 0`` (scalar or array)."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr < 0):
        raise ConfigError("pulse spectrum is defined for f >= 0")
    mag = np.exp(math.log(spec.a_n) + _log_unit_magnitude(spec.n, spec.sigma, f_arr))
    out = (1j ** (spec.n % 4)) * mag
    return complex(out) if np.ndim(out) == 0 else out


def pulse_psd(spec: PulseSpec, f, delta_T: float):
    """Average PSD (W/Hz) of one pulse spread over an observation window ``delta_T``."""
    return np.abs(pulse_spectrum(spec, f)) ** 2 / delta_T


def normalize_energy(n: int, sigma: float, target_energy: float, band, bin_width: float) -> float:
    """Normalization ``a_n`` giving ``2 * sum_b |P_n(f_b)|^2 * df == target_energy``.

    The sum runs over the receiver bins of ``band`` spaced by ``bin_width``;
    the factor 2 accounts for the negative frequencies of a real pulse.
    """
    if not target_energy > 0:
        raise ConfigError(f"target energy must be > 0, got {target_energy!r}")
    if not bin_width > 0:
        raise ConfigError(f"bin width must be > 0, got {bin_width!r}")
    _, bins = frequency_bins(band[0], band[1], 1.0 / bin_width)
    log_mag = _log_unit_magnitude(n, sigma, bins)
    peak = log_mag.max()
    if not np.isfinite(peak):
        raise ConfigError("pulse has no energy on the bin grid")
    # sum exp(2 log_mag) scaled by the peak to stay in range
    scaled = np.sum(np.exp(2 * (log_mag - peak)))
    log_a = 0.5 * (math.log(target_energy) - math.log(2 * bin_width * scaled)) - peak
    return math.exp(log_a)


def make_pulse(n: int, f_c: float, energy: float, band, bin_width: float) -> PulseSpec:
    sigma = sigma_for_center(n, f_c)
    return PulseSpec(n, sigma, normalize_energy(n, sigma, energy, band, bin_width), energy)


def half_power_band(n: int, sigma: float) -> tuple[float, float]:
    """Frequencies either side of the center where ``|P_n|^2`` drops to half."""
    f_c = center_frequency(n, sigma)
    w = (2 * math.pi * sigma) ** 2

    def excess(f):
        return 2 * n * math.log(f / f_c) - w * (f * f - f_c * f_c) + math.log(2.0)

    f_l = bisect(excess, f_c * 1e-6, f_c, xtol=1e-300, rtol=1e-12)
    f_h = bisect(excess, f_c, f_c * 10.0, xtol=1e-300, rtol=1e-12)
    return f_l, f_h


def lossless_centroid(n: int, sigma: float) -> float:
    """Closed-form spectral centroid of ``|P_n|^2`` over ``(0, inf)``.

    ``Gamma(n + 1) / (Gamma(n + 1/2) * 2 pi sigma)``, slightly above the
    peak frequency ``sqrt(n) / (2 pi sigma)``.
    """
    return math.exp(gammaln(n + 1) - gammaln(n + 0.5)) / (2 * math.pi * sigma)


def build_alphabet(n: int, center_frequencies, energy: float, band, bin_width: float) -> EventAlphabet:
    """Event alphabet with ids ``1..M`` in order of increasing center frequency.

    Raises:
        AlphabetError: If consecutive half-power bands overlap.
    """
    centers = [float(f) for f in center_frequencies]
    if not centers:
        raise AlphabetError("alphabet must contain at least one center frequency")
    if any(b <= a for a, b in zip(centers, centers[1:])):
        raise AlphabetError("center frequencies must be strictly increasing")
    specs = [make_pulse(n, f_c, energy, band, bin_width) for f_c in centers]
    edges = [half_power_band(n, s.sigma) for s in specs]
    for i in range(len(specs) - 1):
        if edges[i][1] > edges[i + 1][0]:
            raise AlphabetError(
                f"half-power bands of events {i + 1} ({centers[i] / 1e12:g} THz, "
                f"up to {edges[i][1] / 1e12:.3f} THz) and {i + 2} ({centers[i + 1] / 1e12:g} THz, "
                f"from {edges[i + 1][0] / 1e12:.3f} THz) overlap"
            )
    return EventAlphabet(tuple((i + 1, s) for i, s in enumerate(specs)))
