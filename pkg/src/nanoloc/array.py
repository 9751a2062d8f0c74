"""Uniform linear array geometry and frequency-domain snapshot simulation.

A single pulse observed over a window ``delta_T`` is represented by its
Fourier-series coefficients on the bins ``f_b = f_l + b / delta_T``. For bin
``b`` the ``N x K`` snapshot matrix is

    Y(f_b) = H(f_b) a(f_b, theta) c_b 1_{1xK} + V(f_b)

with pulse coefficient ``c_b = P_n(f_b) / delta_T`` and i.i.d. circular
Gaussian noise of variance ``sigma^2(f_b) = S_N(f_b) / delta_T`` per entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bins import frequency_bins
from .channel import (
    DEFAULT_TEMPERATURE,
    SPEED_OF_LIGHT,
    AbsorptionTable,
    ChannelParams,
    channel_response,
    noise_psd,
)
from .errors import ConfigError
from .pulse import PulseSpec, pulse_psd, pulse_spectrum

# published spacings (15 um, 75 um) are lambda_min / 2 rounded with c = 3e8
_ALIASING_RTOL = 1e-3


def half_wavelength_spacing(f_h: float) -> float:
    return SPEED_OF_LIGHT / (2 * f_h)


@dataclass(frozen=True)
class UlaConfig:
    """Uniform linear array with its receive band and bin layout.

    ``d_s`` defaults to half the wavelength at ``f_h``. ``bins_override``
    forces a bin count; the bins are then spread evenly over ``[f_l, f_h]``.
    """

    N: int
    f_l: float
    f_h: float
    delta_T: float
    d_s: float | None = None
    bins_override: int | None = None
    L: int = field(init=False)
    bins: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"ULA needs N >= 2 elements, got {self.N!r}")
        if self.d_s is None:
            object.__setattr__(self, "d_s", half_wavelength_spacing(self.f_h))
        if not self.d_s > 0:
            raise ConfigError(f"element spacing must be > 0, got {self.d_s!r}")
        limit = half_wavelength_spacing(self.f_h)
        if self.d_s > limit * (1 + _ALIASING_RTOL):
            raise ConfigError(
                f"spacing {self.d_s * 1e6:.3f} um exceeds half wavelength {limit * 1e6:.3f} um "
                f"at f_h={self.f_h / 1e12:g} THz (spatial aliasing)"
            )
        L, bins = frequency_bins(self.f_l, self.f_h, self.delta_T)
        if self.bins_override is not None:
            L = int(self.bins_override)
            if L < 2:
                raise ConfigError(f"bins_override must be >= 2, got {self.bins_override!r}")
            bins = np.linspace(self.f_l, self.f_h, L)
        bins.flags.writeable = False
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "bins", bins)

    @property
    def bin_width(self) -> float:
        return 1.0 / self.delta_T

    def contains(self, f: float) -> bool:
        return self.f_l <= f <= self.f_h


@dataclass(frozen=True)
class SourceTruth:
    theta: float  # degrees from broadside
    d_r: float
    event_id: int = 0

    def __post_init__(self):
        if not -90.0 < self.theta < 90.0:
            raise ConfigError(f"arrival angle must lie in (-90, 90) degrees, got {self.theta!r}")
        if not self.d_r > 0:
            raise ConfigError(f"path length must be > 0, got {self.d_r!r}")


@dataclass(frozen=True)
class Snapshots:
    """Per-bin snapshot matrices stacked as ``data[b]`` of shape ``(N, K)``.

    ``noise_var`` and ``signal_power`` hold the model's per-element noise
    variance and noiseless signal power for each bin.
    """

    bins: np.ndarray
    data: np.ndarray
    noise_var: np.ndarray
    signal_power: np.ndarray

    @property
    def L(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, b):
        return self.data[b]


def steering_vector(f: float, theta: float, N: int, d_s: float) -> np.ndarray:
    """``exp(-j 2 pi f i d_s sin(theta) / c0)`` for elements ``i = 0..N-1``."""
    if not -90.0 < theta < 90.0:
        raise ConfigError(f"arrival angle must lie in (-90, 90) degrees, got {theta!r}")
    step = 2 * np.pi * f * d_s * math.sin(math.radians(theta)) / SPEED_OF_LIGHT
    return np.exp(-1j * step * np.arange(N))


def steering_matrix(bins, grid_deg, N: int, d_s: float) -> np.ndarray:
    """Steering vectors for every bin and angle, shape ``(L, N, G)``."""
    bins = np.asarray(bins, dtype=float)
    sin_t = np.sin(np.radians(np.asarray(grid_deg, dtype=float)))
    step = 2 * np.pi * d_s / SPEED_OF_LIGHT * bins[:, None] * sin_t[None, :]  # (L, G)
    return np.exp(-1j * step[:, None, :] * np.arange(N)[None, :, None])


def noise_variance_per_bin(params: ChannelParams, table: AbsorptionTable, spec: PulseSpec,
                           f_b, delta_f: float, delta_T: float | None = None):
    """Noise power in a bin of width ``delta_f``: ``S_N(f_b) * delta_f``.

    The pulse-induced part of ``S_N`` uses the pulse PSD over the observation
    window ``delta_T`` (defaults to ``1 / delta_f``).
    """
    delta_T = 1.0 / delta_f if delta_T is None else delta_T
    s_p = pulse_psd(spec, f_b, delta_T)
    return noise_psd(params, table, s_p, f_b) * delta_f


def theoretical_covariance(signal_coeff: complex, a: np.ndarray, noise_var: float) -> np.ndarray:
    """Model covariance ``|s|^2 a a^H + sigma^2 I`` for a received coefficient ``s``."""
    a = np.asarray(a, dtype=complex)
    return abs(signal_coeff) ** 2 * np.outer(a, a.conj()) + noise_var * np.eye(a.size)


def simulate_snapshot(ula: UlaConfig, spec: PulseSpec, medium: AbsorptionTable, truth: SourceTruth,
                      K: int = 1, rng_seed=None, T0: float = DEFAULT_TEMPERATURE) -> Snapshots:
    """Draw the received snapshots for one pulse.

    Args:
        ula: Receiving array.
        spec: Transmitted pulse.
        medium: Absorption table covering the ULA band.
        truth: Arrival angle and path length.
        K: Number of frequency snapshots (one per observation window).
        rng_seed: Anything accepted by ``numpy.random.default_rng``.
        T0: Ambient temperature in K.

    Raises:
        ConfigError: If the pulse is longer than the observation window.
    """
    if spec.duration > ula.delta_T:
        raise ConfigError(
            f"pulse does not fit observation window: T_p={spec.duration * 1e12:.3f} ps > "
            f"delta_T={ula.delta_T * 1e12:.3f} ps"
        )
    if K < 1:
        raise ConfigError(f"snapshot count must be >= 1, got {K!r}")
    params = ChannelParams(truth.d_r, spec.center_frequency, T0)
    bins = ula.bins
    h = channel_response(params, medium, bins)
    coeff = h * pulse_spectrum(spec, bins) / ula.delta_T  # (L,)
    a = steering_matrix(bins, [truth.theta], ula.N, ula.d_s)[:, :, 0]  # (L, N)
    clean = coeff[:, None, None] * a[:, :, None] * np.ones((1, 1, K))
    noise_var = np.asarray(noise_variance_per_bin(params, medium, spec, bins, ula.bin_width, ula.delta_T))

    rng = np.random.default_rng(rng_seed)
    shape = (ula.L, ula.N, K)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    v *= np.sqrt(noise_var / 2)[:, None, None]
    return Snapshots(bins, clean + v, noise_var, np.abs(coeff) ** 2)


def write_snapshots_csv(snapshots: Snapshots, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bin_hz,element,snapshot,re,im\n")
        L, N, K = snapshots.data.shape
        for b in range(L):
            for i in range(N):
                for k in range(K):
                    z = snapshots.data[b, i, k]
                    fh.write(f"{float(snapshots.bins[b])!r},{i},{k},{float(z.real)!r},{float(z.imag)!r}\n")
