"""Pulse PSD recovery, spectral centroid and nearest-center event decision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import UlaConfig, steering_matrix
from .errors import ConfigError, DegenerateInputError
from .pulse import EventAlphabet

_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class EstimatedPsd:
    bins: np.ndarray  # Hz
    values: np.ndarray  # non-negative, in covariance units


def estimate_psd(covariances, ula: UlaConfig, theta_hat: float) -> EstimatedPsd:
    """Project each bin's covariance onto the steering vector at ``theta_hat``.

    With unit-modulus steering entries the pseudoinverse is ``a^H / N``, so
    ``S(f_b) = a^H R a / N^2``. Negative round-off is clamped to zero.
    """
    R = np.asarray(covariances, dtype=complex)
    if not -90.0 < theta_hat < 90.0:
        raise ConfigError(f"theta_hat must lie in (-90, 90) degrees, got {theta_hat!r}")
    a = steering_matrix(ula.bins, [theta_hat], ula.N, ula.d_s)[:, :, 0]  # (L, N)
    quad = np.einsum("bi,bij,bj->b", a.conj(), R, a)
    values = np.maximum(quad.real, 0.0) / ula.N**2
    return EstimatedPsd(np.asarray(ula.bins, dtype=float), values)


def spectral_centroid(psd: EstimatedPsd) -> float:
    """Power-weighted mean frequency ``sum f S / sum S``.

    Raises:
        DegenerateInputError: If the PSD has no positive mass.
    """
    values = np.asarray(psd.values, dtype=float)
    total = values.sum()
    if not total > 0:
        raise DegenerateInputError("spectral centroid undefined for an all-zero PSD")
    return float(np.dot(psd.bins, values) / total)


def classify(f_cen: float, alphabet: EventAlphabet) -> int:
    """Event whose center frequency is nearest ``f_cen``; ties go to the lower one.

    Distances equal to within 1e-9 relative count as ties, so round-off in
    the derived center frequencies cannot break an exact midpoint.
    """
    distance = np.abs(f_cen - alphabet.center_frequencies)
    nearest = distance.min()
    tied = np.flatnonzero(distance <= nearest + _TIE_RTOL * max(nearest, abs(f_cen)))
    return alphabet.event_ids[int(tied[0])]


def write_psd_csv(psd: EstimatedPsd, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("bin_hz,s_hat\n")
        for f, s in zip(np.asarray(psd.bins).tolist(), np.asarray(psd.values).tolist()):
            fh.write(f"{f!r},{s!r}\n")
