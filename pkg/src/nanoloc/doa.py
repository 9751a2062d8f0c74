"""Incoherent MUSIC (IMUSIC) direction-of-arrival estimation.

Narrowband MUSIC pseudo-spectra are formed independently on every frequency
bin from that bin's sample covariance, then summed over bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import UlaConfig, steering_matrix
from .errors import ConfigError, ContractError, DegenerateInputError

DEFAULT_GRID_STEP = 0.05  # degrees
DENOMINATOR_FLOOR = 1e-12
# covariances this small have lost precision to subnormal arithmetic
_EMPTY_BIN_SCALE = np.finfo(float).tiny * 2.0**53


@dataclass(frozen=True)
class EigPair:
    """Eigenvalues in descending order with matching unit-norm eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class ImusicSpectrum:
    grid: np.ndarray  # degrees
    values: np.ndarray


def angle_grid(step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    """Angles ``-90 + i*step`` strictly inside (-90, 90) degrees."""
    if not 0 < step < 90:
        raise ConfigError(f"grid step must be in (0, 90) degrees, got {step!r}")
    count = int(np.ceil(180.0 / step - 1e-9))
    grid = np.round(-90.0 + step * np.arange(1, count), 10)
    return grid[grid < 90.0]


def sample_covariance(Y: np.ndarray) -> np.ndarray:
    """``(1/K) Y Y^H`` for an ``(N, K)`` matrix, or per bin for ``(L, N, K)``."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    K = Y.shape[-1]
    if K < 1:
        raise ConfigError("need at least one snapshot")
    return Y @ np.conj(np.swapaxes(Y, -1, -2)) / K


def _check_hermitian(R: np.ndarray, tol: float = 1e-8) -> None:
    scale = max(np.max(np.abs(R)), np.finfo(float).tiny)
    err = np.max(np.abs(R - np.conj(np.swapaxes(R, -1, -2))))
    if err > tol * scale:
        raise ContractError(f"matrix is not Hermitian (relative asymmetry {err / scale:.3g})")


def _order_columns(w: np.ndarray, V: np.ndarray):
    # descending eigenvalue; exact ties by lexicographic phase-normalized vector
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    i = 0
    n = w.size
    while i < n:
        j = i + 1
        while j < n and w[j] == w[i]:
            j += 1
        if j - i > 1:
            block = V[:, i:j]
            keys = [tuple(np.round(np.r_[v.real, v.imag], 12)) for v in _phase_normalize(block).T]
            sub = sorted(range(j - i), key=lambda c: keys[c])
            V[:, i:j] = block[:, sub]
        i = j
    return w, V


def _phase_normalize(V: np.ndarray) -> np.ndarray:
    # rotate each column so its largest-magnitude entry is real positive
    idx = np.argmax(np.abs(V), axis=0)
    pivot = V[idx, np.arange(V.shape[1])]
    return V * (np.abs(pivot) / np.where(pivot == 0, 1, pivot))


def hermitian_eig(R: np.ndarray) -> EigPair:
    """Full eigendecomposition of a Hermitian matrix with deterministic ordering.

    Raises:
        ContractError: If ``R`` deviates from Hermitian by more than 1e-8 relative.
    """
    R = np.asarray(R, dtype=complex)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {R.shape}")
    _check_hermitian(R)
    w, V = np.linalg.eigh(0.5 * (R + R.conj().T))
    w, V = _order_columns(w, V)
    return EigPair(w, V)


def noise_subspace(eig: EigPair, num_sources: int = 1) -> np.ndarray:
    """Eigenvectors of the ``N - num_sources`` smallest eigenvalues."""
    N = eig.eigenvectors.shape[0]
    if not 1 <= num_sources < N:
        raise ConfigError(f"num_sources must be in [1, {N - 1}], got {num_sources!r}")
    return eig.eigenvectors[:, num_sources:]


def _batched_subspaces(covariances: np.ndarray, num_sources: int):
    """Signal and noise eigenvector blocks for a stack of covariances."""
    _check_hermitian(covariances)
    w, V = np.linalg.eigh(0.5 * (covariances + np.conj(np.swapaxes(covariances, -1, -2))))
    # eigh sorts ascending; only exact eigenvalue ties need the deterministic reorder
    V = V[:, :, ::-1].copy()
    ties = np.any(np.diff(w, axis=1) == 0, axis=1)
    for b in np.flatnonzero(ties):
        V[b] = hermitian_eig(covariances[b]).eigenvectors
    return V[:, :, :num_sources], V[:, :, num_sources:]


_steering_cache: dict = {}


def _cached_steering(ula: UlaConfig, grid: np.ndarray) -> np.ndarray:
    key = (ula.N, ula.d_s, ula.bins.tobytes(), grid.tobytes())
    A = _steering_cache.get(key)
    if A is None:
        if len(_steering_cache) >= 8:
            _steering_cache.clear()
        A = steering_matrix(ula.bins, grid, ula.N, ula.d_s)
        A.flags.writeable = False
        _steering_cache[key] = A
    return A


def imusic_spectrum(covariances, ula: UlaConfig, grid=None, num_sources: int = 1,
                    bin_mask=None) -> ImusicSpectrum:
    """Sum over bins of ``a^H a / (a^H E_n E_n^H a)``.

    Args:
        covariances: ``(L, N, N)`` per-bin covariance matrices matching ``ula.bins``.
        ula: Receiving array.
        grid: Candidate angles in degrees, strictly increasing inside (-90, 90).
        num_sources: Signal subspace dimension.
        bin_mask: Optional boolean ``(L,)`` selecting bins to include.

    Bins whose covariance is numerically zero carry no direction; they add
    the angle-independent value ``N / (N - num_sources)`` that an exactly
    zero matrix yields. Denominators are floored at 1e-12.
    """
    grid = angle_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= -90 or grid[-1] >= 90:
        raise ConfigError("angle grid must be nonempty, strictly increasing, inside (-90, 90)")
    R = np.asarray(covariances, dtype=complex)
    if R.shape != (ula.L, ula.N, ula.N):
        raise ConfigError(f"expected covariances of shape {(ula.L, ula.N, ula.N)}, got {R.shape}")

    selected = np.ones(ula.L, dtype=bool) if bin_mask is None else np.asarray(bin_mask, dtype=bool)
    if not selected.any():
        raise DegenerateInputError("bin mask excludes every frequency bin")
    numeric = np.max(np.abs(R), axis=(1, 2)) > _EMPTY_BIN_SCALE
    empty = np.count_nonzero(selected & ~numeric)
    values = np.full(grid.size, empty * ula.N / (ula.N - num_sources))
    idx = np.flatnonzero(selected & numeric)
    if idx.size:
        Es, En = _batched_subspaces(R[idx], num_sources)
        A = _cached_steering(ula, grid)  # (L, N, G)
        if idx.size < ula.L:
            A = A[idx]
        if Es.shape[2] < En.shape[2]:
            # a^H E_n E_n^H a = |a|^2 - |E_s^H a|^2 with |a|^2 = N; fewer products
            proj = np.conj(np.swapaxes(Es, 1, 2)) @ A
            denom = ula.N - np.sum(proj.real**2 + proj.imag**2, axis=1)
        else:
            proj = np.conj(np.swapaxes(En, 1, 2)) @ A
            denom = np.sum(proj.real**2 + proj.imag**2, axis=1)
        # fixed-order reduction over bins keeps results order-independent
        values = values + np.sum(ula.N / np.maximum(denom, DENOMINATOR_FLOOR), axis=0)
    return ImusicSpectrum(grid, values)


def estimate_doa(spectrum: ImusicSpectrum, refine: bool = False) -> float:
    """Grid angle of the spectrum maximum (first one on ties).

    With ``refine`` a parabola through the peak and its two neighbours
    locates the maximum between grid points.
    """
    values = spectrum.values
    i = int(np.argmax(values))
    theta = float(spectrum.grid[i])
    if refine and 0 < i < values.size - 1:
        y0, y1, y2 = values[i - 1], values[i], values[i + 1]
        curv = y0 - 2 * y1 + y2
        if curv < 0:
            offset = 0.5 * (y0 - y2) / curv
            g = spectrum.grid
            theta += offset * (g[i + 1] - g[i - 1]) / 2
    return float(theta)


def write_spectrum_csv(spectrum: ImusicSpectrum, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("theta_deg,p_imusic\n")
        for t, p in zip(spectrum.grid.tolist(), spectrum.values.tolist()):
            fh.write(f"{t!r},{p!r}\n")
