"""Receiver frequency-bin layout shared by the pulse and array models."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError


def frequency_bins(f_l: float, f_h: float, delta_T: float):
    """Bins ``f_l + b / delta_T`` for ``b = 0 .. L-1`` with ``L = floor(B dT) + 1``.

    ``B = f_h - f_l`` is the receiver bandwidth. Returns ``(L, bins)``.
    """
    if not (f_h > f_l > 0):
        raise ConfigError(f"need f_h > f_l > 0, got f_l={f_l!r}, f_h={f_h!r}")
    if not delta_T > 0:
        raise ConfigError(f"observation window must be > 0, got {delta_T!r}")
    span = (f_h - f_l) * delta_T
    # guard against e.g. 8e12 * 9e-12 evaluating to 71.99999999999999
    L = int(math.floor(span + 1e-9)) + 1
    bins = f_l + np.arange(L) / delta_T
    bins = np.minimum(bins, f_h)
    return L, bins
