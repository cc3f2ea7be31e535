"""Helpers for complex amplitude fields stored as dense numpy arrays.

Fields live on the retained node cube ``{1..N}^d`` unless noted otherwise.
All entries must stay finite; NaN/Inf is treated as a hard error.
"""

from __future__ import annotations

import numpy as np

from .errors import StateError


def norm_sq(field: np.ndarray) -> float:
    """Unweighted node sum of |psi|^2 (the convention of the V metric)."""
    return float(np.sum(np.abs(field) ** 2))


def max_abs(field: np.ndarray) -> float:
    return float(np.max(np.abs(field))) if field.size else 0.0


def require_finite(field: np.ndarray, context: str = "field") -> None:
    if not np.all(np.isfinite(field.view(float))):
        raise StateError(f"{context} contains NaN or Inf")


def boundary_amplitude_ratio(field: np.ndarray) -> float:
    """max |psi| over the outermost retained shell divided by max |psi|.

    Used to validate that initial data effectively vanishes at the boundary.
    Returns 0 for an identically zero field.
    """
    peak = max_abs(field)
    if peak == 0.0:
        return 0.0
    mask = np.zeros(field.shape, dtype=bool)
    for axis in range(field.ndim):
        sl_lo = [slice(None)] * field.ndim
        sl_hi = [slice(None)] * field.ndim
        sl_lo[axis] = 0
        sl_hi[axis] = -1
        mask[tuple(sl_lo)] = True
        mask[tuple(sl_hi)] = True
    return float(np.max(np.abs(field[mask]))) / peak


def half_space_norms(field: np.ndarray, coords: np.ndarray, axis: int = 0):
    """Split the node sum of |psi|^2 into coord < 0 and coord > 0 parts.

    Nodes exactly at zero contribute half to each side.
    """
    dens = np.abs(field) ** 2
    shape = [1] * field.ndim
    shape[axis] = -1
    c = coords.reshape(shape)
    neg = float(np.sum(dens * (c < 0)))
    pos = float(np.sum(dens * (c > 0)))
    zero = float(np.sum(dens * (c == 0)))
    return neg + 0.5 * zero, pos + 0.5 * zero
