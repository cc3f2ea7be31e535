"""Static potentials with compact support inside the computational box.

The transparent boundary construction requires U to vanish at every
boundary node and outside the box, so every spec is validated against the
grid before a solver accepts it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import GridSpec

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class ZeroPotential:
    kind: str = "zero"


@dataclass(frozen=True)
class SemiSphericalShell:
    """U0 on the half shell r0 < r < r1 (strict) restricted to coord > 0.

    ``half_space_axis`` names the coordinate whose positive half-space
    carries the shell ('x' by default, matching the concave-mirror barrier).
    """

    r0: float
    r1: float
    U0: float
    half_space_axis: str = "x"
    kind: str = "semi_spherical_shell"

    def __post_init__(self):
        if not (0 < self.r0 < self.r1):
            raise ConfigurationError("shell radii must satisfy 0 < r0 < r1")
        if self.half_space_axis not in _AXES:
            raise ConfigurationError(f"unknown axis {self.half_space_axis!r}")


@dataclass(frozen=True)
class TabulatedPotential:
    """Per-node values on the retained cube {1..N}^d."""

    values: np.ndarray
    kind: str = "tabulated"


PotentialSpec = ZeroPotential | SemiSphericalShell | TabulatedPotential


def evaluate_potential(spec: PotentialSpec, x: float, y: float = 0.0,
                       z: float = 0.0) -> float:
    """Pointwise potential value; strict inequalities for the shell."""
    if isinstance(spec, ZeroPotential):
        return 0.0
    if isinstance(spec, SemiSphericalShell):
        r = float(np.sqrt(x * x + y * y + z * z))
        coord = (x, y, z)[_AXES[spec.half_space_axis]]
        if spec.r0 < r < spec.r1 and coord > 0:
            return spec.U0
        return 0.0
    raise ConfigurationError("pointwise evaluation needs an analytic spec")


def sample_on_grid(spec: PotentialSpec, grid: GridSpec) -> np.ndarray:
    """Potential on the retained cube {1..N}^d as a dense real array."""
    shape = (grid.points_per_axis,) * grid.dim
    if isinstance(spec, ZeroPotential):
        return np.zeros(shape)
    if isinstance(spec, TabulatedPotential):
        vals = np.asarray(spec.values, dtype=float)
        if vals.shape != shape:
            raise ConfigurationError(
                f"tabulated potential shape {vals.shape} does not match "
                f"retained grid {shape}")
        return vals
    c = grid.retained_coords()
    axes = np.meshgrid(*([c] * grid.dim), indexing="ij")
    r = np.sqrt(sum(a * a for a in axes))
    coord = axes[_AXES[spec.half_space_axis]] if grid.dim > _AXES[spec.half_space_axis] \
        else np.zeros(shape)
    out = np.zeros(shape)
    out[(spec.r0 < r) & (r < spec.r1) & (coord > 0)] = spec.U0
    return out


def validate_compact_support(spec: PotentialSpec, grid: GridSpec) -> None:
    """Reject potentials that do not vanish on the retained boundary shell."""
    u = sample_on_grid(spec, grid)
    mask = np.zeros(u.shape, dtype=bool)
    for axis in range(u.ndim):
        lo = [slice(None)] * u.ndim
        hi = [slice(None)] * u.ndim
        lo[axis] = 0
        hi[axis] = -1
        mask[tuple(lo)] = True
        mask[tuple(hi)] = True
    worst = float(np.max(np.abs(u[mask]))) if u.ndim else 0.0
    if worst != 0.0:
        raise ConfigurationError(
            f"potential does not vanish on the boundary shell (max |U| = {worst:g})")
