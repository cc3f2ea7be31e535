"""Uniform grids, time ladders and Crank-Nicolson discretization constants.

Conventions (natural units, hbar = 1, 2m = 1):

* The computational box is the cube ``|x_i| <= a``. Each axis carries
  ``N + 1`` physical nodes ``x_p = -a + p h`` for ``p = 0..N`` with
  ``h = 2a/N``.
* Solvers retain nodes ``p = 1..N`` as unknowns per axis; ``p = 0`` and the
  exterior node ``p = N+1`` act as ghost layers eliminated through the
  transparent-boundary closure rows.
* ``alpha = 2i h^2 / tau`` is the dimensionless Crank-Nicolson parameter;
  the scheme's diagonal is ``C = 2 d + h^2 U - alpha`` in ``d`` dimensions
  and the explicit mirror uses ``C~ = 2 d + h^2 U + alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class GridSpec:
    """Cubic spatial grid: half-width ``a``, ``N + 1`` nodes per axis."""

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.half_width <= 0:
            raise ConfigurationError("half_width must be positive")
        if self.points_per_axis < 8:
            raise ConfigurationError("points_per_axis must be >= 8")

    @property
    def h(self) -> float:
        """Spatial step, always derived as 2a/N."""
        return 2.0 * self.half_width / self.points_per_axis

    def node_coords(self) -> np.ndarray:
        """Physical node coordinates x_p = -a + p h for p = 0..N."""
        p = np.arange(self.points_per_axis + 1)
        return -self.half_width + p * self.h

    def retained_coords(self) -> np.ndarray:
        """Coordinates of the retained unknown nodes p = 1..N."""
        return self.node_coords()[1:]


@dataclass(frozen=True)
class TimeSpec:
    """Uniform time ladder t_n = n tau for n = 0..n_steps."""

    tau: float
    n_steps: int

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigurationError("tau must be positive")
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")

    def times(self) -> np.ndarray:
        return self.tau * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class DiscretizationConstants:
    """Scalar constants of the Crank-Nicolson scheme on a given grid."""

    alpha: complex
    B: complex
    B_tilde: complex
    C: complex
    C_tilde: complex
    dim: int

    @property
    def diag_free(self) -> complex:
        """Implicit diagonal away from the potential support (U = 0)."""
        return 2 * self.dim - self.alpha


def make_constants(grid: GridSpec, time: TimeSpec,
                   potential_at_node: complex = 0.0) -> DiscretizationConstants:
    """Constants alpha, B, B~ and the d-dimensional diagonal C, C~.

    ``C = 2 d + h^2 U - alpha`` evaluated with ``U = potential_at_node``.
    """
    h = grid.h
    tau = time.tau
    if h <= 0 or tau <= 0:
        raise ConfigurationError("h and tau must be positive")
    alpha = 2j * h * h / tau
    hU = h * h * potential_at_node
    return DiscretizationConstants(
        alpha=alpha,
        B=2.0 - alpha,
        B_tilde=2.0 + alpha,
        C=2 * grid.dim + hU - alpha,
        C_tilde=2 * grid.dim + hU + alpha,
        dim=grid.dim,
    )
