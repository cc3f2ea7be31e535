"""Boundary closure rows: fully discrete TBC, discretized Baskakov-Popov,
and a hard reflecting wall for control runs.

Row convention at the new time level m = n + 1 (ghost, boundary, inner):

* upper side:  psi_ghost + c * psi_bnd - psi_in = R_up
* lower side: -psi_ghost - c * psi_bnd + psi_in = R_low

with ``c = 2 beta^0`` for the fully discrete kernel and
``c = 2h / sqrt(pi i tau)`` for the discretized Baskakov-Popov condition.
Both right-hand sides are linear in the (known) value sequence
``u_0 .. u_n``: ``R_up = sum_l w_l u_l`` and ``R_low = -R_up`` for the same
weights, so solvers only ever need ``history_weights(m)``.

For a plain 1D problem the values u_l are the boundary-node trace history;
in the multidimensional hierarchy they are the lower-dimensional auxiliary
problems born at step l evaluated at the current level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateError
from .kernels import PlaneWaveExterior, TbcCoefficients


class BoundaryHistory:
    """Append-only record of a boundary node's trace values psi^0..psi^n.

    Single writer (the stepper); concurrent readers are safe.
    """

    def __init__(self, capacity: int = 64):
        self._data = np.zeros(max(capacity, 1), dtype=complex)
        self._n = 0

    def append(self, value: complex) -> None:
        if self._n == len(self._data):
            grown = np.zeros(2 * len(self._data), dtype=complex)
            grown[: self._n] = self._data
            self._data = grown
        self._data[self._n] = value
        self._n += 1

    def values(self) -> np.ndarray:
        return self._data[: self._n]

    def __len__(self) -> int:
        return self._n


@dataclass(frozen=True)
class ClosureRow:
    """One assembled boundary row (coefficients at the new time level)."""

    c_ghost: complex
    c_bnd: complex
    c_in: complex
    rhs: complex


# ---------------------------------------------------------------- kernels

class DiscreteTbcClosure:
    """Fully discrete transparent closure built on TbcCoefficients."""

    eliminates_ghost = True

    def __init__(self, coeffs: TbcCoefficients):
        self.coeffs = coeffs

    @property
    def c_shift(self) -> complex:
        return 2.0 * self.coeffs.beta0

    def history_weights(self, m: int) -> np.ndarray:
        """w_l = -2 beta^{m-l} for l = 0..m-1 (upper side)."""
        if m - 1 > self.coeffs.n_max:
            raise StateError("TbcCoefficients too short for this step")
        return -2.0 * self.coeffs.beta[m:0:-1]


class BaskakovPopovClosure:
    """Piecewise-linear Abel quadrature + backward time difference.

    Discretizes d psi/dx = -(1/sqrt(pi i)) d/dt int_0^t psi(z)/sqrt(t-z) dz
    (upper sign) with I^m = 2 sqrt(tau) sum_j (u_j+u_{j+1})/2
    (sqrt(m-j) - sqrt(m-1-j)) and (I^{m} - I^{m-1})/tau.
    """

    eliminates_ghost = True

    def __init__(self, tau: float, h: float, n_max: int):
        self.tau = tau
        self.h = h
        self._sqrt = np.sqrt(np.arange(n_max + 3, dtype=float))
        self._D = 2.0 * h / (np.sqrt(np.pi * 1j) * tau)

    @property
    def c_shift(self) -> complex:
        return self._D * np.sqrt(self.tau)

    def history_weights(self, m: int) -> np.ndarray:
        n = m - 1
        if n + 2 >= len(self._sqrt):
            raise StateError("BaskakovPopovClosure table too short for this step")
        s = self._sqrt
        a = np.zeros(m)
        b = np.zeros(m)
        if n >= 1:
            j = np.arange(n)
            cj = s[m - j] - s[m - 1 - j]     # completed pairs of I^m
            np.add.at(a, j, 0.5 * cj)
            np.add.at(a, j + 1, 0.5 * cj)
            cjn = s[n - j] - s[n - 1 - j]    # pairs of I^{m-1}
            np.add.at(b, j, 0.5 * cjn)
            np.add.at(b, j + 1, 0.5 * cjn)
        a[n] += 0.5                          # known half of the split pair
        return -self._D * 2.0 * np.sqrt(self.tau) * (a - b)


class HardWallClosure:
    """Reflecting wall: the ghost layer is pinned to zero."""

    eliminates_ghost = False
    c_shift = 0.0 + 0.0j

    def history_weights(self, m: int) -> np.ndarray:
        return np.zeros(m, dtype=complex)


ClosureKernel = DiscreteTbcClosure | BaskakovPopovClosure | HardWallClosure


def make_closure(mode: str, coeffs: TbcCoefficients | None = None,
                 tau: float | None = None, h: float | None = None,
                 n_max: int | None = None) -> ClosureKernel:
    if mode == "fully_discrete_tbc":
        if coeffs is None:
            raise ValueError("fully_discrete_tbc needs TbcCoefficients")
        return DiscreteTbcClosure(coeffs)
    if mode == "discretized_bp":
        if tau is None or h is None or n_max is None:
            raise ValueError("discretized_bp needs tau, h and n_max")
        return BaskakovPopovClosure(tau, h, n_max)
    if mode == "hard_wall":
        return HardWallClosure()
    raise ValueError(f"unknown boundary mode {mode!r}")


# ------------------------------------------------- plane-wave source terms

def plane_wave_source(side: str, m: int, coeffs: TbcCoefficients,
                      exterior: PlaneWaveExterior, N: int, h: float,
                      phase_node: int | None = None) -> complex:
    """Source contribution of a unit exterior wave exp(iqx) to R_side.

    ``phase_node`` fixes the node index carried by the phase factor
    ``exp(i q h node)``. ``None`` reproduces the literal published formula
    (node N on both sides); the lower row is only exact for its own
    boundary coordinate, node 1 - the plane-wave exactness test
    discriminates, and the 1D solver passes 1 for the lower side.
    """
    if exterior.amplitude == 0:
        return 0.0
    node = N if phase_node is None else phase_node
    q = exterior.q
    phase = np.exp(1j * q * h * node)
    g = exterior.g
    if m > exterior.n_max or m > coeffs.n_max:
        raise StateError("plane-wave tables too short for this step")
    conv_g = np.dot(coeffs.beta[m::-1], g[: m + 1])
    osc = 2j * phase * np.sin(q * h) * g[m]
    if side == "upper":
        return osc + 2.0 * phase * conv_g
    if side == "lower":
        return osc - 2.0 * phase * conv_g
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


# ----------------------------------------------------------- scalar rows

def assemble_closure_row(side: str, m: int, coeffs: TbcCoefficients,
                         history: BoundaryHistory,
                         exterior: PlaneWaveExterior | None = None,
                         N: int = 0, h: float = 0.0,
                         phase_node: int | None = None) -> ClosureRow:
    """Fully discrete closure row for a single boundary node at step m.

    ``history`` must hold psi^0..psi^{m-1} at that node.
    """
    if len(history) != m:
        raise StateError(f"history has {len(history)} entries, step {m} needs {m}")
    kern = DiscreteTbcClosure(coeffs)
    w = kern.history_weights(m)
    r_up = complex(np.dot(w, history.values()))
    src = 0.0
    if exterior is not None and exterior.amplitude:
        src = plane_wave_source(side, m, coeffs, exterior, N, h, phase_node)
    b0 = coeffs.beta0
    if side == "upper":
        return ClosureRow(1.0, 2.0 * b0, -1.0, r_up + src)
    if side == "lower":
        return ClosureRow(-1.0, -2.0 * b0, 1.0, -r_up + src)
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def bp_discretized_row(side: str, m: int, history: BoundaryHistory,
                       tau: float, h: float) -> ClosureRow:
    """Discretized Baskakov-Popov closure row for a single boundary node."""
    if len(history) != m:
        raise StateError(f"history has {len(history)} entries, step {m} needs {m}")
    kern = BaskakovPopovClosure(tau, h, m + 1)
    w = kern.history_weights(m)
    r_up = complex(np.dot(w, history.values()))
    c = kern.c_shift
    if side == "upper":
        return ClosureRow(1.0, c, -1.0, r_up)
    if side == "lower":
        return ClosureRow(-1.0, -c, 1.0, -r_up)
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def hard_wall_row(side: str) -> ClosureRow:
    """Ghost pinned to zero (comparison runs only)."""
    sign = 1.0 if side == "upper" else -1.0
    return ClosureRow(sign, 0.0, 0.0, 0.0)
