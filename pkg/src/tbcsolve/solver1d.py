"""1D Crank-Nicolson stepper with exact discrete transparent boundaries.

Unknowns are the retained nodes p = 1..N; the ghost nodes p = 0 and
p = N+1 are eliminated analytically through the closure rows and
reconstructed after every solve so the explicit half of the next step can
read them. The tridiagonal system is solved directly (Thomas elimination,
factorized once since the operator is constant).

Supports a nonzero exterior plane wave exp(iqx) (amplitude 1) in the
fully discrete mode; the lower-boundary source phase uses node 1, the
phase that the discrete plane-wave solution satisfies identically (the
published lower-row formula carries the upper node's phase; see
``closure.plane_wave_source``).
"""

from __future__ import annotations

import time as _time

import numpy as np
import scipy.signal

from .closure import make_closure, plane_wave_source
from .errors import ConfigurationError, StateError
from .fields import boundary_amplitude_ratio, norm_sq, require_finite
from .grid import GridSpec, TimeSpec, make_constants
from .kernels import compute_beta, compute_g
from .linalg import StepReport, tbc_tridiag_factor
from .potentials import PotentialSpec, ZeroPotential, sample_on_grid, \
    validate_compact_support

BOUNDARY_AMPLITUDE_LIMIT = 1e-10


class _BlockConvolver:
    """FFT overlap-add accelerator for sum_{l<m} beta^{m-l} u_l.

    Completed blocks of the history are convolved once against the kernel
    and scattered onto all future steps; only the current partial block is
    summed directly. Exactly equivalent to the direct sum up to FFT
    round-off (validated to 1e-12 in the test suite).
    """

    def __init__(self, beta: np.ndarray, total_steps: int, block: int = 64):
        self.beta = beta
        self.total = total_steps
        self.block = block
        self.future = np.zeros(total_steps + 2, dtype=complex)
        self.buf: list[complex] = []
        self.base = 0

    def append(self, u: complex) -> None:
        self.buf.append(u)
        if len(self.buf) == self.block:
            self._flush()

    def _flush(self) -> None:
        L = len(self.buf)
        if L == 0:
            return
        hi = self.total + 1
        seg = self.beta[1: hi - self.base + 1]
        if len(seg):
            full = scipy.signal.fftconvolve(np.asarray(self.buf), seg)
            lo = self.base + L
            idx = np.arange(lo, hi + 1)
            take = idx - self.base - 1
            ok = take < len(full)
            self.future[idx[ok]] += full[take[ok]]
        self.base += L
        self.buf = []

    def conv(self, m: int) -> complex:
        tail = 0.0 + 0.0j
        if self.buf:
            lags = m - (self.base + np.arange(len(self.buf)))
            tail = np.dot(self.beta[lags], self.buf)
        return self.future[m] + tail


class Solver1D:
    """Time stepper for i psi_t = -psi_xx + U psi on |x| <= a."""

    def __init__(self, grid: GridSpec, time: TimeSpec,
                 mode: str = "fully_discrete_tbc",
                 potential: PotentialSpec | None = None,
                 amplitude: int = 0, q: float = 0.0,
                 lower_phase_node: int | None = 1,
                 use_fft_convolution: bool = False,
                 conjugate_time: bool = False,
                 validate_initial: bool = True):
        if grid.dim != 1:
            raise ConfigurationError("Solver1D needs a 1D grid")
        if amplitude not in (0, 1):
            raise ConfigurationError("amplitude must be 0 or 1")
        if amplitude and mode != "fully_discrete_tbc":
            raise ConfigurationError(
                "a nonzero exterior wave requires the fully discrete TBC")
        self.grid = grid
        self.time = time
        self.mode = mode
        self.N = grid.points_per_axis
        self.h = grid.h
        consts = make_constants(grid, time)
        self.alpha = np.conj(consts.alpha) if conjugate_time else consts.alpha
        self.B = 2.0 - self.alpha
        self.B_tilde = 2.0 + self.alpha

        potential = potential or ZeroPotential()
        validate_compact_support(potential, grid)
        self.U = sample_on_grid(potential, grid)

        n_max = time.n_steps + 1
        self.coeffs = compute_beta(self.alpha, n_max) \
            if mode == "fully_discrete_tbc" else None
        self.kernel = make_closure(mode, coeffs=self.coeffs, tau=time.tau,
                                   h=self.h, n_max=n_max)
        self.exterior = compute_g(self.alpha, q, self.h, n_max, amplitude) \
            if amplitude else None
        self.lower_phase_node = lower_phase_node

        diag = 2.0 + self.h ** 2 * self.U - self.alpha
        self._ctilde = 2.0 + self.h ** 2 * self.U + self.alpha
        self.factor = tbc_tridiag_factor(self.N, diag, self.kernel.c_shift,
                                         self.kernel.eliminates_ghost)

        self.f = np.zeros(self.N + 2, dtype=complex)
        self.step_index = 0
        self._hist_lo = np.zeros(time.n_steps + 2, dtype=complex)
        self._hist_up = np.zeros(time.n_steps + 2, dtype=complex)
        self._conv = None
        self._use_fft = bool(use_fft_convolution)
        self._validate_initial = validate_initial
        self._initialized = False

    # ------------------------------------------------------------- setup
    def set_initial(self, values: np.ndarray) -> None:
        """Initial data on the retained nodes p = 1..N.

        With an exterior wave the ghosts are seeded with exp(iqhp); without
        one the data must effectively vanish at the boundary.
        """
        values = np.asarray(values, dtype=complex)
        if values.shape != (self.N,):
            raise ConfigurationError(
                f"initial data must have shape ({self.N},)")
        require_finite(values, "initial data")
        self.f[:] = 0.0
        self.f[1:self.N + 1] = values
        if self.exterior is not None:
            q = self.exterior.q
            self.f[0] = np.exp(1j * q * self.h * 0)
            self.f[self.N + 1] = np.exp(1j * q * self.h * (self.N + 1))
        elif self._validate_initial:
            ratio = boundary_amplitude_ratio(values)
            if ratio > BOUNDARY_AMPLITUDE_LIMIT:
                raise ConfigurationError(
                    f"initial boundary amplitude ratio {ratio:.2e} exceeds "
                    f"{BOUNDARY_AMPLITUDE_LIMIT:.0e}; the boundary theory "
                    "assumes data vanishing at the box surface")
        self._hist_lo[0] = self.f[1]
        self._hist_up[0] = self.f[self.N]
        self.step_index = 0
        if self._use_fft and self.mode == "fully_discrete_tbc":
            self._conv = (
                _BlockConvolver(self.coeffs.beta, self.time.n_steps + 1),
                _BlockConvolver(self.coeffs.beta, self.time.n_steps + 1),
            )
            self._conv[0].append(self.f[1])
            self._conv[1].append(self.f[self.N])
        self._initialized = True

    # -------------------------------------------------------------- step
    def _closure_sums(self, m: int):
        """S_side = sum_l w_l u_l for both boundaries (R_up = S_up,
        R_low = -S_low)."""
        if self._conv is not None:
            conv_lo = self._conv[0].conv(m)
            conv_up = self._conv[1].conv(m)
            return -2.0 * conv_lo, -2.0 * conv_up
        w = self.kernel.history_weights(m)
        return (np.dot(w, self._hist_lo[:m]), np.dot(w, self._hist_up[:m]))

    def step(self) -> StepReport:
        if not self._initialized:
            raise StateError("set_initial must be called before stepping")
        if self.step_index >= self.time.n_steps:
            raise StateError("time ladder exhausted")
        t0 = _time.perf_counter()
        m = self.step_index + 1
        N = self.N
        S_lo, S_up = self._closure_sums(m)
        if self.exterior is not None:
            # R_up = S_up and R_low = -S_low, so the lower source enters
            # with the opposite sign
            S_up += plane_wave_source("upper", m, self.coeffs, self.exterior,
                                      N, self.h, None)
            S_lo -= plane_wave_source("lower", m, self.coeffs, self.exterior,
                                      N, self.h, self.lower_phase_node)

        f = self.f
        rhs = f[2:N + 2] - self._ctilde * f[1:N + 1] + f[0:N]
        rhs[0] += S_lo
        rhs[-1] += S_up
        x = self.factor.solve(rhs)
        f[1:N + 1] = x
        if self.kernel.eliminates_ghost:
            c = self.kernel.c_shift
            f[N + 1] = -c * x[-1] + x[-2] + S_up
            f[0] = x[1] - c * x[0] + S_lo
        else:
            f[0] = 0.0
            f[N + 1] = 0.0
        self._hist_lo[m] = x[0]
        self._hist_up[m] = x[-1]
        if self._conv is not None:
            self._conv[0].append(x[0])
            self._conv[1].append(x[-1])
        self.step_index = m
        require_finite(x, f"field at step {m}")
        return StepReport(step=m, iterations=0, residual=0.0,
                          norm=norm_sq(x), wall_time=_time.perf_counter() - t0)

    def run(self, n_steps: int | None = None) -> list[StepReport]:
        todo = self.time.n_steps - self.step_index if n_steps is None else n_steps
        return [self.step() for _ in range(todo)]

    # ---------------------------------------------------------- accessors
    @property
    def field(self) -> np.ndarray:
        """Retained nodes p = 1..N."""
        return self.f[1:self.N + 1]

    @property
    def field_with_ghosts(self) -> np.ndarray:
        """Nodes p = 0..N+1 (both ghosts reconstructed)."""
        return self.f

    def history(self, side: str) -> np.ndarray:
        h = self._hist_up if side == "upper" else self._hist_lo
        return h[:self.step_index + 1]

    # ------------------------------------------------------- checkpointing
    def get_state(self) -> dict:
        return {"f": self.f.copy(), "step_index": self.step_index,
                "hist_lo": self._hist_lo.copy(), "hist_up": self._hist_up.copy()}

    def set_state(self, st: dict) -> None:
        self.f[:] = st["f"]
        self.step_index = int(st["step_index"])
        self._hist_lo[:] = st["hist_lo"]
        self._hist_up[:] = st["hist_up"]
        if self._use_fft and self.mode == "fully_discrete_tbc":
            # rebuild block convolvers from the restored histories
            self._conv = (
                _BlockConvolver(self.coeffs.beta, self.time.n_steps + 1),
                _BlockConvolver(self.coeffs.beta, self.time.n_steps + 1),
            )
            for l in range(self.step_index + 1):
                self._conv[0].append(self._hist_lo[l])
                self._conv[1].append(self._hist_up[l])
        self._initialized = True
