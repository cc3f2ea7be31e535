"""2D Crank-Nicolson core with the recursive transparent closure.

The same class serves two roles:

* the main solver of a 2D run (potential, Krylov policy, validation),
* a face problem of a 3D run (free space, cached sparse LU, born at some
  step l from the 3D solution's trace on that face).

Geometry per axis follows the 1D convention: retained nodes 1..N, ghost
layers 0 and N+1. The four corner nodes of the retained square are not
solved for (identity rows); their values come from the newest 1D side
problems, the discrete stand-in for the equal-time-argument trace of the
boundary recursion.
"""

from __future__ import annotations

import time as _time

import numpy as np

from .closure import make_closure
from .errors import ConfigurationError, StateError
from .fields import boundary_amplitude_ratio, norm_sq, require_finite
from .grid import GridSpec, TimeSpec
from .hierarchy import LineBatch, StorageLedger
from .kernels import TbcCoefficients, compute_beta
from .linalg import GridSolver, SolverPolicy, StepReport, make_grid_operator, \
    tbc_tridiag_factor

# side keys: (axis, is_upper); axis 0 is x (first index), axis 1 is y
_SIDES_2D = ((0, 0), (0, 1), (1, 0), (1, 1))


class CN2D:
    """Free-form 2D CN stepper; see module docstring for the two roles."""

    def __init__(self, N: int, h: float, tau: float, total_steps: int,
                 mode: str, coeffs: TbcCoefficients | None,
                 potential_grid: np.ndarray | None = None,
                 policy: SolverPolicy | None = None,
                 lu=None, born: int = 0,
                 ledger: StorageLedger | None = None,
                 ledger_field: bool = True):
        self.N = N
        self.h = h
        self.tau = tau
        self.total_steps = total_steps
        self.mode = mode
        self.born = born
        self.t = born
        self.ledger = ledger
        alpha = 2j * h * h / tau
        self.alpha = alpha
        self.B = 2.0 - alpha
        self.coeffs = coeffs
        self.kernel = make_closure(mode, coeffs=coeffs, tau=tau, h=h,
                                   n_max=total_steps + 1)
        # a hard wall has no boundary recursion at all
        self._hierarchy = self.kernel.eliminates_ghost

        U = np.zeros((N, N)) if potential_grid is None else potential_grid
        self.C = 4.0 + h * h * U - alpha
        self.C_tilde = 4.0 + h * h * U + alpha

        if policy is not None:
            A = make_grid_operator(2, N, self.C, self.kernel.c_shift,
                                   self.kernel.eliminates_ghost)
            self._solver = GridSolver(A, policy)
            self._lu = None
        else:
            if lu is None:
                raise ConfigurationError("CN2D needs a policy or a shared LU")
            self._solver = None
            self._lu = lu

        self.F = np.zeros((N + 2, N + 2), dtype=complex)
        self.batches = {}
        if self._hierarchy:
            self._line_factor = tbc_tridiag_factor(
                N, np.full(N, self.B, dtype=complex), self.kernel.c_shift,
                self.kernel.eliminates_ghost)
            cap = total_steps + 2 - born
            self.batches = {side: LineBatch(N, self.B, self.kernel,
                                            self._line_factor, cap,
                                            total_steps, ledger)
                            for side in _SIDES_2D}
        self._x_prev = None
        if ledger is not None and ledger_field:
            ledger.add(N * N)

    # ----------------------------------------------------------- geometry
    def _side_trace(self, side) -> np.ndarray:
        axis, up = side
        idx = self.N if up else 1
        if axis == 0:
            return self.F[idx, 1:self.N + 1]
        return self.F[1:self.N + 1, idx]

    def set_initial(self, values: np.ndarray) -> None:
        """Full retained square {1..N}^2, corner values included."""
        if values.shape != (self.N, self.N):
            raise ConfigurationError(
                f"initial data must have shape ({self.N}, {self.N})")
        self.F[:] = 0.0
        self.F[1:self.N + 1, 1:self.N + 1] = values
        self.t = self.born
        if self._hierarchy:
            for side in _SIDES_2D:
                self.batches[side].spawn(self._side_trace(side).copy(),
                                         self.born)

    # ----------------------------------------------------------- stepping
    def advance(self, m: int) -> StepReport:
        """One step of this problem's clock to absolute level m = t + 1."""
        if m != self.t + 1:
            raise StateError(f"advance to {m} requested at level {self.t}")
        t0 = _time.perf_counter()
        N = self.N
        F = self.F
        rhs = (F[2:N + 2, 1:N + 1] + F[0:N, 1:N + 1]
               + F[1:N + 1, 2:N + 2] + F[1:N + 1, 0:N]
               - self.C_tilde * F[1:N + 1, 1:N + 1])
        S = {}
        if self._hierarchy:
            w = self.kernel.history_weights(m)

            # (1) side problems advance one sub-step, closing their
            # endpoints from their own corner histories
            for side in _SIDES_2D:
                self.batches[side].advance(m, w)

            # (2) closure sums per side, applied over the full side line;
            # corner rows collect both adjacent sides' contributions
            S = {side: self.batches[side].closure_sum(m, w)
                 for side in _SIDES_2D}
            rhs[0, :] += S[(0, 0)]
            rhs[N - 1, :] += S[(0, 1)]
            rhs[:, 0] += S[(1, 0)]
            rhs[:, N - 1] += S[(1, 1)]

        # (3) linear solve
        if self._solver is not None:
            x, iters, res = self._solver.solve(rhs.ravel(), x0=self._x_prev)
            self._x_prev = x
        else:
            x = self._lu.solve(rhs.ravel())
            iters, res = 1, 0.0
        if self.ledger is not None:
            self.ledger.count_ops("face_solve", N * N)
        xg = x.reshape(N, N)
        F[1:N + 1, 1:N + 1] = xg

        # (4) ghost lines at level m over the full transverse range (the
        # four double-ghost cells of the hull stay untouched)
        if self.kernel.eliminates_ghost:
            c = self.kernel.c_shift
            tr = slice(1, N + 1)
            F[N + 1, tr] = -c * F[N, tr] + F[N - 1, tr] + S[(0, 1)]
            F[0, tr] = F[2, tr] - c * F[1, tr] + S[(0, 0)]
            F[tr, N + 1] = -c * F[tr, N] + F[tr, N - 1] + S[(1, 1)]
            F[tr, 0] = F[tr, 2] - c * F[tr, 1] + S[(1, 0)]

        # (7) birth of the next side problems from the new traces
        if self._hierarchy:
            for side in _SIDES_2D:
                self.batches[side].spawn(self._side_trace(side).copy(), m)
        self.t = m
        return StepReport(step=m, iterations=iters, residual=res,
                          norm=norm_sq(xg),
                          wall_time=_time.perf_counter() - t0)

    # ----------------------------------------------------------- accessors
    @property
    def field(self) -> np.ndarray:
        """Retained square {1..N}^2 at the current level."""
        return self.F[1:self.N + 1, 1:self.N + 1]

    def boundary_line(self, side) -> np.ndarray:
        """Current values along one side of the retained square."""
        return self._side_trace(side)

    def corner(self, ci: int, cj: int) -> complex:
        return self.F[ci, cj]

    # ------------------------------------------------------- checkpointing
    def get_state(self) -> dict:
        return {"F": self.F.copy(), "t": self.t, "born": self.born,
                "batches": {str(s): b.get_state()
                            for s, b in self.batches.items()}}

    def set_state(self, st: dict) -> None:
        self.F[:] = st["F"]
        self.t = int(st["t"])
        for s, b in self.batches.items():
            b.set_state(st["batches"][str(s)])


class Solver2D:
    """Main-problem wrapper: validation, watchdog, reports, state."""

    def __init__(self, grid: GridSpec, time: TimeSpec,
                 mode: str = "fully_discrete_tbc",
                 potential=None, policy: SolverPolicy | None = None,
                 memory_budget_bytes: int | None = None,
                 validate_initial: bool = True,
                 conjugate_time: bool = False):
        from .potentials import ZeroPotential, sample_on_grid, \
            validate_compact_support
        from . import watchdog

        if grid.dim != 2:
            raise ConfigurationError("Solver2D needs a 2D grid")
        if conjugate_time and mode != "fully_discrete_tbc":
            raise ConfigurationError(
                "conjugate_time is supported with the fully discrete TBC only")
        self.grid = grid
        self.time = time
        potential = potential or ZeroPotential()
        validate_compact_support(potential, grid)
        U = sample_on_grid(potential, grid)
        watchdog.check_memory_budget(2, grid.points_per_axis,
                                     time.n_steps + 1, memory_budget_bytes)
        tau_eff = time.tau if not conjugate_time else -time.tau
        alpha = 2j * grid.h ** 2 / tau_eff
        coeffs = compute_beta(alpha, time.n_steps + 1) \
            if mode == "fully_discrete_tbc" else None
        self.ledger = StorageLedger()
        self.core = CN2D(grid.points_per_axis, grid.h, tau_eff,
                         time.n_steps, mode, coeffs, potential_grid=U,
                         policy=policy or SolverPolicy(),
                         ledger=self.ledger, ledger_field=False)
        self._validate_initial = validate_initial
        self.reports: list[StepReport] = []

    def set_initial(self, values: np.ndarray) -> None:
        require_finite(np.asarray(values), "initial data")
        if self._validate_initial:
            from .solver1d import BOUNDARY_AMPLITUDE_LIMIT
            ratio = boundary_amplitude_ratio(np.asarray(values))
            if ratio > BOUNDARY_AMPLITUDE_LIMIT:
                raise ConfigurationError(
                    f"initial boundary amplitude ratio {ratio:.2e} exceeds "
                    f"{BOUNDARY_AMPLITUDE_LIMIT:.0e}")
        self.core.set_initial(np.asarray(values, dtype=complex))

    def step(self) -> StepReport:
        if self.core.t >= self.time.n_steps:
            raise StateError("time ladder exhausted")
        self.ledger.mark_between()
        rep = self.core.advance(self.core.t + 1)
        rep.extra.update(self.ledger.flush_step())
        rep.extra["live_values"] = self.ledger.live
        self.reports.append(rep)
        return rep

    def run(self, n_steps: int | None = None) -> list[StepReport]:
        todo = (self.time.n_steps - self.core.t) if n_steps is None else n_steps
        return [self.step() for _ in range(todo)]

    @property
    def field(self) -> np.ndarray:
        return self.core.field

    @property
    def step_index(self) -> int:
        return self.core.t

    def get_state(self) -> dict:
        return {"core": self.core.get_state(),
                "ledger_live": self.ledger.live,
                "ledger_peak": self.ledger.peak}

    def set_state(self, st: dict) -> None:
        self.core.set_state(st["core"])
        self.ledger.live = int(st["ledger_live"])
        self.ledger.peak = int(st["ledger_peak"])
