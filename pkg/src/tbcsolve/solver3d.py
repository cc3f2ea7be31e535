"""3D Crank-Nicolson stepper with the recursive transparent closure.

Per physical step, in order:

1. every live 2D face problem advances one step of its own clock (its 1D
   edge children advance first, inside ``CN2D.advance``);
2. cube-edge lines and vertex values at the new level are reconstructed
   from the newest face problems, and each face's closure sum
   ``S = sum_l w_l * Psi_l(new level)`` is assembled;
3. the main sparse system is solved (Krylov per policy) with the edge and
   vertex rows prescribed as identities;
4. ghost planes are rebuilt from the closure relations and one new face
   problem per face is born from the new trace.

Only the separated ``2 beta^0`` term couples the closure to the unknown
boundary values; everything else is known right-hand-side data.
"""

from __future__ import annotations

import time as _time

import numpy as np

from .closure import make_closure
from .errors import ConfigurationError, StateError
from .fields import boundary_amplitude_ratio, norm_sq, require_finite
from .grid import GridSpec, TimeSpec
from .hierarchy import StorageLedger
from .kernels import compute_beta
from .linalg import GridSolver, SolverPolicy, StepReport, make_grid_operator
from .solver2d import CN2D

# faces keyed (axis, is_upper); transverse axes in ascending order
_FACES = tuple((a, u) for a in (0, 1, 2) for u in (0, 1))
_TRANSVERSE = {0: (1, 2), 1: (0, 2), 2: (0, 1)}
# edges keyed (axis_a, up_a, axis_b, up_b) with axis_a < axis_b
_EDGES = tuple((a, ua, b, ub)
               for a in (0, 1, 2) for b in (0, 1, 2) if a < b
               for ua in (0, 1) for ub in (0, 1))


class Solver3D:
    """Time stepper for i psi_t = -Laplacian psi + U psi on the cube."""

    def __init__(self, grid: GridSpec, time: TimeSpec,
                 mode: str = "fully_discrete_tbc",
                 potential=None, policy: SolverPolicy | None = None,
                 memory_budget_bytes: int | None = None,
                 validate_initial: bool = True,
                 conjugate_time: bool = False):
        from . import watchdog
        from .linalg import LuCache
        from .potentials import ZeroPotential, sample_on_grid, \
            validate_compact_support

        if grid.dim != 3:
            raise ConfigurationError("Solver3D needs a 3D grid")
        if conjugate_time and mode != "fully_discrete_tbc":
            raise ConfigurationError(
                "conjugate_time is supported with the fully discrete TBC only")
        self.grid = grid
        self.time = time
        self.mode = mode
        self.N = grid.points_per_axis
        self.h = grid.h
        N = self.N
        potential = potential or ZeroPotential()
        validate_compact_support(potential, grid)
        self.U = sample_on_grid(potential, grid)
        watchdog.check_memory_budget(3, N, time.n_steps + 1,
                                     memory_budget_bytes)

        self.tau_eff = -time.tau if conjugate_time else time.tau
        alpha = 2j * grid.h ** 2 / self.tau_eff
        self.alpha = alpha
        self.coeffs = compute_beta(alpha, time.n_steps + 1) \
            if mode == "fully_discrete_tbc" else None
        self.kernel = make_closure(mode, coeffs=self.coeffs,
                                   tau=self.tau_eff, h=grid.h,
                                   n_max=time.n_steps + 1)
        self.C = 6.0 + grid.h ** 2 * self.U - alpha
        self.C_tilde = 6.0 + grid.h ** 2 * self.U + alpha

        self._hierarchy = self.kernel.eliminates_ghost
        A = make_grid_operator(3, N, self.C, self.kernel.c_shift,
                               self.kernel.eliminates_ghost)
        self._solver = GridSolver(A, policy or SolverPolicy())
        self._aux_lu = None
        if self._hierarchy:
            self._lu_cache = LuCache()
            self._aux_lu = self._lu_cache.get(
                ("free2d", N, mode),
                lambda: make_grid_operator(
                    2, N, np.full((N, N), 4.0 - alpha, dtype=complex),
                    self.kernel.c_shift, self.kernel.eliminates_ghost))

        self.ledger = StorageLedger()
        self.F = np.zeros((N + 2, N + 2, N + 2), dtype=complex)
        self.faces: dict[tuple, list[CN2D]] = {f: [] for f in _FACES}
        self.t = 0
        self.reports: list[StepReport] = []
        self._x_prev = None
        self._validate_initial = validate_initial
        self._initialized = False

    # ----------------------------------------------------------- geometry
    def _face_trace(self, face) -> np.ndarray:
        axis, up = face
        N = self.N
        idx = N if up else 1
        sel = [slice(1, N + 1)] * 3
        sel[axis] = idx
        return self.F[tuple(sel)]

    def _spawn_face_problems(self, level: int) -> None:
        if not self._hierarchy:
            return
        for face in _FACES:
            p = CN2D(self.N, self.h, self.tau_eff, self.time.n_steps,
                     self.mode, self.coeffs, potential_grid=None,
                     policy=None, lu=self._aux_lu, born=level,
                     ledger=self.ledger)
            p.set_initial(self._face_trace(face).copy())
            self.faces[face].append(p)

    def set_initial(self, values: np.ndarray) -> None:
        """Initial data on the full retained cube {1..N}^3."""
        N = self.N
        values = np.asarray(values, dtype=complex)
        if values.shape != (N, N, N):
            raise ConfigurationError(f"initial data must be ({N},{N},{N})")
        require_finite(values, "initial data")
        if self._validate_initial:
            from .solver1d import BOUNDARY_AMPLITUDE_LIMIT
            ratio = boundary_amplitude_ratio(values)
            if ratio > BOUNDARY_AMPLITUDE_LIMIT:
                raise ConfigurationError(
                    f"initial boundary amplitude ratio {ratio:.2e} exceeds "
                    f"{BOUNDARY_AMPLITUDE_LIMIT:.0e}")
        self.F[:] = 0.0
        self.F[1:N + 1, 1:N + 1, 1:N + 1] = values
        self.t = 0
        for face in _FACES:
            self.faces[face] = []
        self._spawn_face_problems(0)
        self._initialized = True

    # -------------------------------------------------------------- step
    def step(self) -> StepReport:
        if not self._initialized:
            raise StateError("set_initial must be called before stepping")
        if self.t >= self.time.n_steps:
            raise StateError("time ladder exhausted")
        t0 = _time.perf_counter()
        self.ledger.mark_between()
        N = self.N
        m = self.t + 1

        F = self.F
        c0 = slice(1, N + 1)
        rhs = (F[2:N + 2, c0, c0] + F[0:N, c0, c0]
               + F[c0, 2:N + 2, c0] + F[c0, 0:N, c0]
               + F[c0, c0, 2:N + 2] + F[c0, c0, 0:N]
               - self.C_tilde * F[c0, c0, c0])

        S = {}
        if self._hierarchy:
            w = self.kernel.history_weights(m)

            # (1) advance every live face problem to level m
            for face in _FACES:
                for p in self.faces[face]:
                    p.advance(m)

            # (2) closure sums per face, applied over the full face plane;
            # cube-edge rows collect two faces' contributions, vertices
            # three (one ghost elimination per adjacent face)
            for face in _FACES:
                probs = self.faces[face]
                acc = np.zeros((N, N), dtype=complex)
                for p in probs:
                    acc += w[p.born] * p.field
                S[face] = acc
                self.ledger.count_ops("face_conv", len(probs) * N * N)
            full = slice(0, N)
            for face in _FACES:
                axis, up = face
                sel = [full] * 3
                sel[axis] = N - 1 if up else 0
                rhs[tuple(sel)] += S[face]

        # (3) main solve
        x, iters, res = self._solver.solve(rhs.ravel(), x0=self._x_prev)
        self._x_prev = x
        self.ledger.count_ops("main_solve", max(iters, 1) * N ** 3)
        xg = x.reshape(N, N, N)
        F[1:N + 1, 1:N + 1, 1:N + 1] = xg

        # (4) ghost planes at level m over the full face extent (the hull's
        # edge and vertex cells are never referenced and stay zero)
        if self._hierarchy:
            c = self.kernel.c_shift
            tr = slice(1, N + 1)
            F[N + 1, tr, tr] = (-c * F[N, tr, tr] + F[N - 1, tr, tr]
                                + S[(0, 1)])
            F[0, tr, tr] = (F[2, tr, tr] - c * F[1, tr, tr]
                            + S[(0, 0)])
            F[tr, N + 1, tr] = (-c * F[tr, N, tr] + F[tr, N - 1, tr]
                                + S[(1, 1)])
            F[tr, 0, tr] = (F[tr, 2, tr] - c * F[tr, 1, tr]
                            + S[(1, 0)])
            F[tr, tr, N + 1] = (-c * F[tr, tr, N] + F[tr, tr, N - 1]
                                + S[(2, 1)])
            F[tr, tr, 0] = (F[tr, tr, 2] - c * F[tr, tr, 1]
                            + S[(2, 0)])

        # (5) birth of the next face problems
        self._spawn_face_problems(m)
        self.t = m
        require_finite(xg, f"field at step {m}")
        rep = StepReport(step=m, iterations=iters, residual=res,
                         norm=norm_sq(self.field),
                         wall_time=_time.perf_counter() - t0)
        rep.extra.update(self.ledger.flush_step())
        rep.extra["live_values"] = self.ledger.live
        self.reports.append(rep)
        return rep

    def run(self, n_steps: int | None = None) -> list[StepReport]:
        todo = (self.time.n_steps - self.t) if n_steps is None else n_steps
        return [self.step() for _ in range(todo)]

    # ----------------------------------------------------------- accessors
    @property
    def field(self) -> np.ndarray:
        """Retained cube {1..N}^3 at the current level."""
        N = self.N
        return self.F[1:N + 1, 1:N + 1, 1:N + 1]

    @property
    def step_index(self) -> int:
        return self.t

    # ------------------------------------------------------- checkpointing
    def get_state(self) -> dict:
        return {
            "F": self.F.copy(), "t": self.t,
            "faces": {str(f): [p.get_state() for p in self.faces[f]]
                      for f in _FACES},
            "ledger_live": self.ledger.live,
            "ledger_peak": self.ledger.peak,
            "ledger_peak_between": self.ledger.peak_between,
        }

    def set_state(self, st: dict) -> None:
        self.F[:] = st["F"]
        self.t = int(st["t"])
        for f in _FACES:
            states = st["faces"][str(f)]
            self.faces[f] = []
            for ps in states:
                p = CN2D(self.N, self.h, self.tau_eff, self.time.n_steps,
                         self.mode, self.coeffs, potential_grid=None,
                         policy=None, lu=self._aux_lu,
                         born=int(ps["born"]), ledger=self.ledger)
                p.set_state(ps)
                self.faces[f].append(p)
        self.ledger.live = int(st["ledger_live"])
        self.ledger.peak = int(st["ledger_peak"])
        self.ledger.peak_between = int(st["ledger_peak_between"])
        self._initialized = True
