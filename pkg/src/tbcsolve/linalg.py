"""Linear-algebra backends: batched Thomas solves, sparse CN operators,
and the Krylov policy used by the 2D/3D steppers.
"""

from __future__ import annotations

import inspect
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ConvergenceError


@dataclass(frozen=True)
class SolverPolicy:
    """Linear-solve policy. 1D always uses the direct tridiagonal path.

    method: 'bicgstab' (default, diagonal preconditioner), 'gmres', or
    'direct' (sparse LU; intended for small cross-check runs).
    """

    method: str = "bicgstab"
    rel_tolerance: float = 1e-10
    max_iterations: int = 2000
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if not (0 < self.rel_tolerance <= 1e-4):
            raise ConfigurationError("rel_tolerance must be in (0, 1e-4]")
        if self.method not in ("bicgstab", "gmres", "direct"):
            raise ConfigurationError(f"unknown method {self.method!r}")


@dataclass
class StepReport:
    """Per-step record: solver effort, achieved residual, field norm."""

    step: int
    iterations: int = 0
    residual: float = 0.0
    norm: float = 0.0
    wall_time: float = 0.0
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        d = {"step": self.step, "iterations": self.iterations,
             "residual": self.residual, "norm": self.norm,
             "wall_time": self.wall_time, "converged": self.converged}
        d.update(self.extra)
        return d


# ------------------------------------------------------------- tridiagonal

class TridiagFactor:
    """LU factors of a constant complex tridiagonal matrix.

    Batched solves: rhs may be (N,) or (B, N); the factorization is reused
    across all right-hand sides and steps.
    """

    def __init__(self, diag: np.ndarray, lower: np.ndarray, upper: np.ndarray):
        n = len(diag)
        u = np.empty(n, dtype=complex)
        l = np.empty(max(n - 1, 0), dtype=complex)
        u[0] = diag[0]
        for i in range(1, n):
            l[i - 1] = lower[i - 1] / u[i - 1]
            u[i] = diag[i] - l[i - 1] * upper[i - 1]
        if np.any(u == 0):
            raise ConvergenceError("zero pivot in tridiagonal factorization")
        self.n = n
        self.u = u
        self.l = l
        self.c = np.asarray(upper, dtype=complex)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        squeeze = rhs.ndim == 1
        b = np.atleast_2d(rhs)
        n = self.n
        y = np.empty_like(b, dtype=complex)
        y[:, 0] = b[:, 0]
        for i in range(1, n):
            y[:, i] = b[:, i] - self.l[i - 1] * y[:, i - 1]
        x = np.empty_like(y)
        x[:, n - 1] = y[:, n - 1] / self.u[n - 1]
        for i in range(n - 2, -1, -1):
            x[:, i] = (y[:, i] - self.c[i] * x[:, i + 1]) / self.u[i]
        return x[0] if squeeze else x


def tbc_tridiag_factor(N: int, diag_values: np.ndarray, c_shift: complex,
                       eliminates_ghost: bool) -> TridiagFactor:
    """Tridiagonal CN operator on N retained nodes with closure rows folded in.

    diag_values holds C_p = 2 + h^2 U_p - alpha for p = 1..N. Boundary rows
    get diag + c_shift and an inner coefficient of -2 when the closure
    eliminates the ghost (-1 for a hard wall).
    """
    diag = np.asarray(diag_values, dtype=complex).copy()
    lower = np.full(N - 1, -1.0, dtype=complex)
    upper = np.full(N - 1, -1.0, dtype=complex)
    inner = -2.0 if eliminates_ghost else -1.0
    diag[0] += c_shift
    diag[-1] += c_shift
    upper[0] = inner
    lower[-1] = inner
    return TridiagFactor(diag, lower, upper)


# ---------------------------------------------------------- sparse operators

def make_grid_operator(dim: int, N: int, diag_values: np.ndarray,
                       c_shift: complex, eliminates_ghost: bool) -> sps.csr_matrix:
    """CN operator on the full retained cube {1..N}^dim, row-major flattened.

    Every retained node is an unknown. A node with k extreme coordinates
    adjoins k ghost layers; with a transparent-type closure each ghost is
    eliminated through its face's closure relation, contributing c_shift to
    the diagonal and an extra -1 on the inward neighbor along that axis
    (edge and vertex nodes simply collect one such contribution per
    adjacent face). With a hard wall the ghosts are zero and drop out.
    The ghost hull's own edges and vertices are never referenced by any
    retained stencil, matching the published grid count.
    """
    shape = (N,) * dim
    size = N ** dim
    idx = np.arange(size).reshape(shape)
    coords = np.indices(shape)
    n_extreme = sum(((c == 0) | (c == N - 1)).astype(int) for c in coords)

    diag = np.asarray(diag_values, dtype=complex).reshape(shape).copy()
    if eliminates_ghost:
        diag = diag + c_shift * n_extreme

    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [diag.ravel()]

    for axis in range(dim):
        for delta in (-1, 1):
            src = [slice(None)] * dim
            dst = [slice(None)] * dim
            if delta == 1:
                src[axis] = slice(0, N - 1)
                dst[axis] = slice(1, N)
            else:
                src[axis] = slice(1, N)
                dst[axis] = slice(0, N - 1)
            rows.append(idx[tuple(src)].ravel())
            cols.append(idx[tuple(dst)].ravel())
            vals.append(np.full(idx[tuple(src)].size, -1.0, dtype=complex))
            if eliminates_ghost:
                # row at the extreme end of this axis: the inward neighbor
                # picks up the eliminated ghost's -1 (all nodes of the slab,
                # including edge and vertex nodes)
                bdry = [slice(None)] * dim
                bdry[axis] = slice(N - 1, N) if delta == -1 else slice(0, 1)
                inner_sel = [slice(None)] * dim
                inner_sel[axis] = slice(N - 2, N - 1) if delta == -1 else slice(1, 2)
                rows.append(idx[tuple(bdry)].ravel())
                cols.append(idx[tuple(inner_sel)].ravel())
                vals.append(np.full(idx[tuple(bdry)].size, -1.0, dtype=complex))

    A = sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size))
    A.sum_duplicates()
    return A


# --------------------------------------------------------------- Krylov

def _tol_kwargs(func, rtol):
    params = inspect.signature(func).parameters
    if "rtol" in params:
        return {"rtol": rtol, "atol": 0.0}
    return {"tol": rtol, "atol": 0.0}


class GridSolver:
    """Solves A x = b per the policy, reusing factorizations across steps."""

    def __init__(self, A: sps.csr_matrix, policy: SolverPolicy):
        self.A = A
        self.policy = policy
        self._lu = None
        self._mdiag = None
        if policy.method == "direct":
            self._lu = spla.splu(A.tocsc())
        elif policy.preconditioner == "diagonal":
            d = A.diagonal()
            self._mdiag = spla.LinearOperator(
                A.shape, matvec=lambda x, inv=1.0 / d: inv * x, dtype=complex)

    def solve(self, rhs: np.ndarray, x0: np.ndarray | None = None):
        """Returns (x, iterations, residual). Zero rhs short-circuits."""
        bnorm = float(np.linalg.norm(rhs))
        if bnorm == 0.0:
            return np.zeros_like(rhs), 0, 0.0
        if self._lu is not None:
            x = self._lu.solve(rhs)
            res = float(np.linalg.norm(self.A @ x - rhs)) / bnorm
            return x, 1, res
        pol = self.policy
        count = {"n": 0}

        def cb(_xk):
            count["n"] += 1

        x, info = spla.bicgstab(self.A, rhs, x0=x0, maxiter=pol.max_iterations,
                                M=self._mdiag, callback=cb,
                                **_tol_kwargs(spla.bicgstab, pol.rel_tolerance))
        if info != 0 or pol.method == "gmres":
            x, info = spla.gmres(self.A, rhs, x0=x0, restart=30,
                                 maxiter=pol.max_iterations, M=self._mdiag,
                                 callback=cb, callback_type="pr_norm",
                                 **_tol_kwargs(spla.gmres, pol.rel_tolerance))
            if info != 0:
                res = float(np.linalg.norm(self.A @ x - rhs)) / bnorm
                raise ConvergenceError(
                    f"Krylov solve failed (info={info}, residual={res:.3e})",
                    report=StepReport(step=-1, iterations=count["n"],
                                      residual=res, converged=False))
        res = float(np.linalg.norm(self.A @ x - rhs)) / bnorm
        return x, count["n"], res


class LuCache:
    """Shared sparse-LU factorizations for the constant free aux operators."""

    def __init__(self):
        self._cache = {}

    def get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = spla.splu(builder().tocsc())
        return self._cache[key]


def timed(fn):
    """Run fn() and return (result, elapsed_seconds)."""
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0
