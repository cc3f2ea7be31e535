"""Recursive boundary machinery shared by the 2D and 3D steppers.

The multidimensional transparent closure is realized as a tower of
lower-dimensional free Crank-Nicolson sub-problems carrying independent
time-like arguments, one per reduced direction:

* a 3D solve keeps, per face, one 2D auxiliary field per elapsed step
  (time arguments: birth step x diagonal clock);
* each cube edge carries a full matrix of 1D sub-problems indexed by the
  two adjacent faces' time arguments, populated jointly by both faces;
* each cube vertex carries a full cube of trace values indexed by all
  three time arguments, populated jointly by its three edges.

Every sub-problem's endpoint closure convolves over one time argument
from the global origin, reading the shared vertex (corner) pane; the
early part of each row is data written by the perpendicular families, so
no sub-problem ever sees a truncated history. The stored-value count of
this structure is exactly the closed form (N_x + 2 N_tau)^N - N_x^N.

All problems march on one synchronous clock, so each family advances with
a single factorized batched tridiagonal solve, and the pane convolutions
are dense tensor contractions (unborn entries are inert zeros).
"""

from __future__ import annotations

from math import comb

import numpy as np

from .closure import ClosureKernel
from .linalg import TridiagFactor


class Pane:
    """A shared multi-time-index trace store (corner matrix, vertex cube).

    ``axes`` maps the owning family's index dimensions to array axes; the
    one remaining axis is that family's clock. Several families share one
    array through different Pane views.
    """

    def __init__(self, array: np.ndarray, axes: tuple[int, ...]):
        ndim = array.ndim
        clock_axis = next(a for a in range(ndim) if a not in axes)
        perm = tuple(axes) + (clock_axis,)
        self.view = np.transpose(array, perm)  # (family dims ..., clock)

    def conv(self, m: int, weights: np.ndarray,
             block: tuple[slice, ...]) -> np.ndarray:
        """sum_k w_k * H[..., k] over k = 0..m-1 on the live block."""
        sub = self.view[block + (slice(0, m),)]
        return np.tensordot(sub, weights, axes=([sub.ndim - 1], [0]))

    def write(self, m: int, block: tuple[slice, ...],
              values: np.ndarray) -> None:
        self.view[block + (m,)] = values


class LineFamily:
    """A family of 1D free-CN sub-problems on one carrier, batched.

    ``fields`` has shape (family index dims ..., N+2) with ghost cells;
    the live entries at clock m form the dense block [0..m-1]^k. Endpoint
    closures read/write the two shared panes.
    """

    def __init__(self, fam_shape: tuple[int, ...], N: int, B: complex,
                 kernel: ClosureKernel, factor: TridiagFactor,
                 pane_lo: Pane, pane_up: Pane, ledger=None):
        self.N = N
        self.B_tilde = 4.0 - B
        self.kernel = kernel
        self.factor = factor
        self.fields = np.zeros(fam_shape + (N + 2,), dtype=complex)
        self.pane_lo = pane_lo
        self.pane_up = pane_up
        self.ndim = len(fam_shape)
        self.ledger = ledger

    def _block(self, m: int) -> tuple[slice, ...]:
        return tuple(slice(0, m) for _ in range(self.ndim))

    def advance(self, m: int, weights: np.ndarray) -> None:
        """Advance the live block [0..m-1]^k one step to clock m."""
        blk = self._block(m)
        N = self.N
        f = self.fields[blk]
        S_lo = self.pane_lo.conv(m, weights, blk)
        S_up = self.pane_up.conv(m, weights, blk)
        rhs = f[..., 2:N + 2] - self.B_tilde * f[..., 1:N + 1] + f[..., 0:N]
        rhs[..., 0] += S_lo
        rhs[..., -1] += S_up
        x = self.factor.solve(rhs.reshape(-1, N)).reshape(rhs.shape)
        f[..., 1:N + 1] = x
        if self.kernel.eliminates_ghost:
            c = self.kernel.c_shift
            f[..., N + 1] = -c * x[..., -1] + x[..., -2] + S_up
            f[..., 0] = x[..., 1] - c * x[..., 0] + S_lo
        self.pane_lo.write(m, blk, x[..., 0])
        self.pane_up.write(m, blk, x[..., -1])
        if self.ledger is not None:
            n_live = x[..., 0].size
            self.ledger.count_ops("edge_solve", n_live * N)
            self.ledger.count_ops("corner_conv", 2 * n_live * m)

    def seed(self, index: tuple[int, ...], level: int,
             trace: np.ndarray) -> None:
        """Birth of one sub-problem: set its field and pane seeds."""
        self.fields[index + (slice(1, self.N + 1),)] = trace
        blk = tuple(slice(i, i + 1) for i in index)
        self.pane_lo.write(level, blk, trace[0])
        self.pane_up.write(level, blk, trace[-1])
        if self.ledger is not None:
            self.ledger.add(self.N)

    def seed_block(self, block: tuple[slice, ...], level: int,
                   traces: np.ndarray) -> None:
        """Birth of a slab of sub-problems sharing one clock level."""
        self.fields[block + (slice(1, self.N + 1),)] = traces
        self.pane_lo.write(level, block, traces[..., 0])
        self.pane_up.write(level, block, traces[..., -1])
        if self.ledger is not None:
            self.ledger.add(traces[..., 0].size * self.N)


class StorageLedger:
    """Counts live complex values in the boundary tower and per-step work.

    ``peak_between`` samples the live count at step boundaries (the state
    that must persist to take another step); it is audited against the
    closed-form storage bound ``(N_x + 2 N_tau)^N - N_x^N`` evaluated with
    N_x = nodes per retained axis and N_tau = number of time levels.
    """

    def __init__(self):
        self.live = 0
        self.peak = 0
        self.peak_between = 0
        self.ops = {}
        self._step_ops = {}

    def add(self, n: int) -> None:
        self.live += n
        if self.live > self.peak:
            self.peak = self.live

    def mark_between(self) -> None:
        if self.live > self.peak_between:
            self.peak_between = self.live

    def count_ops(self, kind: str, n: int) -> None:
        self._step_ops[kind] = self._step_ops.get(kind, 0) + n

    def flush_step(self) -> dict:
        out = dict(self._step_ops)
        for k, v in out.items():
            self.ops[k] = self.ops.get(k, 0) + v
        self._step_ops = {}
        return out


# ------------------------------------------------------------- estimators

def element_counts(N: int) -> list[int]:
    """D_s = 2^{N-s} N! / (s! (N-s)!): s-dimensional elements of an N-cube."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return [2 ** (N - s) * comb(N, s) for s in range(N + 1)]


def nv_breakdown(N: int, N_x: int, N_tau: int) -> dict:
    """Stored-value counts per element level: D_s * N_x^s * N_tau^{N-s}.

    Exact integer arithmetic; the levels s = 0..N-1 sum to the closed form
    (N_x + 2 N_tau)^N - N_x^N, which is asserted.
    """
    if min(N_x, N_tau) < 1 or N < 1:
        raise ValueError("N, N_x and N_tau must be positive")
    D = element_counts(N)
    terms = {s: D[s] * N_x ** s * N_tau ** (N - s) for s in range(N)}
    total = sum(terms.values())
    closed = (N_x + 2 * N_tau) ** N - N_x ** N
    if total != closed:
        raise AssertionError(
            f"breakdown sum {total} != closed form {closed} (N={N})")
    return {"levels": terms, "element_counts": D[:N], "total": closed}


def nv_estimate(N: int, N_x: int, N_tau: int) -> int:
    """Total boundary-history storage (N_x + 2 N_tau)^N - N_x^N."""
    return nv_breakdown(N, N_x, N_tau)["total"]


_COST_POWERS = {3: ("P", "Q", "R", "T"), 4: ("P", "Q", "R", "S", "T")}


def step_cost_estimate(N: int, N_x: int, n: int, coefficients: dict) -> dict:
    """Per-step cost polynomial sum_k c_k N_x^{N-k} n^k with its breakdown.

    N = 3 uses (P, Q, R, T) against (N_x^3, N_x^2 n, N_x n^2, n^3);
    N = 4 adds the S N_x n^3 term and a T n^4 tail.
    """
    if N not in _COST_POWERS:
        raise ValueError("cost estimate defined for N in {3, 4}")
    names = _COST_POWERS[N]
    terms = {}
    for k, name in enumerate(names):
        c = float(coefficients.get(name, 0.0))
        terms[f"{name}*Nx^{N - k}*n^{k}"] = c * N_x ** (N - k) * n ** k
    return {"terms": terms, "total": sum(terms.values())}


def fit_cost_coefficients(N: int, N_x: int, ns: np.ndarray,
                          costs: np.ndarray) -> dict:
    """Least-squares fit of the cost polynomial from instrumented runs."""
    if N not in _COST_POWERS:
        raise ValueError("cost fit defined for N in {3, 4}")
    names = _COST_POWERS[N]
    ns = np.asarray(ns, dtype=float)
    design = np.stack([N_x ** (N - k) * ns ** k for k in range(len(names))],
                      axis=1)
    sol, *_ = np.linalg.lstsq(design, np.asarray(costs, dtype=float),
                              rcond=None)
    return dict(zip(names, sol))
