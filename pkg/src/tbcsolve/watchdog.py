"""Memory watchdog: refuse runs whose boundary-history storage would blow up.

The closed-form bound (N_x + 2 N_tau)^N - N_x^N counts every complex value
the recursion keeps between steps; at 16 bytes each this predicts the
dominant allocation of a run before it starts.
"""

from __future__ import annotations

from .errors import MemoryBudgetError
from .hierarchy import nv_estimate

DEFAULT_BUDGET_BYTES = 8 * 1024 ** 3  # 8 GiB
BYTES_PER_VALUE = 16


def projected_bytes(dim: int, n_x: int, n_tau_levels: int) -> int:
    return nv_estimate(dim, n_x, n_tau_levels) * BYTES_PER_VALUE


def check_memory_budget(dim: int, n_x: int, n_tau_levels: int,
                        budget_bytes: int | None = None) -> int:
    budget = DEFAULT_BUDGET_BYTES if budget_bytes is None else budget_bytes
    need = projected_bytes(dim, n_x, n_tau_levels)
    if need > budget:
        raise MemoryBudgetError(
            f"projected boundary storage {need / 1024**3:.2f} GiB exceeds "
            f"budget {budget / 1024**3:.2f} GiB "
            f"(dim={dim}, N_x={n_x}, time levels={n_tau_levels})")
    return need
