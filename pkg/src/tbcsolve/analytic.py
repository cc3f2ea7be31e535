"""Closed-form references: drifting Gaussian packets, the relative error
metric V, and the 1D free-space propagator.

Units: hbar = 1, 2m = 1, so i psi_t = -Laplacian psi in free space and a
plane wave exp(ikx) travels at group velocity 2k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, MetricUndefinedError


@dataclass(frozen=True)
class GaussianPacketParams:
    """One drifting Gaussian: waist w, speed coefficient xi, direction
    cosines. The envelope center moves at 2 xi (cos a, cos b, cos c)."""

    waist: float
    xi: float
    cos_a: float = 1.0
    cos_b: float = 0.0
    cos_g: float = 0.0

    def __post_init__(self):
        if self.waist <= 0:
            raise ConfigurationError("waist must be positive")


# the three packets of the free-space accuracy experiment
TABLE1 = (
    GaussianPacketParams(18.0, 0.05, 1 / np.sqrt(3), 1 / np.sqrt(3), 1 / np.sqrt(3)),
    GaussianPacketParams(18.0, 0.10, 1 / np.sqrt(2), 1 / np.sqrt(2), 0.0),
    GaussianPacketParams(18.0, 0.02, 1.0, 0.0, 0.0),
)


@dataclass(frozen=True)
class PacketSum:
    packets: tuple = field(default_factory=lambda: TABLE1)

    def __post_init__(self):
        if not self.packets:
            raise ConfigurationError("packet sum must be non-empty")


def gaussian_packet(params: GaussianPacketParams, t: float,
                    x, y=0.0, z=0.0, dim: int = 3) -> np.ndarray:
    """Exact free-space solution psi(t, x, y, z) for one packet.

    The complex width w^2 + 4it stays in the right half plane for all t,
    so the principal branch of its dim/2 power is automatically the
    continuous continuation from t = 0 (where the prefactor is 1).
    """
    w = params.waist
    xi = params.xi
    cz = (params.cos_a, params.cos_b, params.cos_g)[:dim]
    coords = (x, y, z)[:dim]
    s = w * w + 4j * t
    pref = w ** dim / s ** (dim / 2.0)
    phase = 0.0
    env = 0.0
    for c, u in zip(cz, coords):
        u = np.asarray(u)
        phase = phase + 1j * xi * (u - t * xi * c) * c
        env = env + (u - 2 * t * xi * c) ** 2
    return pref * np.exp(phase - env / s)


def packet_sum(psum: PacketSum, t: float, x, y=0.0, z=0.0,
               dim: int = 3) -> np.ndarray:
    out = 0.0
    for p in psum.packets:
        out = out + gaussian_packet(p, t, x, y, z, dim)
    return out


def sample_packet_sum(psum: PacketSum, t: float, coords: np.ndarray,
                      dim: int = 3) -> np.ndarray:
    """Packet sum on the tensor grid coords x coords (x coords)."""
    if dim == 1:
        return packet_sum(psum, t, coords, dim=1)
    if dim == 2:
        X, Y = np.meshgrid(coords, coords, indexing="ij")
        return packet_sum(psum, t, X, Y, dim=2)
    X, Y, Z = np.meshgrid(coords, coords, coords, indexing="ij")
    return packet_sum(psum, t, X, Y, Z, dim=3)


def error_metric_V(numeric: np.ndarray, exact: np.ndarray) -> float:
    """Relative discrepancy sum |num - exact|^2 / sum |exact|^2, over all
    nodes of both arrays (shapes must match)."""
    numeric = np.asarray(numeric)
    exact = np.asarray(exact)
    if numeric.shape != exact.shape:
        raise ConfigurationError(
            f"shape mismatch {numeric.shape} vs {exact.shape}")
    den = float(np.sum(np.abs(exact) ** 2))
    if den == 0.0:
        raise MetricUndefinedError("reference field has zero norm")
    return float(np.sum(np.abs(numeric - exact) ** 2)) / den


def free_propagator_1d(mu: float, nu) -> np.ndarray:
    """1D free kernel sqrt(1/(4 pi i mu)) exp(i nu^2 / (4 mu)).

    mu is the time difference, nu the space difference; mu = 0 is the
    delta-function limit and must be special-cased by the caller.
    """
    if mu == 0:
        raise ConfigurationError("mu = 0 is the delta limit; not evaluable")
    nu = np.asarray(nu)
    return np.sqrt(1.0 / (4j * np.pi * mu)) * np.exp(1j * nu * nu / (4.0 * mu))
