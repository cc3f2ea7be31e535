"""Convolution coefficients of the fully discrete transparent boundary row.

The discrete boundary kernel is the sequence ``beta^n`` whose generating
function is ``sqrt(b(w)^2 - 1)`` with ``b = 1 + (alpha/2)(1-w)/(1+w)``.
Three independent routes to it live here:

* ``compute_beta`` - closed-form ``beta^0`` plus the O(n^2) generator
  recurrence ``n beta^n = sum_k phi^{n-k} beta^k``,
* ``beta_oracle`` - direct inverse Z-transform on a circle ``|w| = rho_c``
  outside the unit disk (the integrand has a simple pole at w = -1),
* exact plane-wave source factors ``g^n`` for a nonzero exterior
  initial wave ``exp(iqx)``.

Branch selection: ``beta^0`` is the square root of ``alpha^2/4 - alpha``
for which the retained characteristic mode decays, i.e.
``|b_inf - beta^0| < 1`` with ``b_inf = 1 - alpha/2``. The large-n tail
oscillates between the two values ``+alpha`` and ``-alpha`` without
decaying (even indices tend to ``-alpha`` for this branch).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularParameterError

_LD = np.longdouble
_CLD = np.clongdouble
_PI_LD = _LD("3.141592653589793238462643383279502884")


def branch_beta0(alpha: complex) -> complex:
    """Root of alpha^2/4 - alpha selected by |b_inf - beta0| < 1."""
    if alpha == 0:
        raise SingularParameterError("alpha must be nonzero")
    b_inf = 1.0 - alpha / 2.0
    r = complex(np.sqrt(complex(alpha * alpha / 4.0 - alpha)))
    return r if abs(b_inf - r) < 1.0 else -r


def phi_sequence(alpha: complex, n_max: int) -> np.ndarray:
    """Generator coefficients phi^1..phi^n_max (index 0 unused, zero).

    phi^{2m+1} = -3/2 + rho^{2m+1}/2 and phi^{2m} = (1 - rho^{2m})/2 with
    rho = (1 + alpha/4)/(1 - alpha/4). Well defined at alpha = 0, where
    phi^{odd} = -1 and phi^{even} = 0 exactly.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if alpha == 4:
        raise SingularParameterError("alpha = 4 is a pole of the generator ratio")
    rho = (1.0 + alpha / 4.0) / (1.0 - alpha / 4.0)
    phi = np.zeros(n_max + 1, dtype=complex)
    if n_max >= 1:
        k = np.arange(1, n_max + 1)
        rk = rho ** k
        phi[1:] = np.where(k % 2 == 1, -1.5 + 0.5 * rk, 0.5 * (1.0 - rk))
    return phi


@dataclass(frozen=True)
class TbcCoefficients:
    """Immutable bundle of boundary-kernel data shared by all closure rows."""

    alpha: complex
    beta: np.ndarray   # beta^0 .. beta^n_max
    phi: np.ndarray    # phi^0 (unused) .. phi^n_max
    rho: complex

    @property
    def beta0(self) -> complex:
        return complex(self.beta[0])

    @property
    def n_max(self) -> int:
        return len(self.beta) - 1


def compute_beta(alpha: complex, n_max: int) -> TbcCoefficients:
    """Boundary kernel beta^0..beta^n_max via the generator recurrence."""
    if alpha == 0:
        raise SingularParameterError("alpha must be nonzero")
    if alpha == 4:
        raise SingularParameterError("alpha = 4 is a pole of the generator ratio")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    phi = phi_sequence(alpha, n_max)
    beta = np.zeros(n_max + 1, dtype=complex)
    beta[0] = branch_beta0(alpha)
    # n beta^n = sum_{k=0}^{n-1} phi^{n-k} beta^k; phi reversed gives a dot.
    phi_rev = phi[1:][::-1]
    for n in range(1, n_max + 1):
        beta[n] = np.dot(phi_rev[n_max - n:], beta[:n]) / n
    rho = (1.0 + alpha / 4.0) / (1.0 - alpha / 4.0)
    return TbcCoefficients(alpha=alpha, beta=beta, phi=phi, rho=rho)


def beta_oracle(alpha: complex, n_max: int, radius: float = 1.05,
                samples: int = 2 ** 16) -> np.ndarray:
    """Inverse Z-transform of sqrt(b^2 - 1) on the circle |w| = radius.

    beta^n ~ (radius^n / M) sum_j f(radius e^{i theta_j}) e^{i n theta_j}.
    The integrand is evaluated in its analytic product form
    ``i sqrt(alpha) sqrt(u) sqrt(1 - alpha u / 4)`` with ``u = (w-1)/(w+1)``,
    sign-anchored by continuity from w = infinity (u -> 1) against the
    branch rule of ``branch_beta0``.

    Accuracy note: round-off in the samples is amplified by radius^n, so
    the sums run in extended precision with exact integer twiddle indexing;
    reliable n is capped near (precision digits)/log10(radius).
    """
    if radius <= 1.0:
        raise ValueError("radius must exceed 1 (pole at w = -1 on |w| = 1)")
    if samples < 8 * max(n_max, 1) or samples & (samples - 1):
        raise ValueError("samples must be a power of two >= 8 * n_max")
    if alpha == 0:
        raise SingularParameterError("alpha must be nonzero")

    j = np.arange(samples)
    theta = 2 * _PI_LD * j.astype(_LD) / _LD(samples)
    tw = np.cos(theta) + (np.sin(theta) * 1j).astype(_CLD)
    w = _LD(radius) * tw
    a = _CLD(alpha)
    u = (w - 1) / (w + 1)
    f = 1j * np.sqrt(a) * np.sqrt(u) * np.sqrt(1 - a / 4 * u)

    # continuity anchor at w -> infinity, then a walk around the circle to
    # heal any residual principal-branch sign flips (none for imaginary alpha)
    f_inf = complex(1j * np.sqrt(a) * np.sqrt(1 - a / 4))
    b0 = branch_beta0(alpha)
    if abs(f_inf - b0) > abs(f_inf + b0):
        f = -f
    df = np.abs(np.diff(f))
    sf = np.abs(f[1:] + f[:-1])
    jumps = np.nonzero(df > sf)[0]
    if jumps.size:
        flip = np.ones(samples, dtype=np.int8)
        for idx in jumps:
            flip[idx + 1:] *= -1
        f = f * flip

    out = np.zeros(n_max + 1, dtype=_CLD)
    r = _LD(1)
    mask = samples - 1
    for n in range(n_max + 1):
        out[n] = r * np.dot(f, tw[(n * j) & mask]) / samples
        r *= _LD(radius)
    return out.astype(complex)


@dataclass(frozen=True)
class PlaneWaveExterior:
    """Exterior plane-wave data exp(iqx) with per-step factors g^n.

    ``g^n = ((alpha + 2 - 2 cos qh)/(alpha - 2 + 2 cos qh))^n``; for real q
    and purely imaginary alpha every ``g^n`` is unimodular. ``amplitude``
    is 0 (no exterior wave) or 1.
    """

    amplitude: int
    q: float
    g: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.g) - 1


def compute_g(alpha: complex, q: float, h: float, n_max: int,
              amplitude: int = 1) -> PlaneWaveExterior:
    """Plane-wave factors g^0..g^n_max by repeated multiplication."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    den = alpha - 2.0 + 2.0 * np.cos(q * h)
    if den == 0:
        raise SingularParameterError(
            "alpha - 2 + 2 cos(qh) vanishes; the plane-wave ratio is singular")
    ratio = (alpha + 2.0 - 2.0 * np.cos(q * h)) / den
    g = np.empty(n_max + 1, dtype=complex)
    g[0] = 1.0
    for n in range(1, n_max + 1):
        g[n] = g[n - 1] * ratio
    return PlaneWaveExterior(amplitude=amplitude, q=q, g=g)
