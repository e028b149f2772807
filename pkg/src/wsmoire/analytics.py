"""Closed-form and quadrature oracles for the Floquet and lattice results."""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import DomainError, NumericError, PreconditionError

__all__ = [
    "EPCurvePoint",
    "dimer_multipliers",
    "d_integral",
    "ep_curve",
    "hermitian_dimer_spectrum",
    "waveguide_force_profile",
]


@dataclass(frozen=True)
class EPCurvePoint:
    n: int
    omega: float
    d_value: float


def dimer_multipliers(beta: float, omega: float) -> tuple:
    """Floquet multipliers ``exp(+-i Lambda)`` of the decoupled-dimer chain (``J = 0``).

    ``Lambda = pi * sqrt(1/4 - (beta/omega)**2)`` is real below ``beta = omega/2``,
    imaginary above it and zero at the coalescence point.
    """
    if not omega > 0 or beta < 0:
        raise PreconditionError("need omega > 0 and beta >= 0")
    lam = math.pi * cmath.sqrt(0.25 - (beta / omega) ** 2)
    return cmath.exp(1j * lam), cmath.exp(-1j * lam)


def _integrand(theta, J: float, beta: float):
    # numpy's complex sqrt is the principal branch (Re >= 0)
    return np.sqrt(J * J - beta * beta + 2j * beta * J * np.cos(theta))


def d_integral(J: float, beta: float) -> float:
    """``d = int_0^pi sqrt(J^2 - beta^2 + 2 i beta J cos(theta)) dtheta``.

    The integrand at ``pi - theta`` is the conjugate of the one at ``theta``, so
    the imaginary part cancels; it is computed anyway and checked.
    """
    if not J > 0 or beta < 0:
        raise PreconditionError("need J > 0 and beta >= 0")
    # for beta > J the principal branch jumps at theta = pi/2
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=200, points=[math.pi / 2])
    re, _ = quad(lambda t: _integrand(t, J, beta).real, 0.0, math.pi, **opts)
    with warnings.catch_warnings():
        # the exact value is zero, so quad cannot meet a relative target; the size is checked below
        warnings.simplefilter("ignore", IntegrationWarning)
        im, _ = quad(lambda t: _integrand(t, J, beta).imag, 0.0, math.pi,
                     epsabs=1e-13 * abs(re), limit=200, points=[math.pi / 2])
    if abs(im) >= 1e-10 * abs(re):
        raise NumericError(f"d integral has residual imaginary part {im:.3e}")
    return float(re)


def ep_curve(J: float, beta: float, n_max: int) -> list:
    """Weak-field EP estimate ``omega_n = d / (4 n pi + 2 pi)``, ``n = 0..n_max``.

    Points come out in descending ``omega`` (ascending ``n``).
    """
    if n_max < 0:
        raise PreconditionError("n_max must be >= 0")
    d = d_integral(J, beta)
    return [EPCurvePoint(n, d / (4 * n * math.pi + 2 * math.pi), d) for n in range(n_max + 1)]


def hermitian_dimer_spectrum(J: float, omega: float, l_range: Iterable[int]) -> list:
    """Eigenvalue pairs ``(E_minus, E_plus)`` of the ``beta = 0`` dimers.

    Block ``l`` couples sites ``2l`` and ``2l+1`` of the linear-tilt chain;
    the eigenvalues are ``omega (2l + 1) -+ sqrt(J^2 + omega^2 / 4)``.
    """
    if J < 0 or not omega > 0:
        raise PreconditionError("need J >= 0 and omega > 0")
    pairs = []
    for l in l_range:
        block = np.array([[omega * (2 * l + 0.5), J], [J, omega * (2 * l + 1.5)]])
        lo, hi = np.linalg.eigvalsh(block)
        pairs.append((float(lo), float(hi)))
    return pairs


def waveguide_force_profile(l: int) -> float:
    """Inertial force ``ln(0.002 l + 12.6) / (0.002 l)`` on waveguide ``l`` of a bent array."""
    if l <= 0:
        raise DomainError("waveguide index must be >= 1")
    x = 0.002 * l
    return math.log(x + 12.6) / x
