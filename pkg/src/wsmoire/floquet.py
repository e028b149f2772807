"""Floquet monodromy of the k-space equation for the linear-tilt chain.

With a uniform tilt the eigenproblem in the Bloch representation becomes
``i 2 omega dY/dk = G_k Y`` over one Brillouin zone.  The propagator of that
equation at ``E = 0`` over ``k in [0, 2 pi]`` is the 2x2 monodromy matrix
``U0``; its eigenvalues ``lambda = exp(i pi eps / omega)`` give the two base
quasi-energies from which both Wannier-Stark ladders follow by shifts of
``2 omega``.  ``det U0 = 1``, so ``trace(U0)`` alone decides whether the
ladders are real (``|tr| < 2``), a complex-conjugate pair (``|tr| > 2``) or a
single coalescing ladder (``|tr| = 2`` with a Jordan-block ``U0``).
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .errors import ConvergenceError, GridPointError, PreconditionError, SpecError, SymmetryViolationError

__all__ = [
    "BulkParams",
    "MonodromyResult",
    "RealLadders",
    "ComplexLadders",
    "EPLadder",
    "PhaseClass",
    "generator",
    "monodromy",
    "classify",
    "is_jordan_block",
    "find_ep_along_omega",
    "phase_diagram",
    "initial_steps",
]

DEFAULT_TOL = 1e-6
CONVERGENCE_TOL = 1e-10
DET_TOL = 1e-8
MAX_STEPS = 2**22


@dataclass(frozen=True)
class BulkParams:
    J: float
    beta: float
    omega: float

    def __post_init__(self):
        for name in ("J", "beta", "omega"):
            if not math.isfinite(getattr(self, name)):
                raise SpecError(f"{name} must be finite")
        if self.J < 0 or self.beta < 0:
            raise SpecError("J and beta must be >= 0")
        if not self.omega > 0:
            raise SpecError("omega must be > 0")


@dataclass(frozen=True)
class MonodromyResult:
    params: BulkParams
    u0: np.ndarray
    lambda1: complex
    lambda2: complex
    eps1: complex
    eps2: complex
    trace: complex
    det_residual: float
    steps_used: int

    @property
    def converged(self) -> bool:
        return self.det_residual < DET_TOL


@dataclass(frozen=True)
class RealLadders:
    eps0: float
    classifier_trace: float
    imag_trace: float = 0.0
    label = "real"


@dataclass(frozen=True)
class ComplexLadders:
    im_eps0: float
    classifier_trace: float
    imag_trace: float = 0.0
    label = "complex"


@dataclass(frozen=True)
class EPLadder:
    sign: int
    classifier_trace: float
    imag_trace: float = 0.0
    label = "ep"


PhaseClass = Union[RealLadders, ComplexLadders, EPLadder]


def generator(k: float, E: complex, p: BulkParams) -> np.ndarray:
    """``G_k`` for energy ``E``; the ODE is ``i 2 omega dY/dk = G_k Y``."""
    off_upper = -p.J - 1j * p.beta * cmath.exp(-1j * k)
    off_lower = -p.J - 1j * p.beta * cmath.exp(1j * k)
    return np.array(
        [[E - p.omega / 2, off_upper], [off_lower, E - 1.5 * p.omega]], dtype=complex
    )


def initial_steps(p: BulkParams) -> int:
    return max(256, math.ceil(64 * (1 + (p.J + p.beta) / p.omega)))


@numba.njit(cache=True)
def _rk4_kernel(J, beta, omega, n):
    """Classical RK4 for ``dY/dk = G_k^0 Y / (2 i omega)`` with ``Y(0) = I``."""
    h = 2 * math.pi / n
    s = 1.0 / (2j * omega)
    a = s * (-omega / 2)
    d = s * (-1.5 * omega)
    y00 = 1 + 0j
    y01 = 0j
    y10 = 0j
    y11 = 1 + 0j
    b1 = s * (-J - 1j * beta)
    c1 = b1
    for i in range(n):
        k_mid = (i + 0.5) * h
        k_end = (i + 1) * h
        e2 = complex(math.cos(k_mid), math.sin(k_mid))
        e3 = complex(math.cos(k_end), math.sin(k_end))
        b2 = s * (-J - 1j * beta * e2.conjugate())
        c2 = s * (-J - 1j * beta * e2)
        b3 = s * (-J - 1j * beta * e3.conjugate())
        c3 = s * (-J - 1j * beta * e3)

        k100 = a * y00 + b1 * y10
        k101 = a * y01 + b1 * y11
        k110 = c1 * y00 + d * y10
        k111 = c1 * y01 + d * y11

        z00 = y00 + 0.5 * h * k100
        z01 = y01 + 0.5 * h * k101
        z10 = y10 + 0.5 * h * k110
        z11 = y11 + 0.5 * h * k111
        k200 = a * z00 + b2 * z10
        k201 = a * z01 + b2 * z11
        k210 = c2 * z00 + d * z10
        k211 = c2 * z01 + d * z11

        z00 = y00 + 0.5 * h * k200
        z01 = y01 + 0.5 * h * k201
        z10 = y10 + 0.5 * h * k210
        z11 = y11 + 0.5 * h * k211
        k300 = a * z00 + b2 * z10
        k301 = a * z01 + b2 * z11
        k310 = c2 * z00 + d * z10
        k311 = c2 * z01 + d * z11

        z00 = y00 + h * k300
        z01 = y01 + h * k301
        z10 = y10 + h * k310
        z11 = y11 + h * k311
        k400 = a * z00 + b3 * z10
        k401 = a * z01 + b3 * z11
        k410 = c3 * z00 + d * z10
        k411 = c3 * z01 + d * z11

        y00 += h / 6 * (k100 + 2 * k200 + 2 * k300 + k400)
        y01 += h / 6 * (k101 + 2 * k201 + 2 * k301 + k401)
        y10 += h / 6 * (k110 + 2 * k210 + 2 * k310 + k410)
        y11 += h / 6 * (k111 + 2 * k211 + 2 * k311 + k411)
        b1 = b3
        c1 = c3

    out = np.empty((2, 2), dtype=np.complex128)
    out[0, 0] = y00
    out[0, 1] = y01
    out[1, 0] = y10
    out[1, 1] = y11
    return out


def _rk4_propagator(p: BulkParams, n: int) -> np.ndarray:
    return _rk4_kernel(float(p.J), float(p.beta), float(p.omega), int(n))


def _base_point(lam: complex, omega: float) -> complex:
    """``eps = omega/(i pi) Log(lam)``, Log with imaginary part in (-pi, pi]."""
    log = cmath.log(lam)
    if log.imag <= -math.pi + 1e-15:
        log = complex(log.real, math.pi)
    return omega * log / (1j * math.pi)


def _eigen_2x2(u: np.ndarray):
    tr = u[0, 0] + u[1, 1]
    det = u[0, 0] * u[1, 1] - u[0, 1] * u[1, 0]
    disc = cmath.sqrt(tr * tr / 4 - det)
    big = tr / 2 + disc if abs(tr / 2 + disc) >= abs(tr / 2 - disc) else tr / 2 - disc
    small = det / big if big != 0 else tr / 2 - disc
    return complex(tr), complex(det), complex(big), complex(small)


def _result(p: BulkParams, u: np.ndarray, steps: int) -> MonodromyResult:
    tr, _, la, lb = _eigen_2x2(u)
    ea, eb = _base_point(la, p.omega), _base_point(lb, p.omega)
    # eps1 is the branch with the larger Re + Im: +eps0 for real ladders, +i|Im| for complex ones
    if (eb.real + eb.imag) > (ea.real + ea.imag):
        la, lb, ea, eb = lb, la, eb, ea
    u = u.copy()
    u.setflags(write=False)
    return MonodromyResult(
        params=p, u0=u, lambda1=la, lambda2=lb, eps1=ea, eps2=eb, trace=tr,
        det_residual=abs(la * lb - 1), steps_used=steps,
    )


def monodromy(p: BulkParams, steps: Optional[int] = None) -> MonodromyResult:
    """Monodromy matrix by fixed-step RK4 over ``k in [0, 2 pi]``.

    With ``steps=None`` the step count starts at :func:`initial_steps` and is
    doubled until the matrix entries move by less than ``1e-10`` (relative to
    ``max(1, |U0|)``).  Raises :class:`ConvergenceError` past ``2**22`` steps.
    """
    if steps is not None:
        if steps < 16:
            raise PreconditionError("need at least 16 steps")
        return _result(p, _rk4_propagator(p, int(steps)), int(steps))

    n = initial_steps(p)
    u = _rk4_propagator(p, n)
    drift = float("inf")
    while 2 * n <= MAX_STEPS:
        n *= 2
        u_next = _rk4_propagator(p, n)
        drift = float(np.abs(u_next - u).max() / max(1.0, np.abs(u_next).max()))
        u = u_next
        if drift < CONVERGENCE_TOL:
            return _result(p, u, n)
    raise ConvergenceError(
        f"monodromy did not converge for {p} within {MAX_STEPS} steps", residual=drift
    )


def classify(m: MonodromyResult, tol: float = DEFAULT_TOL) -> PhaseClass:
    if not m.converged:
        raise PreconditionError(f"monodromy not converged (det residual {m.det_residual:.3e})")
    im_tr = m.trace.imag
    if abs(im_tr) >= tol:
        raise SymmetryViolationError(f"trace has imaginary part {im_tr:.3e}")
    tr = m.trace.real
    if abs(tr) < 2 - tol:
        return RealLadders(eps0=abs(m.eps1.real), classifier_trace=tr, imag_trace=im_tr)
    if abs(tr) > 2 + tol:
        return ComplexLadders(im_eps0=abs(m.eps1.imag), classifier_trace=tr, imag_trace=im_tr)
    return EPLadder(sign=1 if tr > 0 else -1, classifier_trace=tr, imag_trace=im_tr)


def is_jordan_block(m: Union[MonodromyResult, np.ndarray], tol: float = DEFAULT_TOL) -> bool:
    """True when ``U0`` has a double eigenvalue but is not a scalar matrix.

    Near a Jordan point the eigenvalue splitting grows like the square root
    of any perturbation, so coincidence is tested on the discriminant
    ``|lambda1 - lambda2|**2 <= tol``.
    """
    u = np.asarray(m.u0 if isinstance(m, MonodromyResult) else m, dtype=complex)
    tr, _, la, lb = _eigen_2x2(u)
    if abs(la - lb) ** 2 > tol:
        return False
    residual = u - (tr / 2) * np.eye(2)
    return float(np.abs(residual).max()) > tol


def _trace_excess(J: float, beta: float, omega: float) -> float:
    m = monodromy(BulkParams(J, beta, omega))
    return abs(m.trace.real) - 2.0


def _scan_nodes(J: float, beta: float, omega_lo: float, omega_hi: float) -> np.ndarray:
    # trace(U0) oscillates in 1/omega with period >= 2/(J + beta) (the adiabatic
    # phase is at most pi (J + beta) / omega); 32 cells per period keeps every
    # complex window, and so every EP pair, in separate cells.
    span = 1.0 / omega_lo - 1.0 / omega_hi
    period = 2.0 / max(J + beta, 1e-12)
    cells = max(64, math.ceil(32 * span / period))
    inv = np.linspace(1.0 / omega_hi, 1.0 / omega_lo, cells + 1)
    return 1.0 / inv


def find_ep_along_omega(
    J: float, beta: float, omega_lo: float, omega_hi: float, tol: float = 1e-9
) -> list:
    """Exceptional points (``|trace U0| = 2`` crossings) in ``[omega_lo, omega_hi]``."""
    if not (0 < omega_lo < omega_hi):
        raise PreconditionError("need 0 < omega_lo < omega_hi")
    nodes = _scan_nodes(J, beta, omega_lo, omega_hi)[::-1]  # ascending omega
    values = [_trace_excess(J, beta, w) for w in nodes]
    found = []
    for i in range(len(nodes) - 1):
        lo, hi = nodes[i], nodes[i + 1]
        f_lo, f_hi = values[i], values[i + 1]
        if f_lo == 0.0:
            found.append(float(lo))
            continue
        if f_lo * f_hi > 0 or f_hi == 0.0:
            continue
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            f_mid = _trace_excess(J, beta, mid)
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        found.append(float(0.5 * (lo + hi)))
    if values and values[-1] == 0.0:
        found.append(float(nodes[-1]))
    return sorted(found)


def _cell(args):
    j, b, tol = args
    try:
        m = monodromy(BulkParams(j, b, 1.0))
        return m, classify(m, tol)
    except Exception as exc:  # noqa: BLE001 - re-raised or recorded by the caller
        return exc, None


def evaluate_grid(
    j_over_omega: Sequence[float], beta_over_omega: Sequence[float],
    tol: float = DEFAULT_TOL, workers: int = 1,
) -> list:
    """Row-major list of ``(j, b, MonodromyResult | Exception, PhaseClass | None)``.

    Rows follow ``beta_over_omega`` and columns ``j_over_omega``, both in the
    order given.  Output order never depends on ``workers``.
    """
    cells = [(float(j), float(b), tol) for b in beta_over_omega for j in j_over_omega]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, cells, chunksize=max(1, len(cells) // (4 * workers))))
    else:
        results = [_cell(c) for c in cells]
    return [(j, b, m, c) for (j, b, _), (m, c) in zip(cells, results)]


def phase_diagram(
    j_over_omega: Sequence[float], beta_over_omega: Sequence[float],
    tol: float = DEFAULT_TOL, workers: int = 1,
) -> list:
    """Classes on the grid at ``omega = 1``; ``result[i][j]`` is ``(beta[i], J[j])``."""
    if len(j_over_omega) == 0 or len(beta_over_omega) == 0:
        raise PreconditionError("grids must be non-empty")
    if any(j < 0 for j in j_over_omega) or any(b < 0 for b in beta_over_omega):
        raise PreconditionError("need J/omega >= 0 and beta/omega >= 0")
    cells = evaluate_grid(j_over_omega, beta_over_omega, tol, workers)
    rows = []
    width = len(j_over_omega)
    for start in range(0, len(cells), width):
        row = []
        for j, b, m, cls in cells[start:start + width]:
            if cls is None:
                raise GridPointError(f"cell (J/w={j}, b/w={b}) failed: {m}", j, b) from m
            row.append(cls)
        rows.append(row)
    return rows
