"""Non-Hermitian SSH chain in a position-dependent on-site potential.

Sites carry integer labels ``l = -n/2, ..., n/2 - 1``.  Even labels are the A
sublattice, odd labels the B sublattice.  The bond ``(2j, 2j+1)`` carries the
real hopping ``J`` and the bond ``(2j-1, 2j)`` the imaginary hopping ``i*beta``,
with the same entry in both directions, so the Hamiltonian is complex
symmetric rather than Hermitian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, PreconditionError, SiteIndexError, SizeError, SpecError

__all__ = [
    "Linear",
    "Logarithmic",
    "Table",
    "PotentialSpec",
    "LatticeSpec",
    "StateVector",
    "site_indices",
    "potential_value",
    "local_slope",
    "potential_profile",
    "hopping_bonds",
    "build_hamiltonian",
    "sparse_hamiltonian",
    "gaussian_state",
    "flat_state",
    "symmetry_residuals",
]


@dataclass(frozen=True)
class Linear:
    """Uniform tilt ``V_l = omega * (l + 1/2)``."""

    omega: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise SpecError(f"linear slope must be finite and > 0, got {self.omega}")


@dataclass(frozen=True)
class Logarithmic:
    """``V_l = ln(gamma*l + tau) / gamma``; local slope ``1/(gamma*l + tau)``."""

    gamma: float
    tau: float

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise SpecError(f"gamma must be finite and > 0, got {self.gamma}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise SpecError(f"tau must be finite and > 0, got {self.tau}")


@dataclass(frozen=True)
class Table:
    """Explicit on-site energies, listed in chain order starting at ``l = -n/2``."""

    values: tuple

    def __init__(self, values: Sequence[float]):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise SpecError("potential table is empty")
        if not all(math.isfinite(v) for v in vals):
            raise SpecError("potential table contains non-finite entries")
        object.__setattr__(self, "values", vals)

    def _position(self, l: int) -> int:
        pos = l + len(self.values) // 2
        if not 0 <= pos < len(self.values):
            raise SiteIndexError(f"site {l} outside table of {len(self.values)} sites")
        return pos


PotentialSpec = Union[Linear, Logarithmic, Table]


@dataclass(frozen=True)
class LatticeSpec:
    J: float
    beta: float
    n_sites: int
    potential: PotentialSpec

    def __post_init__(self):
        if not (math.isfinite(self.J) and self.J > 0):
            raise SpecError(f"J must be finite and > 0, got {self.J}")
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise SpecError(f"beta must be finite and >= 0, got {self.beta}")
        if int(self.n_sites) != self.n_sites or self.n_sites <= 0 or self.n_sites % 2:
            raise SpecError(f"n_sites must be a positive even integer, got {self.n_sites}")
        pot = self.potential
        if not isinstance(pot, (Linear, Logarithmic, Table)):
            raise SpecError(f"unknown potential {pot!r}")
        if isinstance(pot, Table) and len(pot.values) != self.n_sites:
            raise SpecError(
                f"potential table has {len(pot.values)} entries for {self.n_sites} sites"
            )
        if isinstance(pot, Logarithmic):
            lo = -self.n_sites // 2
            if pot.gamma * lo + pot.tau <= 0:
                raise SpecError("gamma*l + tau must stay positive on every site")

    @property
    def sites(self) -> np.ndarray:
        return site_indices(self.n_sites)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or not np.all(np.isfinite(amps)):
            raise SpecError("state amplitudes must be a finite 1-d array")
        if self.normalized and abs(np.vdot(amps, amps).real - 1.0) > 1e-12:
            raise SpecError("state flagged normalized but sum |a|^2 != 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self) -> int:
        return self.amplitudes.shape[0]


def site_indices(n_sites: int) -> np.ndarray:
    return np.arange(-(n_sites // 2), n_sites - n_sites // 2)


def potential_value(spec: PotentialSpec, l: int) -> float:
    if isinstance(spec, Linear):
        return spec.omega * (l + 0.5)
    if isinstance(spec, Logarithmic):
        arg = spec.gamma * l + spec.tau
        if arg <= 0:
            raise DomainError(f"gamma*l + tau = {arg} <= 0 at site {l}")
        return math.log(arg) / spec.gamma
    if isinstance(spec, Table):
        return spec.values[spec._position(l)]
    raise SpecError(f"unknown potential {spec!r}")


def local_slope(spec: PotentialSpec, l: int) -> float:
    """Local field ``dV/dl``; a forward difference for tabulated potentials."""
    if isinstance(spec, Linear):
        return spec.omega
    if isinstance(spec, Logarithmic):
        arg = spec.gamma * l + spec.tau
        if arg <= 0:
            raise DomainError(f"gamma*l + tau = {arg} <= 0 at site {l}")
        return 1.0 / arg
    if isinstance(spec, Table):
        pos = spec._position(l)
        if pos + 1 >= len(spec.values):
            raise SiteIndexError(f"no forward neighbour for site {l}")
        return spec.values[pos + 1] - spec.values[pos]
    raise SpecError(f"unknown potential {spec!r}")


def potential_profile(spec: LatticeSpec) -> np.ndarray:
    l = spec.sites
    pot = spec.potential
    if isinstance(pot, Linear):
        return pot.omega * (l + 0.5)
    if isinstance(pot, Logarithmic):
        return np.log(pot.gamma * l + pot.tau) / pot.gamma
    return np.array(pot.values, dtype=float)


def hopping_bonds(spec: LatticeSpec) -> np.ndarray:
    """Bond ``(l, l+1)`` for each consecutive pair: ``J`` if ``l`` is even, else ``i*beta``."""
    left = spec.sites[:-1]
    return np.where(left % 2 == 0, complex(spec.J), 1j * spec.beta)


def build_hamiltonian(spec: LatticeSpec) -> np.ndarray:
    """Dense ``n x n`` complex-symmetric Hamiltonian with open boundaries."""
    n = spec.n_sites
    h = np.zeros((n, n), dtype=complex)
    h[np.arange(n), np.arange(n)] = potential_profile(spec)
    bonds = hopping_bonds(spec)
    i = np.arange(n - 1)
    h[i, i + 1] = bonds
    h[i + 1, i] = bonds
    return h


def sparse_hamiltonian(spec: LatticeSpec, shift: float = 0.0) -> sp.csr_matrix:
    """Tridiagonal Hamiltonian in CSR form, diagonal offset by ``-shift``."""
    bonds = hopping_bonds(spec)
    diag = potential_profile(spec).astype(complex) - shift
    return sp.diags([bonds, diag, bonds], [-1, 0, 1], format="csr")


def gaussian_state(n_sites: int, width_coeff: float) -> StateVector:
    """Normalized ``exp(-width_coeff * l**2)`` wavepacket centred on site ``l = 0``."""
    if n_sites < 2:
        raise SizeError("gaussian state needs at least two sites")
    if not width_coeff > 0:
        raise SpecError("width_coeff must be > 0")
    l = site_indices(n_sites)
    amps = np.exp(-width_coeff * l.astype(float) ** 2).astype(complex)
    amps /= np.linalg.norm(amps)
    return StateVector(amps)


def flat_state(n_sites: int) -> StateVector:
    if n_sites < 1:
        raise SizeError("flat state needs at least one site")
    return StateVector(np.full(n_sites, 1.0 / math.sqrt(n_sites), dtype=complex))


def symmetry_residuals(spec: LatticeSpec) -> dict:
    """Bulk residuals of the ramped-translation and modified-reflection identities.

    ``ramped`` is ``max |T2 H T2^-1 - (H - 2 omega)|`` and ``reflection`` is
    ``max |R0 H R0^-1 + H|``, both over interior sites only.
    """
    if not isinstance(spec.potential, Linear):
        raise PreconditionError("symmetry identities need a linear potential")
    n = spec.n_sites
    if n < 8:
        raise SizeError("symmetry check needs at least 8 sites")
    omega = spec.potential.omega
    h = build_hamiltonian(spec)
    l = spec.sites

    # T2|l> = |l+2>, truncated at the chain end
    t2 = np.zeros((n, n))
    t2[np.arange(2, n), np.arange(n - 2)] = 1.0
    # R0|l> = (-1)^l |-1-l>; a signed permutation, so R0^-1 = R0^T
    r0 = np.zeros((n, n))
    r0[(-1 - l) - l[0], np.arange(n)] = np.where(l % 2 == 0, 1.0, -1.0)

    inner = slice(2, n - 2)
    ramped = t2 @ h @ t2.T - (h - 2 * omega * np.eye(n))
    reflected = r0 @ h @ r0.T + h
    return {
        "ramped": float(np.abs(ramped[inner, inner]).max()),
        "reflection": float(np.abs(reflected[inner, inner]).max()),
    }
