"""Time evolution on the finite chain and the observables built on it."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    AnalysisError,
    ConditioningError,
    DataError,
    GrowthOverflowError,
    PreconditionError,
    SizeError,
    SpecError,
)
from .floquet import BulkParams, ComplexLadders, classify, monodromy
from .lattice import (
    LatticeSpec,
    Linear,
    Logarithmic,
    StateVector,
    build_hamiltonian,
    local_slope,
    potential_profile,
    sparse_hamiltonian,
)

__all__ = [
    "DENSE",
    "STEPWISE",
    "EvolutionConfig",
    "EvolutionRecord",
    "MoireReport",
    "LadderCheck",
    "evolve",
    "bloch_period_estimate",
    "growth_rate",
    "moire_analysis",
    "classify_sites",
    "cell_profile",
    "ladder_structure_check",
    "ladder_structure_details",
    "fold_quasi_energy",
]

DENSE = "dense_diagonalization"
STEPWISE = "stepwise_integration"
DENSE_SITE_LIMIT = 512
CONDITION_LIMIT = 1e8
OVERFLOW_LIMIT = 1e280
LATE_FRACTION = 0.25
EDGE_FRACTION = 0.05


@dataclass(frozen=True)
class EvolutionConfig:
    t_max: float
    n_frames: int = 400
    tolerance: float = 1e-10
    method: Optional[str] = None  # None picks dense up to 512 sites, stepwise beyond
    condition_limit: float = CONDITION_LIMIT

    def __post_init__(self):
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            raise SpecError("t_max must be > 0")
        if int(self.n_frames) != self.n_frames or self.n_frames < 2:
            raise SpecError("n_frames must be an integer >= 2")
        if not 0 < self.tolerance <= 1e-4:
            raise SpecError("tolerance must lie in (0, 1e-4]")
        if self.method not in (None, DENSE, STEPWISE):
            raise SpecError(f"unknown evolution method {self.method!r}")

    def resolved_method(self, n_sites: int) -> str:
        if self.method is not None:
            return self.method
        return DENSE if n_sites <= DENSE_SITE_LIMIT else STEPWISE


@dataclass(frozen=True)
class EvolutionRecord:
    times: np.ndarray
    site_probability: np.ndarray  # frames x sites
    total_probability: np.ndarray
    initial_state: StateVector
    sites: np.ndarray
    method: str
    condition: Optional[float] = None

    @property
    def normalized_profile(self) -> np.ndarray:
        return self.site_probability / self.total_probability[:, None]

    def late_profile(self, fraction: float = LATE_FRACTION) -> np.ndarray:
        """Time average of ``P_l / P`` over the last ``fraction`` of frames."""
        n = self.times.shape[0]
        start = n - max(1, int(math.ceil(fraction * n)))
        return self.normalized_profile[start:].mean(axis=0)

    @property
    def edge_fraction(self) -> float:
        """Late-time probability share held by the outer 5% of sites at each end."""
        late = self.late_profile()
        k = max(1, int(math.ceil(EDGE_FRACTION * late.shape[0])))
        return float((late[:k].sum() + late[-k:].sum()) / late.sum())

    @property
    def edge_flag(self) -> bool:
        return self.edge_fraction > 0.01


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def _check_overflow(times: np.ndarray, totals: np.ndarray) -> None:
    bad = ~np.isfinite(totals) | (totals > OVERFLOW_LIMIT)
    if bad.any():
        first = int(np.argmax(bad))
        reached = float(times[first - 1]) if first > 0 else 0.0
        raise GrowthOverflowError(
            f"P(t) exceeded {OVERFLOW_LIMIT:.0e}; last representable frame at t={reached}", reached
        )


def _evolve_dense(spec: LatticeSpec, psi: np.ndarray, times: np.ndarray, cfg: EvolutionConfig):
    h = build_hamiltonian(spec)
    h -= np.trace(h).real / spec.n_sites * np.eye(spec.n_sites)  # global phase only
    evals, evecs = np.linalg.eig(h)
    condition = float(np.linalg.cond(evecs))
    if not condition < cfg.condition_limit:
        raise ConditioningError(
            f"eigenbasis condition number {condition:.3e} exceeds {cfg.condition_limit:.1e}; "
            f"use {STEPWISE}",
            condition,
        )
    coeffs = np.linalg.solve(evecs, psi)
    probs = np.empty((times.shape[0], spec.n_sites))
    with np.errstate(over="ignore", invalid="ignore"):
        for start in range(0, times.shape[0], 256):
            t = times[start:start + 256]
            amps = evecs @ (coeffs[:, None] * np.exp(-1j * np.outer(evals, t)))
            probs[start:start + 256] = (np.abs(amps) ** 2).T
    return probs, condition


def _evolve_stepwise(spec: LatticeSpec, psi: np.ndarray, times: np.ndarray, cfg: EvolutionConfig):
    shift = float(np.mean(potential_profile(spec)))
    rhs_matrix = -1j * sparse_hamiltonian(spec, shift=shift)

    def rhs(_t, y):
        return rhs_matrix @ y

    log_limit = math.log(OVERFLOW_LIMIT)

    def overflow(_t, y):
        return math.log(max(np.vdot(y, y).real, 1e-300)) - log_limit

    overflow.terminal = True
    atol = cfg.tolerance * 1e-3 * float(np.abs(psi).max())
    sol = solve_ivp(
        rhs, (0.0, float(times[-1])), psi, method="DOP853", t_eval=times,
        rtol=cfg.tolerance, atol=atol, events=overflow,
    )
    if sol.status == 1:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise GrowthOverflowError(
            f"P(t) exceeded {OVERFLOW_LIMIT:.0e}; last representable frame at t={reached}", reached
        )
    if sol.status != 0:
        raise DataError(f"stepwise integration failed: {sol.message}")
    return (np.abs(sol.y.T) ** 2), None


def evolve(spec: LatticeSpec, psi0: StateVector, cfg: EvolutionConfig) -> EvolutionRecord:
    """``P_l(t) = |<l| exp(-iHt) |psi0>|^2`` on ``n_frames`` equally spaced times in ``[0, t_max]``."""
    psi = np.asarray(psi0.amplitudes if isinstance(psi0, StateVector) else psi0, dtype=complex)
    if psi.shape != (spec.n_sites,):
        raise PreconditionError(f"initial state has {psi.shape[0]} amplitudes for {spec.n_sites} sites")
    if not isinstance(psi0, StateVector):
        psi0 = StateVector(psi, normalized=False)
    times = np.linspace(0.0, cfg.t_max, int(cfg.n_frames))
    method = cfg.resolved_method(spec.n_sites)
    if method == DENSE:
        probs, condition = _evolve_dense(spec, psi, times, cfg)
    else:
        probs, condition = _evolve_stepwise(spec, psi, times, cfg)
    totals = probs.sum(axis=1)
    _check_overflow(times, totals)
    return EvolutionRecord(
        times=_frozen(times), site_probability=_frozen(probs), total_probability=_frozen(totals),
        initial_state=psi0, sites=_frozen(spec.sites), method=method, condition=condition,
    )


def bloch_period_estimate(rec: EvolutionRecord) -> float:
    """Dominant period of ``P_l(t)/P(t)``, from the first autocorrelation peak."""
    q = rec.normalized_profile
    dq = q - q.mean(axis=0)
    n = dq.shape[0]
    corr = np.array([np.sum(dq[: n - lag] * dq[lag:]) / (n - lag) for lag in range(n // 2)])
    if corr[0] <= 0:
        raise AnalysisError("profile does not vary in time")
    corr /= corr[0]
    below = np.nonzero(corr < 0)[0]
    if below.size == 0:
        raise AnalysisError("autocorrelation never decorrelates")
    for m in range(int(below[0]) + 1, corr.shape[0] - 1):
        if corr[m] >= corr[m - 1] and corr[m] >= corr[m + 1] and corr[m] > 0:
            denom = corr[m - 1] - 2 * corr[m] + corr[m + 1]
            offset = 0.5 * (corr[m - 1] - corr[m + 1]) / denom if denom != 0 else 0.0
            dt = rec.times[1] - rec.times[0]
            return float((m + offset) * dt)
    raise AnalysisError("no autocorrelation peak found")


def growth_rate(rec: EvolutionRecord, fit_window: float = 0.5) -> float:
    """Least-squares slope of ``ln P(t)`` over the last ``fit_window`` of frames."""
    if not 0 < fit_window <= 1:
        raise PreconditionError("fit_window must lie in (0, 1]")
    n = rec.times.shape[0]
    start = n - max(2, int(math.ceil(fit_window * n)))
    p = rec.total_probability[start:]
    if np.any(p <= 0) or not np.all(np.isfinite(p)):
        raise DataError("non-positive or non-finite total probability")
    slope, _ = np.polyfit(rec.times[start:], np.log(p), 1)
    return float(slope)


@dataclass(frozen=True)
class MoireReport:
    per_site_class: tuple
    local_omega: np.ndarray
    late_time_profile: np.ndarray
    bright_mask: np.ndarray
    predicted_broken_mask: np.ndarray
    overlap_score: float
    n_alternations: int
    class_alternations: int
    broken_probability_share: float
    edge_fraction: float
    threshold_quantile: float
    analysed_mask: np.ndarray = field(repr=False, default=None)


def _classify_one(args):
    J, beta, omega, tol = args
    return classify(monodromy(BulkParams(J, beta, omega)), tol)


def classify_sites(spec: LatticeSpec, tol: float = 1e-6, workers: int = 1) -> tuple:
    """Bulk phase at each site from the local slope of the potential."""
    omegas = np.array([local_slope(spec.potential, int(l)) for l in spec.sites])
    jobs = [(spec.J, spec.beta, float(w), tol) for w in omegas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            classes = list(pool.map(_classify_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        classes = [_classify_one(j) for j in jobs]
    return tuple(classes), omegas


def cell_profile(sites: np.ndarray, profile: np.ndarray) -> np.ndarray:
    """Per-site copy of the dimer sum ``q_{2j} + q_{2j+1}``."""
    cell = np.floor_divide(sites, 2)
    cell = cell - cell[0]
    sums = np.zeros(cell[-1] + 1)
    np.add.at(sums, cell, profile)
    return sums[cell]


def _transitions(mask: np.ndarray) -> int:
    return int(np.count_nonzero(mask[1:] != mask[:-1]))


def moire_analysis(
    spec: LatticeSpec,
    rec: EvolutionRecord,
    threshold_quantile: float = 0.5,
    tol: float = 1e-6,
    edge_exclusion: float = 0.0,
    workers: int = 1,
    site_classes: Optional[tuple] = None,
) -> MoireReport:
    """Compare the late-time bright/dark pattern with the locally predicted phase.

    Sites whose local slope puts them in the broken phase form the predicted
    mask.  The bright mask thresholds the time-averaged late ``P_l/P`` at its
    ``threshold_quantile`` quantile after summing each ``(2j, 2j+1)`` dimer,
    since the A/B imbalance inside a dimer flickers from site to site and says
    nothing about the local phase.  ``edge_exclusion`` drops that fraction of
    sites at each chain end from both masks.
    """
    if not isinstance(spec.potential, Logarithmic):
        raise PreconditionError("moire analysis needs a logarithmic potential")
    if not 0 < threshold_quantile < 1:
        raise PreconditionError("threshold_quantile must lie in (0, 1)")
    if rec.site_probability.shape[1] != spec.n_sites:
        raise PreconditionError("record does not belong to this lattice")
    if site_classes is None:
        classes, omegas = classify_sites(spec, tol, workers)
    else:
        classes = tuple(site_classes)
        omegas = np.array([local_slope(spec.potential, int(l)) for l in spec.sites])

    n = spec.n_sites
    analysed = np.ones(n, dtype=bool)
    cut = int(math.ceil(edge_exclusion * n))
    if cut:
        analysed[:cut] = False
        analysed[n - cut:] = False

    late = rec.late_profile()
    cells = cell_profile(spec.sites, late)
    broken = np.array([isinstance(c, ComplexLadders) for c in classes]) & analysed
    threshold = np.quantile(cells[analysed], threshold_quantile)
    bright = (cells > threshold) & analysed
    union = np.count_nonzero(bright | broken)
    overlap = np.count_nonzero(bright & broken) / union if union else 1.0
    weight = late[analysed].sum()
    share = float(late[broken].sum() / weight) if weight > 0 else 0.0

    return MoireReport(
        per_site_class=classes,
        local_omega=_frozen(omegas),
        late_time_profile=_frozen(late),
        bright_mask=_frozen(bright),
        predicted_broken_mask=_frozen(broken),
        overlap_score=float(overlap),
        n_alternations=_transitions(bright[analysed]),
        class_alternations=_transitions(broken[analysed]),
        broken_probability_share=share,
        edge_fraction=rec.edge_fraction,
        threshold_quantile=threshold_quantile,
        analysed_mask=_frozen(analysed),
    )


def fold_quasi_energy(energy: complex, omega: float) -> complex:
    """Shift ``Re E`` by multiples of ``2 omega`` into ``[-omega, omega)``."""
    re = (energy.real + omega) % (2 * omega) - omega
    return complex(re, energy.imag)


def _ladder_distance(folded: complex, base: complex, omega: float) -> float:
    dre = (folded.real - base.real + omega) % (2 * omega) - omega
    return abs(complex(dre, folded.imag - base.imag))


@dataclass(frozen=True)
class LadderCheck:
    eigenvalues: np.ndarray
    selected: np.ndarray
    folded: np.ndarray
    deviations: np.ndarray
    eps1: complex
    eps2: complex
    max_deviation: float


def ladder_structure_details(spec: LatticeSpec, n_levels: int) -> LadderCheck:
    if not isinstance(spec.potential, Linear):
        raise PreconditionError("ladder structure needs a linear potential")
    if spec.n_sites < 60:
        raise SizeError("ladder check needs at least 60 sites")
    if n_levels < 1 or n_levels > spec.n_sites // 2:
        raise SizeError(f"only {spec.n_sites // 2} interior levels available, {n_levels} requested")
    omega = spec.potential.omega
    h = build_hamiltonian(spec)
    evals = np.linalg.eigvals(h)
    order = np.lexsort((evals.imag, evals.real))
    evals = evals[order]
    center = np.trace(h).real / spec.n_sites
    nearest = np.argsort(np.abs(evals.real - center), kind="stable")[:n_levels]
    selected = evals[np.sort(nearest)]
    m = monodromy(BulkParams(spec.J, spec.beta, omega))
    folded = np.array([fold_quasi_energy(e, omega) for e in selected])
    dev = np.array([
        min(_ladder_distance(f, m.eps1, omega), _ladder_distance(f, m.eps2, omega)) for f in folded
    ])
    return LadderCheck(
        eigenvalues=_frozen(evals), selected=_frozen(selected), folded=_frozen(folded),
        deviations=_frozen(dev), eps1=m.eps1, eps2=m.eps2, max_deviation=float(dev.max()),
    )


def ladder_structure_check(spec: LatticeSpec, n_levels: int) -> float:
    """Largest distance between folded mid-spectrum eigenvalues and the Floquet base points."""
    return ladder_structure_details(spec, n_levels).max_deviation
