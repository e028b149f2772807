import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsmoire.analytics import hermitian_dimer_spectrum
from wsmoire.dynamics import (
    DENSE,
    STEPWISE,
    EvolutionConfig,
    EvolutionRecord,
    bloch_period_estimate,
    cell_profile,
    classify_sites,
    evolve,
    fold_quasi_energy,
    growth_rate,
    ladder_structure_check,
    ladder_structure_details,
    moire_analysis,
)
from wsmoire.errors import (
    AnalysisError,
    ConditioningError,
    DataError,
    GrowthOverflowError,
    PreconditionError,
    SizeError,
    SpecError,
)
from wsmoire.floquet import BulkParams, monodromy
from wsmoire.lattice import (
    LatticeSpec,
    Linear,
    Logarithmic,
    StateVector,
    flat_state,
    gaussian_state,
)

REAL_JW = 8.6
BROKEN_JW = 9.5


def _line_spec(jw, n):
    return LatticeSpec(1.0, 0.46, n, Linear(1.0 / jw))


@pytest.fixture(scope="module")
def bulk_real_run():
    # 800 sites keep the open ends out of reach for 50 Bloch periods
    w = 1.0 / REAL_JW
    spec = _line_spec(REAL_JW, 800)
    return w, evolve(spec, gaussian_state(800, 0.01), EvolutionConfig(50 * math.pi / w, 1500))


@pytest.fixture(scope="module")
def bulk_broken_run():
    w = 1.0 / BROKEN_JW
    spec = _line_spec(BROKEN_JW, 400)
    cfg = EvolutionConfig(30 * math.pi / w, 900, method=STEPWISE)
    return w, evolve(spec, gaussian_state(400, 0.01), cfg)


def test_config_validation():
    for kwargs in (dict(t_max=0.0), dict(t_max=1.0, n_frames=1), dict(t_max=1.0, tolerance=1e-3),
                   dict(t_max=1.0, tolerance=0.0), dict(t_max=1.0, method="rk45")):
        with pytest.raises(SpecError):
            EvolutionConfig(**kwargs)
    assert EvolutionConfig(1.0).resolved_method(512) == DENSE
    assert EvolutionConfig(1.0).resolved_method(514) == STEPWISE


@pytest.mark.parametrize("method", [DENSE, STEPWISE])
def test_decomposition_and_initial_norm(method):
    spec = _line_spec(BROKEN_JW, 60)
    rec = evolve(spec, gaussian_state(60, 0.05), EvolutionConfig(60.0, 40, method=method))
    np.testing.assert_allclose(rec.site_probability.sum(axis=1), rec.total_probability, rtol=1e-10)
    assert rec.total_probability[0] == pytest.approx(1.0, abs=1e-12)
    assert rec.times[0] == 0.0 and rec.times[-1] == 60.0
    assert rec.site_probability.shape == (40, 60)
    assert np.all(rec.site_probability >= 0)
    with pytest.raises(ValueError):
        rec.site_probability[0, 0] = 1.0


@pytest.mark.parametrize("method", [DENSE, STEPWISE])
def test_hermitian_norm_conserved(method):
    spec = LatticeSpec(1.3, 0.0, 80, Linear(0.25))
    rec = evolve(spec, gaussian_state(80, 0.02), EvolutionConfig(200.0, 100, method=method))
    assert np.abs(rec.total_probability - 1).max() < 1e-8
    assert abs(growth_rate(rec)) < 1e-10


@settings(max_examples=12, deadline=None)
@given(st.floats(0.3, 4.0), st.floats(0.0, 1.5), st.floats(0.3, 2.0),
       st.integers(10, 32).map(lambda k: 2 * k), st.floats(0.005, 0.2))
def test_methods_agree(jw, bw, w, n, width):
    m = monodromy(BulkParams(jw, bw, 1.0))
    if abs(abs(m.trace.real) - 2) < 1e-2:
        return  # too close to an EP for the spectral route
    spec = LatticeSpec(jw * w, bw * w, n, Linear(w))
    psi = gaussian_state(n, width)
    cfg = dict(t_max=20.0 / w, n_frames=30)
    try:
        dense = evolve(spec, psi, EvolutionConfig(**cfg, method=DENSE, condition_limit=1e6))
    except ConditioningError:
        return
    step = evolve(spec, psi, EvolutionConfig(**cfg, method=STEPWISE))
    scale = max(1.0, dense.site_probability.max())
    assert np.abs(dense.site_probability - step.site_probability).max() / scale < 1e-6


def test_conditioning_error_reports_condition():
    spec = _line_spec(BROKEN_JW, 40)
    with pytest.raises(ConditioningError) as info:
        evolve(spec, gaussian_state(40, 0.05), EvolutionConfig(10.0, 5, method=DENSE, condition_limit=1.0))
    assert info.value.condition > 1.0
    assert STEPWISE in str(info.value)


@pytest.mark.parametrize("method", [DENSE, STEPWISE])
def test_overflow_reports_time(method):
    spec = _line_spec(BROKEN_JW, 100)
    cfg = EvolutionConfig(4000.0, 400, method=method)
    with pytest.raises(GrowthOverflowError) as info:
        evolve(spec, gaussian_state(100, 0.01), cfg)
    assert 0 < info.value.time_reached < 4000.0


def test_state_length_checked():
    with pytest.raises(PreconditionError):
        evolve(_line_spec(REAL_JW, 20), gaussian_state(10, 0.1), EvolutionConfig(1.0))


def test_bulk_real_phase_bounded(bulk_real_run):
    w, rec = bulk_real_run
    assert rec.method == STEPWISE
    assert abs(growth_rate(rec)) < 1e-3 * w
    assert rec.total_probability.max() < 1e3
    assert not rec.edge_flag


def test_bulk_real_phase_period(bulk_real_run):
    w, rec = bulk_real_run
    assert bloch_period_estimate(rec) * w / math.pi == pytest.approx(1.0, abs=0.02)


def test_bulk_broken_phase_growth(bulk_broken_run):
    w, rec = bulk_broken_run
    im = monodromy(BulkParams(1.0, 0.46, w)).eps1.imag
    assert rec.times[-1] >= 10 / abs(im)
    assert growth_rate(rec) == pytest.approx(2 * abs(im), rel=0.05)
    assert not rec.edge_flag


def test_bulk_broken_profile_keeps_ladder_period(bulk_broken_run):
    w, rec = bulk_broken_run
    assert bloch_period_estimate(rec) * w / math.pi == pytest.approx(1.0, abs=0.02)


def test_period_halves_when_all_rates_double():
    # (J, beta, omega) -> 2 (J, beta, omega) is a pure rescaling of time
    periods = []
    for s in (1.0, 2.0):
        w = s / REAL_JW
        spec = LatticeSpec(s, 0.46 * s, 400, Linear(w))
        rec = evolve(spec, gaussian_state(400, 0.01), EvolutionConfig(12 * math.pi / w, 600))
        periods.append(bloch_period_estimate(rec))
    assert periods[1] / periods[0] == pytest.approx(0.5, rel=1e-6)
    assert periods[0] / REAL_JW / math.pi == pytest.approx(1.0, abs=0.02)


def test_small_chain_is_flagged_at_edges():
    spec = _line_spec(REAL_JW, 100)
    w = 1.0 / REAL_JW
    rec = evolve(spec, gaussian_state(100, 0.01), EvolutionConfig(6 * math.pi / w, 300))
    assert rec.edge_flag
    assert rec.edge_fraction > 0.5


def _record(profile_rows, totals):
    p = np.asarray(profile_rows, dtype=float)
    n = p.shape[1]
    return EvolutionRecord(
        times=np.linspace(0, 1, p.shape[0]), site_probability=p,
        total_probability=np.asarray(totals, dtype=float),
        initial_state=StateVector(np.ones(n) / math.sqrt(n)), sites=np.arange(n) - n // 2,
        method=DENSE,
    )


def test_period_requires_variation():
    rec = _record(np.ones((20, 4)) / 4, np.ones(20))
    with pytest.raises(AnalysisError):
        bloch_period_estimate(rec)


def test_growth_rate_rejects_bad_data():
    rec = _record(np.ones((10, 2)), [1, 1, 1, 1, 1, 1, 1, 0, 1, 1])
    with pytest.raises(DataError):
        growth_rate(rec, 1.0)
    with pytest.raises(PreconditionError):
        growth_rate(rec, 0.0)


def test_growth_rate_exact_exponential():
    t = np.linspace(0, 1, 10)
    rec = _record(np.ones((10, 2)), np.exp(0.7 * t))
    assert growth_rate(rec, 1.0) == pytest.approx(0.7, rel=1e-12)


def test_cell_profile_sums_dimers():
    sites = np.arange(-3, 3)
    q = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    # cells: {-3}, {-2,-1}, {0,1}, {2}
    np.testing.assert_array_equal(cell_profile(sites, q), [1, 5, 5, 9, 9, 6])


def test_moire_requires_logarithmic():
    spec = _line_spec(REAL_JW, 20)
    rec = evolve(spec, flat_state(20), EvolutionConfig(1.0, 4))
    with pytest.raises(PreconditionError):
        moire_analysis(spec, rec, 0.5)


def test_moire_report_on_short_chain():
    spec = LatticeSpec(1.0, 0.46, 200, Logarithmic(2e-3, 12.6))
    rec = evolve(spec, flat_state(200), EvolutionConfig(40.0, 40))
    classes, omegas = classify_sites(spec)
    rep = moire_analysis(spec, rec, 0.5, site_classes=classes)
    n = spec.n_sites
    assert len(rep.per_site_class) == n
    assert rep.bright_mask.shape == rep.predicted_broken_mask.shape == (n,)
    b, p = rep.bright_mask, rep.predicted_broken_mask
    union = np.count_nonzero(b | p)
    expected = np.count_nonzero(b & p) / union if union else 1.0
    assert rep.overlap_score == pytest.approx(expected)
    assert 0.0 <= rep.overlap_score <= 1.0
    assert rep.n_alternations == np.count_nonzero(b[1:] != b[:-1])
    np.testing.assert_allclose(rep.local_omega, 1.0 / (2e-3 * spec.sites + 12.6))
    with pytest.raises(PreconditionError):
        moire_analysis(spec, rec, 1.0, site_classes=classes)


def test_site_classes_parallel_match_serial():
    spec = LatticeSpec(1.0, 0.46, 40, Logarithmic(2e-3, 12.6))
    a, _ = classify_sites(spec, workers=1)
    b, _ = classify_sites(spec, workers=2)
    assert a == b


def test_fold_quasi_energy():
    assert fold_quasi_energy(2.5 + 0.1j, 1.0) == pytest.approx(0.5 + 0.1j)
    assert fold_quasi_energy(-1.0, 1.0) == pytest.approx(-1.0)
    assert fold_quasi_energy(1.0, 1.0) == pytest.approx(-1.0)


def test_ladder_real_phase():
    w = 1.0 / 10.55
    assert ladder_structure_check(_line_spec(10.55, 100), 20) < 1e-6 * w


def test_ladder_hermitian_matches_dimer_blocks():
    spec = LatticeSpec(1.0, 0.0, 100, Linear(0.3))
    assert ladder_structure_check(spec, 20) < 1e-10
    lo, hi = hermitian_dimer_spectrum(1.0, 0.3, [0])[0]
    m = monodromy(BulkParams(1.0, 0.0, 0.3))
    folded = sorted(fold_quasi_energy(e, 0.3).real for e in (lo, hi))
    base = sorted(fold_quasi_energy(e, 0.3).real for e in (m.eps1, m.eps2))
    np.testing.assert_allclose(folded, base, atol=1e-10)


def test_ladder_complex_phase_conjugate_pairs():
    w = 1.0 / BROKEN_JW
    check = ladder_structure_details(_line_spec(BROKEN_JW, 100), 20)
    assert check.max_deviation < 1e-6 * w
    im = np.sort(check.selected.imag)
    np.testing.assert_allclose(im, -im[::-1], atol=1e-8)
    assert np.allclose(np.abs(check.folded.imag), abs(check.eps1.imag), atol=1e-6 * w)


def test_ladder_preconditions():
    with pytest.raises(SizeError):
        ladder_structure_check(_line_spec(REAL_JW, 100), 51)
    with pytest.raises(SizeError):
        ladder_structure_check(_line_spec(REAL_JW, 40), 5)
    with pytest.raises(PreconditionError):
        ladder_structure_check(LatticeSpec(1, 0.46, 100, Logarithmic(2e-3, 12.6)), 5)
