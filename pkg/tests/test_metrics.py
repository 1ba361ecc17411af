import numpy as np
import pytest

from automaton_lab.circuits import EnsembleSpec, ProductState, build_brickwork
from automaton_lab.dense import SchmidtSpectrum, StateVector, apply_circuit
from automaton_lab.metrics import (
    bipartition_scan,
    bitstring_histogram,
    design_bound_check,
    fit_exponential_tail,
    haar_trace_power_oracle,
    level_spacing,
    min_entropy,
    page_entropy,
    pooled_level_spacing,
    renyi,
    rmt_reference,
    trace_power,
    violation_onset,
    von_neumann,
)


def _spectrum(values):
    values = np.asarray(values, float)
    return SchmidtSpectrum(values / values.sum(), (0,))


# -- entropies -------------------------------------------------------------


def test_von_neumann_uniform():
    assert np.isclose(von_neumann(_spectrum(np.ones(8))), 3.0)
    assert np.isclose(von_neumann(_spectrum([1.0])), 0.0)


def test_page_entropy_value():
    # half cut of 16 sites: log2(256) - 1/(2 ln 2)
    want = 8 - 1 / (2 * np.log(2))
    assert np.isclose(page_entropy(256, 256), want)
    assert page_entropy(2, 4) == page_entropy(4, 2)


def test_trace_power_and_renyi():
    sp = _spectrum(np.ones(4))
    assert np.isclose(trace_power(sp, 2), 0.25)
    assert np.isclose(renyi(sp, 2), 2.0)
    assert np.isclose(renyi(sp, 0.5), 2.0)  # flat spectrum: all orders equal
    assert np.isclose(min_entropy(sp), 2.0)
    with pytest.raises(ValueError):
        trace_power(sp, 1.5)
    with pytest.raises(ValueError):
        renyi(sp, 1)


def test_renyi_order_monotone():
    sp = _spectrum([0.6, 0.3, 0.1])
    assert renyi(sp, 2) >= renyi(sp, 3) >= min_entropy(sp) - 1e-12


# -- bipartition scan ------------------------------------------------------


def test_bipartition_scan_product_state():
    sv = StateVector.from_product(ProductState.haar_random(6, 0))
    stats = bipartition_scan(sv)
    assert len(stats.entropies) == 10  # C(5, 2) subsets containing site 0
    assert stats.mean < 1e-9 and stats.std_dev < 1e-9


def test_bipartition_scan_sampled_deterministic():
    c = build_brickwork(EnsembleSpec(n_sites=8, depth=20, master_seed=1))
    sv = apply_circuit(StateVector.from_product(ProductState.all_plus(8)), c)
    a = bipartition_scan(sv, mode="sampled", n_sampled=5, seed=3)
    b = bipartition_scan(sv, mode="sampled", n_sampled=5, seed=3)
    assert a.entropies == b.entropies
    with pytest.raises(ValueError):
        bipartition_scan(sv, mode="bogus")


def test_bipartition_scan_odd_n():
    sv = StateVector.from_product(ProductState.all_plus(5))
    with pytest.raises(ValueError):
        bipartition_scan(sv)


# -- level spacing ---------------------------------------------------------


def test_level_spacing_geometric():
    stats = level_spacing(np.array([1.0, 2.0, 4.0, 8.0]) / 15)
    np.testing.assert_allclose(stats.ratios, [0.5, 0.5])
    assert np.isclose(stats.mean_r, 0.5)
    assert stats.n_discarded == 0


def test_level_spacing_truncation_and_degenerate():
    values = np.array([1e-16, 0.25, 0.25, 0.5])
    stats = level_spacing(values / values.sum())
    assert stats.n_discarded == 1
    assert stats.n_zero_spacings >= 1
    assert not np.any(np.isnan(stats.ratios))
    with pytest.raises(ValueError):
        level_spacing(np.array([0.5, 0.5]))


def test_pooled_level_spacing():
    spectra = [np.array([1.0, 2, 4, 8]) / 15, np.array([1.0, 3, 9, 27]) / 40]
    pooled = pooled_level_spacing(spectra)
    assert len(pooled.ratios) == 4
    assert np.isclose(pooled.mean_r, np.mean(pooled.ratios))


def test_rmt_reference_means():
    gue = rmt_reference("gue", 128, 40, seed=0)
    poisson = rmt_reference("poisson", 4096, 40, seed=0)
    # literature values: GUE ~0.5996, Poisson = 2 ln 2 - 1 ~ 0.3863
    assert abs(gue.mean_r - 0.5996) < 0.01
    assert abs(poisson.mean_r - (2 * np.log(2) - 1)) < 0.01
    with pytest.raises(ValueError):
        rmt_reference("gue", 8, 10, seed=0)
    with pytest.raises(ValueError):
        rmt_reference("goe", 64, 10, seed=0)


# -- bit-string statistics -------------------------------------------------


def test_histogram_mass_and_density():
    probs = np.full(1024, 1 / 1024)
    hist = bitstring_histogram(probs, 1024, bin_width=0.5)
    assert hist.total_mass == 1024
    assert np.isclose(np.sum(hist.density() * np.diff(hist.bin_edges)), 1.0)
    # all gammas equal 1 -> single occupied bin
    assert np.count_nonzero(hist.counts) == 1


def test_exponential_tail_fit_recovers_slope():
    rng = np.random.default_rng(0)
    dim = 1 << 16
    gammas = rng.exponential(size=dim)
    probs = gammas / gammas.sum()
    dim_eff = probs.size  # gamma = dim * p ~ Exp(1) up to normalization
    hist = bitstring_histogram(probs, dim_eff, bin_width=0.5, gamma_max=15)
    slope, _ = fit_exponential_tail(hist, (1.0, 8.0))
    assert abs(slope + 1) < 0.1


def test_design_bound_uniform_violates():
    rows, gamma_star = design_bound_check(np.full(256, 1 / 256), 256, np.array([1.0, 2.0]))
    assert violation_onset(rows) == 1.0
    assert gamma_star == 0.0


def test_design_bound_exponential_holds():
    rng = np.random.default_rng(1)
    dim = 1 << 16
    gammas = rng.exponential(size=dim)
    probs = gammas / gammas.sum()
    rows, gamma_star = design_bound_check(probs, dim, np.arange(1.0, 9.0))
    assert violation_onset(rows) is None
    assert gamma_star == 8.0


def test_haar_oracle_matches_purity_formula():
    d_a, d_b = 8, 16
    mean, stderr = haar_trace_power_oracle(d_a, d_b, [2], 4000, seed=5)
    want = (d_a + d_b) / (d_a * d_b + 1)
    assert abs(mean[0] - want) < 4 * stderr[0]


def test_haar_oracle_size_guard():
    with pytest.raises(ValueError):
        haar_trace_power_oracle(1 << 11, 1 << 11, [2], 10, seed=0)
