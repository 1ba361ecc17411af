import numpy as np
import pytest

from automaton_lab.circuits import EnsembleSpec, ProductState, build_brickwork
from automaton_lab import dense, otoc
from automaton_lab.otoc import (
    OtocSeries,
    OtocSpec,
    alternating_specs,
    canonical_form,
    compile_word,
    cyclic_class,
    default_depth_grid,
    evaluate_series,
    exact_expectation,
    expand_recursive,
    fit_gap_power,
    fit_linear_k,
    fit_log_k,
    gap_ratio,
    light_cone_contact_depth,
    log_linear_tail_fit,
    max_otoc_search_dense,
    max_otoc_search_mc,
    recursive_probe_sites,
    scrambling_time,
)
from automaton_lab.engine import mc_expectation


# -- specs -----------------------------------------------------------------


def test_spec_text_round_trip():
    spec = OtocSpec.parse("~X50 X0 ~X50 X0")
    assert str(spec) == "~X50 X0 ~X50 X0"
    assert spec.conjugated_sites == [50]
    assert spec.bare_sites == [0]
    with pytest.raises(ValueError):
        OtocSpec.parse("~X1 Y0")
    with pytest.raises(ValueError):
        OtocSpec(((True, 0),))  # odd number of factors


def test_expand_recursive_orders():
    four = expand_recursive(recursive_probe_sites(4, 100))
    assert str(four) == "~X50 X0 ~X50 X0"
    eight = expand_recursive(recursive_probe_sites(8, 100))
    assert len(eight.factors) == 8
    assert str(eight) == "~X50 X1 ~X50 X0 ~X50 X1 ~X50 X0"
    sixteen = expand_recursive(recursive_probe_sites(16, 100))
    assert len(sixteen.factors) == 16
    assert sixteen.bare_sites == [0, 1, 2]
    with pytest.raises(ValueError):
        recursive_probe_sites(6, 100)
    with pytest.raises(ValueError):
        recursive_probe_sites(2, 100)


def test_compile_word_cancellation():
    c = build_brickwork(EnsembleSpec(n_sites=8, depth=10, master_seed=0))
    spec = OtocSpec.parse("~X4 X0 ~X4 X0")
    word = compile_word(spec, c)
    # adjacent U U^dag between the two conjugated factors cancel: the word
    # needs 4 passes, not 2 per conjugated factor with none shared
    assert word.n_circuit_passes == 4
    # depth-0 prefix: conjugation is trivial, word is pure flips
    empty = compile_word(spec, c.truncate(0))
    assert empty.n_circuit_passes == 0


def test_light_cone_contact():
    spec = OtocSpec.parse("~X0 X1")
    assert light_cone_contact_depth(spec, 8) == 1
    far = OtocSpec.parse("~X0 X4")
    assert light_cone_contact_depth(far, 8, periodic=False) == 4
    # periodic ring reaches site 4 from site 0 in the same 4 layers
    assert light_cone_contact_depth(far, 8, periodic=True) == 4


def test_exact_one_before_contact():
    spec = OtocSpec.parse("~X0 X4 ~X0 X4")
    state = ProductState.all_plus(8)
    circuit = build_brickwork(EnsembleSpec(n_sites=8, depth=12, master_seed=5))
    contact = light_cone_contact_depth(spec, 8)
    for t in range(contact):
        assert np.isclose(exact_expectation(spec, circuit.truncate(t), state), 1.0)


# -- exact vs engines ------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_exact_matches_dense_word_evaluation(seed):
    circuit = build_brickwork(EnsembleSpec(n_sites=8, depth=16, master_seed=seed))
    state = ProductState.haar_random(8, seed)
    spec = OtocSpec.parse("~X4 X0 ~X4 X1")
    sv = dense.StateVector.from_product(state)
    want = dense.expectation(sv, compile_word(spec, circuit))
    got = exact_expectation(spec, circuit, state)
    assert abs(want - got) < 1e-10


def test_mc_matches_exact_within_stderr():
    circuit = build_brickwork(EnsembleSpec(n_sites=10, depth=20, master_seed=7))
    state = ProductState.all_plus(10)
    spec = expand_recursive(recursive_probe_sites(4, 10))
    want = exact_expectation(spec, circuit, state).real
    est = mc_expectation(compile_word(spec, circuit), state, 30_000, seed=1)
    assert abs(est.mean.real - want) < 4 * est.stderr + 1e-3


def test_unitarity_bound():
    circuit = build_brickwork(EnsembleSpec(n_sites=8, depth=30, master_seed=3))
    state = ProductState.all_plus(8)
    for text in ("~X4 X0", "~X4 X0 ~X4 X1", "~X3 X3 ~X3 X3"):
        val = exact_expectation(OtocSpec.parse(text), circuit, state)
        assert abs(val) <= 1 + 1e-10


# -- series ----------------------------------------------------------------


def test_evaluate_series_exact_vs_mc():
    ens = EnsembleSpec(n_sites=8, depth=16, master_seed=11)
    spec = expand_recursive(recursive_probe_sites(4, 8))
    state = ProductState.all_plus(8)
    depths = np.array([0, 4, 8, 12, 16])
    exact = evaluate_series(spec, ens, depths, 5, 10, state, seed=2, exact=True)
    mc = evaluate_series(spec, ens, depths, 5, 20_000, state, seed=2)
    assert np.all(np.abs(exact.values) <= 1 + 1e-10)
    for i in range(len(depths)):
        tol = 4 * max(mc.stderrs[i], 1e-4)
        assert abs(exact.values[i] - mc.values[i]) < tol + 0.05


def test_evaluate_series_rejects_clifford_and_budget():
    spec = expand_recursive([4])
    state = ProductState.all_plus(8)
    with pytest.raises(ValueError):
        evaluate_series(spec, EnsembleSpec(n_sites=8, depth=4, family="clifford"), [2], 1, 10, state)
    with pytest.raises(ValueError):
        evaluate_series(
            spec, EnsembleSpec(n_sites=8, depth=4), [4], 10, 10_000, state, max_cost=1.0
        )


def test_default_depth_grid():
    grid = default_depth_grid(20, 40, coarse_step=10, fine_step=4)
    assert grid[-1] == 40
    assert np.all(np.diff(grid) > 0)
    assert 18 in grid  # fine spacing starts just before contact


# -- scrambling time -------------------------------------------------------


def _series(depths, values):
    depths = np.asarray(depths)
    vals = np.asarray(values, dtype=complex)
    return OtocSeries(depths, vals, np.zeros(len(depths)), None, 8, 1, 1)


def test_scrambling_time_step_series():
    ts = scrambling_time(_series([0, 1, 2, 3], [1, 1, 0, 0]), 0.5)
    assert 1 < ts < 2


def test_scrambling_time_no_crossing():
    with pytest.raises(ValueError):
        scrambling_time(_series([0, 1, 2], [1, 1, 1]), 0.5)


def test_scrambling_time_ignores_transient_dip():
    # dips below epsilon then recovers; only the final crossing counts
    ts = scrambling_time(_series([0, 1, 2, 3, 4], [1, 0.01, 0.8, 0.05, 0.001]), 0.1)
    assert 2 < ts <= 4


# -- fits ------------------------------------------------------------------


def test_fit_linear_k_exact():
    ks = np.array([4, 8, 16, 32])
    fit = fit_linear_k(ks, 3 * 100 + 5 * ks)
    assert np.isclose(fit.params["slope"], 5.0)
    assert np.isclose(fit.params["intercept"], 300.0)


def test_fit_log_k_exact():
    ks = np.array([4, 8, 16])
    fit = fit_log_k(ks, 7 + 2.5 * np.log2(ks))
    assert np.isclose(fit.params["v_k"], 2.5)


def test_fit_gap_power_exact():
    lengths = np.array([100, 200, 400, 1600])
    fit = fit_gap_power(lengths, 3.0 * lengths**0.5)
    assert abs(fit.params["alpha"] - 0.5) < 1e-6
    assert abs(fit.params["prefactor"] - 3.0) < 1e-6


def test_fit_degenerate():
    with pytest.raises(ValueError):
        fit_linear_k([4, 4], [1, 2])


def test_gap_ratio():
    assert np.isclose(gap_ratio({4: 10.0, 8: 14.0, 16: 22.0}), 2.0)
    with pytest.raises(ValueError):
        gap_ratio({4: 10.0, 8: 10.0, 16: 22.0})


def test_log_linear_tail_fit_exact_exponential():
    depths = np.arange(0, 30)
    vals = np.minimum(1.0, np.exp(-0.3 * (depths - 10)))
    slope, r2 = log_linear_tail_fit(_series(depths, vals), value_range=(1e-3, 0.5))
    assert np.isclose(slope, -0.3)
    assert r2 > 0.999


# -- search ----------------------------------------------------------------


def test_alternating_specs_count():
    specs = list(alternating_specs(4, [0, 1, 2, 3]))
    assert len(specs) == 4**4
    assert all(f[0] == (i % 2 == 0) for s in specs for i, f in enumerate(s.factors))


def test_cyclic_class_and_canonical():
    spec = OtocSpec.parse("~X0 X1 ~X2 X3")
    cls = cyclic_class(spec)
    assert len(cls) == 2
    rotated = OtocSpec.parse("~X2 X3 ~X0 X1")
    assert canonical_form(spec) == canonical_form(rotated)


def test_search_dense_trivial_depth():
    # depth 0: conjugation trivial, every word evaluates to <X...X> = 1 on |+>
    ens = EnsembleSpec(n_sites=8, depth=4, master_seed=0)
    res = max_otoc_search_dense(4, [0, 1, 3, 4], ens, 0, 2, ProductState.all_plus(8))
    assert np.isclose(res.best_value, 1.0)


def test_search_mc_agrees_with_dense():
    ens = EnsembleSpec(n_sites=8, depth=12, master_seed=21)
    state = ProductState.all_plus(8)
    dense_res = max_otoc_search_dense(4, [0, 1, 4], ens, 8, 3, state, seed=5)
    mc_res = max_otoc_search_mc(
        4, [0, 1, 4], ens, 8, 3, state, seed=5, coarse_samples=2048, fine_samples=8192,
        keep_fraction=0.3,
    )
    # MC should rank a word from the dense winner's value neighborhood first
    dense_best = dense_res.best_value
    assert mc_res.best_value > dense_best - 0.15
