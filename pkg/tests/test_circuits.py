import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from automaton_lab.circuits import (
    Circuit,
    EnsembleSpec,
    Gate,
    ProductState,
    brickwork_bonds,
    build_brickwork,
    with_seed,
)
from automaton_lab.engine import permutation_table


# -- gates -----------------------------------------------------------------


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("bogus", (0, 1))
    with pytest.raises(ValueError):
        Gate("cnot", (0, 0))  # repeated site
    with pytest.raises(ValueError):
        Gate("cnot", (0, 1, 2))  # wrong arity
    with pytest.raises(ValueError):
        Gate("rzpair", (0, 1), (1.0,))  # wrong angle count
    with pytest.raises(ValueError):
        Gate.rz_pair(0, float("nan"), 1, 0.0)


def test_gate_inverse():
    assert Gate.cnot(0, 1).inverse() == Gate.cnot(0, 1)
    assert Gate.swap(2, 3).inverse() == Gate.swap(2, 3)
    g = Gate.rz_pair(0, 0.3, 1, -0.7)
    assert g.inverse().angles == (-0.3, 0.7)
    assert Gate.ccnot_phase(0, 1, 2, 0.5).inverse().angles == (-0.5,)


def test_basis_preserving_flag():
    assert Gate.cnot(0, 1).basis_preserving
    assert not Gate.hadamard(0).basis_preserving


# -- circuits --------------------------------------------------------------


def test_circuit_rejects_overlap_and_range():
    with pytest.raises(ValueError):
        Circuit(4, ((Gate.cnot(0, 1), Gate.swap(1, 2)),))
    with pytest.raises(ValueError):
        Circuit(3, ((Gate.cnot(0, 3),),))


def test_truncate_bounds():
    c = build_brickwork(EnsembleSpec(n_sites=6, depth=10, master_seed=1))
    assert c.truncate(0).depth == 0
    assert c.truncate(10).depth == 10
    with pytest.raises(ValueError):
        c.truncate(11)


def test_inverse_composes_to_identity():
    c = build_brickwork(EnsembleSpec(n_sites=6, depth=12, master_seed=3))
    perm, theta = permutation_table(c)
    perm_inv, theta_inv = permutation_table(c.inverse())
    # applying U then U^dag must return every label with zero net phase
    np.testing.assert_array_equal(perm_inv[perm], np.arange(1 << 6))
    np.testing.assert_allclose(theta + theta_inv[perm], 0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), depth=st.integers(0, 12), n=st.integers(2, 9))
def test_text_round_trip(seed, depth, n):
    c = build_brickwork(EnsembleSpec(n_sites=n, depth=depth, master_seed=seed))
    back = Circuit.from_text(c.to_text())
    assert back.n_sites == c.n_sites and back.layers == c.layers
    assert back.periodic == c.periodic and back.seed == c.seed


# -- brickwork geometry ----------------------------------------------------


def test_brickwork_bonds_pattern():
    assert brickwork_bonds(6, 0, True) == [(0, 1), (2, 3), (4, 5)]
    assert brickwork_bonds(6, 1, True) == [(1, 2), (3, 4), (5, 0)]
    assert brickwork_bonds(6, 1, False) == [(1, 2), (3, 4)]
    # odd N cannot wrap
    assert brickwork_bonds(5, 1, True) == [(1, 2), (3, 4)]


@given(n=st.integers(2, 20), t=st.integers(0, 5), periodic=st.booleans())
def test_brickwork_bonds_disjoint(n, t, periodic):
    bonds = brickwork_bonds(n, t, periodic)
    sites = [s for b in bonds for s in b]
    assert len(sites) == len(set(sites))
    assert all(0 <= s < n for s in sites)


# -- ensembles -------------------------------------------------------------


def test_ensemble_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(n_sites=8, depth=5, family="bogus")
    with pytest.raises(ValueError):
        EnsembleSpec(n_sites=8, depth=5, gate_weights=(0.5, 0.5, 0.5))
    with pytest.raises(ValueError):
        EnsembleSpec(n_sites=1, depth=5)


def test_build_brickwork_deterministic():
    spec = EnsembleSpec(n_sites=8, depth=20, master_seed=42)
    assert build_brickwork(spec).to_text() == build_brickwork(spec).to_text()
    other = build_brickwork(with_seed(spec, 43))
    assert other.to_text() != build_brickwork(spec).to_text()


def test_family_palettes():
    auto = build_brickwork(EnsembleSpec(n_sites=8, depth=30, master_seed=7))
    kinds = {g.kind for layer in auto.layers for g in layer}
    assert kinds <= {"cnot", "swap", "rzpair"}
    cliff = build_brickwork(EnsembleSpec(n_sites=8, depth=30, family="clifford", master_seed=7))
    kinds = {g.kind for layer in cliff.layers for g in layer}
    assert kinds <= {"cnot", "swap", "h"}
    assert not cliff.basis_preserving


def test_gate_weights_degenerate():
    c = build_brickwork(EnsembleSpec(n_sites=6, depth=10, gate_weights=(1.0, 0.0, 0.0), master_seed=0))
    assert {g.kind for layer in c.layers for g in layer} == {"cnot"}


# -- product states --------------------------------------------------------


def test_x_basis_coefficients():
    state = ProductState.x_basis([1, -1, 1])
    amps = state.statevector_amps()
    np.testing.assert_allclose(np.abs(amps), 2 ** (-1.5), atol=1e-14)
    # |-> on site 1 flips sign with bit 1
    assert np.isclose(amps[0b010] / amps[0b000], -1)


def test_computational_state():
    state = ProductState.computational([1, 0, 1])
    amps = state.statevector_amps()
    assert np.isclose(amps[0b101], 1)
    assert np.count_nonzero(amps) == 1


def test_coefficient_matches_statevector():
    state = ProductState.haar_random(5, 11)
    amps = state.statevector_amps()
    for label in (0, 7, 19, 31):
        bits = (label >> np.arange(5)) & 1
        assert np.isclose(state.coefficient(bits.astype(bool)), amps[label])


def test_normalization_enforced():
    with pytest.raises(ValueError):
        ProductState(np.array([[1.0, 1.0]]))


def test_sample_bits_marginals():
    state = ProductState(np.array([[1.0, 0.0], [np.sqrt(0.2), np.sqrt(0.8)]], dtype=complex))
    rng = np.random.default_rng(0)
    bits = state.sample_bits(20_000, rng)
    assert not bits[:, 0].any()
    assert abs(bits[:, 1].mean() - 0.8) < 0.02


def test_conj_ratio_matches_coefficients():
    state = ProductState.haar_random(6, 3)
    rng = np.random.default_rng(1)
    a = rng.random(6) < 0.5
    b = rng.random(6) < 0.5
    want = np.conj(state.coefficient(a)) / np.conj(state.coefficient(b))
    assert np.isclose(state.conj_ratio(a, b), want)


def test_conj_ratio_zero_amplitude():
    state = ProductState.computational([0, 0])
    with pytest.raises(ZeroDivisionError):
        state.conj_ratio(np.array([False, False]), np.array([True, False]))
