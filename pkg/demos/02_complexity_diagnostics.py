"""Walkthrough: where automaton circuits look chaotic — and where they don't.

Deep automaton circuits on X-basis product states reproduce several
signatures of quantum chaos: Porter-Thomas output statistics, Page-value
entanglement on every cut, and random-matrix (GUE) level-spacing
statistics of the entanglement spectrum. A brickwork Clifford comparison
ensemble fails these tests in characteristic ways.

Run:  python demos/02_complexity_diagnostics.py   (about a minute)
"""

import numpy as np

from automaton_lab import (
    EnsembleSpec,
    ProductState,
    apply_circuit,
    build_brickwork,
    exact_distribution,
    schmidt,
)
from automaton_lab.dense import StateVector
from automaton_lab.metrics import (
    bitstring_histogram,
    design_bound_check,
    fit_exponential_tail,
    page_entropy,
    pooled_level_spacing,
    rmt_reference,
    violation_onset,
    von_neumann,
)

N, DEPTH, R = 12, 60, 20
HALF = tuple(range(N // 2))


def final_state(family, r, rng):
    ens = EnsembleSpec(n_sites=N, depth=DEPTH, family=family, master_seed=1000 * r + 7)
    if family == "automaton":
        state = ProductState.all_plus(N)
    else:  # real-amplitude random product state
        th = rng.uniform(0, 2 * np.pi, N)
        state = ProductState(np.stack([np.cos(th), np.sin(th)], 1).astype(complex))
    return apply_circuit(StateVector.from_product(state), build_brickwork(ens))


rng = np.random.default_rng(0)
pooled = {"automaton": [], "clifford": []}
spectra = {"automaton": [], "clifford": []}
entropy = {"automaton": [], "clifford": []}
for family in pooled:
    for r in range(R):
        sv = final_state(family, r, rng)
        pooled[family].append(exact_distribution(sv, "x"))
        sp = schmidt(sv, HALF)
        spectra[family].append(sp.values)
        entropy[family].append(von_neumann(sp))

# --- Porter-Thomas tail ----------------------------------------------------
print(f"N={N}, depth={DEPTH}, {R} realizations per family\n")
print("output statistics (X basis, gamma = 2^N p):")
for family, probs in pooled.items():
    flat = np.concatenate(probs)
    hist = bitstring_histogram(flat, 1 << N, bin_width=0.5, gamma_max=16)
    slope, _ = fit_exponential_tail(hist, (1.0, 8.0))
    rows, _ = design_bound_check(flat, 1 << N, np.arange(1.0, 11.0))
    onset = violation_onset(rows)
    print(
        f"  {family:10s} tail slope {slope:+.3f} (chaotic: -1), "
        f"fluctuation-bound violation onset: {onset}"
    )

# --- Page saturation -------------------------------------------------------
page = page_entropy(1 << (N // 2), 1 << (N // 2))
print(f"\nhalf-cut entanglement entropy (Page value {page:.3f} bits):")
for family, vals in entropy.items():
    print(f"  {family:10s} {np.mean(vals):.3f} +- {np.std(vals):.3f} bits")

# --- entanglement-spectrum level statistics --------------------------------
gue = rmt_reference("gue", 128, 100, seed=0)
poisson = 2 * np.log(2) - 1
print(f"\nentanglement-spectrum gap ratios (GUE {gue.mean_r:.3f}, Poisson {poisson:.3f}):")
for family, sps in spectra.items():
    stats = pooled_level_spacing(sps, truncation=1e-12)
    print(f"  {family:10s} mean r = {stats.mean_r:.3f}  ({len(stats.ratios)} ratios)")
