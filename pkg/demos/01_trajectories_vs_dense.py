"""Walkthrough: automaton circuits, trajectory propagation, and the dense
cross-check.

Automaton circuits map computational-basis states to computational-basis
states (times a phase), so a single bit-string trajectory — not a 2^N
state vector — is enough to follow any basis state exactly. This script
builds a small random brickwork circuit, follows trajectories through it,
and verifies amplitudes and a Monte Carlo correlator against the dense
simulator.

Run:  python demos/01_trajectories_vs_dense.py
"""

import numpy as np

from automaton_lab import (
    EnsembleSpec,
    HeisenbergWord,
    ProductState,
    Trajectory,
    amplitude,
    apply_circuit,
    build_brickwork,
    evolve,
    expectation,
    mc_expectation,
)
from automaton_lab.dense import StateVector

N, DEPTH, SEED = 10, 30, 7

print(f"random automaton brickwork: N={N}, depth={DEPTH}, seed={SEED}")
circuit = build_brickwork(EnsembleSpec(n_sites=N, depth=DEPTH, master_seed=SEED))
kinds = [g.kind for layer in circuit.layers for g in layer]
print("gate mix:", {k: kinds.count(k) for k in sorted(set(kinds))})

# --- one trajectory: a basis state stays a basis state --------------------
t = evolve(Trajectory.from_label(0b1011001, N), circuit)
print(f"\n|{0b1011001:0{N}b}>  ->  e^(i {t.phase:+.3f}) |{t.label:0{N}b}>")

# --- amplitudes against the dense engine ----------------------------------
state = ProductState.all_plus(N)
sv = apply_circuit(StateVector.from_product(state), circuit)
rng = np.random.default_rng(0)
worst = 0.0
for label in rng.integers(0, 1 << N, size=200):
    bits = ((int(label) >> np.arange(N)) & 1).astype(bool)
    worst = max(worst, abs(amplitude(bits, circuit, state) - sv.amps[label]))
print(f"\nmax |trajectory amplitude - dense amplitude| over 200 labels: {worst:.2e}")

# --- a Heisenberg word, Monte Carlo vs exact ------------------------------
word = HeisenbergWord(
    (("forward", circuit), ("flip", N // 2), ("backward", circuit), ("flip", 0))
)
exact = expectation(StateVector.from_product(state), word).real
est = mc_expectation(word, state, 50_000, seed=1)
print(
    f"\n<psi| U^t X_{N//2} U X_0 |psi>:  exact {exact:+.5f}, "
    f"MC {est.mean.real:+.5f} +- {est.stderr:.5f} "
    f"({abs(est.mean.real - exact) / max(est.stderr, 1e-12):.1f} stderr away)"
)
