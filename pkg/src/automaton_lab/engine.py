"""Trajectory propagation through automaton circuits and Monte Carlo estimators.

A basis state evolves through a basis-preserving circuit without branching:
one bit-string in, one bit-string out, plus an accumulated phase.  All hot
paths operate on batches: bit arrays of shape (M, N) and phase arrays of
shape (M,), so every gate touches the whole sample batch at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, Gate, ProductState

DEFAULT_BLOCK_SIZE = 4096


def flatten_seed(seed):
    """Flatten nested seed tuples into SeedSequence-compatible entropy."""
    if isinstance(seed, (tuple, list)):
        out = ()
        for s in seed:
            out += flatten_seed(s)
        return out
    return (int(seed) & 0xFFFFFFFFFFFFFFFF,)


@dataclass
class Trajectory:
    """One computational-basis bit-string plus its accumulated phase."""

    bits: np.ndarray  # bool, shape (N,)
    phase: float = 0.0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)

    @classmethod
    def from_label(cls, label, n_sites):
        bits = (label >> np.arange(n_sites)) & 1
        return cls(bits.astype(bool))

    @property
    def label(self):
        return sum(1 << i for i, b in enumerate(self.bits) if b)


@dataclass(frozen=True)
class HeisenbergWord:
    """An operator word of circuit passes and bare X flips.

    Actions are listed in application order (the rightmost factor of the
    written bra-ket expression comes first).  Each action is one of
    ("forward", circuit), ("backward", circuit), ("flip", site).
    """

    actions: tuple

    def __post_init__(self):
        for a in self.actions:
            if a[0] in ("forward", "backward"):
                if not a[1].basis_preserving:
                    raise ValueError("word circuits must be basis-preserving")
            elif a[0] != "flip":
                raise ValueError(f"unknown action {a[0]!r}")

    @property
    def n_circuit_passes(self):
        return sum(1 for a in self.actions if a[0] in ("forward", "backward"))


@dataclass
class McEstimate:
    """A Monte Carlo mean with its standard error."""

    mean: complex
    stderr: float
    n_samples: int


# -- compiled layer application -------------------------------------------


class _CompiledLayer:
    """Per-kind grouped index arrays for vectorized batch application."""

    __slots__ = ("cnot_c", "cnot_t", "swap_a", "swap_b", "rz_sites", "rz_angles", "ccn")

    def __init__(self, layer):
        cn, sw, rz_s, rz_a, ccn = [], [], [], [], []
        for g in layer:
            if g.kind == "cnot":
                cn.append(g.sites)
            elif g.kind == "swap":
                sw.append(g.sites)
            elif g.kind == "rzpair":
                rz_s.extend(g.sites)
                rz_a.extend(g.angles)
            elif g.kind == "ccnotphase":
                ccn.append((g.sites, g.angles[0]))
            else:
                raise ValueError(f"gate {g.kind} is not basis-preserving")
        cn = np.array(cn, dtype=np.intp).reshape(-1, 2)
        sw = np.array(sw, dtype=np.intp).reshape(-1, 2)
        self.cnot_c, self.cnot_t = cn[:, 0], cn[:, 1]
        self.swap_a, self.swap_b = sw[:, 0], sw[:, 1]
        self.rz_sites = np.array(rz_s, dtype=np.intp)
        self.rz_angles = np.array(rz_a, dtype=float)
        self.ccn = ccn

    def apply(self, bits, phase):
        if len(self.cnot_c):
            bits[:, self.cnot_t] ^= bits[:, self.cnot_c]
        if len(self.swap_a):
            tmp = bits[:, self.swap_a].copy()
            bits[:, self.swap_a] = bits[:, self.swap_b]
            bits[:, self.swap_b] = tmp
        if len(self.rz_sites):
            # R_z(theta) = e^{i theta Z}: bit 0 gains +theta, bit 1 gains -theta
            phase += (1.0 - 2.0 * bits[:, self.rz_sites]) @ self.rz_angles
        for (c1, c2, t), theta in self.ccn:
            mask = bits[:, c1] & bits[:, c2]
            bits[:, t] ^= mask
            phase += theta * mask


def _compiled(circuit: Circuit):
    cache = circuit.__dict__.setdefault("_compiled_layers", None)
    if cache is None:
        cache = [_CompiledLayer(layer) for layer in circuit.layers]
        circuit.__dict__["_compiled_layers"] = cache
    return cache


def _inverse_cached(circuit: Circuit):
    inv = circuit.__dict__.get("_inverse")
    if inv is None:
        inv = circuit.inverse()
        circuit.__dict__["_inverse"] = inv
    return inv


def evolve_batch(bits, phase, circuit: Circuit):
    """Apply a basis-preserving circuit in place to a (M, N) batch."""
    for layer in _compiled(circuit):
        layer.apply(bits, phase)


def apply_word_batch(bits, phase, word: HeisenbergWord):
    """Apply a Heisenberg word in place to a (M, N) batch."""
    for a in word.actions:
        if a[0] == "flip":
            bits[:, a[1]] ^= True
        elif a[0] == "forward":
            evolve_batch(bits, phase, a[1])
        else:
            evolve_batch(bits, phase, _inverse_cached(a[1]))


# -- single-trajectory wrappers -------------------------------------------


def apply_gate(t: Trajectory, g: Gate) -> Trajectory:
    """Apply one basis-preserving gate to a single trajectory."""
    if not g.basis_preserving:
        raise ValueError("Hadamard does not preserve the computational basis")
    bits = t.bits[None, :].copy()
    phase = np.array([t.phase])
    _CompiledLayer((g,)).apply(bits, phase)
    return Trajectory(bits[0], float(phase[0]))


def evolve(t: Trajectory, circuit: Circuit) -> Trajectory:
    """Propagate a trajectory through every layer in order (cost O(N*T))."""
    bits = t.bits[None, :].copy()
    phase = np.array([t.phase])
    evolve_batch(bits, phase, circuit)
    return Trajectory(bits[0], float(phase[0]))


def apply_word(t: Trajectory, word: HeisenbergWord) -> Trajectory:
    bits = t.bits[None, :].copy()
    phase = np.array([t.phase])
    apply_word_batch(bits, phase, word)
    return Trajectory(bits[0], float(phase[0]))


def amplitude(x_bits, circuit: Circuit, state: ProductState):
    """<x|psi(t)> for the evolved product state: the coefficient of the
    preimage of x under the circuit permutation, times its forward phase."""
    x = np.asarray(x_bits, dtype=bool)[None, :].copy()
    ph = np.zeros(1)
    evolve_batch(x, ph, _inverse_cached(circuit))
    pre = x.copy()
    ph_fwd = np.zeros(1)
    evolve_batch(x, ph_fwd, circuit)
    return complex(state.coefficient(pre[0]) * np.exp(1j * ph_fwd[0]))


# -- Monte Carlo estimator ------------------------------------------------


def mc_expectation(
    word: HeisenbergWord,
    state: ProductState,
    n_samples,
    seed,
    block_size=DEFAULT_BLOCK_SIZE,
) -> McEstimate:
    """Importance-sampled estimate of <psi0| word |psi0>.

    Samples x ~ |c_x|^2 site by site, pushes each sample through the word
    and averages conj(c_{x'}) e^{i phi} c_x / |c_x|^2.  Work is split into
    fixed-size blocks with per-block derived seeds, so the result depends
    only on (seed, block_size), never on scheduling.
    """
    if n_samples <= 0:
        raise ValueError("need at least one sample")
    base = flatten_seed(seed)
    total = 0.0 + 0.0j
    total_sq = 0.0  # sum of |summand|^2 accumulates both variances
    done = 0
    block = 0
    while done < n_samples:
        m = min(block_size, n_samples - done)
        rng = np.random.default_rng(np.random.SeedSequence(base + (block,)))
        x = state.sample_bits(m, rng)
        bits = x.copy()
        phase = np.zeros(m)
        apply_word_batch(bits, phase, word)
        # c_x / |c_x|^2 = 1 / conj(c_x), so the summand is a pure ratio
        summand = state.conj_ratio(bits, x) * np.exp(1j * phase)
        total += summand.sum()
        total_sq += float(np.sum(np.abs(summand) ** 2))
        done += m
        block += 1
    mean = total / n_samples
    var = max(total_sq / n_samples - abs(mean) ** 2, 0.0)
    stderr = float(np.sqrt(var / n_samples))
    return McEstimate(mean=complex(mean), stderr=stderr, n_samples=n_samples)


# -- exhaustive tables -----------------------------------------------------


def permutation_table(circuit: Circuit):
    """Full permutation pi and phase theta arrays of a circuit, by evolving
    every basis label at once (N <= 24)."""
    n = circuit.n_sites
    if n > 24:
        raise ValueError(f"permutation table infeasible at N={n}")
    labels = np.arange(1 << n, dtype=np.uint64)
    theta = np.zeros(1 << n)
    one = np.uint64(1)
    for layer in circuit.layers:
        for g in layer:
            s = tuple(np.uint64(x) for x in g.sites)
            if g.kind == "cnot":
                c, t = s
                labels ^= ((labels >> c) & one) << t
            elif g.kind == "swap":
                a, b = s
                diff = ((labels >> a) ^ (labels >> b)) & one
                labels ^= (diff << a) | (diff << b)
            elif g.kind == "rzpair":
                for site, ang in zip(s, g.angles):
                    theta += ang * (1.0 - 2.0 * ((labels >> site) & one).astype(float))
            elif g.kind == "ccnotphase":
                c1, c2, t = s
                mask = (labels >> c1) & (labels >> c2) & one
                labels ^= mask << t
                theta += g.angles[0] * mask.astype(float)
            else:
                raise ValueError("circuit is not basis-preserving")
    return labels, theta


def word_table(word: HeisenbergWord, n_sites):
    """Exhaustive action of a word on all 2^N basis labels: (labels, phases).

    Reuses each circuit's permutation table, so repeated passes over the
    same prefix cost one table build.
    """
    labels = np.arange(1 << n_sites, dtype=np.uint64)
    phases = np.zeros(1 << n_sites)
    for a in word.actions:
        if a[0] == "flip":
            labels = labels ^ np.uint64(1 << a[1])
        else:
            perm, theta = _perm_cached(a[1])
            if a[0] == "forward":
                phases += theta[labels]
                labels = perm[labels]
            else:
                inv = _inv_perm_cached(a[1])
                labels = inv[labels]
                phases -= theta[labels]
    return labels, phases


def _perm_cached(circuit: Circuit):
    cached = circuit.__dict__.get("_perm_table")
    if cached is None:
        cached = permutation_table(circuit)
        circuit.__dict__["_perm_table"] = cached
    return cached


def _inv_perm_cached(circuit: Circuit):
    cached = circuit.__dict__.get("_inv_perm")
    if cached is None:
        perm, _ = _perm_cached(circuit)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm), dtype=np.uint64)
        cached = inv
        circuit.__dict__["_inv_perm"] = cached
    return cached
