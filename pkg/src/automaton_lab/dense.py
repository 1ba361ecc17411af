"""Exact state-vector simulation for small systems.

Serves as the correctness oracle for the trajectory engine and as the only
source of entanglement spectra.  Basis labels use the same convention as
everywhere else: bit i of the flat index is site i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import Circuit, ProductState
from .engine import HeisenbergWord, _perm_cached

DEFAULT_CAP = 22

_H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def _check_cap(n_sites, cap=DEFAULT_CAP):
    if n_sites > cap:
        mem = (1 << n_sites) * 16 / 2**20
        raise ValueError(f"N={n_sites} exceeds dense cap {cap} (state would need {mem:.0f} MiB)")


@dataclass
class StateVector:
    """2^N complex amplitudes over computational-basis labels."""

    n_sites: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.shape != (1 << self.n_sites,):
            raise ValueError("amplitude vector has wrong length")

    @classmethod
    def from_product(cls, state: ProductState):
        _check_cap(state.n_sites)
        return cls(state.n_sites, state.statevector_amps())

    def copy(self):
        return StateVector(self.n_sites, self.amps.copy())

    def norm(self):
        return float(np.linalg.norm(self.amps))

    def probabilities(self):
        return np.abs(self.amps) ** 2


def _gate_unitary(g):
    if g.kind == "h":
        return _H
    if g.kind == "cnot":
        u = np.eye(4)
        u[[1, 3]] = u[[3, 1]]  # control = first site = low bit within the pair
        return u
    if g.kind == "swap":
        u = np.eye(4)
        u[[1, 2]] = u[[2, 1]]
        return u
    if g.kind == "rzpair":
        za = np.exp(1j * g.angles[0] * np.array([1, -1]))
        zb = np.exp(1j * g.angles[1] * np.array([1, -1]))
        return np.diag(np.kron(zb, za))
    if g.kind == "ccnotphase":
        u = np.eye(8, dtype=complex)
        # both controls set: flip target, multiply by e^{i theta}
        u[[3, 7], [3, 7]] = 0
        u[3, 7] = u[7, 3] = np.exp(1j * g.angles[0])
        return u
    raise ValueError(g.kind)


def apply_gate_dense(sv: StateVector, g):
    """Apply one gate in place, via label permutations and phase masks."""
    amps = sv.amps
    labels = np.arange(len(amps), dtype=np.uint64)
    one = np.uint64(1)
    s = tuple(np.uint64(x) for x in g.sites)
    if g.kind == "h":
        (site,) = g.sites
        lo = sv.amps.reshape(-1, 2, 1 << site)  # axis 1 is the target bit
        sv.amps = np.stack([lo[:, 0] + lo[:, 1], lo[:, 0] - lo[:, 1]], axis=1).reshape(-1) / np.sqrt(2)
    elif g.kind == "cnot":
        c, t = s
        idx = labels ^ (((labels >> c) & one) << t)
        sv.amps = amps[idx]
    elif g.kind == "swap":
        a, b = s
        diff = ((labels >> a) ^ (labels >> b)) & one
        sv.amps = amps[labels ^ ((diff << a) | (diff << b))]
    elif g.kind == "rzpair":
        phase = np.zeros(len(amps))
        for site, ang in zip(s, g.angles):
            phase += ang * (1.0 - 2.0 * ((labels >> site) & one).astype(float))
        sv.amps = amps * np.exp(1j * phase)
    elif g.kind == "ccnotphase":
        c1, c2, t = s
        mask = ((labels >> c1) & (labels >> c2) & one).astype(bool)
        out = amps[labels ^ (((labels >> c1) & (labels >> c2) & one) << t)]
        out = np.where(mask, out * np.exp(1j * g.angles[0]), out)
        sv.amps = out
    else:
        raise ValueError(g.kind)


def apply_circuit(sv: StateVector, circuit: Circuit, cap=DEFAULT_CAP) -> StateVector:
    """Exact application of a circuit; permutation fast path when the
    circuit is basis-preserving."""
    _check_cap(sv.n_sites, cap)
    if circuit.n_sites != sv.n_sites:
        raise ValueError("site count mismatch")
    out = sv.copy()
    if circuit.basis_preserving:
        perm, theta = _perm_cached(circuit)
        new = np.empty_like(out.amps)
        new[perm] = out.amps * np.exp(1j * theta)
        out.amps = new
        return out
    for layer in circuit.layers:
        for g in layer:
            apply_gate_dense(out, g)
    return out


def apply_word_dense(sv: StateVector, word: HeisenbergWord) -> StateVector:
    out = sv.copy()
    for a in word.actions:
        if a[0] == "flip":
            # X on one site permutes labels; vectorized via index xor
            idx = np.arange(len(out.amps), dtype=np.uint64) ^ np.uint64(1 << a[1])
            out.amps = out.amps[idx]
        elif a[0] == "forward":
            out = apply_circuit(out, a[1])
        else:
            out = _apply_backward(out, a[1])
    return out


def _apply_backward(sv: StateVector, circuit: Circuit) -> StateVector:
    # U dagger as a gather: out[m] = e^{-i theta_m} amps[pi(m)]
    perm, theta = _perm_cached(circuit)
    out = sv.copy()
    out.amps = sv.amps[perm] * np.exp(-1j * theta)
    return out


def expectation(sv: StateVector, word: HeisenbergWord) -> complex:
    """Exact <psi| word |psi>."""
    return complex(np.vdot(sv.amps, apply_word_dense(sv, word).amps))


def pauli_x_expectation(sv: StateVector, site) -> float:
    idx = np.arange(len(sv.amps), dtype=np.uint64) ^ np.uint64(1 << site)
    return float(np.real(np.vdot(sv.amps, sv.amps[idx])))


@dataclass
class SchmidtSpectrum:
    """Squared Schmidt coefficients of a bipartition, sorted ascending."""

    values: np.ndarray
    subset: tuple[int, ...]

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float))
        if np.any(v < -1e-12):
            raise ValueError("negative spectral weight")
        v = np.clip(v, 0.0, None)
        if abs(v.sum() - 1) > 1e-9:
            raise ValueError(f"spectrum sums to {v.sum()}, not 1")
        self.values = v
        self.subset = tuple(self.subset)


def schmidt(sv: StateVector, subset) -> SchmidtSpectrum:
    """Eigenvalues of rho_A for an arbitrary (possibly non-contiguous)
    subset A of sites."""
    n = sv.n_sites
    subset = tuple(sorted(subset))
    if not 1 <= len(subset) <= n - 1:
        raise ValueError("bipartition subset must be proper and nonempty")
    rest = [s for s in range(n) if s not in subset]
    tensor = sv.amps.reshape((2,) * n)
    # axis for site s is n-1-s; put A axes first
    order = [n - 1 - s for s in subset] + [n - 1 - s for s in rest]
    mat = np.transpose(tensor, order).reshape(1 << len(subset), 1 << len(rest))
    sing = np.linalg.svd(mat, compute_uv=False)
    vals = sing**2
    vals = vals / vals.sum()  # guard rounding; norm is 1 to 1e-10 anyway
    return SchmidtSpectrum(vals, subset)


def hadamard_transform(amps):
    """Normalized global Walsh-Hadamard transform (X-basis rotation)."""
    out = np.array(amps, dtype=complex)
    n = out.size.bit_length() - 1
    out = out.reshape((2,) * n)
    for axis in range(n):
        out = np.moveaxis(out, axis, 0)
        out = np.stack([out[0] + out[1], out[0] - out[1]])
        out = np.moveaxis(out, 0, axis)
    return out.reshape(-1) / np.sqrt(out.size)


def exact_distribution(sv: StateVector, basis="z"):
    """All 2^N outcome probabilities in the Z or X measurement basis."""
    if basis == "z":
        return sv.probabilities()
    if basis == "x":
        return np.abs(hadamard_transform(sv.amps)) ** 2
    raise ValueError(f"unknown basis {basis!r}")


def sample_bitstrings(sv: StateVector, basis, n, seed):
    """Draw n basis labels i.i.d. from the chosen measurement basis."""
    probs = exact_distribution(sv, basis)
    rng = np.random.default_rng(seed)
    return rng.choice(len(probs), size=n, p=probs)
