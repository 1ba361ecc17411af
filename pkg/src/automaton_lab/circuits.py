"""Gates, brickwork circuits, gate ensembles and initial product states.

Site convention: site ``i`` corresponds to bit ``i`` of a basis label
(least significant bit = site 0).  A circuit is an ordered list of layers;
gates within one layer act on disjoint sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

AUTOMATON_KINDS = ("cnot", "swap", "rzpair", "ccnotphase")
ALL_KINDS = AUTOMATON_KINDS + ("h",)


@dataclass(frozen=True)
class Gate:
    """A single circuit gate: kind, acted-on sites and optional angles."""

    kind: str
    sites: tuple[int, ...]
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.sites)) != len(self.sites):
            raise ValueError(f"repeated site in gate {self}")
        n_sites = {"cnot": 2, "swap": 2, "rzpair": 2, "ccnotphase": 3, "h": 1}[self.kind]
        n_angles = {"cnot": 0, "swap": 0, "rzpair": 2, "ccnotphase": 1, "h": 0}[self.kind]
        if len(self.sites) != n_sites:
            raise ValueError(f"{self.kind} needs {n_sites} sites, got {self.sites}")
        if len(self.angles) != n_angles:
            raise ValueError(f"{self.kind} needs {n_angles} angles, got {self.angles}")
        if not all(math.isfinite(a) for a in self.angles):
            raise ValueError(f"non-finite angle in {self}")

    @classmethod
    def cnot(cls, control, target):
        return cls("cnot", (control, target))

    @classmethod
    def swap(cls, a, b):
        return cls("swap", (a, b))

    @classmethod
    def rz_pair(cls, a, angle_a, b, angle_b):
        """Independent Z rotations e^{i*theta*Z} on two sites of one brick."""
        return cls("rzpair", (a, b), (float(angle_a), float(angle_b)))

    @classmethod
    def ccnot_phase(cls, c1, c2, target, angle):
        """Toffoli with a phase: flips target and multiplies by e^{i*angle}
        iff both controls are set."""
        return cls("ccnotphase", (c1, c2, target), (float(angle),))

    @classmethod
    def hadamard(cls, site):
        return cls("h", (site,))

    @property
    def basis_preserving(self):
        return self.kind != "h"

    def inverse(self):
        if self.kind in ("cnot", "swap", "h"):
            return self
        return Gate(self.kind, self.sites, tuple(-a for a in self.angles))


@dataclass(eq=False)
class Circuit:
    """An ordered brickwork of gate layers.  Treated as immutable."""

    n_sites: int
    layers: tuple[tuple[Gate, ...], ...]
    periodic: bool = True
    seed: int = 0

    def __post_init__(self):
        self.layers = tuple(tuple(layer) for layer in self.layers)
        for t, layer in enumerate(self.layers):
            used = set()
            for g in layer:
                if any(s >= self.n_sites or s < 0 for s in g.sites):
                    raise ValueError(f"gate {g} out of range for N={self.n_sites}")
                if used & set(g.sites):
                    raise ValueError(f"overlapping gates in layer {t}")
                used |= set(g.sites)

    @property
    def depth(self):
        return len(self.layers)

    @property
    def basis_preserving(self):
        return all(g.basis_preserving for layer in self.layers for g in layer)

    def inverse(self):
        """Layer order reversed, each gate inverted."""
        layers = tuple(tuple(g.inverse() for g in layer) for layer in reversed(self.layers))
        return Circuit(self.n_sites, layers, self.periodic, self.seed)

    def truncate(self, t):
        """The first ``t`` layers, same metadata."""
        if not 0 <= t <= self.depth:
            raise ValueError(f"cannot truncate depth-{self.depth} circuit to {t}")
        return Circuit(self.n_sites, self.layers[:t], self.periodic, self.seed)

    # -- text serialization ------------------------------------------------

    def to_text(self):
        """Line format: header ``N depth periodic seed``, then one line per
        gate ``layer kind sites... ; angles...`` (exact round trip)."""
        lines = [f"{self.n_sites} {self.depth} {int(self.periodic)} {self.seed}"]
        for t, layer in enumerate(self.layers):
            for g in layer:
                sites = " ".join(str(s) for s in g.sites)
                angles = " ".join(f"{a:.17g}" for a in g.angles)
                lines.append(f"{t} {g.kind} {sites}" + (f" ; {angles}" if angles else ""))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n, depth, periodic, seed = lines[0].split()
        layers = [[] for _ in range(int(depth))]
        for ln in lines[1:]:
            if ";" in ln:
                head, tail = ln.split(";")
                angles = tuple(float(a) for a in tail.split())
            else:
                head, angles = ln, ()
            parts = head.split()
            t, kind = int(parts[0]), parts[1]
            sites = tuple(int(s) for s in parts[2:])
            layers[t].append(Gate(kind, sites, angles))
        return cls(int(n), tuple(tuple(l) for l in layers), bool(int(periodic)), int(seed))


def brickwork_bonds(n_sites, layer_index, periodic):
    """Bonds coupled in one brickwork layer.

    Even layers couple (0,1),(2,3),...; odd layers (1,2),(3,4),...,
    wrapping when periodic.
    """
    start = layer_index % 2
    bonds = [(j, j + 1) for j in range(start, n_sites - 1, 2)]
    # odd N cannot tile periodically without overlap, so only even N wraps
    if periodic and start == 1 and n_sites % 2 == 0:
        bonds.append((n_sites - 1, 0))
    return bonds


@dataclass(frozen=True)
class EnsembleSpec:
    """A random brickwork ensemble.

    ``family`` selects the gate palette: "automaton" draws from
    {CNOT, SWAP, Rz-pair}, "clifford" from {CNOT, SWAP, Hadamard-pair}.
    ``gate_weights`` are the respective probabilities.
    """

    n_sites: int
    depth: int
    family: str = "automaton"
    gate_weights: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    periodic: bool = True
    master_seed: int = 0

    def __post_init__(self):
        if self.family not in ("automaton", "clifford"):
            raise ValueError(f"unknown ensemble family {self.family!r}")
        w = self.gate_weights
        if len(w) != 3 or any(x < 0 for x in w) or abs(sum(w) - 1) > 1e-12:
            raise ValueError(f"gate_weights must be 3 nonnegative numbers summing to 1: {w}")
        if self.n_sites < 2:
            raise ValueError("need at least 2 sites")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")


def build_brickwork(spec: EnsembleSpec) -> Circuit:
    """Generate a random brickwork circuit, deterministic in master_seed.

    Each bond slot independently receives one of the three palette entries;
    rotation angles are uniform on [0, 2*pi) and independent per site.
    """
    rng = np.random.default_rng(spec.master_seed)
    layers = []
    for t in range(spec.depth):
        layer = []
        for (a, b) in brickwork_bonds(spec.n_sites, t, spec.periodic):
            choice = rng.choice(3, p=spec.gate_weights)
            if choice == 0:
                layer.append(Gate.cnot(a, b))
            elif choice == 1:
                layer.append(Gate.swap(a, b))
            elif spec.family == "automaton":
                th_a, th_b = rng.uniform(0, 2 * np.pi, size=2)
                layer.append(Gate.rz_pair(a, th_a, b, th_b))
            else:
                layer.append(Gate.hadamard(a))
                layer.append(Gate.hadamard(b))
        layers.append(tuple(layer))
    return Circuit(spec.n_sites, tuple(layers), spec.periodic, spec.master_seed)


@dataclass(frozen=True)
class ProductState:
    """A product initial state given by per-site amplitude pairs (a_i, b_i).

    The coefficient of basis string m factorizes as
    c_m = prod_i (a_i if bit_i(m) == 0 else b_i).
    """

    site_amps: np.ndarray = field(repr=False)  # shape (N, 2), complex

    def __post_init__(self):
        amps = np.asarray(self.site_amps, dtype=complex)
        if amps.ndim != 2 or amps.shape[1] != 2:
            raise ValueError("site_amps must have shape (N, 2)")
        norms = np.abs(amps[:, 0]) ** 2 + np.abs(amps[:, 1]) ** 2
        if not np.allclose(norms, 1, atol=1e-10):
            raise ValueError("each site amplitude pair must be normalized")
        object.__setattr__(self, "site_amps", amps)

    @property
    def n_sites(self):
        return self.site_amps.shape[0]

    @classmethod
    def x_basis(cls, signs):
        """Product of X eigenstates: site i is |+> for sign +1, |-> for -1.

        All 2^N coefficients have modulus 2^{-N/2}; their pairwise ratios
        are +-1.
        """
        signs = np.asarray(signs)
        if not np.all(np.abs(signs) == 1):
            raise ValueError("signs must be +-1")
        amps = np.stack([np.ones(len(signs)), signs.astype(float)], axis=1) / np.sqrt(2)
        return cls(amps)

    @classmethod
    def all_plus(cls, n_sites):
        return cls.x_basis(np.ones(n_sites, dtype=int))

    @classmethod
    def computational(cls, bits):
        bits = np.asarray(bits, dtype=bool)
        amps = np.stack([~bits, bits], axis=1).astype(complex)
        return cls(amps)

    @classmethod
    def haar_random(cls, n_sites, seed):
        """Independent Haar-random single-qubit states on every site."""
        rng = np.random.default_rng(seed)
        z = rng.normal(size=(n_sites, 2)) + 1j * rng.normal(size=(n_sites, 2))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return cls(z)

    def coefficient(self, bits):
        """c_m for bit array(s) of shape (..., N)."""
        bits = np.asarray(bits, dtype=bool)
        chosen = np.where(bits, self.site_amps[:, 1], self.site_amps[:, 0])
        return np.prod(chosen, axis=-1)

    def sample_bits(self, m, rng):
        """Draw m bit-strings from |c_x|^2 by independent per-site draws."""
        p1 = np.abs(self.site_amps[:, 1]) ** 2
        return rng.random((m, self.n_sites)) < p1

    def conj_ratio(self, bits_num, bits_den):
        """conj(c_{bits_num}) / conj(c_{bits_den}), computed site by site.

        Factorizing avoids underflow of the individual coefficients at
        large N.  Requires no zero single-site amplitudes on sites where
        the two strings differ.
        """
        bits_num = np.asarray(bits_num, dtype=bool)
        bits_den = np.asarray(bits_den, dtype=bool)
        num = np.where(bits_num, self.site_amps[:, 1], self.site_amps[:, 0])
        den = np.where(bits_den, self.site_amps[:, 1], self.site_amps[:, 0])
        diff = bits_num != bits_den
        if np.any(diff & (np.abs(den) == 0)):
            raise ZeroDivisionError("zero single-site amplitude along sample path")
        ratio = np.where(diff, np.conj(num) / np.conj(np.where(diff, den, 1.0)), 1.0)
        return np.prod(ratio, axis=-1)

    def statevector_amps(self):
        """Dense 2^N coefficient vector (small N only)."""
        n = self.n_sites
        if n > 26:
            raise ValueError(f"refusing dense expansion at N={n}")
        labels = np.arange(1 << n, dtype=np.uint64)
        bits = (labels[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1
        return self.coefficient(bits.astype(bool))


def with_seed(spec: EnsembleSpec, seed) -> EnsembleSpec:
    return replace(spec, master_seed=int(seed))
