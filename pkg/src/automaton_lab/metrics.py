"""Complexity diagnostics: bit-string tail bounds, entropies, bipartition
statistics, entanglement-spectrum level spacings and Haar references.

All entropies are reported in bits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dense import SchmidtSpectrum, StateVector, schmidt

EIG_CLAMP = 1e-12


# -- entropies -------------------------------------------------------------


def von_neumann(sp: SchmidtSpectrum) -> float:
    """-sum lambda^2 log2 lambda^2, zero-clamped terms skipped."""
    v = sp.values[sp.values > EIG_CLAMP]
    return float(-np.sum(v * np.log2(v)))


def page_entropy(d_a, d_b) -> float:
    """Average entanglement of a Haar-random pure state across a d_a x d_b
    cut: log2(d_a) - d_a / (2 ln(2) d_b), clamped at 0."""
    if d_a > d_b:
        d_a, d_b = d_b, d_a
    return max(np.log2(d_a) - d_a / (2 * np.log(2) * d_b), 0.0)


def trace_power(sp: SchmidtSpectrum, k) -> float:
    """Tr rho_A^k = sum (lambda^2)^k."""
    if k < 1 or k != int(k):
        raise ValueError("k must be a positive integer")
    return float(np.sum(sp.values ** int(k)))


def renyi(sp: SchmidtSpectrum, alpha) -> float:
    """Renyi entropy (1/(1-alpha)) log2 sum lambda^{2 alpha}."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if alpha == 1:
        raise ValueError("alpha=1 is the von Neumann entropy; call von_neumann")
    v = sp.values[sp.values > EIG_CLAMP]
    return float(np.log2(np.sum(v**alpha)) / (1 - alpha))


def min_entropy(sp: SchmidtSpectrum) -> float:
    """alpha -> infinity limit: -log2 of the largest eigenvalue."""
    return float(-np.log2(sp.values[-1]))


# -- bipartition statistics ------------------------------------------------


@dataclass
class EntropyStats:
    """Von Neumann entropies across a set of bipartitions."""

    entropies: list  # list of (subset, S_vN)
    mean: float
    std_dev: float


def bipartition_scan(sv: StateVector, mode="all", n_sampled=None, seed=0) -> EntropyStats:
    """S_vN over equal-size bipartitions of the lattice.

    mode="all" enumerates every size-N/2 subset containing site 0 (each
    unordered bipartition once; the complement has the same entropy).
    mode="sampled" draws n_sampled subsets uniformly.
    """
    n = sv.n_sites
    if n % 2:
        raise ValueError("equal-cut scan needs even N")
    half = n // 2
    if mode == "all":
        from math import comb

        if comb(n, half) > 10**6:
            raise ValueError("too many bipartitions; use mode='sampled'")
        subsets = [(0,) + rest for rest in itertools.combinations(range(1, n), half - 1)]
    elif mode == "sampled":
        rng = np.random.default_rng(seed)
        subsets = [tuple(np.sort(rng.choice(n, size=half, replace=False))) for _ in range(n_sampled)]
    else:
        raise ValueError(f"unknown mode {mode!r}")
    ent = [(sub, von_neumann(schmidt(sv, sub))) for sub in subsets]
    values = np.array([e for _, e in ent])
    return EntropyStats(ent, float(values.mean()), float(values.std()))


# -- level spacing ---------------------------------------------------------


@dataclass
class LevelSpacingStats:
    """Consecutive-gap ratios r_i = min(s_i/s_{i+1}, s_{i+1}/s_i)."""

    ratios: np.ndarray
    mean_r: float
    n_zero_spacings: int
    n_discarded: int


def level_spacing(sp_or_values, truncation=EIG_CLAMP) -> LevelSpacingStats:
    """Level-spacing ratios of a spectrum sorted ascending.

    Eigenvalues below ``truncation`` are discarded (their count reported);
    zero spacings yield r = 0 entries rather than NaNs.
    """
    values = sp_or_values.values if isinstance(sp_or_values, SchmidtSpectrum) else np.sort(np.asarray(sp_or_values, float))
    kept = values[values > truncation]
    n_discarded = len(values) - len(kept)
    if len(kept) < 3:
        raise ValueError("need at least 3 retained levels")
    s = np.diff(kept)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.minimum(s[:-1] / s[1:], s[1:] / s[:-1])
    r = np.nan_to_num(r, nan=0.0, posinf=0.0)
    return LevelSpacingStats(r, float(r.mean()), int(np.sum((s[:-1] == 0) | (s[1:] == 0))), n_discarded)


def pooled_level_spacing(spectra, truncation=EIG_CLAMP) -> LevelSpacingStats:
    """Ratios pooled over many spectra."""
    stats = [level_spacing(sp, truncation) for sp in spectra]
    ratios = np.concatenate([s.ratios for s in stats])
    return LevelSpacingStats(
        ratios,
        float(ratios.mean()),
        sum(s.n_zero_spacings for s in stats),
        sum(s.n_discarded for s in stats),
    )


def rmt_reference(ensemble, matrix_dim, n_samples, seed) -> LevelSpacingStats:
    """Empirical r-ratio reference from sampled GUE matrices or from
    i.i.d.-uniform level sets (Poisson)."""
    if matrix_dim < 16:
        raise ValueError("matrix_dim too small for a stable reference")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(n_samples):
        if ensemble == "gue":
            a = rng.normal(size=(matrix_dim, matrix_dim)) + 1j * rng.normal(size=(matrix_dim, matrix_dim))
            levels = np.linalg.eigvalsh((a + a.conj().T) / 2)
        elif ensemble == "poisson":
            levels = np.sort(rng.random(matrix_dim))
        else:
            raise ValueError(f"unknown ensemble {ensemble!r}")
        s = np.diff(levels)
        ratios.append(np.minimum(s[:-1] / s[1:], s[1:] / s[:-1]))
    ratios = np.concatenate(ratios)
    return LevelSpacingStats(ratios, float(ratios.mean()), 0, 0)


# -- bit-string distribution -----------------------------------------------


@dataclass
class BitstringHistogram:
    """Histogram of gamma = d * p(x) over uniform-weighted basis strings."""

    bin_edges: np.ndarray
    counts: np.ndarray
    total_mass: int

    def density(self):
        widths = np.diff(self.bin_edges)
        return self.counts / (self.total_mass * widths)

    def centers(self):
        return (self.bin_edges[:-1] + self.bin_edges[1:]) / 2


def bitstring_histogram(probabilities, dim, bin_width=1.0, gamma_max=None) -> BitstringHistogram:
    """Bin the rescaled probabilities gamma = dim * p of pooled outcomes."""
    gamma = np.ravel(np.asarray(probabilities, float)) * dim
    if gamma_max is None:
        gamma_max = max(np.ceil(gamma.max()), 1.0)
    edges = np.arange(0, gamma_max + bin_width, bin_width)
    counts, edges = np.histogram(gamma, bins=edges)
    return BitstringHistogram(edges, counts, gamma.size)


def fit_exponential_tail(hist: BitstringHistogram, gamma_range=(1.0, 10.0)):
    """Least-squares slope of log density vs gamma over the given range.

    Porter-Thomas gives slope -1.  Empty bins are skipped.
    """
    x = hist.centers()
    d = hist.density()
    mask = (x >= gamma_range[0]) & (x <= gamma_range[1]) & (d > 0)
    if mask.sum() < 3:
        raise ValueError("not enough occupied bins in the fit range")
    slope, intercept = np.polyfit(x[mask], np.log(d[mask]), 1)
    return float(slope), float(intercept)


def design_bound_check(probabilities, dim, gamma_grid=None, epsilon=0.1):
    """Tail test against the design fluctuation bound.

    For each gamma, compares the empirical tail Pr[dim*p >= gamma] (uniform
    weight over pooled basis strings) with (1+epsilon) e^{-gamma}.  Returns
    a row per gamma and the largest gamma* up to which the bound holds
    continuously from gamma=1.
    """
    gamma = np.sort(np.ravel(np.asarray(probabilities, float)) * dim)
    if gamma_grid is None:
        gamma_grid = np.arange(1.0, max(np.ceil(gamma[-1]), 2.0) + 1)
    rows = []
    for g in gamma_grid:
        tail = float(np.mean(gamma >= g))
        bound = (1 + epsilon) * np.exp(-g)
        rows.append((float(g), tail, bound, tail <= bound))
    gamma_star = 0.0
    for g, tail, bound, ok in rows:
        if not ok:
            break
        gamma_star = g
    return rows, gamma_star


def violation_onset(rows):
    """Smallest grid gamma at which the bound fails, or None."""
    for g, _, _, ok in rows:
        if not ok:
            return g
    return None


# -- Haar reference for trace powers ---------------------------------------


def haar_trace_power_oracle(d_a, d_b, ks, n_samples, seed):
    """Mean and stderr of Tr rho_A^k over Haar-random pure states, for each
    k in ks, by direct sampling of normalized Gaussian vectors."""
    if d_a * d_b > 1 << 20:
        raise ValueError("Hilbert space too large for the sampling oracle")
    ks = np.atleast_1d(ks).astype(int)
    rng = np.random.default_rng(seed)
    vals = np.empty((n_samples, len(ks)))
    for i in range(n_samples):
        psi = rng.normal(size=(d_a, d_b)) + 1j * rng.normal(size=(d_a, d_b))
        psi /= np.linalg.norm(psi)
        lam = np.linalg.svd(psi, compute_uv=False) ** 2
        vals[i] = [np.sum(lam**k) for k in ks]
    mean = vals.mean(axis=0)
    stderr = vals.std(axis=0) / np.sqrt(n_samples)
    return mean, stderr
