"""Generalized 2k-point out-of-time-ordered correlators.

An OTOC is specified as an ordered word of single-site X factors, each
either bare or Heisenberg-conjugated by the circuit prefix, written
left-to-right in bra-ket order.  Text form: ``~X50 X0 ~X50 X0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, EnsembleSpec, ProductState, brickwork_bonds, build_brickwork, with_seed
from .engine import (
    HeisenbergWord,
    McEstimate,
    _inv_perm_cached,
    _perm_cached,
    mc_expectation,
)


@dataclass(frozen=True)
class OtocSpec:
    """Ordered factors (conjugated, site); conjugated means U^dag X U."""

    factors: tuple  # of (bool, int)

    def __post_init__(self):
        if len(self.factors) % 2:
            raise ValueError("correlator needs an even number of factors")
        object.__setattr__(self, "factors", tuple((bool(c), int(s)) for c, s in self.factors))

    def __str__(self):
        return " ".join(("~X" if c else "X") + str(s) for c, s in self.factors)

    @classmethod
    def parse(cls, text):
        factors = []
        for tok in text.split():
            conj = tok.startswith("~")
            body = tok[1:] if conj else tok
            if not body.startswith("X"):
                raise ValueError(f"bad factor token {tok!r}")
            factors.append((conj, int(body[1:])))
        return cls(tuple(factors))

    @property
    def conjugated_sites(self):
        return sorted({s for c, s in self.factors if c})

    @property
    def bare_sites(self):
        return sorted({s for c, s in self.factors if not c})


def expand_recursive(probe_sites, base_site=0) -> OtocSpec:
    """Unroll the nested-conjugation family into an explicit factor word.

    With W(0, t) = [~X_t] and W(m, t) = W(m-1, i_m) + [X_t] + W(m-1, i_m),
    the order-2^k correlator is <W(k-1, base) X_base>, giving 2^k factors.
    probe_sites = [i_1, ..., i_{k-1}].
    """
    probe_sites = list(probe_sites)
    if not probe_sites:
        raise ValueError("need at least one probe site")

    def w(m, target):
        if m == 0:
            return [(True, target)]
        inner = w(m - 1, probe_sites[m - 1])
        return inner + [(False, target)] + inner

    factors = w(len(probe_sites), base_site) + [(False, base_site)]
    return OtocSpec(tuple(factors))


def recursive_probe_sites(order, n_sites):
    """Default probe sites for the recursive family of a given order (a
    power of two): the far site L/2 first, then log2(order/2)-1, ..., 1."""
    k = int(np.log2(order))
    if 2**k != order or k < 2:
        raise ValueError("order must be a power of two, at least 4")
    return [n_sites // 2] + list(range(k - 2, 0, -1))


def compile_word(spec: OtocSpec, prefix: Circuit) -> HeisenbergWord:
    """Lower a factor word to circuit passes and flips, in application
    order, cancelling adjacent U U^dag pairs of the shared prefix."""
    if not prefix.basis_preserving:
        raise ValueError("prefix must be basis-preserving")
    actions = []
    for conj, site in reversed(spec.factors):  # rightmost factor acts first
        if conj and prefix.depth > 0:
            actions += [("forward", prefix), ("flip", site), ("backward", prefix)]
        else:
            actions.append(("flip", site))
    out = []
    for a in actions:
        if out and a[0] == "forward" and out[-1][0] == "backward" and out[-1][1] is a[1]:
            out.pop()
        elif out and a[0] == "backward" and out[-1][0] == "forward" and out[-1][1] is a[1]:
            out.pop()
        else:
            out.append(a)
    return HeisenbergWord(tuple(out))


def light_cone_contact_depth(spec: OtocSpec, n_sites, periodic=True, max_depth=10_000):
    """First depth at which the brickwork light cones of the conjugated
    sites reach any bare site.  Below this depth the correlator is exactly 1
    (all factors commute)."""
    reached = np.zeros(n_sites, dtype=bool)
    for s in spec.conjugated_sites:
        reached[s] = True
    bare = np.zeros(n_sites, dtype=bool)
    for s in spec.bare_sites:
        bare[s] = True
    if not reached.any() or not bare.any():
        return max_depth
    for t in range(max_depth):
        if np.any(reached & bare):
            return t
        for a, b in brickwork_bonds(n_sites, t, periodic):
            if reached[a] or reached[b]:
                reached[a] = reached[b] = True
    return max_depth


# -- exact evaluation ------------------------------------------------------


def exact_expectation(spec: OtocSpec, prefix: Circuit, state: ProductState) -> complex:
    """Exact <psi0| spec |psi0> via exhaustive label propagation (small N)."""
    n = prefix.n_sites
    labels, phases = _word_labels(spec, prefix)
    c = state.statevector_amps()
    return complex(np.sum(np.conj(c[labels]) * np.exp(1j * phases) * c))


def _conjugated_table(prefix: Circuit, site):
    """Label/phase table of U^dag X_site U over all basis labels, cached."""
    cache = prefix.__dict__.setdefault("_conj_tables", {})
    if site not in cache:
        perm, theta = _perm_cached(prefix)
        inv = _inv_perm_cached(prefix)
        lab = inv[perm ^ np.uint64(1 << site)]
        ph = theta - theta[lab]
        cache[site] = (lab, ph)
    return cache[site]


def _word_labels(spec: OtocSpec, prefix: Circuit):
    n = prefix.n_sites
    labels = np.arange(1 << n, dtype=np.uint64)
    phases = np.zeros(1 << n)
    for conj, site in reversed(spec.factors):
        if conj and prefix.depth > 0:
            lab, ph = _conjugated_table(prefix, site)
            phases += ph[labels]
            labels = lab[labels]
        else:
            labels = labels ^ np.uint64(1 << site)
    return labels, phases


# -- ensemble series -------------------------------------------------------


@dataclass
class OtocSeries:
    """Realization-averaged correlator estimates over a depth grid."""

    depths: np.ndarray
    means: np.ndarray  # complex, ensemble mean per depth
    stderrs: np.ndarray
    spec: OtocSpec
    n_sites: int
    n_realizations: int
    n_samples: int
    seed: int = 0
    per_realization: np.ndarray | None = field(default=None, repr=False)

    @property
    def values(self):
        return np.real(self.means)


def _realization_seed(master_seed, r):
    return int(np.random.SeedSequence((int(master_seed), int(r))).generate_state(1, np.uint64)[0])


def series_for_circuit(spec, circuit, depths, state, n_samples, seed, exact=False):
    """Correlator of one circuit realization at each prefix depth."""
    out = np.empty(len(depths), dtype=complex)
    err = np.empty(len(depths))
    for i, t in enumerate(depths):
        prefix = circuit.truncate(int(t))
        if exact:
            out[i] = exact_expectation(spec, prefix, state)
            err[i] = 0.0
        else:
            est = mc_expectation(compile_word(spec, prefix), state, n_samples, (seed, i))
            out[i], err[i] = est.mean, est.stderr
    return out, err


def evaluate_series(
    spec: OtocSpec,
    ensemble: EnsembleSpec,
    depths,
    n_realizations,
    n_samples,
    state: ProductState,
    seed=0,
    exact=False,
    max_cost=5e10,
    map_fn=map,
) -> OtocSeries:
    """Ensemble-averaged correlator series.

    Builds one circuit per realization (seed derived from ``seed``), runs
    the Monte Carlo estimator (or the exact evaluator for small N) at every
    prefix depth, and averages.  ``map_fn`` lets callers fan realizations
    out to a worker pool; aggregation is by realization index either way.
    """
    if ensemble.family != "automaton":
        raise ValueError("correlator series need an automaton ensemble")
    depths = np.asarray(depths, dtype=int)
    cost = float(n_realizations) * n_samples * len(spec.factors) * ensemble.n_sites * depths.sum()
    if not exact and cost > max_cost:
        raise ValueError(f"estimated cost {cost:.2e} exceeds budget {max_cost:.2e}")
    args = [
        (spec, ensemble, depths, state, n_samples, seed, exact, r)
        for r in range(n_realizations)
    ]
    rows = list(map_fn(_series_task, args))
    per_real = np.stack([m for m, _ in rows])
    means = per_real.mean(axis=0)
    if n_realizations > 1:
        stderrs = np.real(per_real).std(axis=0) / np.sqrt(n_realizations)
    else:
        stderrs = rows[0][1]
    return OtocSeries(
        depths, means, stderrs, spec, ensemble.n_sites, n_realizations, n_samples,
        seed=seed, per_realization=per_real,
    )


def _series_task(args):
    spec, ensemble, depths, state, n_samples, seed, exact, r = args
    circuit = build_brickwork(with_seed(ensemble, _realization_seed(seed, r)))
    return series_for_circuit(spec, circuit, depths, state, n_samples, (seed, r), exact=exact)


def default_depth_grid(contact_depth, t_max, coarse_step=10, fine_step=4):
    """Coarse points before light-cone contact, finer afterwards."""
    before = list(range(0, max(contact_depth - 2, 0), coarse_step))
    after = list(range(max(contact_depth - 2, 0), t_max + 1, fine_step))
    return np.array(sorted(set(before + after + [t_max])), dtype=int)


# -- scrambling time and fits ----------------------------------------------


def scrambling_time(series: OtocSeries, epsilon) -> float:
    """Smallest depth beyond which the series stays below epsilon, with
    linear interpolation at the crossing."""
    vals = series.values
    below = vals < epsilon
    idx = None
    for i in range(len(vals)):
        if below[i:].all():
            idx = i
            break
    if idx is None:
        raise ValueError(f"series never stays below {epsilon}; minimum is {vals.min():.3g}")
    if idx == 0:
        return float(series.depths[0])
    t0, t1 = series.depths[idx - 1], series.depths[idx]
    v0, v1 = vals[idx - 1], vals[idx]
    frac = (v0 - epsilon) / (v0 - v1) if v0 != v1 else 0.5
    return float(t0 + frac * (t1 - t0))


@dataclass
class ScramblingFit:
    """Least-squares fit parameters for scrambling-time scaling laws."""

    params: dict
    stderrs: dict
    residuals: np.ndarray


def fit_log_k(ks, t_stars) -> ScramblingFit:
    """Fit t* = c + v_k log2(k)."""
    ks = np.asarray(ks, float)
    y = np.asarray(t_stars, float)
    x = np.log2(ks)
    return _linear_fit(x, y, "v_k")


def fit_linear_k(ks, t_stars) -> ScramblingFit:
    """Fit t* = c + slope * k."""
    return _linear_fit(np.asarray(ks, float), np.asarray(t_stars, float), "slope")


def fit_gap_power(lengths, gaps) -> ScramblingFit:
    """Fit gap = c * L^alpha via log-log least squares."""
    x = np.log(np.asarray(lengths, float))
    y = np.log(np.asarray(gaps, float))
    fit = _linear_fit(x, y, "alpha")
    fit.params["prefactor"] = float(np.exp(fit.params["intercept"]))
    return fit


def _linear_fit(x, y, slope_name):
    if len(x) < 2 or np.ptp(x) == 0:
        raise ValueError("degenerate design matrix")
    a = np.stack([x, np.ones_like(x)], axis=1)
    coef, res, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    dof = max(len(x) - 2, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(a.T @ a)
    params = {slope_name: float(coef[0]), "intercept": float(coef[1])}
    stderrs = {slope_name: float(np.sqrt(cov[0, 0])), "intercept": float(np.sqrt(cov[1, 1]))}
    return ScramblingFit(params, stderrs, resid)


def gap_ratio(t_star_by_k):
    """(t*_16 - t*_8) / (t*_8 - t*_4) from a {k: t*} table."""
    t4, t8, t16 = (t_star_by_k[k] for k in (4, 8, 16))
    if t8 == t4:
        raise ValueError("degenerate gap t*_8 == t*_4")
    return (t16 - t8) / (t8 - t4)


def log_linear_tail_fit(series: OtocSeries, value_range=(3e-3, 0.5)):
    """Slope and R^2 of log(value) vs depth on the decaying tail."""
    vals = series.values
    lo, hi = value_range
    in_window = (vals > lo) & (vals < hi)
    decayed = np.cumsum(vals < hi) > 0  # only points at or after the decay onset
    mask = in_window & decayed
    if mask.sum() < 3:
        raise ValueError("not enough points in the tail window")
    x = series.depths[mask].astype(float)
    y = np.log(vals[mask])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


# -- brute-force search ----------------------------------------------------


def alternating_specs(n_factors, site_pool):
    """All alternating words ~X X ~X X ... with sites drawn from the pool."""
    import itertools

    pool = list(site_pool)
    for sites in itertools.product(pool, repeat=n_factors):
        yield OtocSpec(tuple((i % 2 == 0, s) for i, s in enumerate(sites)))


def cyclic_class(spec: OtocSpec):
    """Even cyclic rotations of the factor word (pattern-preserving)."""
    f = spec.factors
    return {tuple(f[i:] + f[:i]) for i in range(0, len(f), 2)}


def canonical_form(spec: OtocSpec):
    return min(cyclic_class(spec))


@dataclass
class SearchResult:
    best_spec: OtocSpec
    best_value: float
    reference_depth: int
    values: dict  # canonical factor tuple -> ensemble-mean value
    complete: bool = True


def max_otoc_search_dense(
    n_factors,
    site_pool,
    ensemble: EnsembleSpec,
    reference_depth,
    n_realizations,
    state: ProductState,
    seed=0,
) -> SearchResult:
    """Exhaustive search over alternating pool words by exact evaluation.

    Feasible for small N: every candidate is evaluated with cached
    whole-basis label tables, one cyclic representative per class.
    """
    reps = {}
    for spec in alternating_specs(n_factors, site_pool):
        reps.setdefault(canonical_form(spec), spec)
    totals = {key: 0.0 for key in reps}
    for r in range(n_realizations):
        circuit = build_brickwork(with_seed(ensemble, _realization_seed(seed, r)))
        prefix = circuit.truncate(int(reference_depth))
        c = state.statevector_amps()
        for key, spec in reps.items():
            labels, phases = _word_labels(spec, prefix)
            totals[key] += float(np.real(np.sum(np.conj(c[labels]) * np.exp(1j * phases) * c)))
        prefix.__dict__.pop("_conj_tables", None)  # free per-realization tables
    values = {key: tot / n_realizations for key, tot in totals.items()}
    best_key = max(values, key=values.get)
    return SearchResult(reps[best_key], values[best_key], int(reference_depth), values)


def max_otoc_search_mc(
    n_factors,
    site_pool,
    ensemble: EnsembleSpec,
    reference_depth,
    n_realizations,
    state: ProductState,
    seed=0,
    coarse_samples=256,
    fine_samples=4096,
    keep_fraction=0.05,
) -> SearchResult:
    """Two-stage Monte Carlo search at large N: coarse sampling over one
    cyclic representative per class, fine sampling over the survivors (the
    cyclic pruning is re-verified by evaluating every survivor rotation)."""
    reps = {}
    for spec in alternating_specs(n_factors, site_pool):
        reps.setdefault(canonical_form(spec), spec)

    def ensemble_value(spec, n_samples, tag):
        total = 0.0
        for r in range(n_realizations):
            circuit = build_brickwork(with_seed(ensemble, _realization_seed(seed, r)))
            word = compile_word(spec, circuit.truncate(int(reference_depth)))
            est = mc_expectation(word, state, n_samples, (seed, tag, r))
            total += est.mean.real
        return total / n_realizations

    coarse = {key: ensemble_value(spec, coarse_samples, hash(key) % (1 << 32)) for key, spec in reps.items()}
    n_keep = max(int(len(coarse) * keep_fraction), 5)
    survivors = sorted(coarse, key=coarse.get, reverse=True)[:n_keep]
    fine = {}
    for key in survivors:
        for rotated in cyclic_class(reps[key]):
            fine[rotated] = ensemble_value(OtocSpec(rotated), fine_samples, hash(rotated) % (1 << 32))
    best = max(fine, key=fine.get)
    return SearchResult(OtocSpec(best), fine[best], int(reference_depth), fine)
