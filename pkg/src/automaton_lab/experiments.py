"""Config-driven experiments: each kind reproduces one study as plot-ready
CSV/JSON data files.

A run is determined by (config, master_seed): every worker task derives its
seed from the master seed and its task index, partial results are flushed
per realization, and reruns with an equal config hash produce byte-identical
data files regardless of worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dense, metrics, otoc
from .circuits import Circuit, EnsembleSpec, ProductState, build_brickwork, with_seed
from .engine import flatten_seed, mc_expectation
from .otoc import OtocSpec

EXPERIMENT_KINDS = (
    "bitstrings",
    "entropy_timeseries",
    "bipartition_scan",
    "renyi_vs_haar",
    "level_spacing",
    "otoc_recursive",
    "otoc_max_search",
    "scrambling_fit",
    "verify_oracle",
)

FLOAT_FMT = "%.12g"


# -- configuration ---------------------------------------------------------


@dataclass
class ExperimentConfig:
    """One experiment run: a kind, an ensemble, counts and kind parameters."""

    kind: str
    ensemble: EnsembleSpec
    realizations: int = 20
    mc_samples: int = 10_000
    master_seed: int = 0
    workers: int = 1
    output_root: str = ""
    input_state: str = "auto"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; valid: {', '.join(EXPERIMENT_KINDS)}")
        if self.realizations < 1:
            raise ConfigError("realizations must be >= 1")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.input_state not in ("auto", "x_plus", "x_random_signs", "haar_product", "real_product"):
            raise ConfigError(f"unknown input_state {self.input_state!r}")
        if not self.output_root:
            self.output_root = os.environ.get("AUTOMATON_LAB_RUNS", "runs")

    def to_dict(self):
        e = self.ensemble
        return {
            "kind": self.kind,
            "ensemble": {
                "n_sites": e.n_sites,
                "depth": e.depth,
                "family": e.family,
                "gate_weights": list(e.gate_weights),
                "periodic": e.periodic,
                "master_seed": e.master_seed,
            },
            "realizations": self.realizations,
            "mc_samples": self.mc_samples,
            "master_seed": self.master_seed,
            "input_state": self.input_state,
            "params": dict(sorted(self.params.items())),
        }

    @property
    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class ConfigError(ValueError):
    """A configuration problem detected before any work starts."""


def config_from_dict(raw):
    """Build a validated ExperimentConfig from a plain (YAML-shaped) dict."""
    raw = dict(raw)
    if "kind" not in raw:
        raise ConfigError("config needs a 'kind' field")
    ens_raw = dict(raw.pop("ensemble", {}))
    if "n_sites" not in ens_raw or "depth" not in ens_raw:
        raise ConfigError("ensemble section needs n_sites and depth")
    if "gate_weights" in ens_raw:
        ens_raw["gate_weights"] = tuple(float(w) for w in ens_raw["gate_weights"])
    try:
        ensemble = EnsembleSpec(**ens_raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad ensemble section: {err}") from err
    known = {"kind", "realizations", "mc_samples", "master_seed", "workers", "output_root", "input_state"}
    top = {k: raw.pop(k) for k in list(raw) if k in known}
    params = dict(raw.pop("params", {}))
    if raw:
        raise ConfigError(f"unknown config fields: {', '.join(sorted(raw))}")
    try:
        return ExperimentConfig(ensemble=ensemble, params=params, **top)
    except TypeError as err:
        raise ConfigError(str(err)) from err


def set_by_path(raw, dotted, value):
    """Apply one --set override like 'ensemble.depth=40' to a config dict."""
    keys = dotted.split(".")
    node = raw
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot descend into {k!r} in override {dotted}")
    node[keys[-1]] = value
    return raw


# independent seed streams layered on the master seed
_STREAM_INPUT, _STREAM_SUBSETS, _STREAM_AMPS = 101, 102, 103


def realization_seed(master_seed, index):
    """The derived seed of one worker task; stable across worker counts."""
    ss = np.random.SeedSequence(flatten_seed((master_seed, index)))
    return int(ss.generate_state(1, np.uint64)[0])


def make_input_state(cfg: ExperimentConfig, r):
    """The initial product state of realization r under the configured
    convention.  'auto' means: x-basis |+...+> for automaton ensembles and
    random real-amplitude product states for the Clifford comparison."""
    name = cfg.input_state
    if name == "auto":
        name = "x_plus" if cfg.ensemble.family == "automaton" else "real_product"
    n = cfg.ensemble.n_sites
    rng = np.random.default_rng(realization_seed((cfg.master_seed, _STREAM_INPUT), r))
    if name == "x_plus":
        return ProductState.all_plus(n)
    if name == "x_random_signs":
        return ProductState.x_basis(rng.choice([-1, 1], size=n))
    if name == "haar_product":
        return ProductState.haar_random(n, rng)
    if name == "real_product":
        theta = rng.uniform(0, 2 * np.pi, size=n)
        return ProductState(np.stack([np.cos(theta), np.sin(theta)], axis=1).astype(complex))
    raise ConfigError(f"unknown input_state {name!r}")


def build_realization(cfg: ExperimentConfig, r) -> Circuit:
    return build_brickwork(with_seed(cfg.ensemble, realization_seed(cfg.master_seed, r)))


# -- output plumbing -------------------------------------------------------


def write_csv(path, cfg, columns, rows):
    """A CSV with a config-hash header; formatting is fixed so identical
    data always produces identical bytes."""
    lines = [f"# automaton-lab {cfg.kind}", f"# config_hash={cfg.config_hash}", ",".join(columns)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(FLOAT_FMT % v)
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_json(path, cfg, payload):
    payload = {"kind": cfg.kind, "config_hash": cfg.config_hash, **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


class RunDirectory:
    """Output directory of one run: data files, per-realization parts and
    the manifest.  Parts let a killed run resume at realization granularity."""

    def __init__(self, cfg: ExperimentConfig, out_dir=None):
        self.cfg = cfg
        self.path = out_dir or os.path.join(cfg.output_root, f"{cfg.kind}-{cfg.config_hash}")
        self.parts_dir = os.path.join(self.path, "parts")
        os.makedirs(self.parts_dir, exist_ok=True)
        for name in os.listdir(self.parts_dir):  # drop half-written parts
            if name.endswith(".tmp.npz"):
                os.remove(os.path.join(self.parts_dir, name))
        self.files = []
        self.t_start = time.time()

    def part_path(self, index):
        return os.path.join(self.parts_dir, f"part-{index:05d}.npz")

    def load_part(self, index):
        path = self.part_path(index)
        if not os.path.exists(path):
            return None
        with np.load(path, allow_pickle=False) as data:
            if str(data["config_hash"]) != self.cfg.config_hash:
                return None  # stale part from an earlier config
            return {k: data[k] for k in data.files if k != "config_hash"}

    def save_part(self, index, **arrays):
        tmp = self.part_path(index)[: -len(".npz")] + ".tmp.npz"
        np.savez(tmp, config_hash=self.cfg.config_hash, **arrays)
        os.replace(tmp, self.part_path(index))

    def csv(self, name, columns, rows):
        path = write_csv(os.path.join(self.path, name), self.cfg, columns, rows)
        self.files.append(name)
        return path

    def json(self, name, payload):
        path = write_json(os.path.join(self.path, name), self.cfg, payload)
        self.files.append(name)
        return path

    def finalize(self, task_seeds):
        manifest = {
            "kind": self.cfg.kind,
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.config_hash,
            "task_seeds": task_seeds,
            "wall_time_s": round(time.time() - self.t_start, 3),
            "files": list(self.files),
        }
        with open(os.path.join(self.path, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return self.path


def map_tasks(cfg: ExperimentConfig, task_fn, run: RunDirectory, n_tasks):
    """Compute (or reload) every per-realization part, fanning out to a
    process pool when workers > 1.  Parts merge in task-index order, so the
    result never depends on scheduling."""
    pending = [r for r in range(n_tasks) if run.load_part(r) is None]
    if pending:
        if cfg.workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                for r, arrays in zip(pending, pool.map(task_fn, [(cfg, r) for r in pending])):
                    run.save_part(r, **arrays)
        else:
            for r in pending:
                run.save_part(r, **task_fn((cfg, r)))
    return [run.load_part(r) for r in range(n_tasks)]


# -- experiment kinds ------------------------------------------------------


def _bitstrings_task(args):
    cfg, r = args
    circuit = build_realization(cfg, r)
    state = make_input_state(cfg, r)
    sv = dense.apply_circuit(dense.StateVector.from_product(state), circuit)
    probs = dense.exact_distribution(sv, cfg.params.get("basis", "x"))
    return {"probs": probs}


def run_bitstrings(cfg: ExperimentConfig, out_dir=None):
    """Pooled rescaled output-probability histogram with the exponential
    tail fit and the design fluctuation bound table."""
    p = cfg.params
    run = RunDirectory(cfg, out_dir)
    parts = map_tasks(cfg, _bitstrings_task, run, cfg.realizations)
    pooled = np.concatenate([pt["probs"] for pt in parts])
    dim = 1 << cfg.ensemble.n_sites
    hist = metrics.bitstring_histogram(
        pooled, dim, bin_width=p.get("bin_width", 0.5), gamma_max=p.get("gamma_max", 20.0)
    )
    centers, density = hist.centers(), hist.density()
    run.csv(
        "histogram.csv",
        ["gamma", "count", "density"],
        [(centers[i], int(hist.counts[i]), density[i]) for i in range(len(centers))],
    )
    grid = np.arange(1.0, p.get("gamma_grid_max", 14.0) + 1)
    rows, gamma_star = metrics.design_bound_check(pooled, dim, grid, epsilon=p.get("epsilon", 0.1))
    run.csv(
        "design_bound.csv",
        ["gamma", "empirical_tail", "bound", "holds"],
        [(g, t, b, int(ok)) for g, t, b, ok in rows],
    )
    fit_range = tuple(p.get("fit_range", (1.0, 10.0)))
    try:
        slope, intercept = metrics.fit_exponential_tail(hist, fit_range)
    except ValueError:
        slope = intercept = float("nan")
    onset = metrics.violation_onset(rows)
    run.json(
        "summary.json",
        {
            "tail_slope": slope,
            "tail_intercept": intercept,
            "fit_range": list(fit_range),
            "gamma_star": gamma_star,
            "violation_onset": onset,
            "n_pooled": int(pooled.size),
        },
    )
    run.finalize([realization_seed(cfg.master_seed, r) for r in range(cfg.realizations)])
    return run


def _entropy_task(args):
    cfg, r = args
    circuit = build_realization(cfg, r)
    cut = tuple(cfg.params.get("cut", range(cfg.ensemble.n_sites // 2)))
    step = int(cfg.params.get("depth_step", 1))
    depths = np.arange(step, circuit.depth + 1, step)
    sv = dense.StateVector.from_product(make_input_state(cfg, r))
    ent = []
    done = 0
    for t in depths:
        for layer in circuit.layers[done:t]:
            for g in layer:
                dense.apply_gate_dense(sv, g)
        done = t
        ent.append(metrics.von_neumann(dense.schmidt(sv, cut)))
    return {"depths": depths, "entropy": np.array(ent)}


def run_entropy_timeseries(cfg: ExperimentConfig, out_dir=None):
    """Half-cut von Neumann entropy against circuit depth, with saturation
    statistics over a trailing window."""
    run = RunDirectory(cfg, out_dir)
    parts = map_tasks(cfg, _entropy_task, run, cfg.realizations)
    depths = parts[0]["depths"]
    series = np.stack([pt["entropy"] for pt in parts])  # (R, T)
    run.csv(
        "entropy_timeseries.csv",
        ["depth", "mean", "std", "min", "max"],
        [
            (int(depths[i]), series[:, i].mean(), series[:, i].std(), series[:, i].min(), series[:, i].max())
            for i in range(len(depths))
        ],
    )
    window = int(cfg.params.get("window", 20))
    tail = series[:, -window:]
    n = cfg.ensemble.n_sites
    cut_size = len(cfg.params.get("cut", range(n // 2)))
    run.json(
        "summary.json",
        {
            "window": window,
            "late_mean": tail.mean(),
            "temporal_std": np.mean(tail.std(axis=1)),
            "page_entropy": metrics.page_entropy(1 << cut_size, 1 << (n - cut_size)),
        },
    )
    run.finalize([realization_seed(cfg.master_seed, r) for r in range(cfg.realizations)])
    return run


def _bipartition_task(args):
    cfg, r = args
    circuit = build_realization(cfg, r)
    sv = dense.apply_circuit(dense.StateVector.from_product(make_input_state(cfg, r)), circuit)
    stats = metrics.bipartition_scan(
        sv,
        mode=cfg.params.get("mode", "all"),
        n_sampled=cfg.params.get("n_sampled"),
        seed=realization_seed((cfg.master_seed, _STREAM_SUBSETS), r),
    )
    return {
        "mean": np.array([stats.mean]),
        "std": np.array([stats.std_dev]),
        "n_subsets": np.array([len(stats.entropies)]),
    }


def run_bipartition_scan(cfg: ExperimentConfig, out_dir=None):
    """Spread of the entanglement entropy across equal bipartitions."""
    run = RunDirectory(cfg, out_dir)
    parts = map_tasks(cfg, _bipartition_task, run, cfg.realizations)
    rows = [
        (r, float(pt["mean"][0]), float(pt["std"][0]), int(pt["n_subsets"][0]))
        for r, pt in enumerate(parts)
    ]
    run.csv("bipartition.csv", ["realization", "mean_entropy", "std_entropy", "n_subsets"], rows)
    stds = np.array([row[2] for row in rows])
    means = np.array([row[1] for row in rows])
    run.json(
        "summary.json",
        {"mean_entropy": means.mean(), "mean_std": stds.mean(), "max_std": stds.max()},
    )
    run.finalize([realization_seed(cfg.master_seed, r) for r in range(cfg.realizations)])
    return run


def _renyi_task(args):
    cfg, r = args
    circuit = build_realization(cfg, r)
    cut = tuple(cfg.params.get("cut", range(cfg.ensemble.n_sites // 2)))
    sv = dense.apply_circuit(dense.StateVector.from_product(make_input_state(cfg, r)), circuit)
    sp = dense.schmidt(sv, cut)
    ks = np.array(cfg.params.get("ks", list(range(2, 11))), dtype=int)
    return {"ks": ks, "trace_powers": np.array([metrics.trace_power(sp, k) for k in ks])}


def run_renyi_vs_haar(cfg: ExperimentConfig, out_dir=None):
    """Ensemble-mean trace powers Tr rho_A^k against the Haar sampling
    oracle, with the deviation in combined-standard-error units."""
    p = cfg.params
    run = RunDirectory(cfg, out_dir)
    parts = map_tasks(cfg, _renyi_task, run, cfg.realizations)
    ks = parts[0]["ks"]
    vals = np.stack([pt["trace_powers"] for pt in parts])  # (R, K)
    mean = vals.mean(axis=0)
    stderr = vals.std(axis=0) / math.sqrt(cfg.realizations)
    cut_size = len(p.get("cut", range(cfg.ensemble.n_sites // 2)))
    d_a = 1 << cut_size
    d_b = 1 << (cfg.ensemble.n_sites - cut_size)
    haar_mean, haar_err = metrics.haar_trace_power_oracle(
        d_a, d_b, ks, p.get("oracle_samples", 2000), p.get("oracle_seed", 20_2020)
    )
    combined = np.sqrt(stderr**2 + haar_err**2)
    dev = (mean - haar_mean) / combined
    run.csv(
        "renyi.csv",
        ["k", "mean_trace_power", "stderr", "haar_mean", "haar_stderr", "dev_sigma"],
        [(int(ks[i]), mean[i], stderr[i], haar_mean[i], haar_err[i], dev[i]) for i in range(len(ks))],
    )
    run.json(
        "summary.json",
        {"max_abs_dev_sigma": float(np.max(np.abs(dev))), "dev_sigma": dev, "ks": ks},
    )
    run.finalize([realization_seed(cfg.master_seed, r) for r in range(cfg.realizations)])
    return run


def _level_spacing_task(args):
    cfg, r = args
    circuit = build_realization(cfg, r)
    cut = tuple(cfg.params.get("cut", range(cfg.ensemble.n_sites // 2)))
    sv = dense.apply_circuit(dense.StateVector.from_product(make_input_state(cfg, r)), circuit)
    sp = dense.schmidt(sv, cut)
    try:
        stats = metrics.level_spacing(sp, truncation=cfg.params.get("truncation", metrics.EIG_CLAMP))
        return {"ratios": stats.ratios, "n_discarded": np.array([stats.n_discarded])}
    except ValueError:  # spectrum too degenerate to form ratios
        return {"ratios": np.zeros(0), "n_discarded": np.array([0])}


def run_level_spacing(cfg: ExperimentConfig, out_dir=None):
    """Pooled entanglement-spectrum gap-ratio histogram with sampled
    random-matrix and uncorrelated-level references."""
    p = cfg.params
    run = RunDirectory(cfg, out_dir)
    parts = map_tasks(cfg, _level_spacing_task, run, cfg.realizations)
    ratios = np.concatenate([pt["ratios"] for pt in parts])
    if ratios.size == 0:
        raise RuntimeError("no level-spacing ratios survived; spectra are fully degenerate")
    bins = np.linspace(0, 1, int(p.get("n_bins", 20)) + 1)
    hist, _ = np.histogram(ratios, bins=bins, density=True)
    refs = {
        name: metrics.rmt_reference(
            name, p.get("reference_dim", 512), p.get("reference_samples", 200), p.get("reference_seed", 11)
        )
        for name in ("gue", "poisson")
    }
    ref_hists = {
        name: np.histogram(st.ratios, bins=bins, density=True)[0] for name, st in refs.items()
    }
    run.csv(
        "level_spacing.csv",
        ["bin_lo", "bin_hi", "density", "gue_density", "poisson_density"],
        [
            (bins[i], bins[i + 1], hist[i], ref_hists["gue"][i], ref_hists["poisson"][i])
            for i in range(len(hist))
        ],
    )
    run.json(
        "summary.json",
        {
            "mean_r": ratios.mean(),
            "n_ratios": int(ratios.size),
            "gue_mean_r": refs["gue"].mean_r,
            "poisson_mean_r": refs["poisson"].mean_r,
            "first_bin_density": hist[0],
        },
    )
    run.finalize([realization_seed(cfg.master_seed, r) for r in range(cfg.realizations)])
    return run


def _otoc_series_task(args):
    cfg, (order, r) = args
    p = cfg.params
    n = cfg.ensemble.n_sites
    spec = otoc.expand_recursive(otoc.recursive_probe_sites(order, n))
    depths = _recursive_depth_grid(cfg, spec)
    circuit = build_realization(cfg, (order, r))
    state = make_input_state(cfg, r)
    exact = bool(p.get("exact", False))
    means, errs = otoc.series_for_circuit(
        spec, circuit, depths, state, cfg.mc_samples, (cfg.master_seed, order, r), exact=exact
    )
    return {"depths": depths, "means": np.real(means), "stderrs": errs}


def _recursive_depth_grid(cfg, spec):
    p = cfg.params
    if "depths" in p:
        return np.asarray(p["depths"], dtype=int)
    contact = otoc.light_cone_contact_depth(spec, cfg.ensemble.n_sites, cfg.ensemble.periodic)
    return otoc.default_depth_grid(
        contact,
        cfg.ensemble.depth,
        coarse_step=int(p.get("coarse_step", 10)),
        fine_step=int(p.get("fine_step", 4)),
    )


def run_otoc_recursive(cfg: ExperimentConfig, out_dir=None):
    """Realization-averaged recursive-family correlator series per order,
    plus scrambling times on an epsilon grid."""
    p = cfg.params
    orders = [int(k) for k in p.get("orders", (4, 8, 16))]
    run = RunDirectory(cfg, out_dir)
    tasks = [(k, r) for k in orders for r in range(cfg.realizations)]
    parts = map_tasks(cfg, _otoc_series_task_by_index, run, len(tasks))
    # map_tasks hands indices to the task fn; recover (order, realization)
    eps_grid = [float(e) for e in p.get("epsilon_grid", (1e-1, 10**-1.5, 1e-2, 10**-2.5))]
    scram_rows = []
    t_star = {}
    for ki, order in enumerate(orders):
        sel = parts[ki * cfg.realizations : (ki + 1) * cfg.realizations]
        depths = sel[0]["depths"]
        per = np.stack([pt["means"] for pt in sel])
        mean = per.mean(axis=0)
        stderr = per.std(axis=0) / math.sqrt(cfg.realizations)
        run.csv(
            f"otoc_k{order}.csv",
            ["depth", "mean", "stderr", "n_samples", "n_realizations"],
            [
                (int(depths[i]), mean[i], stderr[i], cfg.mc_samples, cfg.realizations)
                for i in range(len(depths))
            ],
        )
        spec = otoc.expand_recursive(otoc.recursive_probe_sites(order, cfg.ensemble.n_sites))
        series = otoc.OtocSeries(
            depths, mean.astype(complex), stderr, spec, cfg.ensemble.n_sites, cfg.realizations, cfg.mc_samples
        )
        for eps in eps_grid:
            try:
                ts = otoc.scrambling_time(series, eps)
            except ValueError:
                ts = float("nan")
            t_star[(order, eps)] = ts
            scram_rows.append((order, eps, ts))
    run.csv("scrambling.csv", ["order", "epsilon", "t_star"], scram_rows)
    summary = {"orders": orders, "epsilon_grid": eps_grid}
    run.json("summary.json", summary)
    run.finalize([realization_seed(cfg.master_seed, i) for i in range(len(tasks))])
    return run


def _otoc_series_task_by_index(args):
    cfg, index = args
    orders = [int(k) for k in cfg.params.get("orders", (4, 8, 16))]
    order = orders[index // cfg.realizations]
    r = index % cfg.realizations
    return _otoc_series_task((cfg, (order, r)))


def run_otoc_max_search(cfg: ExperimentConfig, out_dir=None):
    """Brute-force correlator maximization over a site pool at a reference
    depth, with the winning word's depth series."""
    p = cfg.params
    n = cfg.ensemble.n_sites
    pool = [int(s) for s in p.get("site_pool", (0, 1, n // 2 - 1, n // 2))]
    n_factors = int(p.get("n_factors", 8))
    engine = p.get("engine", "dense" if n <= 14 else "mc")
    run = RunDirectory(cfg, out_dir)
    state = make_input_state(cfg, 0)
    ref_depth = p.get("reference_depth")
    if ref_depth is None:
        raise ConfigError("otoc_max_search needs params.reference_depth")
    if engine == "dense":
        result = otoc.max_otoc_search_dense(
            n_factors, pool, cfg.ensemble, int(ref_depth), cfg.realizations, state,
            seed=cfg.master_seed,
        )
    else:
        result = otoc.max_otoc_search_mc(
            n_factors, pool, cfg.ensemble, int(ref_depth), cfg.realizations, state,
            seed=cfg.master_seed,
            coarse_samples=int(p.get("coarse_samples", 256)),
            fine_samples=int(p.get("fine_samples", cfg.mc_samples)),
            keep_fraction=float(p.get("keep_fraction", 0.05)),
        )
    ranked = sorted(result.values.items(), key=lambda kv: -kv[1])
    run.csv(
        "search.csv",
        ["rank", "value", "spec"],
        [(i + 1, v, str(OtocSpec(key))) for i, (key, v) in enumerate(ranked)],
    )
    depths = np.asarray(
        p.get("series_depths", otoc.default_depth_grid(0, cfg.ensemble.depth, 8, 4)), dtype=int
    )
    series = otoc.evaluate_series(
        result.best_spec, cfg.ensemble, depths, cfg.realizations, cfg.mc_samples, state,
        seed=cfg.master_seed, exact=(engine == "dense"),
    )
    run.csv(
        "best_series.csv",
        ["depth", "mean", "stderr", "n_samples", "n_realizations"],
        [
            (int(depths[i]), series.values[i], series.stderrs[i], cfg.mc_samples, cfg.realizations)
            for i in range(len(depths))
        ],
    )
    run.json(
        "summary.json",
        {
            "best_spec": str(result.best_spec),
            "best_value": result.best_value,
            "reference_depth": result.reference_depth,
            "n_candidates": len(result.values),
            "engine": engine,
        },
    )
    run.finalize([cfg.master_seed])
    return run


def run_scrambling_fit(cfg: ExperimentConfig, out_dir=None):
    """Scrambling-time table and scaling fits from series CSV files
    produced by an otoc experiment."""
    p = cfg.params
    inputs = p.get("series_files")
    if not inputs:
        raise ConfigError("scrambling_fit needs params.series_files: {order: path}")
    eps_grid = [float(e) for e in p.get("epsilon_grid", (1e-1, 10**-1.5, 1e-2, 10**-2.5))]
    run = RunDirectory(cfg, out_dir)
    series_by_k = {}
    for order, path in sorted(inputs.items(), key=lambda kv: int(kv[0])):
        depths, mean, stderr = _read_series_csv(path)
        series_by_k[int(order)] = otoc.OtocSeries(
            depths, mean.astype(complex), stderr, None, cfg.ensemble.n_sites, 0, 0
        )
    rows = []
    tstar = {}
    for k, series in series_by_k.items():
        for eps in eps_grid:
            try:
                ts = otoc.scrambling_time(series, eps)
            except ValueError:
                ts = float("nan")
            tstar[(k, eps)] = ts
            rows.append((k, eps, ts))
    run.csv("t_star.csv", ["order", "epsilon", "t_star"], rows)
    fits = {}
    ratio_rows = []
    for eps in eps_grid:
        by_k = {k: tstar[(k, eps)] for k in series_by_k if not math.isnan(tstar[(k, eps)])}
        if len(by_k) >= 3:
            fit = otoc.fit_log_k(list(by_k), list(by_k.values()))
            fits[f"log_k_eps_{eps:g}"] = {"params": fit.params, "stderrs": fit.stderrs}
            lin = otoc.fit_linear_k(list(by_k), list(by_k.values()))
            fits[f"linear_k_eps_{eps:g}"] = {"params": lin.params, "stderrs": lin.stderrs}
        if all((k, eps) in tstar and not math.isnan(tstar[(k, eps)]) for k in (4, 8, 16)):
            try:
                ratio_rows.append((eps, otoc.gap_ratio({k: tstar[(k, eps)] for k in (4, 8, 16)})))
            except ValueError:
                pass
    run.csv("gap_ratio.csv", ["epsilon", "ratio"], ratio_rows)
    run.json("summary.json", {"fits": fits})
    run.finalize([cfg.master_seed])
    return run


def _read_series_csv(path):
    depths, mean, stderr = [], [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("depth"):
                continue
            cells = line.split(",")
            depths.append(int(cells[0]))
            mean.append(float(cells[1]))
            stderr.append(float(cells[2]))
    return np.array(depths), np.array(mean), np.array(stderr)


def _verify_task(args):
    cfg, r = args
    p = cfg.params
    n_list = [int(n) for n in p.get("n_list", (8, 10, 12))]
    n = n_list[r % len(n_list)]
    ens = EnsembleSpec(
        n_sites=n, depth=cfg.ensemble.depth, family="automaton",
        periodic=cfg.ensemble.periodic, master_seed=realization_seed(cfg.master_seed, r),
    )
    circuit = build_brickwork(ens)
    state = ProductState.all_plus(n)
    sv = dense.apply_circuit(dense.StateVector.from_product(state), circuit)
    rng = np.random.default_rng(realization_seed((cfg.master_seed, _STREAM_AMPS), r))
    from .engine import amplitude

    amp_dev = 0.0
    for label in rng.integers(0, 1 << n, size=int(p.get("amplitudes_per_circuit", 32))):
        bits = (int(label) >> np.arange(n)) & 1
        amp_dev = max(amp_dev, abs(amplitude(bits.astype(bool), circuit, state) - sv.amps[label]))
    spec = otoc.expand_recursive(otoc.recursive_probe_sites(4, n))
    depths = np.linspace(1, circuit.depth, int(p.get("n_depth_points", 10)), dtype=int)
    agree = 0
    for i, t in enumerate(depths):
        prefix = circuit.truncate(int(t))
        exact_val = otoc.exact_expectation(spec, prefix, state).real
        est = mc_expectation(
            otoc.compile_word(spec, prefix), state, cfg.mc_samples, (cfg.master_seed, r, i)
        )
        tol = 4 * max(est.stderr, 1e-12)
        agree += int(abs(est.mean.real - exact_val) <= tol)
    return {
        "n": np.array([n]),
        "amp_dev": np.array([amp_dev]),
        "agree": np.array([agree]),
        "n_points": np.array([len(depths)]),
    }


def run_verify_oracle(cfg: ExperimentConfig, out_dir=None):
    """Cross-engine checks: trajectory amplitudes against dense amplitudes,
    and Monte Carlo correlators against exact values."""
    run = RunDirectory(cfg, out_dir)
    parts = map_tasks(cfg, _verify_task, run, cfg.realizations)
    amp_dev = max(float(pt["amp_dev"][0]) for pt in parts)
    agree = sum(int(pt["agree"][0]) for pt in parts)
    total = sum(int(pt["n_points"][0]) for pt in parts)
    run.csv(
        "verify.csv",
        ["realization", "n_sites", "max_amp_dev", "mc_agree", "mc_points"],
        [
            (r, int(pt["n"][0]), float(pt["amp_dev"][0]), int(pt["agree"][0]), int(pt["n_points"][0]))
            for r, pt in enumerate(parts)
        ],
    )
    run.json(
        "summary.json",
        {"max_amplitude_deviation": amp_dev, "mc_agreement_rate": agree / total, "n_points": total},
    )
    run.finalize([realization_seed(cfg.master_seed, r) for r in range(cfg.realizations)])
    return run


RUNNERS = {
    "bitstrings": run_bitstrings,
    "entropy_timeseries": run_entropy_timeseries,
    "bipartition_scan": run_bipartition_scan,
    "renyi_vs_haar": run_renyi_vs_haar,
    "level_spacing": run_level_spacing,
    "otoc_recursive": run_otoc_recursive,
    "otoc_max_search": run_otoc_max_search,
    "scrambling_fit": run_scrambling_fit,
    "verify_oracle": run_verify_oracle,
}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunDirectory:
    return RUNNERS[cfg.kind](cfg, out_dir)
