"""Command-line entry point: run, list and describe experiments.

    automaton-lab run --config exp.yaml [--set ensemble.depth=40] ...
    automaton-lab list
    automaton-lab describe otoc_recursive

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

import yaml

from .experiments import (
    EXPERIMENT_KINDS,
    ConfigError,
    config_from_dict,
    run_experiment,
    set_by_path,
)

DESCRIPTIONS = {
    "bitstrings": """\
Pooled output-probability statistics of the final state.
Computes the exact measurement distribution (default: X basis) for each
circuit realization, pools the rescaled probabilities gamma = 2^N p(x),
and reports the histogram, the exponential tail fit, and the design
fluctuation-bound table with its violation onset.
Key params: basis, bin_width, gamma_max, epsilon, gamma_grid_max, fit_range.
Outputs: histogram.csv (gamma, count, density),
         design_bound.csv (gamma, empirical_tail, bound, holds),
         summary.json (tail_slope, gamma_star, violation_onset).""",
    "entropy_timeseries": """\
Half-cut von Neumann entropy against circuit depth.
Evolves each realization layer by layer and records the entanglement
entropy of a fixed cut, then summarizes saturation over a trailing window.
Key params: cut (site list), depth_step, window.
Outputs: entropy_timeseries.csv (depth, mean, std, min, max),
         summary.json (late_mean, temporal_std, page_entropy).""",
    "bipartition_scan": """\
Entanglement entropy across equal-size bipartitions of the final state.
Key params: mode ('all' or 'sampled'), n_sampled.
Outputs: bipartition.csv (realization, mean_entropy, std_entropy, n_subsets),
         summary.json (mean_entropy, mean_std, max_std).""",
    "renyi_vs_haar": """\
Ensemble-mean trace powers Tr rho_A^k against a sampled Haar reference.
Key params: ks, cut, oracle_samples, oracle_seed.
Outputs: renyi.csv (k, mean_trace_power, stderr, haar_mean, haar_stderr,
         dev_sigma), summary.json (max_abs_dev_sigma).""",
    "level_spacing": """\
Entanglement-spectrum gap-ratio statistics pooled over realizations, with
sampled random-matrix (GUE) and uncorrelated-level (Poisson) references.
Key params: cut, truncation, n_bins, reference_dim, reference_samples.
Outputs: level_spacing.csv (bin_lo, bin_hi, density, gue_density,
         poisson_density), summary.json (mean_r, gue_mean_r, poisson_mean_r).""",
    "otoc_recursive": """\
Recursive-family correlator series F^(k)(t) for the standard probe-site
pattern {N/2, ..., 2, 1, 0}, realization-averaged, plus scrambling times
t*_k(epsilon) on an epsilon grid.
Key params: orders (default 4,8,16), depths or (coarse_step, fine_step),
            epsilon_grid, exact (use the dense engine at small N).
Outputs: otoc_k<k>.csv (depth, mean, stderr, n_samples, n_realizations),
         scrambling.csv (order, epsilon, t_star), summary.json.""",
    "otoc_max_search": """\
Brute-force maximization of alternating correlator words over a site pool
at a fixed reference depth (dense exhaustive at small N, two-stage Monte
Carlo otherwise), plus the winner's full depth series.
Key params: n_factors, site_pool, reference_depth (required), engine
            ('dense'/'mc'), coarse_samples, fine_samples, series_depths.
Outputs: search.csv (rank, value, spec), best_series.csv, summary.json.""",
    "scrambling_fit": """\
Scrambling-time extraction and scaling fits from existing series CSVs.
Key params: series_files ({order: path}, required), epsilon_grid.
Outputs: t_star.csv (order, epsilon, t_star), gap_ratio.csv,
         summary.json (log-in-k and linear-in-k fit parameters).""",
    "verify_oracle": """\
Cross-engine consistency checks: trajectory amplitudes against dense
state-vector amplitudes, and Monte Carlo correlator estimates against
exact values at several prefix depths.
Key params: n_list, amplitudes_per_circuit, n_depth_points.
Outputs: verify.csv (realization, n_sites, max_amp_dev, mc_agree,
         mc_points), summary.json (max_amplitude_deviation,
         mc_agreement_rate).""",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are validation errors: exit 1
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog + ": error: " + message) from None


def build_parser():
    parser = _Parser(prog="automaton-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a config file")
    run.add_argument("--config", required=True, help="YAML config file")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config field, e.g. --set ensemble.depth=40",
    )
    run.add_argument("--output", default=None, help="output directory (default: derived from hash)")
    sub.add_parser("list", help="list experiment kinds")
    desc = sub.add_parser("describe", help="describe one experiment kind")
    desc.add_argument("kind")
    return parser


def _load_config(path, overrides):
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"config is not valid YAML: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        set_by_path(raw, key, yaml.safe_load(value))
    return config_from_dict(raw)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        if isinstance(err.code, str):
            print(err.code, file=sys.stderr)
            return 1
        return 0 if not err.code else 1

    if args.command == "list":
        for kind in EXPERIMENT_KINDS:
            print(kind)
        return 0

    if args.command == "describe":
        if args.kind not in DESCRIPTIONS:
            print(
                f"unknown kind {args.kind!r}; valid kinds: {', '.join(EXPERIMENT_KINDS)}",
                file=sys.stderr,
            )
            return 1
        print(f"{args.kind}\n{'-' * len(args.kind)}\n{DESCRIPTIONS[args.kind]}")
        return 0

    try:
        cfg = _load_config(args.config, args.overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        run = run_experiment(cfg, args.output)
    except (ConfigError, ValueError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {run.path} ({len(run.files)} data files, hash {cfg.config_hash})")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
