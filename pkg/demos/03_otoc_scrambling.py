"""Walkthrough: generalized 2k-point correlators and scrambling times.

The recursive correlator family F^(k)(t) nests Heisenberg-conjugated
X operators k/2 levels deep; its decay time t*_k grows with k, which is
the operator-complexity signal this package is built to measure. The
Monte Carlo engine evaluates these at system sizes far beyond dense
simulation; here we stay small so the exact engine can cross-check.

Run:  python demos/03_otoc_scrambling.py   (about a minute)
"""

import numpy as np

from automaton_lab import EnsembleSpec, OtocSpec, ProductState, evaluate_series, scrambling_time
from automaton_lab.otoc import expand_recursive, light_cone_contact_depth, recursive_probe_sites

N, DEPTH, R, M = 16, 80, 24, 2048
state = ProductState.all_plus(N)
ens = EnsembleSpec(n_sites=N, depth=DEPTH, master_seed=2024)

print(f"recursive correlator family at N={N}, {R} realizations, {M} samples each\n")
t_star = {}
for order in (4, 8, 16):
    spec = expand_recursive(recursive_probe_sites(order, N))
    contact = light_cone_contact_depth(spec, N)
    depths = np.arange(0, DEPTH + 1, 4)
    series = evaluate_series(spec, ens, depths, R, M, state, seed=5, max_cost=1e14)
    print(f"order {order:2d}  ({str(spec)[:34]}...)  light-cone contact at t={contact}")
    line = "  ".join(
        f"{d}:{v:+.2f}" for d, v in zip(series.depths[::2], series.values[::2])
    )
    print(f"  F(t): {line}")
    for eps in (0.1, 0.01):
        try:
            t_star[(order, eps)] = scrambling_time(series, eps)
            print(f"  t*({eps}) = {t_star[(order, eps)]:.1f}")
        except ValueError:
            print(f"  t*({eps}) not reached within depth {DEPTH}")
    print()

for eps in (0.1, 0.01):
    cells = [
        f"k={k}: {t_star[(k, eps)]:.1f}" if (k, eps) in t_star else f"k={k}: >{DEPTH}"
        for k in (4, 8, 16)
    ]
    print(f"t*({eps}):  " + "   ".join(cells))
print("\nhigher-order correlators stay near 1 longer: the scrambling time "
      "grows with k,\nwhich is the operator-complexity signal (crossings "
      "beyond the depth budget print as lower bounds).")
