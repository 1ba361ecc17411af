"""automaton-lab: Monte Carlo and exact simulation of basis-preserving
random circuits, with entanglement, spectral and OTOC complexity metrics."""

from .circuits import Circuit, EnsembleSpec, Gate, ProductState, build_brickwork
from .engine import (
    HeisenbergWord,
    McEstimate,
    Trajectory,
    amplitude,
    apply_gate,
    apply_word,
    evolve,
    mc_expectation,
    permutation_table,
)
from .dense import (
    SchmidtSpectrum,
    StateVector,
    apply_circuit,
    exact_distribution,
    expectation,
    sample_bitstrings,
    schmidt,
)
from .metrics import (
    bipartition_scan,
    bitstring_histogram,
    design_bound_check,
    haar_trace_power_oracle,
    level_spacing,
    min_entropy,
    page_entropy,
    renyi,
    rmt_reference,
    trace_power,
    von_neumann,
)
from .otoc import (
    OtocSeries,
    OtocSpec,
    compile_word,
    evaluate_series,
    expand_recursive,
    scrambling_time,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
