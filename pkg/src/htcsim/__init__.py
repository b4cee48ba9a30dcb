"""Exact quantum dynamics of disordered molecular ensembles in a cavity.

Numpy/scipy library for simulating N two-level molecules, each with one
harmonic vibrational mode, collectively coupled to a single cavity photon in
the single-excitation sector. The main engine is a matrix-product-state
time evolution with swap-gate photon transport; exact diagonalization,
mean-field, and closed-form references cross-check it.
"""

from .model import (
    DisorderRealization,
    HamiltonianTermList,
    HtcParams,
    build_term_list,
    sample_disorder,
)
from .mps import (
    BondSpectrum,
    MatrixProductState,
    MpsError,
    TruncationAlarm,
    from_dense,
    init_product_state,
    vib_block_entropy,
)
from .observables import (
    AveragedSeries,
    ObservableRecord,
    ObservableTimeSeries,
    TailConfig,
    TailOperator,
    disorder_average,
    excitation_vs_energy,
    position_distribution,
    tail_operator,
    tail_weights,
    transfer_probability,
)
from .tebd import (
    Schedule,
    StepReport,
    TrotterGateSet,
    build_gates,
    default_schedule,
    evolve,
    step,
)
from .meanfield import MeanFieldState, mf_evolve
from .oracle import (
    DenseBasis,
    build_dense_hamiltonian,
    dark_photon_weight_numeric,
    evolve_exact,
    initial_dense_state,
)
from . import perturb
from .harness import RunConfig, run_ensemble, run_single, run_sweep, build_report

__version__ = "0.1.0"

__all__ = [
    "AveragedSeries",
    "BondSpectrum",
    "DenseBasis",
    "DisorderRealization",
    "HamiltonianTermList",
    "HtcParams",
    "MatrixProductState",
    "MeanFieldState",
    "MpsError",
    "ObservableRecord",
    "ObservableTimeSeries",
    "RunConfig",
    "Schedule",
    "StepReport",
    "TailConfig",
    "TailOperator",
    "TrotterGateSet",
    "TruncationAlarm",
    "build_dense_hamiltonian",
    "build_gates",
    "build_report",
    "build_term_list",
    "dark_photon_weight_numeric",
    "default_schedule",
    "disorder_average",
    "evolve",
    "evolve_exact",
    "excitation_vs_energy",
    "from_dense",
    "init_product_state",
    "initial_dense_state",
    "mf_evolve",
    "perturb",
    "position_distribution",
    "run_ensemble",
    "run_single",
    "run_sweep",
    "sample_disorder",
    "step",
    "tail_operator",
    "tail_weights",
    "transfer_probability",
    "vib_block_entropy",
]
