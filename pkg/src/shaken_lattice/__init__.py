"""Shaken-lattice atom interferometry: simulation, protocol learning, analysis."""

from .units import (
    LatticeConfig,
    MomentumPopulations,
    SignalSpec,
    make_default_config,
    normalized_variation,
    variation,
)
from .bloch import ground_state, ground_energy, ladder_hamiltonian, populations_of
from .propagator import (
    BasisOverflowError,
    PropagationError,
    PropagationSettings,
    QuantumState,
    UnitarityError,
    plane_wave_state,
    propagate,
    propagate_dual,
)
from .protocols import (
    ProtocolFormatError,
    ProtocolSequence,
    ShakingProtocol,
    concatenate,
    load_protocol,
    random_protocol,
    save_protocol,
)
from .ga import (
    GAConfig,
    GAPhase,
    FitnessSpec,
    StageTask,
    crossover_one_point,
    crossover_two_point,
    creep,
    evolve,
    fitness_dual,
    fitness_split,
    mutate,
    propagation_task,
    recombination_task,
    reflection_task,
    split_task,
)
from .sequencer import (
    SequencePlan,
    Stage,
    michelson_plan,
    optimize_with_bias,
    reciprocal_plan,
    run_sequence,
    scan_ac_response,
    scan_dc_response,
)
from .sensitivity import (
    FisherResult,
    PowerLawFit,
    fisher_at,
    fit_power_law,
    project_sensitivity,
    scaling_study,
)
from .robustness import sweep_depth, sweep_parasitic, sweep_phase_noise, sweep_wavelength

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
