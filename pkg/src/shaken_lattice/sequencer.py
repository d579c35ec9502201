"""Assembly and simulation of full interferometer sequences.

A Michelson sequence is split, propagate x k, reflect, propagate x k,
recombine; the reciprocal variant inserts a second reflection so the atoms
trace a fully symmetric path (split, propagate x k, reflect,
propagate x 2k, reflect, propagate x k, recombine), which nulls the
space-time area and with it the DC response. Interrogation time counts the
propagation stages; with the default 0.502 ms stage duration both default
topologies interrogate for 2.008 ms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace as dc_replace
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import bloch
from .ga import (
    EvolveResult,
    GAConfig,
    GAPhase,
    GA_FAST_SETTINGS,
    StageEvaluator,
    evolve_genomes,
    recombination_task,
)
from .propagator import PropagationSettings, QuantumState, propagate
from .protocols import ProtocolSequence, ShakingProtocol, load_protocol
from .units import LatticeConfig, MomentumPopulations, SignalSpec, normalized_variation

MICHELSON_LABELS = ("split", "propagate", "reflect", "propagate", "recombine")
RECIPROCAL_LABELS = ("split", "propagate", "reflect", "propagate", "reflect",
                     "propagate", "recombine")


@dataclass(frozen=True)
class Stage:
    label: str
    protocol: ShakingProtocol
    repeat: int = 1

    def __post_init__(self):
        if self.label not in ("split", "propagate", "reflect", "recombine"):
            raise ValueError(f"unknown stage label {self.label!r}")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")

    @property
    def duration_s(self) -> float:
        return self.repeat * self.protocol.duration_s


@dataclass(frozen=True)
class SequencePlan:
    """Ordered stages plus the topology they realize."""

    stages: tuple
    topology: str

    def __post_init__(self):
        labels = tuple(s.label for s in self.stages)
        expected = {"michelson": MICHELSON_LABELS, "reciprocal": RECIPROCAL_LABELS}
        if self.topology not in expected:
            raise ValueError(f"unknown topology {self.topology!r}")
        if labels != expected[self.topology]:
            raise ValueError(
                f"{self.topology} sequence must have stages {expected[self.topology]}, got {labels}"
            )

    @property
    def duration_s(self) -> float:
        """Wall-clock duration of the whole shaking sequence."""
        return float(sum(s.duration_s for s in self.stages))

    @property
    def interrogation_s(self) -> float:
        """Interrogation time: the summed duration of the propagation stages."""
        return float(sum(s.duration_s for s in self.stages if s.label == "propagate"))

    def drive(self) -> ProtocolSequence:
        parts, labels = [], []
        for stage in self.stages:
            for _ in range(stage.repeat):
                parts.append(stage.protocol)
                labels.append(stage.label)
        return ProtocolSequence(parts, labels=labels)

    def replace_stage(self, label: str, protocol: ShakingProtocol) -> "SequencePlan":
        """New plan with every stage of the given label using a different protocol."""
        stages = tuple(
            dc_replace(s, protocol=protocol) if s.label == label else s for s in self.stages
        )
        return SequencePlan(stages=stages, topology=self.topology)


def michelson_plan(protocols: Mapping[str, ShakingProtocol], legs: int = 2) -> SequencePlan:
    """split, propagate x legs, reflect, propagate x legs, recombine."""
    return SequencePlan(
        stages=(
            Stage("split", protocols["split"]),
            Stage("propagate", protocols["propagate"], legs),
            Stage("reflect", protocols["reflect"]),
            Stage("propagate", protocols["propagate"], legs),
            Stage("recombine", protocols["recombine"]),
        ),
        topology="michelson",
    )


def reciprocal_plan(protocols: Mapping[str, ShakingProtocol], legs: int = 1) -> SequencePlan:
    """split, prop x legs, reflect, prop x 2 legs, reflect, prop x legs, recombine."""
    return SequencePlan(
        stages=(
            Stage("split", protocols["split"]),
            Stage("propagate", protocols["propagate"], legs),
            Stage("reflect", protocols["reflect"]),
            Stage("propagate", protocols["propagate"], 2 * legs),
            Stage("reflect", protocols["reflect"]),
            Stage("propagate", protocols["propagate"], legs),
            Stage("recombine", protocols["recombine"]),
        ),
        topology="reciprocal",
    )


def run_sequence(
    plan: SequencePlan,
    lattice: LatticeConfig,
    signal: SignalSpec = SignalSpec.none(),
    settings: PropagationSettings = PropagationSettings(),
    truncation: int = 5,
    initial: Optional[QuantumState] = None,
    return_state: bool = False,
):
    """Propagate the ground state through the whole sequence under a signal.

    Stages are chained with absolute time carried across, so the applied
    a(t) stays phase coherent over the full interrogation. Returns the final
    MomentumPopulations (and the state when return_state is set). Propagator
    errors are re-raised with the offending stage named.
    """
    state = initial if initial is not None else bloch.ground_state(lattice, settings.basis_size)
    for index, stage in enumerate(plan.stages):
        for rep in range(stage.repeat):
            tag = f"{index}:{stage.label}" + (f"[{rep}]" if stage.repeat > 1 else "")
            state = propagate(state, stage.protocol, lattice, signal, settings, stage=tag)
    pops = bloch.populations_of(state, truncation)
    return (pops, state) if return_state else pops


def run_prefix(
    plan: SequencePlan,
    lattice: LatticeConfig,
    through: int,
    signal: SignalSpec = SignalSpec.none(),
    settings: PropagationSettings = PropagationSettings(),
) -> QuantumState:
    """State after the first `through` stages (used to optimize later stages in context)."""
    state = bloch.ground_state(lattice, settings.basis_size)
    for stage in plan.stages[:through]:
        for _ in range(stage.repeat):
            state = propagate(state, stage.protocol, lattice, signal, settings, stage=stage.label)
    return state


def response(
    plan: SequencePlan,
    lattice: LatticeConfig,
    signal: SignalSpec,
    settings: PropagationSettings = PropagationSettings(),
    reference: Optional[MomentumPopulations] = None,
) -> float:
    """Signal response: normalized variation between signal-on and signal-off finals, percent."""
    if reference is None:
        reference = run_sequence(plan, lattice, SignalSpec.none(), settings)
    perturbed = run_sequence(plan, lattice, signal, settings)
    return normalized_variation(perturbed, reference)


def scan_ac_response(
    plan: SequencePlan,
    lattice: LatticeConfig,
    a_x: float,
    frequencies_hz: Sequence[float],
    settings: PropagationSettings = PropagationSettings(),
    phase: float = 0.0,
) -> np.ndarray:
    """Response curve over AC frequencies; returns rows (frequency_hz, variation_percent)."""
    frequencies_hz = np.asarray(list(frequencies_hz), dtype=float)
    if frequencies_hz.size == 0:
        raise ValueError("frequency grid is empty")
    reference = run_sequence(plan, lattice, SignalSpec.none(), settings)
    rows = []
    for f in frequencies_hz:
        if a_x == 0.0:
            rows.append((f, 0.0))
            continue
        sig = SignalSpec.sinusoid(a_x=a_x, omega=2.0 * np.pi * f, phase=phase)
        rows.append((f, response(plan, lattice, sig, settings, reference=reference)))
    return np.array(rows)


def scan_dc_response(
    plan: SequencePlan,
    lattice: LatticeConfig,
    accelerations: Sequence[float],
    settings: PropagationSettings = PropagationSettings(),
    reference: Optional[MomentumPopulations] = None,
) -> np.ndarray:
    """Response to DC accelerations; returns rows (a_mps2, variation_percent)."""
    self_referenced = reference is None
    if self_referenced:
        reference = run_sequence(plan, lattice, SignalSpec.none(), settings)
    rows = []
    for a in accelerations:
        if a == 0.0 and self_referenced:
            rows.append((a, 0.0))
            continue
        sig = SignalSpec.dc(a) if a != 0.0 else SignalSpec.none()
        rows.append((a, response(plan, lattice, sig, settings, reference=reference)))
    return np.array(rows)


def optimize_with_bias(
    plan: SequencePlan,
    lattice: LatticeConfig,
    a_dc: float,
    config: GAConfig,
    settings: PropagationSettings = GA_FAST_SETTINGS,
    phases: Optional[Sequence[GAPhase]] = None,
    stop_when: Optional[Callable[[float, dict], bool]] = None,
    run_dir=None,
) -> tuple[ShakingProtocol, EvolveResult]:
    """Re-learn the recombination stage with a DC bias applied throughout.

    Every fitness propagation includes the bias: the pre-recombination state
    is computed under it and each candidate recombination is scored under
    it, so the returned protocol recombines to the ground distribution at
    a = a_dc rather than at zero.
    """
    signal = SignalSpec.dc(a_dc) if a_dc != 0.0 else SignalSpec.none()
    pre = run_prefix(plan, lattice, len(plan.stages) - 1, signal, settings)
    ground_pops = bloch.populations_of(bloch.ground_state(lattice, settings.basis_size))
    task = recombination_task(ground_pops, initial=pre)
    evaluator = StageEvaluator(task, lattice, config, settings, signal, t0=pre.time_s)
    result = evolve_genomes(evaluator, config, phases=phases, stop_when=stop_when)
    protocol = evaluator.protocol_for(result.best_genome, fitness=result.best_fitness,
                                      seed=config.seed, bias_a_dc=a_dc)
    if run_dir is not None:
        from .protocols import save_protocol
        Path(run_dir).mkdir(parents=True, exist_ok=True)
        save_protocol(protocol, Path(run_dir) / "recombine_biased.json")
    return protocol, result


# ---------------------------------------------------------------------------
# sequence manifests (files listing the stage protocols of a plan)
# ---------------------------------------------------------------------------

def save_manifest(plan_files: Mapping[str, str], topology: str, legs: int, path) -> None:
    """Write a sequence manifest: topology, legs, and stage protocol files."""
    doc = {"topology": topology, "legs": legs,
           "protocols": {k: str(v) for k, v in plan_files.items()}}
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_manifest(path) -> SequencePlan:
    """Build a plan from a manifest file; stage paths are resolved relative to it."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    for key in ("topology", "protocols"):
        if key not in doc:
            raise ValueError(f"{path}: manifest missing field {key!r}")
    stages = ("split", "propagate", "reflect", "recombine")
    missing = [stage for stage in stages if stage not in doc["protocols"]]
    if missing:
        raise FileNotFoundError(
            f"{path}: manifest lists no protocol for stage(s) {', '.join(missing)}")
    protocols = {}
    for stage in stages:
        ppath = Path(doc["protocols"][stage])
        if not ppath.is_absolute():
            ppath = path.parent / ppath
        if not ppath.exists():
            raise FileNotFoundError(f"stage {stage!r}: protocol file {ppath} not found")
        protocols[stage] = load_protocol(ppath)
    legs = int(doc.get("legs", 2 if doc["topology"] == "michelson" else 1))
    builder = michelson_plan if doc["topology"] == "michelson" else reciprocal_plan
    return builder(protocols, legs)
