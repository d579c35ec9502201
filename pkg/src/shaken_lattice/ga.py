"""Genetic-algorithm optimization of shaking protocols.

Population management follows the classic recipe: rank by fitness
(minimizing), keep the best A_live unchanged (elitism), delete the worst
A_die, and refill with children produced from parents drawn uniformly among
the survivors by one-point crossover, two-point crossover, mutation and
creep. Every child's randomness comes from a stream derived from
(master seed, generation, slot), so results are bit-identical regardless of
how fitness evaluations are scheduled.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import bloch
from .propagator import (
    PropagationSettings,
    QuantumState,
    build_schedule,
    plane_wave_state,
    propagate_schedule,
)
from .protocols import ShakingProtocol, default_gain, save_protocol
from .units import LatticeConfig, SignalSpec

#: Inner-loop integration settings: second-order stepping is accurate to
#: ~1e-6 per population bin at dt = 1e-7, far below any fitness target,
#: and roughly six times faster than the reporting-grade defaults.
GA_FAST_SETTINGS = PropagationSettings(dt_s=1e-7, order=2, backend="ladder")

_OVERFLOW_FITNESS = 1e6


@dataclass(frozen=True)
class GAConfig:
    """Algorithm parameters; defaults reproduce the reference optimization setup."""

    population: int = 20
    elites: int = 2
    culled: int = 4
    mutation_limit: float = 1000.0
    creep_rate: float = 1000.0
    sigma: float = 100.0
    lines: int = 100
    bandwidth_hz: float = 35_000.0
    duration_s: float = 5.02e-4
    max_generations: int = 2000
    fitness_target: float = 1e-3
    weights: tuple = (0.35, 0.35, 0.15, 0.15)  # one-point, two-point, mutation, creep
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.elites < 0 or self.culled < 0:
            raise ValueError("elites and culled must be non-negative")
        if self.elites + self.culled > self.population:
            raise ValueError("elites + culled must not exceed the population")
        if len(self.weights) != 4 or min(self.weights) < 0 or sum(self.weights) <= 0:
            raise ValueError("weights must be 4 non-negative numbers with positive sum")

    @property
    def genome_size(self) -> int:
        return 2 * self.lines


@dataclass(frozen=True)
class GAPhase:
    """Operator overrides for one stretch of generations (annealing schedules)."""

    generations: int
    mutation_limit: Optional[float] = None
    creep_rate: Optional[float] = None
    weights: Optional[tuple] = None


# ---------------------------------------------------------------------------
# genome operators
# ---------------------------------------------------------------------------

def crossover_one_point(parent_a: np.ndarray, parent_b: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Swap tails after a random cut c in 1..size (c = size leaves both unchanged)."""
    if parent_a.shape != parent_b.shape:
        raise ValueError("parents must have equal length")
    cut = int(rng.integers(1, parent_a.size + 1))
    child_a = np.concatenate([parent_a[:cut], parent_b[cut:]])
    child_b = np.concatenate([parent_b[:cut], parent_a[cut:]])
    return child_a, child_b


def crossover_two_point(parent_a: np.ndarray, parent_b: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Swap the middle segment (c1, c2], with 1 <= c1 < c2 <= size."""
    if parent_a.shape != parent_b.shape:
        raise ValueError("parents must have equal length")
    c1 = int(rng.integers(1, parent_a.size))
    c2 = int(rng.integers(c1 + 1, parent_a.size + 1))
    child_a = parent_a.copy()
    child_b = parent_b.copy()
    child_a[c1:c2] = parent_b[c1:c2]
    child_b[c1:c2] = parent_a[c1:c2]
    return child_a, child_b


def mutate(parent: np.ndarray, rng, limit: float = 1000.0) -> np.ndarray:
    """Replace one coefficient with a uniform draw from [-limit, limit]."""
    if limit < 0:
        raise ValueError("mutation limit must be non-negative")
    child = parent.copy()
    child[int(rng.integers(parent.size))] = rng.uniform(-limit, limit)
    return child


def creep(parent: np.ndarray, rng, rate: float = 1000.0) -> np.ndarray:
    """Shift one coefficient by (0.5 - r) * rate, r uniform in [0, 1)."""
    if rate < 0:
        raise ValueError("creep rate must be non-negative")
    child = parent.copy()
    child[int(rng.integers(parent.size))] += (0.5 - rng.random()) * rate
    return child


# ---------------------------------------------------------------------------
# fitness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitnessSpec:
    """Three-term population fitness against a target distribution.

    f = |target - p|_2 + sum over penalty bins |target_n - p_n|
        + sum over pairs |(p_n - p_-n) / (p_n + p_-n)|

    penalty_bins marks the entries included in the L1 term (the bins the
    atoms should not occupy); asymmetry_pairs lists positive n whose +-n
    balance is penalized. An asymmetry denominator below 1e-12 contributes 0.
    """

    target: np.ndarray
    penalty_bins: np.ndarray
    asymmetry_pairs: tuple = ()
    truncation: int = 5

    def __post_init__(self):
        target = np.asarray(self.target, dtype=float)
        mask = np.asarray(self.penalty_bins, dtype=bool)
        size = 2 * self.truncation + 1
        if target.shape != (size,) or mask.shape != (size,):
            raise ValueError(f"target and penalty_bins must have shape ({size},)")
        if abs(float(target.sum()) - 1.0) > 1e-9:
            raise ValueError("target populations must sum to 1")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "penalty_bins", mask)


def fitness_split(populations, spec: FitnessSpec) -> float:
    """Evaluate the three-term fitness for a single final state."""
    p = populations.values if hasattr(populations, "values") else np.asarray(populations, float)
    if p.shape != spec.target.shape:
        raise ValueError(f"population shape {p.shape} does not match target {spec.target.shape}")
    diff = spec.target - p
    total = float(np.linalg.norm(diff))
    total += float(np.sum(np.abs(diff[spec.penalty_bins])))
    N = spec.truncation
    for n in spec.asymmetry_pairs:
        hi, lo = p[N + n], p[N - n]
        den = hi + lo
        if den > 1e-12:
            total += abs(hi - lo) / den
    return total


def fitness_dual(p_plus, p_minus, specs: tuple[FitnessSpec, FitnessSpec]) -> float:
    """Sum of single-state fitnesses for the two runs of a dual optimization."""
    return fitness_split(p_plus, specs[0]) + fitness_split(p_minus, specs[1])


def _one_hot_spec(n_target: int, truncation: int = 5) -> FitnessSpec:
    size = 2 * truncation + 1
    target = np.zeros(size)
    target[truncation + n_target] = 1.0
    penalty = np.ones(size, dtype=bool)
    penalty[truncation + n_target] = False
    return FitnessSpec(target=target, penalty_bins=penalty, truncation=truncation)


@dataclass(frozen=True)
class StageTask:
    """What the GA should optimize: initial state(s), mode, and fitness."""

    name: str
    mode: str  # "single" | "dual"
    specs: tuple
    initial: Optional[QuantumState] = None  # single mode; None means ground state
    start_bins: tuple = (1, -1)  # dual mode


def split_task(truncation: int = 5) -> StageTask:
    """Ground state to a 50/50 superposition of +-2 hbar k_L."""
    size = 2 * truncation + 1
    target = np.zeros(size)
    target[truncation - 1] = 0.5
    target[truncation + 1] = 0.5
    penalty = np.ones(size, dtype=bool)
    penalty[truncation - 1] = penalty[truncation + 1] = False
    spec = FitnessSpec(target=target, penalty_bins=penalty, asymmetry_pairs=(1,),
                       truncation=truncation)
    return StageTask(name="split", mode="single", specs=(spec,))


def propagation_task(truncation: int = 5) -> StageTask:
    """Hold each +-2 hbar k_L component in place (dual crosstalk-free runs)."""
    return StageTask(
        name="propagate", mode="dual",
        specs=(_one_hot_spec(1, truncation), _one_hot_spec(-1, truncation)),
    )


def reflection_task(truncation: int = 5) -> StageTask:
    """Map +2 hbar k_L to -2 hbar k_L and vice versa."""
    return StageTask(
        name="reflect", mode="dual",
        specs=(_one_hot_spec(-1, truncation), _one_hot_spec(1, truncation)),
    )


def recombination_task(ground_populations, initial: QuantumState,
                       truncation: int = 5) -> StageTask:
    """Bring a given pre-recombination state back to the ground distribution.

    Same three-term shape as splitting with the target swapped to the ground
    populations, the L1 penalty on bins outside |n| <= 2, and the asymmetry
    penalty on both occupied pairs.
    """
    target = ground_populations.values if hasattr(ground_populations, "values") \
        else np.asarray(ground_populations, float)
    size = 2 * truncation + 1
    penalty = np.abs(np.arange(size) - truncation) > 2
    spec = FitnessSpec(target=target, penalty_bins=penalty, asymmetry_pairs=(1, 2),
                       truncation=truncation)
    return StageTask(name="recombine", mode="single", specs=(spec,), initial=initial)


# ---------------------------------------------------------------------------
# evaluator: genome -> fitness via the ladder propagator
# ---------------------------------------------------------------------------

class StageEvaluator:
    """Precompiled fitness evaluation for one stage task.

    The substep schedule and the genome-to-phase trig matrices are built
    once; each genome evaluation is two matrix-vector products plus the
    propagator kernel. Produces identical numbers to building a
    ShakingProtocol and calling propagate (covered by tests).
    """

    def __init__(self, task: StageTask, lattice: LatticeConfig, config: GAConfig,
                 settings: PropagationSettings = GA_FAST_SETTINGS,
                 signal: SignalSpec = SignalSpec.none(), t0: float = 0.0):
        self.task = task
        self.lattice = lattice
        self.settings = settings
        self.signal = signal
        self.truncation = task.specs[0].truncation
        self.sigma = config.sigma
        self.gain = default_gain(config.sigma, config.lines)
        template = ShakingProtocol(
            np.zeros(config.genome_size), lines=config.lines,
            bandwidth_hz=config.bandwidth_hz, duration_s=config.duration_s,
            gain=self.gain)
        self.template = template
        self.schedule = build_schedule(template, lattice, signal, settings, t0=t0)
        t = np.clip((np.arange(self.schedule.n_steps)[:, None] * (template.duration_s / self.schedule.n_steps)
                     + self._sub_mid_offsets()), 0.0, template.duration_s)
        arg = 2.0 * np.pi * t.ravel()[:, None] * template.frequencies_hz[None, :]
        env = self.gain * np.sin(np.pi * t.ravel() / template.duration_s) ** 2
        self._cos = np.cos(arg) * env[:, None]
        self._sin = np.sin(arg) * env[:, None]
        nb = (settings.basis_size - 1) // 2
        if task.mode == "single":
            init = task.initial if task.initial is not None else bloch.ground_state(lattice, settings.basis_size)
            self._states = (init,)
        else:
            self._states = (plane_wave_state(task.start_bins[0], settings.basis_size),
                            plane_wave_state(task.start_bins[1], settings.basis_size))
        self._window = slice(nb - self.truncation, nb + self.truncation + 1)

    def _sub_mid_offsets(self) -> np.ndarray:
        h = self.schedule.duration_s / self.schedule.n_steps
        if self.schedule.subs_per_step == 1:
            return np.array([[0.5 * h]])
        from .propagator import _W0, _W1
        offs = np.array([0.5 * _W1, _W1 + 0.5 * _W0, _W1 + _W0 + 0.5 * _W1])
        return offs[None, :] * h

    def phases_for(self, genome: np.ndarray) -> np.ndarray:
        lines = self.template.lines
        return self._cos @ genome[:lines] + self._sin @ genome[lines:]

    def _run(self, state: QuantumState, phi: np.ndarray):
        sched = replace(self.schedule, phi=phi)
        return propagate_schedule(state, sched, self.lattice, self.settings)

    def __call__(self, genome: np.ndarray) -> tuple[float, dict]:
        """Return (fitness, aux) where aux carries the measured populations."""
        phi = self.phases_for(genome)
        pops = []
        try:
            for state in self._states:
                final = self._run(state, phi)
                probs = np.abs(final.amplitudes) ** 2
                window = probs[self._window]
                pops.append(window / window.sum())
        except Exception:
            # runaway genomes that overflow the ladder are simply unfit
            return _OVERFLOW_FITNESS, {"populations": None}
        if self.task.mode == "single":
            fit = fitness_split(pops[0], self.task.specs[0])
        else:
            fit = fitness_dual(pops[0], pops[1], self.task.specs)
        return fit, {"populations": tuple(pops)}

    def protocol_for(self, genome: np.ndarray, **meta) -> ShakingProtocol:
        base = {"stage": self.task.name, "sigma": self.sigma,
                "depth_Er": self.lattice.depth_Er,
                "wavelength_m": self.lattice.wavelength_m,
                "atom_mass_kg": self.lattice.atom_mass_kg}
        base.update(meta)
        return ShakingProtocol(
            genome.copy(), lines=self.template.lines,
            bandwidth_hz=self.template.bandwidth_hz,
            duration_s=self.template.duration_s, gain=self.gain,
            meta={k: v for k, v in base.items() if v is not None})


# ---------------------------------------------------------------------------
# evolution loop
# ---------------------------------------------------------------------------

@dataclass
class EvolveResult:
    best_genome: np.ndarray
    best_fitness: float
    best_aux: dict
    history: np.ndarray  # rows (generation, best, mean)
    generations: int
    converged: bool
    stop_reason: str


def _child_rng(seed: int, generation: int, slot: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(generation + 1, slot)))


def _make_child(survivors: Sequence[np.ndarray], rng, weights, limit: float, rate: float) -> np.ndarray:
    op = int(rng.choice(4, p=weights))
    parent_a = survivors[int(rng.integers(len(survivors)))]
    if op == 0:
        parent_b = survivors[int(rng.integers(len(survivors)))]
        return crossover_one_point(parent_a, parent_b, rng)[0]
    if op == 1:
        parent_b = survivors[int(rng.integers(len(survivors)))]
        return crossover_two_point(parent_a, parent_b, rng)[0]
    if op == 2:
        return mutate(parent_a, rng, limit)
    return creep(parent_a, rng, rate)


def evolve_genomes(
    evaluate: Callable[[np.ndarray], tuple[float, dict]],
    config: GAConfig,
    phases: Optional[Sequence[GAPhase]] = None,
    stop_when: Optional[Callable[[float, dict], bool]] = None,
    on_improve: Optional[Callable[[int, float, np.ndarray], None]] = None,
    history_sink: Optional[Callable[[int, float, float], None]] = None,
) -> EvolveResult:
    """Core loop over raw genomes; deterministic for a fixed config.seed.

    phases optionally reshapes (mutation_limit, creep_rate, weights) over
    successive generation blocks; the total budget is then the sum of phase
    lengths instead of config.max_generations. stop_when sees the best
    individual's (fitness, aux) each generation and may end the run early.
    """
    if phases is None:
        phases = (GAPhase(config.max_generations),)
    size = config.genome_size
    pop = [
        np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0, i)))
        .normal(0.0, config.sigma, size)
        for i in range(config.population)
    ]

    def eval_many(genomes):
        if config.workers > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                return list(pool.map(evaluate, genomes))
        return [evaluate(g) for g in genomes]

    scored = eval_many(pop)
    fits = np.array([s[0] for s in scored])
    auxes = [s[1] for s in scored]
    history = []
    generation = 0
    stop_reason = "budget"
    converged = False
    best_seen = np.inf

    def rank():
        nonlocal pop, fits, auxes
        order = np.argsort(fits, kind="stable")
        pop = [pop[i] for i in order]
        fits = fits[order]
        auxes = [auxes[i] for i in order]

    rank()
    done = False
    for phase in phases:
        if done:
            break
        weights = np.asarray(phase.weights if phase.weights is not None else config.weights, float)
        weights = weights / weights.sum()
        limit = phase.mutation_limit if phase.mutation_limit is not None else config.mutation_limit
        rate = phase.creep_rate if phase.creep_rate is not None else config.creep_rate
        for _ in range(phase.generations):
            history.append((generation, float(fits[0]), float(np.mean(fits))))
            if history_sink:
                history_sink(generation, float(fits[0]), float(np.mean(fits)))
            if fits[0] < best_seen:
                best_seen = float(fits[0])
                if on_improve:
                    on_improve(generation, best_seen, pop[0])
            if fits[0] < config.fitness_target:
                stop_reason, converged, done = "target", True, True
                break
            if stop_when is not None and stop_when(float(fits[0]), auxes[0]):
                stop_reason, converged, done = "criterion", True, True
                break
            survivors = pop[: config.population - config.culled]
            children = [
                _make_child(survivors, _child_rng(config.seed, generation, slot),
                            weights, limit, rate)
                for slot in range(config.population - config.elites)
            ]
            scored = eval_many(children)
            pop = pop[: config.elites] + children
            fits = np.concatenate([fits[: config.elites], [s[0] for s in scored]])
            auxes = auxes[: config.elites] + [s[1] for s in scored]
            rank()
            generation += 1
    return EvolveResult(
        best_genome=pop[0].copy(), best_fitness=float(fits[0]), best_aux=auxes[0],
        history=np.array(history, dtype=float).reshape(-1, 3),
        generations=generation, converged=converged, stop_reason=stop_reason,
    )


def evolve(
    task: StageTask,
    lattice: LatticeConfig,
    config: GAConfig,
    settings: PropagationSettings = GA_FAST_SETTINGS,
    signal: SignalSpec = SignalSpec.none(),
    run_dir=None,
    phases: Optional[Sequence[GAPhase]] = None,
    stop_when: Optional[Callable[[float, dict], bool]] = None,
) -> tuple[ShakingProtocol, EvolveResult]:
    """Optimize one stage protocol; returns (best protocol, run record).

    When run_dir is given, a history.csv with per-generation best/mean
    fitness is written there, plus a protocol file each time the best
    individual improves and a final best.json.
    """
    evaluator = StageEvaluator(task, lattice, config, settings, signal)
    on_improve = None
    history_sink = None
    if run_dir is not None:
        run_dir = Path(run_dir)
        (run_dir / "protocols").mkdir(parents=True, exist_ok=True)
        history_path = run_dir / "history.csv"
        history_file = history_path.open("w", newline="", encoding="utf-8")
        writer = csv.writer(history_file)
        writer.writerow(["generation", "best_fitness", "mean_fitness"])

        def history_sink(gen, best, mean):
            writer.writerow([gen, repr(best), repr(mean)])
            history_file.flush()

        def on_improve(gen, fitness, genome):
            proto = evaluator.protocol_for(genome, fitness=fitness, seed=config.seed,
                                           generation=gen)
            save_protocol(proto, run_dir / "protocols" / f"gen_{gen:05d}.json")

    try:
        result = evolve_genomes(evaluator, config, phases=phases, stop_when=stop_when,
                                on_improve=on_improve, history_sink=history_sink)
    finally:
        if run_dir is not None:
            history_file.close()
    protocol = evaluator.protocol_for(result.best_genome, fitness=result.best_fitness,
                                      seed=config.seed)
    if run_dir is not None:
        save_protocol(protocol, Path(run_dir) / "best.json")
    return protocol, result
