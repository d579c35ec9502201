"""Sensitivity of an optimized protocol to experimental imperfections.

Four sweeps, each reporting the normalized variation (percent) between the
perturbed final populations and the unperturbed optimized ones: lattice
depth error, wavelength error, additive white phase noise, and a static
parasitic lattice from stray reflections. Every sweep evaluates the
unperturbed point through the same code path, so the curves pass through
exactly zero there.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from . import bloch
from .propagator import PropagationSettings, QuantumState, build_schedule, propagate_schedule
from .units import LatticeConfig, SignalSpec, normalized_variation


def _final_populations(protocol, lattice, settings, initial: Optional[QuantumState],
                       truncation: int, extra_coupling: complex = 0j,
                       phase_noise: Optional[np.ndarray] = None) -> np.ndarray:
    state = initial if initial is not None else bloch.ground_state(lattice, settings.basis_size)
    schedule = build_schedule(protocol, lattice, SignalSpec.none(), settings,
                              extra_coupling=extra_coupling)
    if phase_noise is not None:
        # one noise value per dt step, repeated over that step's substeps
        phi = schedule.phi + np.repeat(phase_noise, schedule.subs_per_step)
        schedule = replace(schedule, phi=phi)
    final = propagate_schedule(state, schedule, lattice, settings)
    return bloch.populations_of(final, truncation).values


def sweep_depth(
    protocol,
    lattice: LatticeConfig,
    fractions: Sequence[float],
    settings: PropagationSettings = PropagationSettings(),
    initial: Optional[QuantumState] = None,
    truncation: int = 5,
) -> np.ndarray:
    """Variation vs fractional lattice-depth error; rows (fraction, variation_percent).

    Each point re-derives the ground state and re-propagates at depth
    V0 (1 + fraction) while keeping the nominal shaking protocol.
    """
    nominal = _final_populations(protocol, lattice, settings, initial, truncation)
    rows = []
    for eps in fractions:
        if eps == 0.0:
            rows.append((0.0, 0.0))
            continue
        cfg = lattice.with_depth(lattice.depth_Er * (1.0 + eps))
        perturbed = _final_populations(protocol, cfg, settings, initial, truncation)
        rows.append((eps, normalized_variation(perturbed, nominal)))
    return np.array(rows)


def sweep_wavelength(
    protocol,
    lattice: LatticeConfig,
    fractions: Sequence[float],
    settings: PropagationSettings = PropagationSettings(),
    initial: Optional[QuantumState] = None,
    truncation: int = 5,
) -> np.ndarray:
    """Variation vs fractional wavelength error; rows (fraction, variation_percent).

    lambda -> lambda (1 + eps) rescales k_L and the recoil energy together
    (depth stays at its value in the rescaled recoil units), and the
    measurement ladder is that of the rescaled lattice.
    """
    nominal = _final_populations(protocol, lattice, settings, initial, truncation)
    rows = []
    for eps in fractions:
        if eps == 0.0:
            rows.append((0.0, 0.0))
            continue
        cfg = lattice.with_wavelength(lattice.wavelength_m * (1.0 + eps))
        perturbed = _final_populations(protocol, cfg, settings, initial, truncation)
        rows.append((eps, normalized_variation(perturbed, nominal)))
    return np.array(rows)


def sweep_phase_noise(
    protocol,
    lattice: LatticeConfig,
    amplitudes: Sequence[float],
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    settings: PropagationSettings = PropagationSettings(),
    initial: Optional[QuantumState] = None,
    truncation: int = 5,
) -> np.ndarray:
    """White Gaussian phase noise added to phi(t) at the integration rate.

    Amplitudes are fractions of max |phi(t)| of the nominal protocol; per
    amplitude the variation is averaged over the seeds. Rows are
    (amplitude_fraction, mean_variation_percent, stddev_percent). The noise
    is white at 1/dt_s, which should be quoted with any threshold numbers.
    """
    nominal = _final_populations(protocol, lattice, settings, initial, truncation)
    phi_max = protocol.max_phase()
    n_steps = max(1, int(round(protocol.duration_s / settings.dt_s)))
    rows = []
    for amp in amplitudes:
        if amp == 0.0:
            rows.append((0.0, 0.0, 0.0))
            continue
        values = []
        for seed in seeds:
            rng = np.random.default_rng(np.random.SeedSequence(seed))
            noise = rng.normal(0.0, amp * phi_max, size=n_steps)
            perturbed = _final_populations(protocol, lattice, settings, initial,
                                           truncation, phase_noise=noise)
            values.append(normalized_variation(perturbed, nominal))
        rows.append((amp, float(np.mean(values)), float(np.std(values))))
    return np.array(rows)


def sweep_parasitic(
    protocol,
    lattice: LatticeConfig,
    epsilons: Sequence[float] = (0.001, 0.01, 0.04),
    deltas: Optional[Sequence[float]] = None,
    settings: PropagationSettings = PropagationSettings(),
    initial: Optional[QuantumState] = None,
    truncation: int = 5,
) -> np.ndarray:
    """Static parasitic lattice -(eps V0/2) cos(2 k_L x + delta) during shaking.

    Scans the unknown reflection phase delta for each reflection amplitude
    eps; rows are (epsilon, delta_rad, variation_percent). The parasitic
    term adds eps (V0/4) e^{i delta} to the lattice coupling, which is 2 pi
    periodic in delta by construction.
    """
    if deltas is None:
        deltas = np.linspace(0.0, 2.0 * np.pi, 13)
    nominal = _final_populations(protocol, lattice, settings, initial, truncation)
    rows = []
    for eps in epsilons:
        if eps < 0:
            raise ValueError("reflection amplitude must be non-negative")
        for delta in deltas:
            if eps == 0.0:
                rows.append((eps, float(delta), 0.0))
                continue
            extra = eps * (lattice.depth_Er / 4.0) * np.exp(1j * float(delta))
            perturbed = _final_populations(protocol, lattice, settings, initial,
                                           truncation, extra_coupling=complex(extra))
            rows.append((eps, float(delta), normalized_variation(perturbed, nominal)))
    return np.array(rows)
