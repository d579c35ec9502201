"""Unit system, lattice configuration and the momentum-population measurable.

All internal physics runs in lattice recoil units: energies in units of the
recoil energy E_R = hbar^2 k_L^2 / 2m, momenta on the ladder 2*n*hbar*k_L
(plus a continuous quasimomentum offset in units of k_L), time in seconds.
Accelerations and frequencies enter and leave in SI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

HBAR = constants.hbar
H_PLANCK = constants.h
G_STANDARD = constants.g

#: Mass of rubidium-87 in kg.
RB87_MASS_KG = 1.44316e-25


@dataclass(frozen=True)
class LatticeConfig:
    """Physical constants of the one-dimensional optical lattice.

    Parameters
    ----------
    depth_Er : float
        Lattice depth V0 in units of the recoil energy (peak-to-valley of
        the potential -(V0/2) cos(2 k_L x + phi)).
    wavelength_m : float
        Lattice laser wavelength lambda_L in meters.
    atom_mass_kg : float
        Atom mass in kilograms.
    """

    depth_Er: float
    wavelength_m: float
    atom_mass_kg: float

    def __post_init__(self):
        if not (self.depth_Er > 0 and self.wavelength_m > 0 and self.atom_mass_kg > 0):
            raise ValueError(
                "depth_Er, wavelength_m and atom_mass_kg must all be positive, got "
                f"({self.depth_Er}, {self.wavelength_m}, {self.atom_mass_kg})"
            )

    @property
    def k_L(self) -> float:
        """Lattice wavenumber 2 pi / lambda_L in 1/m."""
        return 2.0 * math.pi / self.wavelength_m

    @property
    def recoil_energy_J(self) -> float:
        """Recoil energy E_R = hbar^2 k_L^2 / 2m in joules."""
        return HBAR**2 * self.k_L**2 / (2.0 * self.atom_mass_kg)

    @property
    def recoil_freq_hz(self) -> float:
        """Recoil frequency E_R / h in Hz."""
        return self.recoil_energy_J / H_PLANCK

    @property
    def recoil_omega(self) -> float:
        """Angular recoil frequency E_R / hbar in rad/s (time scale of the dynamics)."""
        return self.recoil_energy_J / HBAR

    @property
    def recoil_velocity(self) -> float:
        """Single-photon recoil velocity hbar k_L / m in m/s."""
        return HBAR * self.k_L / self.atom_mass_kg

    def with_depth(self, depth_Er: float) -> "LatticeConfig":
        return LatticeConfig(depth_Er, self.wavelength_m, self.atom_mass_kg)

    def with_wavelength(self, wavelength_m: float) -> "LatticeConfig":
        return LatticeConfig(self.depth_Er, wavelength_m, self.atom_mass_kg)


def make_default_config() -> LatticeConfig:
    """Rb-87 in a 1064 nm lattice at depth 10 E_R (the working point used throughout)."""
    return LatticeConfig(depth_Er=10.0, wavelength_m=1.064e-6, atom_mass_kg=RB87_MASS_KG)


@dataclass(frozen=True)
class MomentumPopulations:
    """Probability per momentum-ladder index n in [-N, N] (momentum 2 n hbar k_L).

    ``residual_offset`` records any leftover quasimomentum (units of k_L) of the
    comoving ladder after propagation under an applied force; ``discarded`` is
    the probability that fell outside the truncation window before
    renormalization.
    """

    values: np.ndarray
    truncation: int = 5
    residual_offset: float = 0.0
    discarded: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (2 * self.truncation + 1,):
            raise ValueError(
                f"expected {2 * self.truncation + 1} entries for truncation "
                f"N={self.truncation}, got shape {vals.shape}"
            )

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.truncation, self.truncation + 1)

    def population(self, n: int) -> float:
        """Probability of the 2 n hbar k_L state."""
        if abs(n) > self.truncation:
            raise IndexError(f"ladder index {n} outside truncation N={self.truncation}")
        return float(self.values[n + self.truncation])


def _as_population_vector(p) -> np.ndarray:
    if isinstance(p, MomentumPopulations):
        return p.values
    return np.asarray(p, dtype=float)


def variation(p, q) -> float:
    """Population-vector variation D = (1 - p.q) x 100 percent.

    Both arguments may be `MomentumPopulations` or plain probability vectors on
    the same truncation window. Note D(p, p) = (1 - |p|^2) x 100, which is zero
    only for one-hot vectors; use `normalized_variation` to compare two states
    against each other on a scale where identical states give exactly 0.
    """
    pv, qv = _as_population_vector(p), _as_population_vector(q)
    if pv.shape != qv.shape:
        raise ValueError(f"mismatched truncation: {pv.shape} vs {qv.shape}")
    return float((1.0 - pv @ qv) * 100.0)


def normalized_variation(p, q) -> float:
    """Variation of direction between two population vectors, in percent.

    Same dot-product form as `variation` but with both vectors scaled to unit
    Euclidean length, so identical distributions give exactly 0 and orthogonal
    ones give 100. This is the measure used for all "difference from the
    optimized/reference state" curves (signal response, robustness sweeps).
    """
    pv, qv = _as_population_vector(p), _as_population_vector(q)
    if pv.shape != qv.shape:
        raise ValueError(f"mismatched truncation: {pv.shape} vs {qv.shape}")
    np_, nq = np.linalg.norm(pv), np.linalg.norm(qv)
    if np_ == 0.0 or nq == 0.0:
        raise ValueError("cannot compare zero population vectors")
    # rounding can push the cosine a few ulp past 1 for near-identical inputs
    return float(max(0.0, (1.0 - (pv @ qv) / (np_ * nq)) * 100.0))


_SIGNAL_KINDS = ("none", "dc", "sinusoid")


@dataclass(frozen=True)
class SignalSpec:
    """Applied acceleration a(t) along the lattice axis.

    kind "none": a = 0. kind "dc": a = a_dc. kind "sinusoid":
    a = a_dc + a_x sin(omega t + phase); the paper's AC analyses use phase 0
    and a_dc 0.
    """

    kind: str = "none"
    a_dc: float = 0.0
    a_x: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    def __post_init__(self):
        if self.kind not in _SIGNAL_KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}, expected one of {_SIGNAL_KINDS}")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        if self.kind == "none" and (self.a_dc != 0.0 or self.a_x != 0.0):
            raise ValueError("kind='none' requires zero acceleration magnitudes")
        if self.kind == "dc" and self.a_x != 0.0:
            raise ValueError("kind='dc' takes no AC amplitude")

    @classmethod
    def none(cls) -> "SignalSpec":
        return cls()

    @classmethod
    def dc(cls, a_dc: float) -> "SignalSpec":
        return cls(kind="dc", a_dc=a_dc)

    @classmethod
    def sinusoid(cls, a_x: float, omega: float, phase: float = 0.0, a_dc: float = 0.0) -> "SignalSpec":
        return cls(kind="sinusoid", a_dc=a_dc, a_x=a_x, omega=omega, phase=phase)

    @property
    def is_zero(self) -> bool:
        return self.a_dc == 0.0 and self.a_x == 0.0

    def acceleration(self, t):
        """a(t) in m/s^2; accepts scalars or arrays."""
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.a_dc)
        if self.kind == "sinusoid" and self.a_x != 0.0:
            out = out + self.a_x * np.sin(self.omega * t + self.phase)
        return out if out.ndim else float(out)

    def integral(self, t):
        """Closed-form int_0^t a dt' in m/s; exact, no quadrature error."""
        t = np.asarray(t, dtype=float)
        out = self.a_dc * t
        if self.kind == "sinusoid" and self.a_x != 0.0:
            if self.omega == 0.0:
                out = out + self.a_x * math.sin(self.phase) * t
            else:
                out = out + (self.a_x / self.omega) * (
                    math.cos(self.phase) - np.cos(self.omega * t + self.phase)
                )
        return out if out.ndim else float(out)

    def quasimomentum(self, t, lattice: LatticeConfig):
        """Gauge-frame quasimomentum q(t) = -(m / hbar k_L) int_0^t a dt', in units of k_L."""
        scale = -lattice.atom_mass_kg / (HBAR * lattice.k_L)
        return scale * self.integral(t)
