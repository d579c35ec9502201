"""Ground Bloch state of the unshaken lattice by direct diagonalization.

Diagonalizing the plane-wave-ladder Hamiltonian gives the interferometer's
initial (and, absent a signal, final) state without touching the time
propagator, so it doubles as an independent oracle for stationary checks.
"""
from __future__ import annotations

import warnings

import numpy as np

from .propagator import DEFAULT_BASIS_SIZE, QuantumState
from .units import LatticeConfig, MomentumPopulations

DEFAULT_TRUNCATION = 5


class TruncationWarning(UserWarning):
    """More probability than expected fell outside the measurement window."""


def ladder_hamiltonian(lattice: LatticeConfig, basis_size: int = 21,
                       quasimomentum: float = 0.0) -> np.ndarray:
    """Stationary ladder Hamiltonian in units of E_R.

    Diagonal entries (2n + q)^2 for n in [-nb, nb], nearest-neighbor
    couplings -V0/4. basis_size is the full dimension 2 nb + 1 (odd).
    """
    if basis_size % 2 == 0 or basis_size < 11:
        raise ValueError("basis_size must be odd and >= 11 (covering n in [-5, 5])")
    nb = (basis_size - 1) // 2
    n = np.arange(-nb, nb + 1)
    ham = np.diag((2.0 * n + quasimomentum) ** 2)
    off = np.full(basis_size - 1, -lattice.depth_Er / 4.0)
    ham += np.diag(off, 1) + np.diag(off, -1)
    return ham


def ground_state(lattice: LatticeConfig, basis_size: int = DEFAULT_BASIS_SIZE) -> QuantumState:
    """Normalized q = 0 ground Bloch state on the momentum ladder.

    Phase convention: the n = 0 amplitude is real and positive, which makes
    the eigenvector deterministic. Populations are even in n by parity.
    """
    ham = ladder_hamiltonian(lattice, basis_size)
    _, vectors = np.linalg.eigh(ham)
    vec = vectors[:, 0]
    nb = (basis_size - 1) // 2
    if vec[nb] == 0.0:  # cannot happen for the nodeless ground band
        raise RuntimeError("degenerate phase convention: zero amplitude at n=0")
    if vec[nb] < 0.0:
        vec = -vec
    vec = vec / np.linalg.norm(vec)
    return QuantumState(vec.astype(np.complex128))


def ground_energy(lattice: LatticeConfig, basis_size: int = 41) -> float:
    """Ground-band energy at q = 0 in units of E_R."""
    ham = ladder_hamiltonian(lattice, basis_size)
    return float(np.linalg.eigvalsh(ham)[0])


def populations_of(state: QuantumState, truncation: int = DEFAULT_TRUNCATION) -> MomentumPopulations:
    """Momentum populations |c_n|^2 for n in [-N, N], renormalized over the window.

    The probability discarded by the truncation is recorded; if it exceeds
    1e-6 a TruncationWarning is emitted (the window is then too small to
    faithfully represent the state).
    """
    nb = state.basis_half_size
    if truncation > nb:
        raise ValueError(f"truncation N={truncation} exceeds state basis [-{nb}, {nb}]")
    probs = np.abs(state.amplitudes) ** 2
    window = probs[nb - truncation: nb + truncation + 1]
    total = float(np.sum(probs))
    kept = float(np.sum(window))
    discarded = total - kept
    if discarded > 1e-6:
        warnings.warn(
            f"truncation to N={truncation} discards {discarded:.2e} probability",
            TruncationWarning,
            stacklevel=2,
        )
    return MomentumPopulations(
        values=window / kept,
        truncation=truncation,
        residual_offset=state.quasimomentum_offset,
        discarded=discarded,
    )
