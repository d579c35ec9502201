"""Band-limited Fourier shaking protocols and their file format.

A protocol is a genome of 2l real coefficients (cosine block then sine
block) on the uniform frequency comb f_i = i * bandwidth / l, realized as

    phi(t) = gain * sum_i [a_i cos(2 pi f_i t) + b_i sin(2 pi f_i t)] * sin^2(pi t / T)

The sin^2 envelope pins phi to zero at both endpoints, which is what makes
protocols freely concatenable. Coefficients are kept in raw GA units
(sigma ~ 100); gain = pi / (sigma sqrt(l)) calibrates a random genome to an
RMS phase near pi, keeping excursions within roughly +-2 pi.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .units import LatticeConfig

PROTOCOL_FORMAT_VERSION = 1

DEFAULT_LINES = 100
DEFAULT_BANDWIDTH_HZ = 35_000.0
DEFAULT_DURATION_S = 5.02e-4
DEFAULT_SIGMA = 100.0


class ProtocolFormatError(ValueError):
    """A protocol file failed to parse or has an unsupported layout."""


def default_gain(sigma: float, lines: int) -> float:
    """Raw-unit-to-radian conversion making RMS phi ~ pi for N(0, sigma^2) genomes."""
    if sigma == 0.0:
        return 0.0
    return math.pi / (sigma * math.sqrt(lines))


@dataclass(frozen=True)
class ShakingProtocol:
    """One shaking stage: Fourier genome, envelope metadata, and provenance.

    amplitudes holds the 2l coefficients, cosine block first. meta carries
    the lattice snapshot, RNG seed, achieved fitness and stage label; it is
    provenance only and never feeds back into the physics.
    """

    amplitudes: np.ndarray
    lines: int = DEFAULT_LINES
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ
    duration_s: float = DEFAULT_DURATION_S
    gain: float = default_gain(DEFAULT_SIGMA, DEFAULT_LINES)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        object.__setattr__(self, "amplitudes", amps)
        if self.lines < 1:
            raise ValueError("need at least one frequency line")
        if amps.shape != (2 * self.lines,):
            raise ValueError(f"expected {2 * self.lines} coefficients, got shape {amps.shape}")
        if self.duration_s <= 0 or self.bandwidth_hz <= 0:
            raise ValueError("duration_s and bandwidth_hz must be positive")

    @property
    def frequencies_hz(self) -> np.ndarray:
        """The comb f_i = i * bandwidth / l, i = 1..l (top line at the bandwidth)."""
        return np.arange(1, self.lines + 1) * (self.bandwidth_hz / self.lines)

    def phase_at(self, t):
        """phi(t) in radians for t within [0, duration]; vectorized.

        Raises ValueError outside the domain (the drive is undefined there;
        concatenation, not extrapolation, extends a protocol in time).
        """
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > self.duration_s):
            raise ValueError(f"t outside [0, {self.duration_s}]")
        arg = 2.0 * math.pi * np.multiply.outer(t, self.frequencies_hz)
        series = np.cos(arg) @ self.amplitudes[: self.lines]
        series += np.sin(arg) @ self.amplitudes[self.lines:]
        env = np.sin(math.pi * t / self.duration_s) ** 2
        out = self.gain * series * env
        return out if out.ndim else float(out)

    def sampled(self, n: int = 4096) -> np.ndarray:
        return self.phase_at(np.linspace(0.0, self.duration_s, n))

    def max_phase(self, n: int = 4096) -> float:
        return float(np.max(np.abs(self.sampled(n))))

    def rms_phase(self, n: int = 4096) -> float:
        return float(np.sqrt(np.mean(self.sampled(n) ** 2)))

    def with_meta(self, **entries) -> "ShakingProtocol":
        merged = dict(self.meta)
        merged.update(entries)
        return ShakingProtocol(self.amplitudes, self.lines, self.bandwidth_hz,
                               self.duration_s, self.gain, merged)

    def with_amplitudes(self, amplitudes) -> "ShakingProtocol":
        return ShakingProtocol(np.asarray(amplitudes, dtype=float), self.lines,
                               self.bandwidth_hz, self.duration_s, self.gain, dict(self.meta))


def random_protocol(
    lines: int = DEFAULT_LINES,
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ,
    duration_s: float = DEFAULT_DURATION_S,
    sigma: float = DEFAULT_SIGMA,
    rng=None,
    seed=None,
    lattice: LatticeConfig | None = None,
) -> ShakingProtocol:
    """Draw a protocol with i.i.d. N(0, sigma^2) coefficients.

    Pass either an rng (np.random.Generator) or a seed; a seed makes the
    draw reproducible and is recorded in meta.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    coeff = rng.normal(0.0, sigma, size=2 * lines) if sigma > 0 else np.zeros(2 * lines)
    meta = {"sigma": sigma}
    if seed is not None:
        meta["seed"] = seed
    if lattice is not None:
        meta.update(depth_Er=lattice.depth_Er, wavelength_m=lattice.wavelength_m,
                    atom_mass_kg=lattice.atom_mass_kg)
    return ShakingProtocol(coeff, lines, bandwidth_hz, duration_s,
                           default_gain(sigma, lines), meta)


class ProtocolSequence:
    """Piecewise phase drive from protocols joined end to end.

    Every protocol ends at phi = 0 (envelope), so the concatenated phase is
    continuous with value 0 at each joint.
    """

    def __init__(self, parts, labels=None):
        parts = tuple(parts)
        if not parts:
            raise ValueError("empty sequence")
        if labels is not None and len(labels) != len(parts):
            raise ValueError("labels must match parts one to one")
        self.parts = parts
        self.labels = tuple(labels) if labels is not None else None
        bounds = np.concatenate([[0.0], np.cumsum([p.duration_s for p in parts])])
        self._bounds = bounds
        self.duration_s = float(bounds[-1])

    def __len__(self):
        return len(self.parts)

    def segment_bounds(self) -> np.ndarray:
        return self._bounds.copy()

    def phase_at(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < 0.0) or np.any(t > self.duration_s):
            raise ValueError(f"t outside [0, {self.duration_s}]")
        seg = np.clip(np.searchsorted(self._bounds, t, side="right") - 1, 0, len(self.parts) - 1)
        out = np.empty_like(t)
        for k, part in enumerate(self.parts):
            mask = seg == k
            if np.any(mask):
                local = np.clip(t[mask] - self._bounds[k], 0.0, part.duration_s)
                out[mask] = part.phase_at(local)
        return float(out[0]) if scalar else out


def concatenate(protocols, labels=None) -> ProtocolSequence:
    """Join protocols into one drive over the summed duration."""
    return ProtocolSequence(protocols, labels=labels)


class ReversedProtocol:
    """Drive realizing -phi(T - t): the time-reversed partner of a protocol."""

    def __init__(self, base):
        self.base = base
        self.duration_s = base.duration_s

    def phase_at(self, t):
        t = np.asarray(t, dtype=float)
        return -np.asarray(self.base.phase_at(self.duration_s - t))


_REQUIRED_KEYS = ("version", "l", "bandwidth_hz", "duration_s", "gain", "amplitudes")


def save_protocol(protocol: ShakingProtocol, path) -> None:
    """Write a protocol as versioned UTF-8 JSON (lossless float round-trip)."""
    doc = {
        "version": PROTOCOL_FORMAT_VERSION,
        "meta": dict(protocol.meta),
        "l": protocol.lines,
        "bandwidth_hz": protocol.bandwidth_hz,
        "duration_s": protocol.duration_s,
        "gain": protocol.gain,
        "amplitudes": [float(a) for a in protocol.amplitudes],
    }
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_protocol(path) -> ShakingProtocol:
    """Read a protocol file, validating version and layout."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ProtocolFormatError(f"{path}: not valid JSON at line {err.lineno}: {err.msg}") from err
    if not isinstance(doc, dict):
        raise ProtocolFormatError(f"{path}: expected a top-level object")
    missing = [key for key in _REQUIRED_KEYS if key not in doc]
    if missing:
        raise ProtocolFormatError(f"{path}: missing field(s) {', '.join(missing)}")
    if doc["version"] != PROTOCOL_FORMAT_VERSION:
        raise ProtocolFormatError(
            f"{path}: unsupported protocol format version {doc['version']!r} "
            f"(this build reads version {PROTOCOL_FORMAT_VERSION})"
        )
    lines = int(doc["l"])
    amplitudes = np.asarray(doc["amplitudes"], dtype=float)
    if amplitudes.shape != (2 * lines,):
        raise ProtocolFormatError(
            f"{path}: amplitudes has {amplitudes.size} entries, expected 2*l = {2 * lines}"
        )
    return ShakingProtocol(
        amplitudes=amplitudes,
        lines=lines,
        bandwidth_hz=float(doc["bandwidth_hz"]),
        duration_s=float(doc["duration_s"]),
        gain=float(doc["gain"]),
        meta=dict(doc.get("meta", {})),
    )
