"""Classical Fisher information, Cramer-Rao minimum detectable acceleration,
and the power-law scaling of sensitivity with interrogation time.

Only the measurable momentum populations enter: per atom,

    F = sum_n (dP_n/da)^2 / P_n,        delta_a = 1 / sqrt(N_at * F).

Derivatives are central finite differences around the operating point with a
mandatory Richardson step-halving check; bins whose population is below a
floor are excluded from the sum (and recorded) so numerically empty bins
cannot blow up the 1/P_n factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .propagator import PropagationSettings
from .sequencer import SequencePlan, run_sequence
from .units import G_STANDARD, LatticeConfig, SignalSpec


class DerivativeConvergenceWarning(UserWarning):
    """The Richardson pair disagreed; the finite-difference step is suspect."""


@dataclass(frozen=True)
class FisherResult:
    """Fisher information of the final populations with respect to acceleration."""

    derivatives: np.ndarray     # dP_n/da, s^2/m
    terms: np.ndarray           # per-bin contributions (dP/da)^2 / P_n, zero where floored
    total_per_atom: float       # sum of terms, s^4/m^2
    n_atoms: float
    delta_a: float              # Cramer-Rao bound at n_atoms, m/s^2
    a0: float
    step: float                 # finite-difference step, m/s^2
    richardson_total: float     # total recomputed at step/2
    converged: bool
    floor: float
    excluded: np.ndarray        # bins dropped by the population floor

    @property
    def delta_a_per_atom(self) -> float:
        return math.inf if self.total_per_atom == 0 else 1.0 / math.sqrt(self.total_per_atom)


def _dc(a: float) -> SignalSpec:
    return SignalSpec.dc(a) if a != 0.0 else SignalSpec.none()


def fisher_from_populations(
    populations_fn: Callable[[float], np.ndarray],
    a0: float = 0.0,
    delta_a: float = 0.01,
    n_atoms: float = 1.0,
    floor: float = 1e-9,
    truncation: int = 5,
) -> FisherResult:
    """Fisher information of an arbitrary populations(a) map around a0.

    This is the numerical core of `fisher_at`, split out so the differencing
    and floor logic can be checked against analytic population models. Uses
    central differences [P(a0 + da) - P(a0 - da)] / 2 da with P taken at a0
    for the denominators. A second evaluation at da/2 must agree on the
    total within 5 percent, otherwise a DerivativeConvergenceWarning is
    emitted and converged is False. delta_a = infinity (with a warning) when
    the populations carry no first-order information.
    """
    if delta_a <= 0:
        raise ValueError("delta_a must be positive")
    pops = populations_fn
    center = np.asarray(pops(a0), dtype=float)

    def total_with_step(da: float) -> tuple[np.ndarray, np.ndarray, float]:
        deriv = (np.asarray(pops(a0 + da), float) - np.asarray(pops(a0 - da), float)) / (2.0 * da)
        keep = center >= floor
        terms = np.zeros_like(center)
        terms[keep] = deriv[keep] ** 2 / center[keep]
        return deriv, terms, float(terms.sum())

    deriv, terms, total = total_with_step(delta_a)
    _, _, total_half = total_with_step(delta_a / 2.0)
    scale = max(abs(total), abs(total_half))
    converged = scale == 0.0 or abs(total - total_half) <= 0.05 * scale
    if not converged:
        warnings.warn(
            f"Fisher totals at step {delta_a:g} and {delta_a / 2:g} differ by more than 5% "
            f"({total:.6g} vs {total_half:.6g}); reduce delta_a",
            DerivativeConvergenceWarning,
            stacklevel=2,
        )
    if total <= 0.0:
        warnings.warn("populations carry no first-order acceleration information here "
                      "(F = 0, delta_a = inf)", stacklevel=2)
        delta = math.inf
    else:
        delta = 1.0 / math.sqrt(n_atoms * total)
    excluded = np.flatnonzero(center < floor) - truncation
    return FisherResult(
        derivatives=deriv, terms=terms, total_per_atom=total, n_atoms=n_atoms,
        delta_a=delta, a0=a0, step=delta_a, richardson_total=total_half,
        converged=converged, floor=floor, excluded=excluded,
    )


def fisher_at(
    plan: SequencePlan,
    lattice: LatticeConfig,
    a0: float = 0.0,
    delta_a: float = 0.01,
    n_atoms: float = 1.0,
    settings: PropagationSettings = PropagationSettings(),
    floor: float = 1e-9,
    truncation: int = 5,
) -> FisherResult:
    """Population Fisher information of a full sequence around a DC point a0."""

    def pops(a: float) -> np.ndarray:
        return run_sequence(plan, lattice, _dc(a), settings, truncation).values

    return fisher_from_populations(pops, a0=a0, delta_a=delta_a, n_atoms=n_atoms,
                                   floor=floor, truncation=truncation)


# ---------------------------------------------------------------------------
# power-law fit delta_a = C * T^-n
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLawFit:
    coefficient: float          # C
    exponent: float             # n (positive for decreasing delta_a)
    exponent_stderr: float
    covariance: np.ndarray      # covariance of (ln C, n) from the linear fit
    residuals: np.ndarray       # log-space residuals
    t_range: tuple


def fit_power_law(times_s: Sequence[float], delta_a: Sequence[float]) -> PowerLawFit:
    """Least-squares fit of delta_a(T) = C T^-n on (ln T, ln delta_a).

    For a clean two-parameter power law this is exactly the model the
    nonlinear fit would return, and it is deterministic and unconditionally
    convergent. Non-finite points are the caller's to filter.
    """
    t = np.asarray(times_s, dtype=float)
    d = np.asarray(delta_a, dtype=float)
    if t.shape != d.shape or t.ndim != 1:
        raise ValueError("times and delta_a must be matching 1-D arrays")
    if t.size < 2:
        raise ValueError("need at least two points to fit a power law")
    if np.any(t <= 0) or np.any(d <= 0) or not (np.all(np.isfinite(t)) and np.all(np.isfinite(d))):
        raise ValueError("power-law fit needs positive finite times and delta_a")
    x, y = np.log(t), np.log(d)
    design = np.column_stack([np.ones_like(x), -x])  # y = ln C - n x
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ coef
    residuals = y - fitted
    dof = max(t.size - 2, 1)
    sigma2 = float(residuals @ residuals) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    stderr = float(np.sqrt(cov[1, 1])) if t.size > 2 else 0.0
    return PowerLawFit(
        coefficient=float(np.exp(coef[0])), exponent=float(coef[1]),
        exponent_stderr=stderr, covariance=cov, residuals=residuals,
        t_range=(float(t.min()), float(t.max())),
    )


@dataclass(frozen=True)
class ScalingPoint:
    interrogation_s: float      # propagation-only time
    total_duration_s: float     # including split/reflect/recombine shaking
    delta_a: float              # per atom
    fisher: FisherResult


@dataclass(frozen=True)
class ScalingResult:
    points: tuple
    fit: PowerLawFit
    time_column: str            # which column the fit used


def scaling_study(
    plans: Sequence[SequencePlan],
    lattice: LatticeConfig,
    settings: PropagationSettings = PropagationSettings(),
    delta_a_ref: float = 0.01,
    ref_time_s: float = 2.008e-3,
    fit_on: str = "total",
    fisher_kwargs: Optional[dict] = None,
) -> ScalingResult:
    """delta_a versus interrogation time over a family of plans, plus the fit.

    The finite-difference step shrinks as (ref_time / T)^2 so it tracks the
    fringe scale as sensitivity grows. Both time columns are recorded;
    fit_on selects "total" (shaking time included) or "interrogation".
    Points with non-finite delta_a are excluded from the fit and reported.
    """
    if len(plans) < 2:
        raise ValueError("need at least two plans")
    if fit_on not in ("total", "interrogation"):
        raise ValueError("fit_on must be 'total' or 'interrogation'")
    kwargs = dict(fisher_kwargs or {})
    points = []
    for plan in plans:
        t_tot = plan.duration_s
        step = delta_a_ref * (ref_time_s / t_tot) ** 2
        fres = fisher_at(plan, lattice, a0=0.0, delta_a=step, n_atoms=1.0,
                         settings=settings, **kwargs)
        points.append(ScalingPoint(
            interrogation_s=plan.interrogation_s, total_duration_s=t_tot,
            delta_a=fres.delta_a_per_atom, fisher=fres,
        ))
    kept = [p for p in points if math.isfinite(p.delta_a)]
    if len(kept) < len(points):
        warnings.warn(f"excluded {len(points) - len(kept)} non-finite scaling point(s) from the fit",
                      stacklevel=2)
    times = [p.total_duration_s if fit_on == "total" else p.interrogation_s for p in kept]
    fit = fit_power_law(times, [p.delta_a for p in kept])
    return ScalingResult(points=tuple(points), fit=fit, time_column=fit_on)


def project_sensitivity(
    fit: PowerLawFit,
    interrogation_s: float,
    n_atoms: float,
    relative_to_g: bool = True,
) -> tuple[float, bool]:
    """Extrapolate the fitted model: delta_a = C T^-n / sqrt(N_at).

    Returns (delta_a, extrapolated) where extrapolated flags a T more than
    100x outside the fitted range; such numbers are model projections, not
    simulation results.
    """
    if interrogation_s <= 0 or n_atoms <= 0:
        raise ValueError("interrogation time and atom number must be positive")
    lo, hi = fit.t_range
    extrapolated = not (lo / 100.0 <= interrogation_s <= hi * 100.0)
    value = fit.coefficient * interrogation_s ** (-fit.exponent) / math.sqrt(n_atoms)
    if relative_to_g:
        value /= G_STANDARD
    return value, extrapolated
