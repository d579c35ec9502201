"""Fisher information core, Cramer-Rao bound, and power-law fitting."""
import math

import numpy as np
import pytest

from shaken_lattice.sensitivity import (
    DerivativeConvergenceWarning,
    fisher_from_populations,
    fit_power_law,
    project_sensitivity,
)


def smooth_populations(a):
    """Analytic three-bin model: differentiable, normalized, fringe-like."""
    x = 2.0 * a
    p1 = 0.25 * (1.0 + math.sin(x)) ** 2 / 2.0 + 0.1
    p2 = 0.25 * (1.0 - math.sin(x)) ** 2 / 2.0 + 0.1
    rest = 1.0 - p1 - p2
    return np.array([p1, rest, p2])


def smooth_derivative(a):
    eps = 1e-6
    # 5-point stencil oracle, step chosen for ~1e-12 truncation error
    return (
        -smooth_populations(a + 2 * eps) + 8 * smooth_populations(a + eps)
        - 8 * smooth_populations(a - eps) + smooth_populations(a - 2 * eps)
    ) / (12 * eps)


class TestFisherCore:
    def test_matches_five_point_stencil_oracle(self):
        res = fisher_from_populations(smooth_populations, a0=0.3, delta_a=1e-4,
                                      truncation=1)
        oracle = smooth_derivative(0.3)
        assert np.allclose(res.derivatives, oracle, atol=1e-6)
        assert res.converged

    def test_total_is_sum_of_terms_and_all_nonnegative(self):
        res = fisher_from_populations(smooth_populations, a0=0.1, delta_a=1e-4,
                                      truncation=1)
        assert res.total_per_atom == pytest.approx(float(res.terms.sum()), rel=1e-12)
        assert np.all(res.terms >= 0.0)

    def test_flat_populations_give_zero_fisher_and_infinite_bound(self):
        with pytest.warns(UserWarning, match="no first-order"):
            res = fisher_from_populations(lambda a: np.array([0.2, 0.5, 0.3]),
                                          a0=0.0, delta_a=0.01, truncation=1)
        assert res.total_per_atom == 0.0
        assert math.isinf(res.delta_a)

    def test_atom_number_scaling(self):
        res1 = fisher_from_populations(smooth_populations, a0=0.2, delta_a=1e-4,
                                       n_atoms=1.0, truncation=1)
        res4 = fisher_from_populations(smooth_populations, a0=0.2, delta_a=1e-4,
                                       n_atoms=4.0, truncation=1)
        assert res4.delta_a == pytest.approx(res1.delta_a / 2.0, rel=1e-12)

    def test_population_floor_excludes_empty_bins(self):
        def with_empty_bin(a):
            p = smooth_populations(a)
            return np.array([p[0], p[1] - 1e-12, p[2], 1e-12])

        res = fisher_from_populations(with_empty_bin, a0=0.3, delta_a=1e-4,
                                      floor=1e-9, truncation=1)
        assert res.terms[3] == 0.0
        assert 2 in (res.excluded + 1).tolist() or res.excluded.size == 1

    def test_richardson_disagreement_warns_and_flags(self):
        # kinked map: central differences at the kink never converge
        def kinked(a):
            p = abs(a)
            return np.array([0.3 + p, 0.7 - p])

        with pytest.warns(DerivativeConvergenceWarning):
            res = fisher_from_populations(lambda a: kinked(a - 0.005), a0=0.0,
                                          delta_a=0.01, truncation=0)
        assert not res.converged

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ValueError):
            fisher_from_populations(smooth_populations, delta_a=0.0)


class TestPowerLawFit:
    def test_exact_power_law_recovered_to_1e6(self):
        t = np.array([1e-3, 2e-3, 4e-3, 8e-3, 1.6e-2])
        d = 3.0 * t**-2.0
        fit = fit_power_law(t, d)
        assert fit.exponent == pytest.approx(2.0, abs=1e-6)
        assert fit.coefficient == pytest.approx(3.0, rel=1e-6)
        assert np.max(np.abs(fit.residuals)) < 1e-12

    def test_two_points_interpolate_exactly(self):
        t = np.array([2e-3, 8e-3])
        d = 0.5 * t**-1.7
        fit = fit_power_law(t, d)
        assert fit.exponent == pytest.approx(1.7, abs=1e-9)
        assert np.max(np.abs(fit.residuals)) < 1e-12
        assert fit.exponent_stderr == 0.0

    def test_noisy_data_reports_stderr(self):
        rng = np.random.default_rng(3)
        t = np.geomspace(1e-3, 2e-2, 10)
        d = 2.0 * t**-2.2 * np.exp(rng.normal(0, 0.05, t.size))
        fit = fit_power_law(t, d)
        assert fit.exponent == pytest.approx(2.2, abs=0.3)
        assert fit.exponent_stderr > 0.0

    @pytest.mark.parametrize("t,d", [
        ([1e-3], [1.0]),
        ([1e-3, 2e-3], [1.0, -1.0]),
        ([0.0, 2e-3], [1.0, 1.0]),
        ([1e-3, 2e-3], [1.0, float("nan")]),
    ])
    def test_bad_inputs_rejected(self, t, d):
        with pytest.raises(ValueError):
            fit_power_law(np.asarray(t, float), np.asarray(d, float))


class TestProjection:
    def _fit(self):
        t = np.geomspace(2e-3, 1e-2, 5)
        return fit_power_law(t, 4e-6 * (t / 2e-3) ** -2.0)

    def test_projection_at_grid_point_matches_data(self):
        fit = self._fit()
        value, extrapolated = project_sensitivity(fit, 2e-3, n_atoms=1.0,
                                                  relative_to_g=False)
        assert value == pytest.approx(4e-6, rel=1e-9)
        assert not extrapolated

    def test_sqrt_atoms_scaling_and_g_units(self):
        fit = self._fit()
        v1, _ = project_sensitivity(fit, 5e-3, n_atoms=1.0, relative_to_g=False)
        v2, _ = project_sensitivity(fit, 5e-3, n_atoms=1e6, relative_to_g=False)
        assert v2 == pytest.approx(v1 / 1000.0, rel=1e-12)
        vg, _ = project_sensitivity(fit, 5e-3, n_atoms=1.0, relative_to_g=True)
        assert vg == pytest.approx(v1 / 9.80665, rel=1e-9)

    def test_far_extrapolation_is_flagged(self):
        fit = self._fit()
        _, extrapolated = project_sensitivity(fit, 2.0, n_atoms=1e6)
        assert extrapolated
        _, inside = project_sensitivity(fit, 5e-3, n_atoms=1e6)
        assert not inside

    def test_invalid_inputs_rejected(self):
        fit = self._fit()
        with pytest.raises(ValueError):
            project_sensitivity(fit, 0.0, 1.0)
        with pytest.raises(ValueError):
            project_sensitivity(fit, 1e-3, 0.0)
