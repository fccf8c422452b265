"""Midpoint integration, the discrete energy balance, and decay fitting."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bresse.discretization import StateVector, energy, project_initial_data
from bresse.errors import (
    BadInterval,
    DimensionMismatch,
    NonPositiveParameter,
    NonpositiveEnergy,
    WindowTooSmall,
)
from bresse.timedomain import (
    DecayFit,
    EnergySeries,
    SimConfig,
    default_initial_data,
    fit_decay,
    initial_data_family,
    simulate,
    step_midpoint,
)

from conftest import make_system, random_state


def default_state(sys):
    return project_initial_data(sys, sys.mesh, default_initial_data(1.0))


def series_from(times, energies, e0=None):
    """Wrap raw arrays in an EnergySeries for fit-only tests."""
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    zeros = np.zeros_like(times)
    return EnergySeries(
        times=times,
        energies=energies,
        kinetics=0.5 * energies,
        potentials=0.5 * energies,
        sample_residuals=zeros,
        dissipation_residuals=np.zeros(max(times.size - 1, 1)),
        initial_domain_norm=1.0,
    )


# ---------------------------------------------------------------------------
# configuration validation
# ---------------------------------------------------------------------------


class TestSimConfig:
    def test_nonpositive_dt(self, sys16):
        with pytest.raises(NonPositiveParameter) as exc:
            simulate(sys16, default_state(sys16), SimConfig(dt=0.0, t_final=1.0))
        assert exc.value.name == "dt"

    def test_horizon_too_short_for_dt(self, sys16):
        cfg = SimConfig(dt=0.5, t_final=1.0, fit_window=(0.1, 1.0))
        with pytest.raises(BadInterval):
            simulate(sys16, default_state(sys16), cfg)

    def test_bad_stride(self, sys16):
        cfg = SimConfig(dt=0.01, t_final=1.0, sample_stride=0, fit_window=(0.1, 1.0))
        with pytest.raises(NonPositiveParameter):
            simulate(sys16, default_state(sys16), cfg)

    def test_fit_window_outside_horizon(self, sys16):
        cfg = SimConfig(dt=0.01, t_final=1.0)
        with pytest.raises(BadInterval):
            simulate(sys16, default_state(sys16), cfg)

    def test_dimension_mismatch(self, sys16):
        bad = StateVector(np.zeros(5), np.zeros(5))
        cfg = SimConfig(dt=0.01, t_final=1.0, fit_window=(0.1, 1.0))
        with pytest.raises(DimensionMismatch):
            simulate(sys16, bad, cfg)


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------


class TestStepMidpoint:
    def test_energy_balance_one_step(self, sys16):
        """E1 - E0 = -dt * v_mid^T C v_mid to solver roundoff."""
        rng = np.random.default_rng(51)
        U0 = random_state(sys16, rng)
        dt = 0.02
        U1 = step_midpoint(sys16, U0, dt)
        v_mid = 0.5 * (U0.v + U1.v)
        drop = energy(sys16, U1).total - energy(sys16, U0).total
        dissipated = dt * v_mid @ sys16.C @ v_mid
        assert abs(drop + dissipated) <= 1e-11 * energy(sys16, U0).total

    def test_zero_state_stays_zero(self, sys16):
        z = StateVector(np.zeros(sys16.n_dofs), np.zeros(sys16.n_dofs))
        U1 = step_midpoint(sys16, z, 0.05)
        assert np.all(U1.q == 0.0) and np.all(U1.v == 0.0)

    def test_rejects_nonpositive_dt(self, sys16):
        rng = np.random.default_rng(52)
        U = random_state(sys16, rng)
        with pytest.raises(NonPositiveParameter):
            step_midpoint(sys16, U, -0.1)

    def test_undamped_step_preserves_energy(self, sys16_undamped):
        rng = np.random.default_rng(53)
        U0 = random_state(sys16_undamped, rng)
        e0 = energy(sys16_undamped, U0).total
        U1 = step_midpoint(sys16_undamped, U0, 0.03)
        e1 = energy(sys16_undamped, U1).total
        assert abs(e1 - e0) <= 1e-12 * e0


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


class TestSimulate:
    def test_balance_residuals_every_step(self, sys16):
        cfg = SimConfig(dt=1.0 / 32.0, t_final=5.0, sample_stride=4,
                        fit_window=(1.0, 5.0))
        series = simulate(sys16, default_state(sys16), cfg)
        assert series.dissipation_residuals.size == 160
        assert series.dissipation_residuals.max() <= 1e-10
        assert series.sample_residuals[0] == 0.0
        assert series.sample_residuals.max() <= 1e-10

    def test_sampling_grid(self, sys16):
        cfg = SimConfig(dt=0.01, t_final=3.0, sample_stride=7,
                        fit_window=(1.0, 3.0))
        series = simulate(sys16, default_state(sys16), cfg)
        assert series.times[0] == 0.0
        assert_allclose(series.times[-1], 3.0, rtol=1e-12)
        assert_allclose(np.diff(series.times)[:-1], 0.07, rtol=1e-12)
        assert series.energies.size == series.times.size
        assert series.kinetics.size == series.times.size

    def test_energy_monotone_under_damping(self, sys16):
        cfg = SimConfig(dt=1.0 / 32.0, t_final=8.0, sample_stride=2,
                        fit_window=(1.0, 8.0))
        series = simulate(sys16, default_state(sys16), cfg)
        e0 = series.energies[0]
        assert np.all(np.diff(series.energies) <= 1e-12 * e0)
        assert series.energies[-1] < e0

    def test_undamped_energy_conserved(self, sys16_undamped):
        """With no damping the midpoint rule conserves E to 1e-10."""
        cfg = SimConfig(dt=1.0 / 32.0, t_final=10.0, sample_stride=8,
                        fit_window=(1.0, 10.0))
        series = simulate(sys16_undamped, default_state(sys16_undamped), cfg)
        e0 = series.energies[0]
        drift = np.max(np.abs(series.energies - e0)) / e0
        assert drift <= 1e-10
        assert series.dissipation_residuals.max() <= 1e-12

    def test_components_sum_to_total(self, sys16):
        cfg = SimConfig(dt=0.05, t_final=2.0, fit_window=(0.5, 2.0))
        series = simulate(sys16, default_state(sys16), cfg)
        assert_allclose(
            series.kinetics + series.potentials, series.energies, rtol=1e-12
        )

    def test_zero_data_gives_zero_series(self, sys16):
        z = StateVector(np.zeros(sys16.n_dofs), np.zeros(sys16.n_dofs))
        cfg = SimConfig(dt=0.05, t_final=1.0, fit_window=(0.2, 1.0))
        series = simulate(sys16, z, cfg)
        assert np.all(series.energies == 0.0)
        assert series.initial_domain_norm == 0.0


# ---------------------------------------------------------------------------
# decay fitting
# ---------------------------------------------------------------------------


class TestFitDecay:
    def test_recovers_exact_power_law(self):
        t = np.linspace(1.0, 100.0, 400)
        series = series_from(t, 5.0 / t)
        fit = fit_decay(series, (10.0, 100.0))
        assert abs(fit.gamma_hat - 1.0) <= 1e-10
        assert abs(fit.c_hat - 5.0) <= 1e-8
        assert fit.r_squared == 1.0
        assert fit.window[0] >= 10.0 and fit.window[1] <= 100.0

    def test_floor_samples_are_excluded(self):
        """A flat roundoff tail below the cutoff does not bias the slope."""
        t = np.linspace(1.0, 100.0, 600)
        clean = 5.0 * t**-5.0
        series = series_from(t, np.maximum(clean, 4e-8))
        fit = fit_decay(series, (2.0, 100.0))
        assert abs(fit.gamma_hat - 5.0) <= 1e-10

    def test_exponential_data_fits_poorly(self):
        """Exponential decay shows up as low r-squared, not a clean slope."""
        t = np.linspace(1.0, 35.0, 300)
        series = series_from(t, 3.0 * np.exp(-0.5 * t))
        fit = fit_decay(series, (5.0, 35.0))
        assert fit.gamma_hat > 0.0
        assert fit.r_squared < 0.99

    def test_zero_energy_in_window(self):
        t = np.linspace(1.0, 20.0, 50)
        E = np.ones_like(t)
        E[30] = 0.0
        with pytest.raises(NonpositiveEnergy):
            fit_decay(series_from(t, E), (1.0, 20.0))

    def test_too_few_samples(self):
        t = np.linspace(1.0, 100.0, 400)
        series = series_from(t, 5.0 / t)
        with pytest.raises(WindowTooSmall):
            fit_decay(series, (50.0, 51.0))
        with pytest.raises(WindowTooSmall):
            fit_decay(series, (20.0, 10.0))

    def test_measured_decay_stable_under_refinement(self):
        """Fitted decay exponents do not degrade from n=64 to n=128."""
        for k2 in (1.0, 2.0):
            gammas = []
            for n in (64, 128):
                sys = make_system(n, k2=k2)
                h = 1.0 / n
                cfg = SimConfig(dt=0.5 * h, t_final=100.0, sample_stride=16,
                                fit_window=(10.0, 100.0))
                series = simulate(sys, default_state(sys), cfg)
                gammas.append(fit_decay(series, cfg.fit_window).gamma_hat)
            assert gammas[1] >= gammas[0] - 0.1


# ---------------------------------------------------------------------------
# canned initial data
# ---------------------------------------------------------------------------


class TestInitialData:
    def test_default_data_satisfies_boundary_conditions(self):
        fields = default_initial_data(2.0)
        assert len(fields) == 6
        for f in fields:
            assert abs(f(0.0)) <= 1e-12
            assert abs(f(2.0)) <= 1e-12

    def test_default_data_shape(self):
        fields = default_initial_data(1.0)
        assert_allclose(fields[0](0.5), 1.0, rtol=1e-12)
        assert_allclose(fields[1](0.25), 1.0, rtol=1e-12)
        assert fields[3](0.3) == 0.0

    def test_family_has_three_distinct_members(self):
        family = initial_data_family(1.0)
        assert len(family) == 3
        for fields in family:
            assert len(fields) == 6
            for f in fields:
                assert abs(f(0.0)) <= 1e-12
                assert abs(f(1.0)) <= 1e-12
        probes = [tuple(fields[i](0.3) for i in range(3)) for fields in family]
        assert len(set(probes)) == 3
