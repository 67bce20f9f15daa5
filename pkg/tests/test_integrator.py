"""Tests for the fixed-step propagator and the convergence controller."""
import numpy as np
import pytest
from scipy.linalg import expm

from heomsim.bath import BathExpansion, LorentzSpectrum, expand_lorentz_zero_temperature
from heomsim.heom import HierarchySystem
from heomsim.integrator import (
    ConvergenceResult,
    IntegrationError,
    IntegratorConfig,
    converge,
    default_config,
    default_time_step,
    integrate,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
PLUS = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)


def lorentz_system(depth=4, coupling_strength=0.2):
    sd = LorentzSpectrum(coupling=coupling_strength, width=0.5, center=1.0)
    expansion = expand_lorentz_zero_temperature(sd)
    h = 0.5 * SIGMA_Z
    return HierarchySystem(h, SIGMA_X, expansion, depth)


class TestConfig:
    def test_step_stiffness_product_guarded(self):
        with pytest.raises(ValueError):
            IntegratorConfig(time_step=1.0, stiffness_bound=1.0)
        IntegratorConfig(time_step=0.1, stiffness_bound=1.0)

    def test_positive_step_required(self):
        with pytest.raises(ValueError):
            IntegratorConfig(time_step=0.0)

    def test_default_step_respects_both_scales(self):
        system = lorentz_system()
        dt = default_time_step(system)
        assert dt * system.stiffness_bound() <= 0.1 + 1e-12
        hnorm = np.linalg.norm(system.hamiltonian, 2)
        assert dt <= 2.0 * np.pi / (200.0 * hnorm) + 1e-15


class TestIntegrate:
    def test_closed_system_matches_exponential(self):
        """With the coupling switched off the root row evolves unitarily."""
        h = 0.5 * SIGMA_Z + 0.3 * SIGMA_X
        expansion = BathExpansion(
            terms=((0.2 + 0.0j, 1.0 + 0.5j),), temperature=0.0, provenance="test"
        )
        system = HierarchySystem(h, np.zeros((2, 2)), expansion, 4)
        config = default_config(system, time_step=0.01)
        trajectory = integrate(system, PLUS, 10.0, n_records=11, config=config)
        for t, rho in zip(trajectory.times, trajectory.values):
            u = expm(-1j * h * t)
            exact = u @ PLUS @ u.conj().T
            assert np.abs(rho - exact).max() < 1e-8

    def test_fourth_order_error_scaling(self):
        """Halving the step shrinks the defect by roughly two to the fourth."""
        system = lorentz_system()
        runs = {}
        for dt in (0.05, 0.025, 0.0125):
            config = default_config(system, time_step=dt)
            runs[dt] = integrate(system, PLUS, 10.0, n_records=6, config=config)
        coarse = np.abs(runs[0.05].values - runs[0.025].values).max()
        fine = np.abs(runs[0.025].values - runs[0.0125].values).max()
        assert 12.0 < coarse / fine < 20.0

    def test_repeat_runs_bitwise_identical(self):
        system = lorentz_system()
        a = integrate(system, PLUS, 5.0, n_records=11)
        b = integrate(system, PLUS, 5.0, n_records=11)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.final_state, b.final_state)

    def test_uniform_record_grid(self):
        system = lorentz_system(depth=2)
        trajectory = integrate(system, PLUS, 4.0, n_records=9)
        assert np.allclose(trajectory.times, np.linspace(0.0, 4.0, 9))
        assert trajectory.values.shape == (9, 2, 2)
        assert trajectory.time_step <= default_time_step(system) + 1e-15

    def test_observable_recording(self):
        system = lorentz_system(depth=3)
        trajectory = integrate(
            system,
            PLUS,
            5.0,
            n_records=6,
            observe=lambda rho: np.trace(rho @ SIGMA_X).real,
        )
        assert trajectory.values.shape == (6,)
        assert trajectory.values[0] == pytest.approx(1.0)
        assert np.abs(trajectory.values[1:]).max() < 1.0

    def test_argument_validation(self):
        system = lorentz_system(depth=2)
        with pytest.raises(ValueError):
            integrate(system, PLUS, -1.0)
        with pytest.raises(ValueError):
            integrate(system, PLUS, 1.0, n_records=1)


class _ProtocolSystem:
    """Minimal stand-in implementing the propagation protocol."""

    hamiltonian = np.eye(2, dtype=complex)

    def stiffness_bound(self):
        return 1.0

    def initial_state(self, rho0):
        return np.asarray(rho0, dtype=complex)[None, :, :].copy()

    def physical(self, state):
        return state[0]


class _TraceLeakSystem(_ProtocolSystem):
    def rhs(self, state):
        return 0.05 * state


class _SymmetryLeakSystem(_ProtocolSystem):
    def rhs(self, state):
        defect = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        return 0.05 * defect[None, :, :] * np.ones_like(state)


class TestSampleChecks:
    def test_trace_drift_detected(self):
        with pytest.raises(IntegrationError, match="trace"):
            integrate(_TraceLeakSystem(), 0.5 * np.eye(2), 10.0, n_records=6)

    def test_hermiticity_defect_detected(self):
        with pytest.raises(IntegrationError, match="hermiticity"):
            integrate(_SymmetryLeakSystem(), 0.5 * np.eye(2), 10.0, n_records=6)


class TestConverge:
    @staticmethod
    def fake_run(depth, terms):
        return np.array([5.0 + 2.0 ** (-depth) + 10.0 * 4.0 ** (-terms)])

    def test_refines_until_both_directions_settle(self):
        result = converge(self.fake_run, 2, 1, tol=1e-3)
        assert isinstance(result, ConvergenceResult)
        assert result.converged
        assert result.depth == 10
        assert result.matsubara_terms == 8
        assert result.depth_delta <= 1e-3
        assert result.matsubara_delta <= 1e-3

    def test_budget_cap_reports_not_converged(self):
        result = converge(self.fake_run, 2, 1, tol=1e-12, max_depth=6)
        assert not result.converged
        assert result.depth == 6

    def test_insensitive_direction_passes_immediately(self):
        result = converge(
            lambda depth, terms: np.array([2.0 ** (-depth)]), 2, 1, tol=1e-3
        )
        assert result.converged
        assert result.matsubara_terms == 1

    def test_depth_only_mode_skips_expansion_probes(self):
        calls = []

        def counted(depth, terms):
            calls.append((depth, terms))
            return self.fake_run(depth, terms)

        result = converge(counted, 2, 1, tol=1e-3, refine_matsubara=False)
        assert result.converged
        assert result.matsubara_terms == 1
        assert result.matsubara_delta == 0.0
        assert all(terms == 1 for _, terms in calls)

    def test_run_cache_avoids_duplicate_work(self):
        calls = []

        def counted(depth, terms):
            calls.append((depth, terms))
            return self.fake_run(depth, terms)

        result = converge(counted, 2, 1, tol=1e-3)
        assert len(calls) == len(set(calls))
        assert result.n_runs == len(calls)


if __name__ == "__main__":
    pytest.main([__file__])
