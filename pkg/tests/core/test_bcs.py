"""Tests for fidscan.core.bcs"""

import math

import numpy as np
import pytest
from scipy import integrate

from fidscan.core import algebra, bcs
from fidscan.core.models import BcsParams, DomainError, ModePoint, ParameterPoint

EULER_GAMMA = 0.5772156649015329


class TestGapEquation:
    """Test cases for the gap equation and its critical temperature"""

    @pytest.mark.parametrize("v", [0.1, 0.2, 0.3, 0.5])
    def test_zero_temperature_gap(self, v):
        assert bcs.zero_t_gap(v) * math.sinh(1.0 / v) == pytest.approx(1.0, rel=1e-12)

    def test_spin_summed_convention(self):
        v = 0.3
        assert bcs.zero_t_gap(v, "spin-summed") * math.sinh(2.0 / v) == pytest.approx(1.0)

    def test_unknown_convention(self):
        with pytest.raises(ValueError, match="convention"):
            bcs.zero_t_gap(0.3, "bogus")

    def test_no_coupling(self):
        assert bcs.zero_t_gap(0.0) == 0.0
        assert bcs.critical_temperature(0.0) == 0.0
        assert bcs.solve_gap(0.0, 0.01).gap == 0.0

    def test_zero_temperature_integral(self):
        """At t = 0 the gap integral is asinh(1/delta), so 1/v at the ground-state gap"""
        v = 0.25
        assert bcs.gap_integral(bcs.zero_t_gap(v), 0.0) == pytest.approx(1.0 / v)

    def test_linearized_integral(self):
        """int_0^1 tanh(x/2t)/x dx = ln(2 e^gamma / pi t) at low t"""
        t = 0.01
        expected = math.log(2.0 * math.exp(EULER_GAMMA) / (math.pi * t))
        assert bcs.gap_integral(0.0, t) == pytest.approx(expected, rel=1e-10)

    def test_negative_arguments(self):
        with pytest.raises(DomainError):
            bcs.gap_integral(-0.1, 0.01)
        with pytest.raises(DomainError):
            bcs.solve_gap(0.3, -0.01)

    def test_gap_residual(self):
        state = bcs.solve_gap(0.3, 0.02)
        assert state.gap > 0.0
        assert state.residual <= 1e-12
        assert abs(bcs.gap_residual(state.gap, 0.3, 0.02)) <= 1e-12

    def test_gap_decreases_with_temperature(self):
        gaps = [bcs.solve_gap(0.3, t).gap for t in (0.005, 0.02, 0.03, 0.04)]
        assert gaps == sorted(gaps, reverse=True)
        assert gaps[0] == pytest.approx(bcs.zero_t_gap(0.3), rel=1e-5)

    def test_normal_phase_above_critical_temperature(self):
        v = 0.3
        t_c = bcs.critical_temperature(v)
        assert bcs.solve_gap(v, 1.05 * t_c).gap == 0.0
        assert bcs.solve_gap(v, 0.95 * t_c).gap > 0.0

    def test_continuation_bound(self):
        """upper = 0 marks a point already known to be normal"""
        assert bcs.solve_gap(0.3, 0.01, upper=0.0).gap == 0.0

    @pytest.mark.parametrize("v", [0.2, 0.3])
    def test_weak_coupling_ratio(self, v):
        """gap(0) / t_c = pi / e^gamma = 1.764"""
        ratio = bcs.zero_t_gap(v) / bcs.critical_temperature(v)
        assert ratio == pytest.approx(1.764, rel=1e-2)

    def test_critical_temperature_is_root(self):
        v = 0.3
        t_c = bcs.critical_temperature(v)
        assert abs(bcs.gap_residual(0.0, v, t_c)) <= 1e-10
        assert bcs.critical_temperature(0.35) > t_c


class TestModeGrid:
    """Test cases for the mode-density rule"""

    def test_node_count(self):
        nodes, weights = bcs.mode_density_grid()
        assert len(nodes) == len(weights) == 2016

    def test_weights(self):
        nodes, weights = bcs.mode_density_grid()
        assert weights.sum() == pytest.approx(2.0, rel=1e-12)
        assert np.all(weights > 0)
        assert np.all(np.abs(nodes) < 1.0)

    def test_symmetric(self):
        nodes, weights = bcs.mode_density_grid()
        np.testing.assert_allclose(nodes, -nodes[::-1])
        np.testing.assert_allclose(weights, weights[::-1])

    def test_integrates_polynomials(self):
        nodes, weights = bcs.mode_density_grid(n_nodes=320)
        assert weights @ nodes**2 == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_resolves_narrow_structure(self):
        """The geometric grading resolves features much narrower than the window"""
        nodes, weights = bcs.mode_density_grid()
        width = 1e-3
        value = weights @ (width / (nodes**2 + width**2))
        assert value == pytest.approx(2.0 * math.atan(1.0 / width), rel=1e-8)


class TestModeClosedForms:
    """Test cases for the per-mode F, C, H"""

    @pytest.fixture
    def modes(self):
        eps = np.linspace(-0.3, 0.3, 61)
        return ModePoint(0.03, 0.05, eps), ModePoint(0.031, 0.045, eps)

    def test_ordering(self, modes):
        """C <= H <= F for every mode"""
        log_f, log_c, log_h = bcs.mode_log_triple(*modes)
        assert np.all(log_c <= log_h + 1e-12)
        assert np.all(log_h <= log_f + 1e-12)
        assert np.all(log_f <= 1e-12)

    def test_matches_dense_fidelity(self):
        pa = ModePoint(0.05, 0.08, 0.02)
        pb = ModePoint(0.05, 0.06 * np.exp(0.3j), 0.02)
        triple = bcs.mode_triple(pa, pb)
        rho_a = algebra.gibbs_state(bcs.mode_generator(pa))
        rho_b = algebra.gibbs_state(bcs.mode_generator(pb))
        assert triple.f == pytest.approx(algebra.dense_fidelity(rho_a, rho_b), rel=1e-10)
        assert triple.h == pytest.approx(algebra.dense_overlap(rho_a, rho_b), rel=1e-10)
        assert triple.c <= triple.h <= triple.f

    def test_swap_symmetry(self, modes):
        """F, C and H do not depend on which state comes first"""
        forward = bcs.mode_log_triple(*modes)
        backward = bcs.mode_log_triple(*reversed(modes))
        for ab, ba in zip(forward, backward):
            np.testing.assert_allclose(ba, ab, rtol=1e-12, atol=1e-14)

    def test_identical_modes(self):
        point = ModePoint(0.05, 0.08, 0.1)
        log_f, log_c, log_h = bcs.mode_log_triple(point, point)
        for value in (log_f, log_c, log_h):
            assert float(value) == pytest.approx(0.0, abs=1e-12)


class TestTotalFidelity:
    """Test cases for the mode sums"""

    def test_zero_offset(self):
        assert bcs.total_fidelity(BcsParams(v=0.3, t=0.02)) == (1.0, 1.0, 1.0)

    def test_ordering(self):
        for p in (
            BcsParams(v=0.3, t=0.02, dv=1e-3),
            BcsParams(v=0.3, t=0.02, dt=1e-3),
            BcsParams(v=0.3, t=0.08, dt=1e-3, dv=1e-3),
        ):
            f, c, h = bcs.total_fidelity(p)
            assert 0.0 < c <= h + 1e-12
            assert h <= f + 1e-12
            assert f <= 1.0

    def test_low_temperature_limit(self):
        """At t -> 0 the mode sum reduces to the ground-state fidelity"""
        p = BcsParams(v=0.3, t=1e-4, dv=1e-3)
        f, _, _ = bcs.total_fidelity(p)
        assert f == pytest.approx(bcs.zero_t_fidelity(0.3, 0.301, p.nu), abs=1e-6)

    def test_zero_temperature_fidelity(self):
        assert bcs.zero_t_fidelity(0.3, 0.3, 500.0) == pytest.approx(1.0)
        assert bcs.zero_t_fidelity(0.3, 0.31, 500.0) < 1.0
        with pytest.raises(DomainError):
            bcs.zero_t_fidelity(-0.1, 0.3, 500.0)

    def test_normal_phase_cell_is_exact(self):
        """Two normal states at one temperature give F = C = H = 1 with no rounding"""
        p = BcsParams(v=0.25, t=0.03, dv=1e-3)
        assert bcs.solve_gap(p.v + p.dv, p.t).gap == 0.0
        assert bcs.total_log_fidelity(p) == (0.0, 0.0, 0.0)
        f, c, h = bcs.total_fidelity(p)
        assert c - f == 0.0
        assert h - f == 0.0

    def test_total_swap_symmetry(self):
        """Trading the two points leaves ln F, ln C and ln H unchanged"""
        p = BcsParams(v=0.3, t=0.03, dv=2e-3)
        reverse = BcsParams(v=p.v + p.dv, t=p.t, dv=-p.dv)
        state_a = bcs.solve_gap(p.v, p.t)
        state_b = bcs.solve_gap(p.v + p.dv, p.t)
        forward = bcs.total_log_fidelity(p, state_a, state_b)
        backward = bcs.total_log_fidelity(reverse, state_b, state_a)
        assert forward[1] <= forward[2] <= forward[0] < 0.0
        for ab, ba in zip(forward, backward):
            assert ba == pytest.approx(ab, rel=1e-10)

    def test_ground_state_fidelity_closed_form(self):
        """The mode sum equals nu int ln cos((theta_a - theta_b) / 2) over the Debye window"""
        gap_a, gap_b = bcs.zero_t_gap(0.3), bcs.zero_t_gap(0.31)

        def per_mode(eps):
            return math.log(math.cos(0.5 * (math.atan2(gap_a, eps) - math.atan2(gap_b, eps))))

        integral, _ = integrate.quad(per_mode, -1.0, 1.0, points=[0.0], epsabs=1e-13, limit=200)
        expected = math.exp(500.0 * integral)
        assert bcs.zero_t_fidelity(0.3, 0.31, 500.0) == pytest.approx(expected, rel=1e-8)

    def test_ground_state_fidelity_vanishes_with_size(self):
        values = [bcs.zero_t_fidelity(0.3, 0.31, nu) for nu in (1e2, 1e4, 1e6)]
        assert 1.0 > values[0] > values[1] > values[2]
        assert values[2] < 1e-10

    def test_zero_temperature_rejected(self):
        with pytest.raises(DomainError):
            bcs.total_log_fidelity(BcsParams(v=0.3, t=0.0, dv=1e-3))

    def test_extensive(self):
        """ln F scales with the mode density"""
        small = bcs.total_log_fidelity(BcsParams(v=0.3, t=0.03, dv=1e-3, nu=100.0))
        large = bcs.total_log_fidelity(BcsParams(v=0.3, t=0.03, dv=1e-3, nu=400.0))
        assert large[0] == pytest.approx(4.0 * small[0], rel=1e-10)


class TestUhlmann:
    """Test cases for the Uhlmann connection"""

    @staticmethod
    def _straddling() -> BcsParams:
        v, dv = 0.3, 1e-2
        t = 0.5 * (bcs.critical_temperature(v) + bcs.critical_temperature(v + dv))
        return BcsParams(v=v, t=t, dv=dv)

    def test_straddling_critical_line(self):
        """Across the transition the connection departs from the identity"""
        p = self._straddling()
        state_b = bcs.solve_gap(p.v + p.dv, p.t)
        assert bcs.solve_gap(p.v, p.t).gap == 0.0
        assert state_b.gap > 0.0
        (sample,) = bcs.uhlmann_profile(p, [state_b.gap])
        assert sample.uhl_dev > 0.01
        assert sample.identity_residual <= 1e-10

    def test_normal_phase(self):
        """Commuting normal-phase modes give U = I"""
        v, dv = 0.3, 1e-2
        p = BcsParams(v=v, t=2.0 * bcs.critical_temperature(v + dv), dv=dv, dt=1e-3)
        samples = bcs.uhlmann_profile(p, np.linspace(-0.2, 0.2, 21))
        assert max(sample.uhl_dev for sample in samples) <= 1e-6

    def test_trace_identity_in_ordered_phase(self):
        p = BcsParams(v=0.3, t=0.02, dv=1e-2, dt=1e-3)
        for sample in bcs.uhlmann_profile(p, [-0.1, 0.0, 0.05]):
            assert sample.identity_residual <= 1e-10

    def test_zero_temperature_rejected(self):
        with pytest.raises(DomainError):
            bcs.uhlmann_profile(BcsParams(v=0.3, t=0.0, dv=1e-3), [0.0])

    def test_probe_energies(self):
        probes = bcs.probe_energies(0.0, 0.03, 0.01)
        assert 0.03 in probes
        assert max(probes) == pytest.approx(0.12)
        assert len(bcs.probe_energies(0.0, 0.0, 0.03)) == 5


class TestLoopComposition:
    """Test cases for products of connections around closed loops"""

    def test_normal_phase_loop(self):
        points = [
            ParameterPoint(0.2, 0.1),
            ParameterPoint(0.21, 0.1),
            ParameterPoint(0.21, 0.12),
            ParameterPoint(0.2, 0.1),
        ]
        holonomy = bcs.loop_composition(points, 0.05)
        np.testing.assert_allclose(holonomy, np.eye(4), atol=1e-10)

    def test_ordered_phase_loop_is_unitary(self):
        points = [
            ParameterPoint(0.01, 0.3),
            ParameterPoint(0.02, 0.3),
            ParameterPoint(0.02, 0.32),
            ParameterPoint(0.01, 0.3),
        ]
        holonomy = bcs.loop_composition(points, 0.02)
        np.testing.assert_allclose(holonomy @ holonomy.conj().T, np.eye(4), atol=1e-10)

    def test_loop_around_transition(self):
        """A loop through both phases carries a non-trivial holonomy"""
        points = [
            ParameterPoint(0.03, 0.29),
            ParameterPoint(0.05, 0.29),
            ParameterPoint(0.05, 0.31),
            ParameterPoint(0.03, 0.31),
            ParameterPoint(0.03, 0.29),
        ]
        gaps = [bcs.solve_gap(point.coupling, point.t).gap for point in points[:4]]
        assert gaps[0] > 0.0 and gaps[3] > 0.0
        assert gaps[1] == gaps[2] == 0.0
        holonomy = bcs.loop_composition(points, 0.05)
        np.testing.assert_allclose(holonomy @ holonomy.conj().T, np.eye(4), atol=1e-10)
        assert algebra.uhlmann_deviation(holonomy) > 1e-4

    def test_open_loop(self):
        points = [ParameterPoint(0.2, 0.1), ParameterPoint(0.21, 0.1), ParameterPoint(0.21, 0.12)]
        with pytest.raises(DomainError, match="end where it starts"):
            bcs.loop_composition(points, 0.05)

    def test_too_short(self):
        with pytest.raises(DomainError, match="at least 3"):
            bcs.loop_composition([ParameterPoint(0.2, 0.1), ParameterPoint(0.2, 0.1)], 0.0)
