"""Tests for fidscan.core.models"""

import math

import numpy as np
import pytest

from fidscan.core.models import (
    MODEL_DEFAULTS,
    BcsParams,
    FermiMomenta,
    ModePoint,
    OracleSuiteResult,
    ParameterPoint,
    Quadrature,
    RunConfig,
    SolverConfig,
    SpinVector,
    StonerFields,
    StonerParams,
    StonerState,
    SweepCell,
    SweepSpec,
)


class TestSpinVector:
    """Test cases for SpinVector"""

    def test_from_components_is_physical(self):
        """Cartesian construction gives h- = conj(h+) and the Euclidean norm"""
        h = SpinVector.from_components(1.0, 2.0, 3.0)
        assert h.is_physical()
        assert h.norm_squared() == pytest.approx(14.0)

    def test_components_round_trip(self):
        """components() recovers the Cartesian components"""
        x, y, z = SpinVector.from_components(0.5, -1.5, 2.0).components()
        assert (complex(x), complex(y), z) == (
            pytest.approx(0.5),
            pytest.approx(-1.5),
            2.0,
        )

    def test_nambu_vector(self):
        """Nambu field of a real gap lies in the x-z plane"""
        x, y, z = SpinVector.nambu(2.0, 0.1, 0.3).components()
        assert complex(x) == pytest.approx(0.4)
        assert complex(y) == pytest.approx(0.0)
        assert z == pytest.approx(-1.2)

    def test_non_physical_vector(self):
        """Independent h+ and h- are flagged"""
        assert not SpinVector(1.0, 2.0j, 0.0).is_physical()

    def test_vectorized_addition_and_scaling(self):
        """Array components combine elementwise"""
        a = SpinVector.along_z(np.array([1.0, 2.0]))
        b = a.scaled(0.5) + a
        np.testing.assert_allclose(b.h_zero, [1.5, 3.0])


class TestParameters:
    """Test cases for the parameter records"""

    def test_parameter_point_neighbor(self):
        """neighbor() applies both offsets"""
        q = ParameterPoint(t=0.1, coupling=0.3, dt=0.01, dcoupling=0.002)
        assert q.neighbor().t == pytest.approx(0.11)
        assert q.neighbor().coupling == pytest.approx(0.302)
        assert not q.same_location(q.neighbor())

    def test_parameter_point_rejects_negative(self):
        """Negative temperature is invalid"""
        with pytest.raises(ValueError, match="Temperature"):
            ParameterPoint(t=-0.1, coupling=0.3)

    def test_stoner_params_neighbor_keeps_field(self):
        """The neighbor shares size and probe field but carries no offsets"""
        p = StonerParams(u=0.9, t=0.1, du=2e-3, field=1e-4)
        neighbor = p.neighbor()
        assert neighbor.u == pytest.approx(0.902)
        assert neighbor.field == 1e-4
        assert neighbor.du == 0.0

    def test_stoner_params_electrons(self):
        """N = 4 size / 3"""
        assert StonerParams(u=0.5, t=0.1, size=750.0).electrons == pytest.approx(1000.0)

    def test_with_field_keeps_offsets(self):
        """with_field only replaces the probe field"""
        p = StonerParams(u=0.5, t=0.1, du=1e-3).with_field(2e-4)
        assert (p.du, p.field) == (1e-3, 2e-4)

    @pytest.mark.parametrize(
        "kwargs",
        [{"u": -0.1, "t": 0.1}, {"u": 0.5, "t": -0.1}, {"u": 0.5, "t": 0.1, "size": 0.0},
         {"u": 0.5, "t": 0.1, "du": 0.5}],
    )
    def test_stoner_params_invalid(self, kwargs):
        """Out-of-range Stoner parameters are rejected"""
        with pytest.raises(ValueError):
            StonerParams(**kwargs)

    def test_bcs_params_invalid_nu(self):
        """Mode density must be positive"""
        with pytest.raises(ValueError, match="Mode density"):
            BcsParams(v=0.3, t=0.01, nu=0.0)

    def test_stoner_fields(self):
        """alpha and h_z follow the mean-field shifts"""
        f = StonerFields(beta=10.0, mu=1.2, u=0.6, m=0.1)
        assert f.alpha(1.0) == pytest.approx(-10.0 * (1.0 - 1.2 + 0.4))
        assert f.h_z == pytest.approx(10.0 * 8.0 * 0.6 * 0.1 / 3.0)

    def test_mode_point_needs_temperature(self):
        """Per-mode states need t > 0"""
        with pytest.raises(ValueError):
            ModePoint(t=0.0, gap=0.1, eps=0.0)

    def test_quadrature_and_solver_validation(self):
        """Numerical controls validate their ranges"""
        with pytest.raises(ValueError):
            Quadrature(rtol=0.1)
        with pytest.raises(ValueError, match="Absolute tolerance"):
            Quadrature(atol=-1e-15)
        assert Quadrature(atol=0.0).atol == 0.0
        with pytest.raises(ValueError):
            SolverConfig(damping=(0.5, 0.25))


class TestStates:
    """Test cases for mean-field states"""

    def test_fermi_momenta_constraint(self):
        """x^3 + y^3 must equal 2"""
        with pytest.raises(ValueError, match="x\\^3"):
            FermiMomenta(1.0, 0.5)

    def test_fully_polarized_magnetization(self):
        """All electrons spin up gives m = 1/2"""
        assert FermiMomenta(2.0 ** (1.0 / 3.0), 0.0).magnetization == pytest.approx(0.5)

    def test_stoner_state_bounds(self):
        """|m| above 1/2 is rejected"""
        with pytest.raises(ValueError, match="Magnetization"):
            StonerState(m=0.6, mu=1.0)

    def test_stoner_state_branch(self):
        """Only the two known branches are accepted"""
        with pytest.raises(ValueError, match="branch"):
            StonerState(m=0.0, mu=1.0, branch="ferri")

    def test_stoner_state_to_dict(self):
        """to_dict carries every field"""
        data = StonerState(m=0.2, mu=1.1, branch="magnetic").to_dict()
        assert data == {
            "m": 0.2,
            "mu": 1.1,
            "converged": True,
            "branch": "magnetic",
            "residual": 0.0,
        }


class TestSweepSpec:
    """Test cases for SweepSpec"""

    def test_default_size(self):
        """The size falls back to the model default"""
        spec = SweepSpec("bcs", (0.01, 0.1, 4), (0.1, 0.4, 3), dcoupling=1e-3)
        assert spec.size == MODEL_DEFAULTS["bcs"]["size"]
        assert len(spec.t_values()) == 4
        assert spec.coupling_step == pytest.approx(0.15)

    def test_needs_an_offset(self):
        """Zero offsets would compare a state with itself"""
        with pytest.raises(ValueError, match="offsets"):
            SweepSpec("stoner", (0.01, 0.1, 4), (0.5, 1.5, 3))

    def test_needs_positive_temperatures(self):
        """Sweeps start above t = 0"""
        with pytest.raises(ValueError, match="positive"):
            SweepSpec("stoner", (0.0, 0.1, 4), (0.5, 1.5, 3), dcoupling=1e-3)

    def test_rejects_single_point_range(self):
        """A range needs at least two points"""
        with pytest.raises(ValueError, match="at least 2"):
            SweepSpec("stoner", (0.01, 0.1, 1), (0.5, 1.5, 3), dcoupling=1e-3)


class TestSweepCell:
    """Test cases for SweepCell"""

    def test_differences(self):
        """C - F and H - F are derived columns"""
        cell = SweepCell(0.1, 0.5, 0.0, None, 0.9, 0.7, 0.8, 0.0)
        assert cell.c_minus_f == pytest.approx(-0.2)
        assert cell.h_minus_f == pytest.approx(-0.1)

    def test_failed_cell(self):
        """A failed cell is NaN, unconverged and carries its diagnostics"""
        cell = SweepCell.failed(0.1, 0.5, "ConvergenceError: stalled")
        data = cell.to_dict()
        assert not data["converged"]
        assert math.isnan(data["F"])
        assert data["diagnostics"] == "ConvergenceError: stalled"


class TestRunConfig:
    """Test cases for RunConfig"""

    def test_model_defaults(self):
        """Unset ranges, offset and size come from the model defaults"""
        config = RunConfig(model="bcs")
        assert config.t_range == MODEL_DEFAULTS["bcs"]["t"]
        assert config.dcoupling == 1e-3
        assert config.size == 500.0

    def test_to_dict_uses_model_keys(self):
        """The coupling offset and size are written under the model's flag names"""
        data = RunConfig(model="bcs").to_dict()
        assert data["dv"] == 1e-3
        assert data["nu"] == 500.0
        assert "du" not in data and "size" not in data
        assert data["t"] == "0.005:0.12:200"

    def test_invalid_failure_threshold(self):
        """The tolerated failure share lies in [0, 1]"""
        with pytest.raises(ValueError, match="Failure threshold"):
            RunConfig(failure_threshold=2.0)

    def test_sweep_spec(self):
        """sweep_spec carries the resolved values"""
        spec = RunConfig(model="stoner", jobs=3).sweep_spec()
        assert (spec.model, spec.jobs, spec.dcoupling) == ("stoner", 3, 2e-3)


class TestOracleSuiteResult:
    """Test cases for OracleSuiteResult"""

    def test_passed(self):
        """A suite passes when its deviation is within tolerance"""
        assert OracleSuiteResult("bcs-modes", 10, 1e-12, 1e-10).passed
        assert not OracleSuiteResult("bcs-modes", 10, 1e-8, 1e-10).passed

    def test_to_dict(self):
        """to_dict reports the pass flag instead of the tolerance"""
        data = OracleSuiteResult("bcs-modes", 10, 1e-12, 1e-10).to_dict()
        assert data == {"name": "bcs-modes", "draws": 10, "max_deviation": 1e-12, "passed": True}
