import math

import numpy as np
import pytest

from riskfield.geometry import GridSpec, PathGeometry, cell_to_world
from riskfield.maf import (
    FieldError,
    MafParams,
    height,
    maf_agent,
    maf_agent_grid,
    maf_hypothesis,
    maf_hypothesis_grid,
    path_severity,
    sigma,
    virtual_mass,
)
from riskfield.predictor import HypothesisSet, TrajectoryHypothesis

from conftest import make_car

PARAMS = MafParams()


def straight_path(length=40.0, speed=None, n=41):
    xs = np.linspace(0.0, length, n)
    speeds = None if speed is None else np.full(n, speed)
    return PathGeometry(np.stack([xs, np.zeros(n)], axis=1), speeds=speeds)


class TestSigma:
    def test_all_growth_terms_vanish_at_start(self):
        p = MafParams(b=0.05, k=10.0, c=1.0, k_v=0.15)
        path = straight_path(speed=0.0)
        assert sigma(0.0, path, p) == pytest.approx(1.0, abs=1e-12)

    def test_direct_substitution(self):
        p = MafParams(b=0.1, k=0.0, c=1.0, k_v=0.0, sigma_max=10.0)
        assert sigma(20.0, straight_path(), p) == pytest.approx(3.0, abs=1e-12)

    def test_speed_widens_and_kv_zero_collapses(self):
        # velocity-variant width: strictly wider for faster speed profiles
        # at every distance; with k_v = 0 the curves coincide exactly
        p = MafParams()
        p0 = MafParams(k_v=0.0)
        ss = np.array([0.0, 20.0, 40.0])
        widths = [sigma(ss, straight_path(speed=v), p) for v in (0.0, 10.0, 20.0)]
        for slow, fast in zip(widths, widths[1:]):
            assert np.all(fast > slow)
        base = [sigma(ss, straight_path(speed=v), p0) for v in (0.0, 10.0, 20.0)]
        assert np.array_equal(base[0], base[1])
        assert np.array_equal(base[1], base[2])

    def test_velocity_variant_flag_drops_speed_term(self):
        p = MafParams()
        path = straight_path(speed=10.0)
        no_vel = sigma(10.0, path, p, velocity_variant=False)
        assert no_vel == pytest.approx((p.b * 10.0 + p.c), abs=1e-12)

    def test_clamped_to_bounds(self):
        p = MafParams(b=1.0, k=0.0, c=1.0, k_v=0.0, sigma_min=0.5, sigma_max=8.0)
        path = straight_path()
        assert sigma(40.0, path, p) == 8.0
        p2 = MafParams(b=0.0, k=0.0, c=1.0, k_v=0.0, sigma_min=2.0, sigma_max=8.0)
        assert sigma(0.0, path, p2) == 2.0

    def test_nondecreasing_in_s_and_speed(self, rng):
        p = MafParams()
        path = straight_path(speed=5.0)
        ss = np.sort(rng.uniform(0, 40, size=30))
        vals = sigma(ss, path, p)
        assert np.all(np.diff(vals) >= -1e-12)
        assert np.all(vals >= p.sigma_min) and np.all(vals <= p.sigma_max)


class TestHeight:
    def test_zero_at_path_end(self):
        assert height(40.0, straight_path(), PARAMS) == 0.0

    def test_direct_substitution(self):
        p = MafParams(q=1.0)
        assert height(0.0, straight_path(10.0), p) == pytest.approx(100.0)
        p2 = MafParams(q=0.5)
        assert height(20.0, straight_path(40.0), p2) == pytest.approx(200.0)

    def test_strictly_decreasing_before_end(self, rng):
        p = MafParams(q=2e-6)
        path = straight_path()
        ss = np.sort(rng.uniform(0, 40, size=40))
        vals = height(ss, path, p)
        assert np.all(np.diff(vals) < 0)


class TestMafHypothesis:
    def test_on_centerline_equals_height(self):
        path = straight_path(speed=10.0)
        for s in (0.5, 10.0, 25.0):
            got = maf_hypothesis((s, 0.0), path, PARAMS)
            assert got == pytest.approx(float(height(s, path, PARAMS)), rel=1e-12)

    def test_one_sigma_offset(self):
        path = straight_path(speed=10.0)
        s = 12.0
        w = float(sigma(s, path, PARAMS))
        got = maf_hypothesis((s, w), path, PARAMS)
        expected = float(height(s, path, PARAMS)) * math.exp(-0.5)
        assert got == pytest.approx(expected, rel=1e-9)

    def test_zero_outside_domain(self):
        path = straight_path(speed=10.0)
        assert maf_hypothesis((40.0, 0.0), path, PARAMS) == 0.0  # at the end
        assert maf_hypothesis((45.0, 0.0), path, PARAMS) == 0.0  # beyond
        assert maf_hypothesis((-3.0, 1.0), path, PARAMS) == 0.0  # behind
        assert maf_hypothesis((0.0, 2.0), path, PARAMS) == 0.0  # lateral of start

    def test_zero_beyond_truncation(self):
        p = MafParams(trunc_sigmas=3.0, sigma_max=2.0)
        path = straight_path(speed=0.0)
        assert maf_hypothesis((20.0, 6.5), path, p) == 0.0
        assert maf_hypothesis((20.0, 5.9), path, p) > 0.0

    def test_lateral_symmetry(self, rng):
        path = straight_path(speed=8.0)
        for _ in range(20):
            s = rng.uniform(1, 39)
            d = rng.uniform(0, 6)
            up = maf_hypothesis((s, d), path, PARAMS)
            down = maf_hypothesis((s, -d), path, PARAMS)
            assert up == pytest.approx(down, rel=1e-12)

    def test_degenerate_path_zero(self):
        path = PathGeometry([[0.0, 0.0]])
        assert maf_hypothesis((0.0, 0.0), path, PARAMS) == 0.0

    def test_grid_matches_scalar_exactly_at_cell_centers(self, rng):
        grid = GridSpec(center=(10.0, 2.0), extent=30.0, resolution=0.5)
        theta = np.linspace(0, 0.8, 21)
        pts = np.stack([50 * np.sin(theta), 50 * (1 - np.cos(theta))], axis=1)
        path = PathGeometry(pts, speeds=np.full(21, 10.0))
        g = maf_hypothesis_grid(grid, path, PARAMS)
        for _ in range(150):
            row, col = int(rng.integers(grid.n)), int(rng.integers(grid.n))
            p = cell_to_world((row, col), grid)
            assert g[row, col] == maf_hypothesis(p, path, PARAMS)


class TestVirtualMass:
    def test_zero_speed_leaves_offset_term(self):
        p = MafParams(alpha=0.05, beta=1.5, gamma_m=1.0)
        car = make_car(mass=1500.0)
        assert virtual_mass(car, 0.0, p) == pytest.approx(1500.0 * 1.0 * 1.0)

    def test_direct_substitution(self):
        p = MafParams(alpha=1.0, beta=1.0, gamma_m=0.0)
        car = make_car(mass=1000.0)
        assert virtual_mass(car, 10.0, p) == pytest.approx(10000.0)

    def test_linear_in_mass(self):
        p = MafParams()
        a = virtual_mass(make_car(mass=1000.0), 7.0, p)
        b = virtual_mass(make_car(mass=2000.0), 7.0, p)
        assert b == pytest.approx(2 * a, rel=1e-12)

    def test_type_factor_applies(self):
        from riskfield.scenario import AgentState

        p = MafParams()
        car = make_car(mass=1000.0)
        truck = AgentState("t", "truck", 0, 0, 0, 7.0, 8.0, 2.5, 1000.0)
        assert virtual_mass(truck, 7.0, p) == pytest.approx(
            p.type_factor["truck"] / p.type_factor["car"] * virtual_mass(car, 7.0, p)
        )

    def test_unknown_kind_without_factor(self):
        from riskfield.scenario import AgentState

        p = MafParams(type_factor={"car": 1.0})
        ped = AgentState("p", "pedestrian", 0, 0, 0, 1.0, 0.6, 0.6, None)
        with pytest.raises(FieldError, match="type factor"):
            virtual_mass(ped, 1.0, p)


class TestPathSeverity:
    def test_constant_profile_equals_virtual_mass(self):
        p = MafParams()
        car = make_car(mass=1500.0, speed=9.0)
        path = straight_path(speed=9.0)
        assert path_severity(car, path, p) == pytest.approx(
            virtual_mass(car, 9.0, p), rel=1e-12
        )

    def test_linear_ramp_mean(self):
        # v ramps 0 -> 10 over the path; alpha=1, beta=1, gamma=0 and unit
        # mass*type make the severity the mean speed = 5
        p = MafParams(alpha=1.0, beta=1.0, gamma_m=0.0, type_factor={"car": 1.0})
        car = make_car(mass=1.0)
        n = 101
        xs = np.linspace(0, 40, n)
        path = PathGeometry(np.stack([xs, np.zeros(n)], axis=1), speeds=np.linspace(0, 10, n))
        assert path_severity(car, path, p) == pytest.approx(5.0, abs=1e-3)

    def test_quadratic_speed_term(self):
        p = MafParams(alpha=1.0, beta=2.0, gamma_m=0.0, type_factor={"car": 1.0})
        car = make_car(mass=1.0, speed=10.0)
        path = straight_path(speed=10.0)
        assert path_severity(car, path, p) == pytest.approx(100.0, rel=1e-12)

    def test_zero_length_falls_back_to_current_speed(self):
        p = MafParams()
        car = make_car(mass=1500.0, speed=6.0)
        degenerate = PathGeometry([[0.0, 0.0]])
        assert path_severity(car, degenerate, p) == pytest.approx(virtual_mass(car, 6.0, p))

    def test_current_speed_ablation_flag(self):
        p = MafParams(alpha=1.0, beta=1.0, gamma_m=0.0, type_factor={"car": 1.0})
        car = make_car(mass=1.0, speed=2.0)
        n = 11
        path = PathGeometry(
            np.stack([np.linspace(0, 10, n), np.zeros(n)], axis=1),
            speeds=np.linspace(2, 12, n),
        )
        assert path_severity(car, path, p, at_current_speed=True) == pytest.approx(2.0)
        assert path_severity(car, path, p) == pytest.approx(7.0, abs=1e-6)


class TestMafAgent:
    def test_mixture_collapses_for_identical_hypotheses(self):
        car = make_car(speed=10.0)
        path = straight_path(speed=10.0)
        hs = HypothesisSet([TrajectoryHypothesis(path, p) for p in (0.5, 0.3, 0.2)])
        point = (15.0, 1.0)
        got = maf_agent(point, hs, car, PARAMS)
        expected = path_severity(car, path, PARAMS) * maf_hypothesis(point, path, PARAMS)
        assert got == pytest.approx(expected, rel=1e-12)

    def test_single_hypothesis(self):
        car = make_car(speed=10.0)
        path = straight_path(speed=10.0)
        hs = HypothesisSet([TrajectoryHypothesis(path, 1.0)])
        point = (8.0, -0.5)
        assert maf_agent(point, hs, car, PARAMS) == pytest.approx(
            path_severity(car, path, PARAMS) * maf_hypothesis(point, path, PARAMS)
        )

    def test_two_disjoint_hypotheses_sum(self):
        car = make_car(speed=10.0)
        up = PathGeometry(
            np.stack([np.linspace(0, 30, 31), np.full(31, 20.0)], axis=1),
            speeds=np.full(31, 10.0),
        )
        down = PathGeometry(
            np.stack([np.linspace(0, 30, 31), np.full(31, -20.0)], axis=1),
            speeds=np.full(31, 10.0),
        )
        hs = HypothesisSet([TrajectoryHypothesis(up, 0.5), TrajectoryHypothesis(down, 0.5)])
        sev = path_severity(car, up, PARAMS)
        for point in [(10.0, 20.5), (5.0, -19.0), (20.0, 0.0)]:
            expected = 0.5 * sev * (
                maf_hypothesis(point, up, PARAMS) + maf_hypothesis(point, down, PARAMS)
            )
            assert maf_agent(point, hs, car, PARAMS) == pytest.approx(expected, rel=1e-12)

    def test_probability_scale_invariance(self):
        car = make_car(speed=10.0)
        paths = [straight_path(speed=10.0), straight_path(speed=10.0, length=30.0)]
        a = HypothesisSet([TrajectoryHypothesis(paths[0], 0.6), TrajectoryHypothesis(paths[1], 0.4)])
        b = HypothesisSet([TrajectoryHypothesis(paths[0], 0.3), TrajectoryHypothesis(paths[1], 0.2)])
        pt = (12.0, 2.0)
        assert maf_agent(pt, a, car, PARAMS) == pytest.approx(
            maf_agent(pt, b, car, PARAMS), rel=1e-12
        )

    def test_nonnegative_and_zero_out_of_all_domains(self, rng):
        car = make_car(speed=10.0)
        path = straight_path(speed=10.0)
        hs = HypothesisSet([TrajectoryHypothesis(path, 1.0)])
        for _ in range(50):
            pt = rng.uniform(-60, 60, size=2)
            assert maf_agent(pt, hs, car, PARAMS) >= 0.0
        assert maf_agent((-10.0, 0.0), hs, car, PARAMS) == 0.0

    def test_grid_equals_scalar_mixture(self, rng):
        grid = GridSpec(center=(10.0, 0.0), extent=25.0, resolution=0.5)
        car = make_car(speed=10.0)
        from riskfield.predictor import ConstantModesPredictor

        hs = ConstantModesPredictor().predict(car, 4.0, 0.2)
        g = maf_agent_grid(grid, hs, car, PARAMS)
        for _ in range(80):
            row, col = int(rng.integers(grid.n)), int(rng.integers(grid.n))
            p = cell_to_world((row, col), grid)
            assert g[row, col] == maf_agent(p, hs, car, PARAMS)


class TestParamsValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(FieldError):
            MafParams(q=-1.0)
        with pytest.raises(FieldError):
            MafParams(c=0.0)
        with pytest.raises(FieldError):
            MafParams(sigma_min=2.0, sigma_max=1.0)
        with pytest.raises(FieldError):
            MafParams(type_factor={"car": 0.0})
        with pytest.raises(FieldError):
            MafParams(trunc_sigmas=0.0)
