import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.interpolate import CubicSpline as ScipyCubicSpline

from jetvar.errors import ConfigError, ConvergenceError, DegenerateLagrangianError, UsageError
from jetvar.geometry import cubic_el_residual, cubic_lagrangian, sphere2
from jetvar.solver import (
    SolverConfig,
    cubic_spline_oracle,
    explicit_top_derivative,
    hessian_top,
    integrate_el,
    shoot_bvp,
)
from jetvar.variational import Lagrangian, force_along, force_from_derivatives

HARMONIC = Lagrangian(1, 1, lambda x: 0.5 * (x[0][1] * x[0][1] - x[0][0] * x[0][0]))
FREE = Lagrangian(1, 1, lambda x: 0.5 * x[0][1] * x[0][1])
HALF_ACCEL = Lagrangian(2, 1, lambda x: 0.5 * x[0][2] * x[0][2])
ACCEL = Lagrangian(2, 1, lambda x: x[0][2] * x[0][2])
SPHERE = sphere2()


def test_solver_config_validation():
    assert SolverConfig().h == 1e-3
    assert SolverConfig().with_overrides(h=0.5).h == 0.5
    with pytest.raises(ConfigError):
        SolverConfig(h=0.0)
    with pytest.raises(ConfigError):
        SolverConfig().with_overrides(step=0.1)


def test_hessian_of_quadratic_top():
    L = Lagrangian(1, 2, lambda x: x[0][1] * x[0][1] + 3 * x[0][1] * x[1][1] + x[1][1] * x[1][1] * x[0][0])
    h = hessian_top(L, np.array([[2.0, 0.5], [1.0, -1.0]]))
    assert np.allclose(h, [[2.0, 3.0], [3.0, 4.0]])


@pytest.mark.parametrize(
    "L, z, expected",
    [
        (HALF_ACCEL, [[0.3], [1.0], [2.0], [-4.0]], [0.0]),
        (HARMONIC, [[0.7], [0.2]], [-0.7]),
    ],
)
def test_explicit_top_derivative_examples(L, z, expected):
    assert np.allclose(explicit_top_derivative(L, z), expected, atol=1e-14)


def test_degenerate_lagrangian_rejected():
    linear = Lagrangian(1, 1, lambda x: x[0][1] * x[0][0])
    with pytest.raises(DegenerateLagrangianError):
        explicit_top_derivative(linear, [[1.0], [1.0]])


def test_sphere_top_derivative_zeroes_the_force():
    L = cubic_lagrangian(SPHERE)
    z = np.array([[1.1, 0.2], [0.3, 0.9], [-0.4, 0.1], [0.2, -0.5]])
    top = explicit_top_derivative(L, z)
    X = np.hstack([z.T, top[:, None]])
    assert np.max(np.abs(force_from_derivatives(L, X).value)) <= 1e-10


def test_straight_line_is_a_cubic_solution():
    traj = integrate_el(HALF_ACCEL, [[0.0], [1.0], [0.0], [0.0]], 0.0, 2.0, SolverConfig(h=0.1))
    assert np.allclose(traj.states[:, 0, 0], traj.times, atol=1e-10)
    assert traj.times[-1] == 2.0


def test_partial_last_step_hits_t1():
    traj = integrate_el(HARMONIC, [[1.0], [0.0]], 0.0, 1.05, SolverConfig(h=0.1))
    assert len(traj) == 12 and traj.times[-1] == 1.05
    assert traj.final.z[0, 0] == pytest.approx(math.cos(1.05), abs=1e-6)


def test_backward_integration():
    traj = integrate_el(HARMONIC, [[1.0], [0.0]], 0.0, -1.0, SolverConfig(h=0.01))
    assert traj.final.z[0, 0] == pytest.approx(math.cos(1.0), abs=1e-9)


def test_harmonic_full_period():
    traj = integrate_el(HARMONIC, [[1.0], [0.0]], 0.0, 2 * math.pi, SolverConfig(h=1e-3), confirm=False)
    assert np.max(np.abs(traj.final.z[:, 0] - [1.0, 0.0])) <= 1e-8


def test_rk4_convergence_ratio():
    errors = []
    for h in (0.1, 0.05):
        traj = integrate_el(HARMONIC, [[1.0], [0.0]], 0.0, 2 * math.pi, SolverConfig(h=h), confirm=False)
        errors.append(np.linalg.norm(traj.final.z[:, 0] - [1.0, 0.0]))
    assert 12 <= errors[0] / errors[1] <= 20


def test_blow_up_guard():
    unstable = Lagrangian(1, 1, lambda x: 0.5 * (x[0][1] * x[0][1] + x[0][0] * x[0][0]))
    with pytest.raises(ConvergenceError):
        integrate_el(unstable, [[1.0], [1.0]], 0.0, 40.0, SolverConfig(h=0.1))


def test_sphere_cubic_residual_along_solution():
    L = cubic_lagrangian(SPHERE)
    z0 = [[1.2, 0.3], [0.0, 1.0], [1.0, -0.05], [-2.6, -2.2]]
    traj = integrate_el(L, z0, 0.0, 0.4, SolverConfig(h=0.05), confirm=False)
    for i in range(len(traj)):
        r = cubic_el_residual(SPHERE, traj.curve_at(i), float(traj.times[i]))
        assert np.max(np.abs(r)) <= 1e-6


def test_free_particle_bvp_is_a_line():
    traj = shoot_bvp(FREE, ([[0.0]], [[1.0]]), 0.0, 1.0, SolverConfig(h=0.05))
    assert np.allclose(traj.states[:, 0, 0], traj.times, atol=1e-10)


def test_flat_cubic_bvp_matches_spline():
    traj = shoot_bvp(ACCEL, ([[0.0], [1.0]], [[1.0], [1.0]]), 0.0, 1.0, SolverConfig(h=0.01))
    spline = cubic_spline_oracle([(0.0, 0.0), (1.0, 1.0)], 1.0, 1.0)
    assert np.max(np.abs(traj.states[:, 0, 0] - spline(traj.times))) <= 1e-8
    curved = shoot_bvp(ACCEL, ([[0.0], [2.0]], [[0.5], [-1.0]]), 0.0, 1.0, SolverConfig(h=0.01))
    spline = cubic_spline_oracle([(0.0, 0.0), (1.0, 0.5)], 2.0, -1.0)
    grid = np.linspace(0.0, 1.0, 101)
    dense = np.array([curved.evaluate(t)[0] for t in grid])
    assert np.max(np.abs(dense - spline(grid))) <= 1e-8
    assert np.max(np.abs(curved.tops)) <= 1e-8


def test_bvp_solution_satisfies_geometric_force():
    L = Lagrangian(2, 2, lambda x: 0.5 * (x[0][2] * x[0][2] + x[1][2] * x[1][2]) + 0.1 * x[0][0] * x[1][1] * x[1][1])
    boundary = ([[0.0, 0.0], [1.0, 0.5]], [[1.0, 0.2], [0.0, 1.0]])
    traj = shoot_bvp(L, boundary, 0.0, 1.0, SolverConfig(h=0.02))
    assert np.max(np.abs(traj.final.z[:2] - np.array(boundary[1]))) <= 1e-8
    probes = np.linspace(0, len(traj) - 1, 32).astype(int)
    for i in probes:
        assert np.max(np.abs(force_along(L, traj.curve_at(i), float(traj.times[i])).value)) <= 1e-6


def test_sphere_bvp_with_geodesic_data_returns_the_geodesic():
    L = cubic_lagrangian(SPHERE)
    half = math.pi / 2
    boundary = ([[half, 0.0], [0.0, 1.0]], [[half, 1.0], [0.0, 1.0]])
    traj = shoot_bvp(L, boundary, 0.0, 1.0, SolverConfig(h=0.25))
    assert np.allclose(traj.states[:, 0, 0], half, atol=1e-9)
    assert np.allclose(traj.states[:, 0, 1], traj.times, atol=1e-9)


def test_free_final_imposes_natural_condition():
    traj = shoot_bvp(HARMONIC, ([[1.0]], None), 0.0, 1.0, SolverConfig(h=0.01), free_final=True)
    assert abs(traj.final.z[1, 0]) <= 1e-6
    assert traj.states[0, 1, 0] == pytest.approx(math.tan(1.0), rel=1e-7)


def test_shooting_reports_non_convergence():
    with pytest.raises(ConvergenceError) as info:
        shoot_bvp(HARMONIC, ([[0.0]], [[1.0]]), 0.0, math.pi, SolverConfig(h=0.05, shoot_max_iter=3))
    assert info.value.best_residual is not None


# -- spline oracle --------------------------------------------------------------------------

def test_two_knot_spline_is_hermite():
    s = cubic_spline_oracle([(0.0, 1.0), (2.0, 3.0)], -1.0, 0.5)
    t = np.linspace(0, 2, 9)
    u = t / 2
    h00, h10, h01, h11 = 2 * u**3 - 3 * u**2 + 1, u**3 - 2 * u**2 + u, -2 * u**3 + 3 * u**2, u**3 - u**2
    hermite = h00 * 1.0 + h10 * 2 * -1.0 + h01 * 3.0 + h11 * 2 * 0.5
    assert np.allclose(s(t), hermite, atol=1e-14)


def test_spline_reproduces_a_cubic():
    p = np.polynomial.Polynomial([0.5, -1.0, 2.0, 0.7])
    x = np.array([-1.0, -0.2, 0.4, 1.1, 2.0])
    s = cubic_spline_oracle(np.column_stack([x, p(x)]), p.deriv()(x[0]), p.deriv()(x[-1]))
    t = np.linspace(-1, 2, 31)
    assert np.max(np.abs(s(t) - p(t))) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_spline_defining_properties(seed):
    rng = np.random.default_rng(seed)
    x = np.cumsum(rng.uniform(0.2, 1.0, 5))
    y = rng.standard_normal(5)
    va, vb = rng.standard_normal(2)
    s = cubic_spline_oracle(np.column_stack([x, y]), va, vb)
    eps = 1e-9
    for xi in x[1:-1]:
        for nu in range(3):
            # a jump must stay below what the next derivative can move across 2*eps
            slope = max(abs(s(xi - eps, nu + 1)), abs(s(xi + eps, nu + 1)))
            assert abs(s(xi - eps, nu) - s(xi + eps, nu)) <= 2.5 * eps * slope + 1e-10
    assert np.allclose(s(x), y, atol=1e-12)
    assert s(x[0], 1) == pytest.approx(va, abs=1e-10)
    assert s(x[-1], 1) == pytest.approx(vb, abs=1e-10)
    reference = ScipyCubicSpline(x, y, bc_type=((1, va), (1, vb)))
    t = np.linspace(x[0], x[-1], 50)
    for nu in range(3):
        assert np.allclose(s(t, nu), reference(t, nu), rtol=1e-10, atol=1e-10)


def test_spline_rejects_bad_knots():
    with pytest.raises(UsageError):
        cubic_spline_oracle([(0.0, 1.0), (0.0, 2.0)], 0.0, 0.0)
    with pytest.raises(UsageError):
        cubic_spline_oracle([(0.0, 1.0)], 0.0, 0.0)
