"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N ... PASS|FAIL`` line straight to the
terminal (output capture is bypassed), then asserts.
"""

import io
import math
from contextlib import redirect_stderr
from pathlib import Path

import numpy as np
import pytest

from jetvar.bundles import curve_derivatives, curve_jet
from jetvar.cli import main
from jetvar.geometry import (
    cubic_boundary_term,
    cubic_el_residual,
    cubic_lagrangian,
    metric_matrix,
    sphere2,
)
from jetvar.identities import (
    check_force_pipeline,
    check_functoriality,
    check_general_recurrence,
    check_identity_d,
    check_kappa_eps_duality,
    check_momentum_pipeline,
    check_pk_section,
    check_recurrence_b,
    check_recurrence_c,
    check_well_defined,
    make_rng,
    random_polynomial_curve,
    random_polynomial_lagrangian,
    random_semi_holonomic,
    rel_err,
)
from jetvar.solver import SolverConfig, cubic_spline_oracle, integrate_el, shoot_bvp
from jetvar.variational import (
    Lagrangian,
    action_variation,
    force_along,
    momentum_along,
    momentum_coordinates,
    transversality_check,
)
from jetvar.weil_algebra import atan, cos, sin, sqrt

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SEED = 20240601
HARMONIC = Lagrangian(1, 1, lambda x: 0.5 * (x[0][1] * x[0][1] - x[0][0] * x[0][0]), "harmonic")
ACCEL = Lagrangian(2, 1, lambda x: x[0][2] * x[0][2], "accel_squared")
SPHERE = sphere2()


def _within(value: float, tol) -> bool:
    if isinstance(tol, tuple):
        return tol[0] <= value <= tol[1]
    return value <= tol


def _bound(tol) -> str:
    return f"in [{tol[0]:g}, {tol[1]:g}]" if isinstance(tol, tuple) else f"<= {tol:.0e}"


@pytest.fixture
def report(capsys):
    """Print one line for a criterion from its ``(label, value, tol)`` checks."""

    def emit(number: int, title: str, checks):
        ok = all(_within(value, tol) for _, value, tol in checks)
        detail = "; ".join(f"{label} {value:.2e} {_bound(tol)}" for label, value, tol in checks)
        line = f"criterion {number:>2}  {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        with capsys.disabled():
            print(("\n" if number == 1 else "") + line)
        assert ok, line

    return emit


def test_criterion_01_integration_by_parts(report):
    worst, cases = 0.0, 0
    for k in (1, 2, 3):
        for dim in (1, 2, 3):
            rng = make_rng(SEED, 100 + 10 * k + dim)
            for _ in range(50):
                phi = random_semi_holonomic(rng, k, dim)
                worst = max(
                    worst,
                    check_well_defined(phi, rng),
                    check_recurrence_b(phi),
                    check_recurrence_c(phi, rng),
                    check_identity_d(phi, rng),
                )
                cases += 1
    report(1, "integration-by-parts identities", [(f"{cases} elements, worst", worst, 1e-12)])


def test_criterion_02_duality_and_projection(report):
    worst, cases = 0.0, 0
    for k in (1, 2, 3):
        for dim in (1, 2, 3):
            rng = make_rng(SEED, 200 + 10 * k + dim)
            for _ in range(50):
                worst = max(worst, check_kappa_eps_duality(rng, k, dim), check_pk_section(rng, k, dim, dim))
                cases += 2
    report(2, "kappa/eps duality and P_k after inclusion", [(f"{cases} instances, worst", worst, 1e-12)])


def test_criterion_03_general_recurrence(report):
    pairs = [(1, 1), (1, 2), (2, 1)]
    worst = max(check_general_recurrence(k, l) for k, l in pairs)
    report(3, "general recurrence as linear maps", [(f"{len(pairs)} (k, l) pairs, worst", worst, 1e-12)])


def test_criterion_04_pipeline_vs_classical(report):
    worst, cases = 0.0, 0
    for k in (1, 2, 3):
        rng = make_rng(SEED, 400 + k)
        for i in range(20):
            dim = 1 + i % 3
            worst = max(worst, check_force_pipeline(rng, k, dim), check_momentum_pipeline(rng, k, dim))
            cases += 1
    report(4, "force and momentum vs classical formulas", [(f"{cases} Lagrangians, worst", worst, 1e-9)])


def test_criterion_05_variation_of_action(report):
    rng = make_rng(SEED, 500)
    worst = 0.0
    for i in range(10):
        k, dim = 1 + i % 3, 1 + (i // 3) % 2
        L = random_polynomial_lagrangian(rng, k, dim)
        gamma = random_polynomial_curve(rng, dim, 2 * k + 2, scale=0.7)
        delta = random_polynomial_curve(rng, dim, 2 * k + 1)
        lhs, rhs, _ = action_variation(L, gamma, delta, 0.0, 1.0)
        worst = max(worst, rel_err(lhs, rhs))
    report(5, "first variation of the action", [("10 triples, worst", worst, 1e-6)])


def test_criterion_06_cubic_spline(report):
    rng = make_rng(SEED, 600)
    grid = np.linspace(0.0, 1.0, 101)
    worst_fit, worst_top = 0.0, 0.0
    cases = 5
    for _ in range(cases):
        x0, x1, v0, v1 = rng.uniform(-2, 2, 4)
        traj = shoot_bvp(ACCEL, ([[x0], [v0]], [[x1], [v1]]), 0.0, 1.0, SolverConfig(h=0.01))
        spline = cubic_spline_oracle([(0.0, x0), (1.0, x1)], v0, v1)
        dense = np.array([traj.evaluate(t)[0] for t in grid])
        worst_fit = max(worst_fit, float(np.max(np.abs(dense - spline(grid)))))
        worst_top = max(worst_top, float(np.max(np.abs(traj.tops))))
    report(6, "cubic spline reproduction", [
        (f"{cases} problems, sup-norm on 101 points", worst_fit, 1e-7),
        ("max fourth derivative", worst_top, 1e-8),
    ])


def _sphere_curve(rng):
    c = rng.standard_normal((2, 4)) * [[1.0, 0.6, 0.4, 0.3]] * 0.5
    c[0, 0] = rng.uniform(0.7, 2.4)
    return lambda t: [c[a, 0] + t * (c[a, 1] + t * (c[a, 2] + t * c[a, 3])) + 0.1 * sin(t + a) for a in range(2)]


def _great_circle(tilt):
    def circle(t):
        px, py, pz = cos(t), sin(t) * math.cos(tilt), sin(t) * math.sin(tilt)
        return [math.pi / 2 - atan(pz / sqrt(px * px + py * py)), atan(py / px)]
    return circle


def test_criterion_07_riemannian_cubics(report):
    rng = make_rng(SEED, 700)
    L = cubic_lagrangian(SPHERE)
    bridge, boundary = 0.0, 0.0
    for _ in range(20):
        gamma = _sphere_curve(rng)
        t = float(rng.uniform(-0.2, 0.2))
        g = metric_matrix(SPHERE, curve_jet(gamma, t, 0).point)
        raised = 0.5 * np.linalg.solve(g, force_along(L, gamma, t).value)
        bridge = max(bridge, rel_err(raised, cubic_el_residual(SPHERE, gamma, t)))
        d = rng.standard_normal((2, 3))
        delta = lambda s, d=d: [d[a, 0] + d[a, 1] * s + d[a, 2] * s * s for a in range(2)]  # noqa: E731
        p = momentum_coordinates(momentum_along(L, gamma, t))
        pairing = float(np.sum(p * curve_derivatives(delta, t, 1)))
        boundary = max(boundary, rel_err(cubic_boundary_term(SPHERE, gamma, delta, t), pairing))
    geodesic = 0.0
    for tilt in (0.0, 0.3, 0.6, 1.0):
        for t in (0.1, 0.4, 0.9):
            geodesic = max(geodesic, float(np.max(np.abs(cubic_el_residual(SPHERE, _great_circle(tilt), t)))))
    report(7, "Riemannian cubics on the sphere", [
        ("force vs intrinsic residual", bridge, 1e-8),
        ("geodesic residual", geodesic, 1e-10),
        ("boundary term vs momentum", boundary, 1e-8),
    ])


def test_criterion_08_functoriality(report):
    worst = 0.0
    for k in (1, 2, 3):
        rng = make_rng(SEED, 800 + k)
        worst = max(worst, max(check_functoriality(rng, k, 2, 2) for _ in range(20)))
    report(8, "Upsilon commutes with bundle morphisms", [("60 morphisms, worst", worst, 1e-9)])


def test_criterion_09_transversality(report):
    traj = shoot_bvp(HARMONIC, ([[1.0]], None), 0.0, 1.0, SolverConfig(h=0.01), free_final=True)
    end_velocity = abs(float(traj.final.z[1, 0]))
    fixed_ok, fixed_residual = transversality_check(HARMONIC, traj.curve_at(0), 0.0, 1.0, "fixed")
    assert fixed_ok
    report(9, "transversality", [
        ("free-end final velocity", end_velocity, 1e-6),
        ("fixed-end residual", fixed_residual, 0.0),
    ])


def test_criterion_10_numerics_hygiene(report, tmp_path):
    errors = []
    for h in (0.1, 0.05):
        traj = integrate_el(HARMONIC, [[1.0], [0.0]], 0.0, 2 * math.pi, SolverConfig(h=h), confirm=False)
        errors.append(float(np.linalg.norm(traj.final.z[:, 0] - [1.0, 0.0])))
    ratio = errors[0] / errors[1]

    outputs = []
    for run in range(2):
        path = tmp_path / f"run{run}.csv"
        with redirect_stderr(io.StringIO()):
            code = main(["bvp", "--config", str(CONFIGS / "flat_cubic.json"), "--output", str(path), "--seed", "7"])
        assert code == 0
        outputs.append(path.read_bytes())
    report(10, "numerics hygiene", [
        ("RK4 error ratio", ratio, (12.0, 20.0)),
        ("CSV runs differing", float(outputs[0] != outputs[1]), 0.0),
    ])
