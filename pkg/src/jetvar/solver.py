"""Euler-Lagrange trajectories: explicit top derivative, RK4, shooting, and a
clamped cubic spline used as a closed-form reference.

States are arrays ``z`` of shape ``(2k, dim)`` holding ``x^{(0)}..x^{(2k-1)}``.
The Euler-Lagrange force is affine in ``x^{(2k)}`` with matrix ``(-1)^k H``,
``H`` the Hessian of ``L`` in the top velocities, so the top derivative comes
from one linear solve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, ConvergenceError, DegenerateLagrangianError, UsageError
from .variational import (
    Lagrangian,
    force_from_derivatives,
    momentum_coordinates,
    momentum_from_derivatives,
)
from .weil_algebra import JetScalar, JetShape, promote

BLOWUP_NORM = 1e8
DEGENERACY_THRESHOLD = 1e-10

__all__ = [
    "SolverConfig",
    "TrajectoryState",
    "Trajectory",
    "hessian_top",
    "explicit_top_derivative",
    "integrate_el",
    "shoot_bvp",
    "CubicSpline",
    "cubic_spline_oracle",
]


@dataclass(frozen=True)
class SolverConfig:
    """Step size and iteration controls; all values must be positive."""

    h: float = 1e-3
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    shoot_tol: float = 1e-8
    shoot_max_iter: int = 40
    fd_step: float = 1e-6

    def __post_init__(self):
        for name in ("h", "newton_tol", "newton_max_iter", "shoot_tol", "shoot_max_iter", "fd_step"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver setting {name} must be positive")

    def with_overrides(self, **overrides) -> "SolverConfig":
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown solver settings: {sorted(unknown)}")
        return replace(self, **overrides)


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    z: np.ndarray  # (2k, dim)


def _state(z, L: Lagrangian) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape == (2 * L.k * L.dim,):
        z = z.reshape(2 * L.k, L.dim)
    if z.shape != (2 * L.k, L.dim):
        raise UsageError(f"state must have shape ({2 * L.k}, {L.dim}), got {z.shape}")
    return z


def hessian_top(L: Lagrangian, v: np.ndarray) -> np.ndarray:
    """``H_ab = d^2 L / dx^{a,(k)} dx^{b,(k)}`` at ``v`` shaped ``(dim, k + 1)``."""
    k, dim = L.k, L.dim
    shape = JetShape((1, 1))
    out = np.empty((dim, dim))
    for a in range(dim):
        for b in range(a, dim):
            coords = []
            for c in range(dim):
                row = []
                for al in range(k + 1):
                    arr = np.zeros((2, 2))
                    arr[0, 0] = v[c, al]
                    if al == k and c == a:
                        arr[1, 0] = 1.0
                    if al == k and c == b:
                        arr[0, 1] = 1.0
                    row.append(JetScalar._wrap(shape, arr))
                coords.append(row)
            out[a, b] = out[b, a] = promote(L(coords), shape)[1, 1]
    return out


def explicit_top_derivative(L: Lagrangian, z, t: float = 0.0, config: SolverConfig | None = None,
                            confirm: bool = True) -> np.ndarray:
    """Solve the Euler-Lagrange equation for ``x^{(2k)}`` given ``z``.

    ``t`` is accepted for autonomous and future time-dependent use; the
    Lagrangians here do not depend on it.
    """
    config = config or SolverConfig()
    k, dim = L.k, L.dim
    z = _state(z, L)
    X = np.zeros((dim, 2 * k + 1))
    X[:, : 2 * k] = z.T
    h = hessian_top(L, X[:, : k + 1])
    det = np.linalg.det(h)
    if not abs(det) > DEGENERACY_THRESHOLD:
        raise DegenerateLagrangianError(f"top-order Hessian is singular (det = {det:.3g})")
    sign = (-1) ** k
    f0 = force_from_derivatives(L, X).value
    top = np.linalg.solve(sign * h, -f0)
    if not confirm:
        return top
    scale = max(1.0, float(np.max(np.abs(f0))))
    best = math.inf
    for _ in range(config.newton_max_iter):
        X[:, 2 * k] = top
        resid = force_from_derivatives(L, X).value
        best = min(best, float(np.max(np.abs(resid))))
        if best <= config.newton_tol * scale:
            return top
        top = top - np.linalg.solve(sign * h, resid)
    raise ConvergenceError(
        f"Newton step for the top derivative stalled at residual {best:.3g}", best
    )


def _rhs(L: Lagrangian, z: np.ndarray, t: float, config: SolverConfig, confirm: bool) -> np.ndarray:
    out = np.empty_like(z)
    out[:-1] = z[1:]
    out[-1] = explicit_top_derivative(L, z, t, config, confirm)
    return out


@dataclass(frozen=True)
class Trajectory:
    """Nodes ``times[i]`` with states ``states[i]`` shaped ``(2k, dim)``."""

    lagrangian: Lagrangian
    times: np.ndarray
    states: np.ndarray
    tops: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("times", "states", "tops"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.times)

    def __iter__(self):
        return (TrajectoryState(t, z) for t, z in zip(self.times, self.states))

    @property
    def final(self) -> TrajectoryState:
        return TrajectoryState(float(self.times[-1]), self.states[-1])

    def derivatives_at(self, i: int) -> np.ndarray:
        """Exact ``x^{(0..2k)}`` at node ``i`` as ``(dim, 2k + 1)``."""
        return np.vstack([self.states[i], self.tops[i][None]]).T

    def nearest(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))

    def curve_at(self, i: int):
        """Degree-``2k`` Taylor polynomial around node ``i`` as a curve."""
        X = self.derivatives_at(i)
        t_node = float(self.times[i])
        order = X.shape[1] - 1
        coeffs = X / np.array([math.factorial(j) for j in range(order + 1)])

        def gamma(t):
            s = t - t_node
            out = []
            for row in coeffs:
                acc = row[-1]
                for c in row[-2::-1]:
                    acc = acc * s + c
                out.append(acc)
            return out

        return gamma

    def evaluate(self, t: float, nu: int = 0) -> np.ndarray:
        """Dense output: ``nu``-th derivative from the nearest node's Taylor data."""
        i = self.nearest(t)
        X = self.derivatives_at(i)
        s = t - float(self.times[i])
        order = X.shape[1] - 1
        terms = [s**j / math.factorial(j) for j in range(order + 1 - nu)]
        return X[:, nu:] @ np.array(terms)

    def el_residual(self, i: int) -> float:
        """Norm of the force at node ``i`` from exact Taylor data."""
        return float(np.linalg.norm(force_from_derivatives(self.lagrangian, self.derivatives_at(i)).value))


def integrate_el(L: Lagrangian, z0, t0: float, t1: float, config: SolverConfig | None = None,
                 confirm: bool = True) -> Trajectory:
    """Classical RK4 with fixed step; the last step is shortened to hit ``t1``."""
    config = config or SolverConfig()
    z = _state(z0, L).copy()
    if t1 == t0:
        top = explicit_top_derivative(L, z, t0, config, confirm)
        return Trajectory(L, [t0], [z], [top])
    direction = 1.0 if t1 > t0 else -1.0
    times = [float(t0)]
    states = [z.copy()]
    tops = []
    t = float(t0)
    span = abs(t1 - t0)
    n_full = int(math.floor(span / config.h + 1e-9))
    steps = [config.h] * n_full
    rest = span - n_full * config.h
    if rest > 1e-12 * max(1.0, span):
        steps.append(rest)
    for step in steps:
        h = direction * step
        k1 = _rhs(L, z, t, config, confirm)
        tops.append(k1[-1].copy())
        k2 = _rhs(L, z + 0.5 * h * k1, t + 0.5 * h, config, confirm)
        k3 = _rhs(L, z + 0.5 * h * k2, t + 0.5 * h, config, confirm)
        k4 = _rhs(L, z + h * k3, t + h, config, confirm)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) > BLOWUP_NORM:
            raise ConvergenceError(f"state blew up near t = {t:.6g}", float(np.linalg.norm(z)))
        times.append(t)
        states.append(z.copy())
    times[-1] = float(t1)
    tops.append(explicit_top_derivative(L, z, t1, config, confirm))
    return Trajectory(L, times, states, tops)


def _terminal_mismatch(L: Lagrangian, traj: Trajectory, target, free_final: bool) -> np.ndarray:
    k = L.k
    final = traj.states[-1]
    if free_final:
        X = final.T  # (dim, 2k): enough for the momentum
        return momentum_coordinates(momentum_from_derivatives(L, X)).ravel()
    return (final[:k] - target).ravel()


def shoot_bvp(L: Lagrangian, boundary, t0: float, t1: float, config: SolverConfig | None = None,
              free_final: bool = False, confirm: bool = False) -> Trajectory:
    """Two-point problem by shooting on ``x^{(k)}..x^{(2k-1)}(t0)``.

    ``boundary = (start, end)`` with ``(k-1)``-velocities shaped ``(k, dim)``.
    With ``free_final`` the end data is ignored and the natural condition
    (vanishing endpoint momentum) is imposed instead.  Newton iterations use
    a forward-difference Jacobian and start from zero.
    """
    config = config or SolverConfig()
    k, dim = L.k, L.dim
    start = np.asarray(boundary[0], dtype=float).reshape(k, dim)
    end = None if free_final else np.asarray(boundary[1], dtype=float).reshape(k, dim)
    n = k * dim

    def run(s):
        z0 = np.vstack([start, s.reshape(k, dim)])
        traj = integrate_el(L, z0, t0, t1, config, confirm)
        return traj, _terminal_mismatch(L, traj, end, free_final)

    s = np.zeros(n)
    best = (math.inf, None)
    for _ in range(config.shoot_max_iter):
        traj, r = run(s)
        norm = float(np.max(np.abs(r)))
        if norm < best[0]:
            best = (norm, traj)
        if norm <= config.shoot_tol:
            return traj
        jac = np.empty((n, n))
        for j in range(n):
            ds = np.zeros(n)
            ds[j] = config.fd_step * max(1.0, abs(s[j]))
            jac[:, j] = (run(s + ds)[1] - r) / ds[j]
        try:
            s = s - np.linalg.solve(jac, r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("shooting Jacobian is singular", best[0]) from exc
    raise ConvergenceError(
        f"shooting did not converge in {config.shoot_max_iter} iterations "
        f"(best mismatch {best[0]:.3g})",
        best[0],
    )


@dataclass(frozen=True)
class CubicSpline:
    """Piecewise cubic given by knot values and second derivatives."""

    x: np.ndarray
    y: np.ndarray
    m: np.ndarray

    def __call__(self, t, nu: int = 0):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, len(self.x) - 2)
        h = self.x[i + 1] - self.x[i]
        a = (self.x[i + 1] - t) / h
        b = (t - self.x[i]) / h
        yi, yj, mi, mj = self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]
        if nu == 0:
            return a * yi + b * yj + ((a**3 - a) * mi + (b**3 - b) * mj) * h * h / 6.0
        if nu == 1:
            return (yj - yi) / h + ((1 - 3 * a * a) * mi + (3 * b * b - 1) * mj) * h / 6.0
        if nu == 2:
            return a * mi + b * mj
        if nu == 3:
            return (mj - mi) / h + 0 * t
        if nu >= 4:
            return 0 * t
        raise UsageError("derivative order must be non-negative")


def cubic_spline_oracle(knots, v_a: float, v_b: float) -> CubicSpline:
    """Clamped (complete) cubic spline through ``knots = [(x_i, y_i), ...]``."""
    pts = np.asarray(knots, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise UsageError("need at least two (x, y) knots")
    x, y = pts[:, 0], pts[:, 1]
    h = np.diff(x)
    if np.any(h <= 0):
        raise UsageError("knots must be strictly increasing")
    n = len(x)
    slope = np.diff(y) / h
    ab = np.zeros((3, n))
    rhs = np.empty(n)
    ab[1, 0] = 2 * h[0]
    ab[0, 1] = h[0]
    rhs[0] = 6 * (slope[0] - v_a)
    for i in range(1, n - 1):
        ab[2, i - 1] = h[i - 1]
        ab[1, i] = 2 * (h[i - 1] + h[i])
        ab[0, i + 1] = h[i]
        rhs[i] = 6 * (slope[i] - slope[i - 1])
    ab[2, n - 2] = h[-1]
    ab[1, n - 1] = 2 * h[-1]
    rhs[n - 1] = 6 * (v_b - slope[-1])
    m = solve_banded((1, 1), ab, rhs)
    return CubicSpline(x.copy(), y.copy(), m)
