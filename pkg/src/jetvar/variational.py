"""Forces, momenta and the first variation of higher-order actions.

A Lagrangian of order ``k`` is a jet-capable function ``L(x)`` where
``x[a][al]`` is the coordinate ``x^{a,(al)}``, ``al = 0..k``.  Curves are
jet-capable maps ``t -> (x^0(t), ..., x^{dim-1}(t))``.

Two independent routes are provided for force and momentum: the geometric
one goes through the semi-holonomic element built from ``Lambda_L`` and the
canonical maps; the ``*_local_oracle`` functions apply the textbook
alternating-derivative formulas directly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bundles import HigherVelocity, LiftedVectorElement, SemiHolonomicElement, curve_derivatives
from .canonical_maps import (
    CotangentLift,
    CovectorVelocity,
    dual_eps,
    dual_eps_inverse,
    flip_kappa,
    momenta_array,
    pairing_cotangent,
    pairing_higher,
    upsilon,
)
from .errors import UsageError
from .weil_algebra import JetScalar, JetShape, promote

DEFAULT_PANELS = 64
GAUSS_NODES = 5

__all__ = [
    "Lagrangian",
    "VariationField",
    "ForceValue",
    "VariationReport",
    "differential_dL",
    "lambda_full",
    "lambda_reduced",
    "lagrangian_jet_element",
    "force_along",
    "force_from_derivatives",
    "force_local_oracle",
    "momentum_along",
    "momentum_from_derivatives",
    "momentum_local_oracle",
    "momentum_coordinates",
    "action_variation",
    "infinitesimal_identity",
    "transversality_check",
    "boundary_basis",
    "forced_el_residual",
    "gauss_legendre",
    "default_panels",
]


@dataclass(frozen=True)
class Lagrangian:
    """Order-``k`` Lagrangian on ``T^k R^dim``."""

    k: int
    dim: int
    evaluator: Callable[[Sequence[Sequence]], object]
    name: str = "lagrangian"

    def __post_init__(self):
        if self.k < 1 or self.dim < 1:
            raise UsageError(f"need k >= 1 and dim >= 1, got k={self.k}, dim={self.dim}")

    def __call__(self, x):
        return self.evaluator(x)

    def value(self, v) -> float:
        """``L`` at a plain ``(dim, k + 1)`` array of coordinates."""
        v = np.asarray(v, dtype=float)
        return float(promote(self.evaluator([list(row) for row in v]), ()).value)


@dataclass(frozen=True)
class VariationField:
    """Generator ``t -> delta gamma(t)`` of a variation of ``curve``."""

    evaluator: Callable[[JetScalar], Sequence]
    curve: Callable[[JetScalar], Sequence] | None = None
    vanishes_at_endpoints: bool = False

    def __call__(self, t):
        return self.evaluator(t)


@dataclass(frozen=True)
class ForceValue:
    """Covector ``F_a`` attached to a base point."""

    point: np.ndarray
    value: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.value, dtype=dtype)


@dataclass(frozen=True)
class VariationReport:
    lhs: float
    rhs: float
    bulk: float
    boundary: float
    gap: float
    converged: bool
    panels: int


# -- evaluation plumbing -------------------------------------------------------

def _jet_coords(L: Lagrangian, columns: int, build) -> list[list[JetScalar]]:
    return [[build(a, al) for al in range(columns)] for a in range(L.dim)]


def _check_derivatives(L: Lagrangian, X: np.ndarray, needed: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != L.dim or X.shape[1] < needed + 1:
        raise UsageError(
            f"need curve derivatives of shape ({L.dim}, >= {needed + 1}), got {X.shape}"
        )
    return X


def differential_dL(L: Lagrangian, v) -> CotangentLift:
    """``p_{a,(al)} = dL/dx^{a,(al)}`` by one first-order seed per coordinate."""
    x = v.array if isinstance(v, HigherVelocity) else np.asarray(v, dtype=float)
    if x.shape != (L.dim, L.k + 1):
        raise UsageError(f"expected a ({L.dim}, {L.k + 1}) velocity, got {x.shape}")
    shape = JetShape((1,))
    p = np.empty_like(x)
    for a in range(L.dim):
        for al in range(L.k + 1):
            def build(b, be, a=a, al=al):
                return JetScalar._wrap(
                    shape, np.array([x[b, be], 1.0 if (b, be) == (a, al) else 0.0])
                )
            p[a, al] = promote(L(_jet_coords(L, L.k + 1, build)), shape)[1]
    return CotangentLift(x, p)


def lambda_full(L: Lagrangian, v) -> CovectorVelocity:
    """``Lambda_L = eps_k o dL`` as a point of ``T^k T*M``."""
    return dual_eps(differential_dL(L, v))


def lambda_reduced(L: Lagrangian, v) -> CovectorVelocity:
    """``lambda_L``: ``Lambda_L`` with its top momentum order dropped."""
    full = lambda_full(L, v)
    k = L.k
    return CovectorVelocity.from_arrays(full.x[:, :k], full.p[:, :k])


def _partials_time_first(L: Lagrangian, X: np.ndarray, n: int) -> np.ndarray:
    """``D[a, be, i] = d^i/dt^i dL/dx^{a,(be)}`` via shape ``(n, 1)`` seeds."""
    shape = JetShape((n, 1))
    out = np.empty((L.dim, L.k + 1, n + 1))
    for a in range(L.dim):
        for al in range(L.k + 1):
            def build(b, be, a=a, al=al):
                arr = np.zeros((n + 1, 2))
                arr[:, 0] = X[b, be : be + n + 1]
                if (b, be) == (a, al):
                    arr[0, 1] = 1.0
                return JetScalar._wrap(shape, arr)
            out[a, al] = promote(L(_jet_coords(L, L.k + 1, build)), shape).coeffs[:, 1]
    return out


def _partials_seed_first(L: Lagrangian, X: np.ndarray, n: int) -> np.ndarray:
    """Same numbers as :func:`_partials_time_first`, transposed jet layout."""
    shape = JetShape((1, n))
    out = np.empty((L.dim, L.k + 1, n + 1))
    for a in range(L.dim):
        for al in range(L.k + 1):
            def build(b, be, a=a, al=al):
                arr = np.zeros((2, n + 1))
                arr[0, :] = X[b, be : be + n + 1]
                if (b, be) == (a, al):
                    arr[1, 0] = 1.0
                return JetScalar._wrap(shape, arr)
            out[a, al] = promote(L(_jet_coords(L, L.k + 1, build)), shape).coeffs[1, :]
    return out


def lagrangian_jet_element(L: Lagrangian, X, order: int) -> SemiHolonomicElement:
    """``j^order`` of ``Lambda_L`` (momentum orders ``<= order``) along a curve.

    ``X`` holds curve derivatives ``(dim, >= k + order + 1)``.  The fiber is
    ``y[i, c, a] = C(k, c)^-1 d^i/dt^i dL/dx^{a,(k - c)}`` and the base is
    ``j^{2 order}`` of the curve.
    """
    k = L.k
    if not 0 <= order <= k:
        raise UsageError(f"order {order} outside 0..{k}")
    X = _check_derivatives(L, X, k + order)
    D = _partials_time_first(L, X, order)
    fiber = np.empty((order + 1, order + 1, L.dim))
    for c in range(order + 1):
        fiber[:, c, :] = D[:, k - c, :].T / math.comb(k, c)
    return SemiHolonomicElement(X[:, : 2 * order + 1], fiber)


def force_from_derivatives(L: Lagrangian, X) -> ForceValue:
    """Force from curve derivatives ``X`` of shape ``(dim, >= 2k + 1)``."""
    point, value = upsilon(lagrangian_jet_element(L, X, L.k))
    return ForceValue(point, value)


def force_along(L: Lagrangian, gamma, t: float) -> ForceValue:
    """Force covector along ``gamma`` at ``t`` through the canonical maps."""
    return force_from_derivatives(L, curve_derivatives(gamma, t, 2 * L.k))


def force_local_oracle(L: Lagrangian, gamma, t: float) -> ForceValue:
    """``F_a = sum_al (-1)^al d^al/dt^al dL/dx^{a,(al)}``."""
    k = L.k
    X = curve_derivatives(gamma, t, 2 * k)
    D = _partials_seed_first(L, X, k)
    value = sum((-1) ** al * D[:, al, al] for al in range(k + 1))
    return ForceValue(X[:, 0].copy(), value)


def momentum_from_derivatives(L: Lagrangian, X) -> CovectorVelocity:
    """Momentum from curve derivatives ``X`` of shape ``(dim, >= 2k)``."""
    k = L.k
    phi = lagrangian_jet_element(L, X, k - 1)
    fiber = momenta_array(phi.fiber)
    return CovectorVelocity.from_arrays(phi.base[:, :k], fiber.T)


def momentum_along(L: Lagrangian, gamma, t: float) -> CovectorVelocity:
    """Momentum along ``gamma`` at ``t``: a point of ``T^{k-1} T*M``."""
    return momentum_from_derivatives(L, curve_derivatives(gamma, t, 2 * L.k - 1))


def momentum_local_oracle(L: Lagrangian, gamma, t: float) -> CovectorVelocity:
    """``p_{a,(al)} = sum_be (-1)^be d^be/dt^be dL/dx^{a,(al+be+1)}``."""
    k = L.k
    X = curve_derivatives(gamma, t, 2 * k - 1)
    D = _partials_seed_first(L, X, k - 1)
    p = np.zeros((L.dim, k))
    for al in range(k):
        for be in range(k - al):
            p[:, al] += (-1) ** be * D[:, al + be + 1, be]
    return dual_eps(CotangentLift(X[:, :k], p))


def momentum_coordinates(m: CovectorVelocity) -> np.ndarray:
    """``p_{a,(al)}`` (cotangent-lift side) of a momentum value."""
    return dual_eps_inverse(m).p


# -- quadrature ----------------------------------------------------------------

def default_panels() -> int:
    """Panel count, overridable through ``JETVAR_PANELS``."""
    raw = os.environ.get("JETVAR_PANELS")
    if raw is None:
        return DEFAULT_PANELS
    try:
        panels = int(raw)
    except ValueError as exc:
        raise UsageError(f"JETVAR_PANELS must be an integer, got {raw!r}") from exc
    if panels < 2:
        raise UsageError("JETVAR_PANELS must be at least 2")
    return panels


def gauss_legendre(f: Callable[[float], float], t0: float, t1: float, panels: int) -> float:
    """Composite 5-point Gauss-Legendre rule."""
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    edges = np.linspace(t0, t1, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        total += half * sum(w * f(mid + half * s) for s, w in zip(nodes, weights))
    return total


# -- first variation -------------------------------------------------------------

def _variation_derivatives(delta, t: float, m: int) -> np.ndarray:
    return curve_derivatives(delta, t, m)


def _admissible_variation(X: np.ndarray, dX: np.ndarray) -> LiftedVectorElement:
    """``kappa_k(j^k delta gamma)``: a tangent vector to ``T^k M``."""
    arr = np.stack([X, dX], axis=-1)  # (dim, k + 1, 2): shape (k, 1)
    return flip_kappa(HigherVelocity.from_array(arr))


def _dL_pairing(L: Lagrangian, gamma, delta, t: float) -> float:
    k = L.k
    X = curve_derivatives(gamma, t, k)
    dX = _variation_derivatives(delta, t, k)
    w = _admissible_variation(X, dX)
    return pairing_cotangent(differential_dL(L, X), w)


def _boundary_pairing(L: Lagrangian, gamma, delta, t: float) -> float:
    k = L.k
    X = curve_derivatives(gamma, t, 2 * k - 1)
    dX = _variation_derivatives(delta, t, k - 1)
    m = momentum_from_derivatives(L, X)
    jet_delta = LiftedVectorElement.from_tables(X[:, :k].T, dX.T)
    return pairing_higher(m, jet_delta)


def action_variation(L: Lagrangian, gamma, delta, t0: float, t1: float, panels: int | None = None):
    """Both sides of the first-variation formula on ``[t0, t1]``.

    Returns ``(lhs, rhs, report)``: ``lhs`` integrates ``<dL, kappa(j^k dg)>``,
    ``rhs`` integrates ``<F, dg>`` and adds the momentum boundary pairing.
    Convergence is judged against the same rule on half as many panels.
    """
    panels = default_panels() if panels is None else int(panels)
    if panels < 2:
        raise UsageError("need at least two panels")

    def lhs_integrand(t):
        return _dL_pairing(L, gamma, delta, t)

    def bulk_integrand(t):
        force = force_along(L, gamma, t).value
        return float(np.dot(force, _variation_derivatives(delta, t, 0)[:, 0]))

    lhs = gauss_legendre(lhs_integrand, t0, t1, panels)
    bulk = gauss_legendre(bulk_integrand, t0, t1, panels)
    boundary = _boundary_pairing(L, gamma, delta, t1) - _boundary_pairing(L, gamma, delta, t0)
    rhs = bulk + boundary
    lhs_half = gauss_legendre(lhs_integrand, t0, t1, panels // 2)
    bulk_half = gauss_legendre(bulk_integrand, t0, t1, panels // 2)
    scale = max(1.0, abs(lhs), abs(bulk))
    converged = max(abs(lhs - lhs_half), abs(bulk - bulk_half)) <= 1e-8 * scale
    report = VariationReport(lhs, rhs, bulk, boundary, abs(lhs - rhs), converged, panels)
    return lhs, rhs, report


def infinitesimal_identity(L: Lagrangian, gamma, delta, t: float) -> tuple[float, float]:
    """Pointwise ``<dL, dj^k g>`` versus ``<F, dg> + d/dt <M, j^{k-1} dg>``.

    The time derivative of the momentum is read off a one-order-longer jet
    of ``Lambda_L`` shifted by one outer index.
    """
    k = L.k
    lhs = _dL_pairing(L, gamma, delta, t)
    X = curve_derivatives(gamma, t, 2 * k)
    dX = _variation_derivatives(delta, t, k)
    force = force_from_derivatives(L, X).value
    D = _partials_time_first(L, X, k)
    # fiber of orders (k, k - 1): one extra outer time derivative
    fiber = np.empty((k + 1, k, L.dim))
    for c in range(k):
        fiber[:, c, :] = D[:, k - c, :].T / math.comb(k, c)
    m_now = momenta_array(fiber[:k])
    m_rate = momenta_array(fiber[1:])
    weights = np.array([math.comb(k - 1, a) for a in range(k)], dtype=float)[:, None]
    dx_low = dX[:, :k].T[::-1]
    dx_high = dX[:, 1 : k + 1].T[::-1]
    boundary_rate = float(np.sum(weights * (m_rate * dx_low + m_now * dx_high)))
    rhs = float(np.dot(force, dX[:, 0])) + boundary_rate
    return lhs, rhs


# -- boundary conditions ---------------------------------------------------------

def boundary_basis(preset: str, dim: int, k: int) -> np.ndarray:
    """Tangent basis of a boundary submanifold of pairs of ``(k-1)``-velocities.

    A vector stacks ``delta x^{a,(al)}`` at ``t0`` then at ``t1``, each in
    ``(a, al)`` row-major order.  Presets: ``fixed``, ``free_final``,
    ``free_both``, ``periodic``.
    """
    n = dim * k
    if preset == "fixed":
        return np.zeros((0, 2 * n))
    if preset == "free_final":
        return np.hstack([np.zeros((n, n)), np.eye(n)])
    if preset == "free_both":
        return np.eye(2 * n)
    if preset == "periodic":
        return np.hstack([np.eye(n), np.eye(n)])
    raise UsageError(f"unknown boundary preset {preset!r}")


def transversality_check(L: Lagrangian, gamma, t0: float, t1: float, boundary, tol: float = 1e-6):
    """Do the endpoint momenta annihilate the boundary tangent space?

    ``boundary`` is a preset name or an array of basis vectors (rows of
    length ``2 dim k``).  Returns ``(ok, residual)`` with ``residual`` the
    largest absolute pairing.
    """
    k, dim = L.k, L.dim
    basis = boundary_basis(boundary, dim, k) if isinstance(boundary, str) else np.atleast_2d(
        np.asarray(boundary, dtype=float)
    )
    if basis.size and basis.shape[1] != 2 * dim * k:
        raise UsageError(f"basis vectors must have length {2 * dim * k}, got {basis.shape[1]}")
    p0 = momentum_coordinates(momentum_along(L, gamma, t0))
    p1 = momentum_coordinates(momentum_along(L, gamma, t1))
    covector = np.concatenate([-p0.ravel(), p1.ravel()])
    residual = float(np.max(np.abs(basis @ covector), initial=0.0)) if basis.size else 0.0
    return residual <= tol, residual


def forced_el_residual(L: Lagrangian, gamma, t: float, external) -> ForceValue:
    """``F_{L,gamma}(t) - F_ext``; ``external(t, X)`` sees curve derivatives ``X``."""
    X = curve_derivatives(gamma, t, 2 * L.k)
    force = force_from_derivatives(L, X)
    return ForceValue(force.point, force.value - np.asarray(external(t, X), dtype=float))
