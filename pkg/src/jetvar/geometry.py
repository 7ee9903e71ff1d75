"""Riemannian data in one chart: Christoffel symbols, curvature, covariant
derivatives along curves and the cubic-spline energy.

Metric evaluators are jet-capable: ``g(x)`` takes a list of coordinates
(floats or jets of one shape) and returns a ``dim x dim`` nested list.
Partial derivatives are obtained by evaluating at jets carrying one extra
first-order generator, so Christoffel symbols can themselves be evaluated
at jet-valued points (as the cubic Lagrangian requires).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bundles import curve_jet
from .errors import DomainError, SingularityError, UsageError
from .variational import Lagrangian
from .weil_algebra import (
    JetScalar,
    JetShape,
    constant,
    extend,
    part,
    promote,
    seed_variable,
    shift,
    sin,
    truncate,
)

SPHERE_POLE_MARGIN = 0.1

__all__ = [
    "MetricField",
    "euclidean",
    "sphere2",
    "hyperbolic2",
    "METRIC_PRESETS",
    "metric_matrix",
    "jet_inverse",
    "christoffel",
    "christoffel_jets",
    "curvature",
    "covariant_derivative_along",
    "covariant_derivative_jets",
    "cubic_lagrangian",
    "cubic_el_residual",
    "cubic_boundary_term",
]


@dataclass(frozen=True)
class MetricField:
    """Jet-capable metric ``x -> g_ab(x)``; symmetrized on evaluation."""

    dim: int
    evaluator: Callable[[Sequence], Sequence[Sequence]]
    name: str = "metric"

    def __post_init__(self):
        if self.dim < 1:
            raise UsageError("metric dimension must be positive")

    def jets(self, xs: Sequence[JetScalar]) -> list[list[JetScalar]]:
        """Symmetrized ``g_ab`` at jet-valued coordinates (all one shape)."""
        shape = xs[0].shape
        raw = self.evaluator(list(xs))
        if len(raw) != self.dim or any(len(row) != self.dim for row in raw):
            raise UsageError(f"metric must return a {self.dim}x{self.dim} matrix")
        g = [[promote(raw[a][b], shape) for b in range(self.dim)] for a in range(self.dim)]
        return [
            [g[a][b] if a == b else (g[a][b] + g[b][a]) * 0.5 for b in range(self.dim)]
            for a in range(self.dim)
        ]

    def __call__(self, x) -> np.ndarray:
        return metric_matrix(self, x)


def metric_matrix(g: MetricField, x) -> np.ndarray:
    """``g_ab`` at a plain point, checked positive-definite."""
    xs = [constant((), v) for v in np.asarray(x, dtype=float)]
    if len(xs) != g.dim:
        raise UsageError(f"point has {len(xs)} coordinates, metric needs {g.dim}")
    mat = np.array([[e.value for e in row] for row in g.jets(xs)])
    for n in range(1, g.dim + 1):
        if np.linalg.det(mat[:n, :n]) <= 0:
            raise SingularityError(f"metric is not positive-definite at {list(x)}")
    return mat


def euclidean(dim: int) -> MetricField:
    def evaluator(x):
        return [[1.0 if a == b else 0.0 for b in range(dim)] for a in range(dim)]

    return MetricField(dim, evaluator, f"euclidean{dim}")


def _sphere(x):
    theta = x[0]
    value = theta.value if isinstance(theta, JetScalar) else float(theta)
    if not SPHERE_POLE_MARGIN < value < math.pi - SPHERE_POLE_MARGIN:
        raise DomainError(
            f"theta = {value:.6g} is within {SPHERE_POLE_MARGIN} rad of a pole"
        )
    s = sin(theta)
    return [[1.0, 0.0], [0.0, s * s]]


def _hyperbolic(x):
    y = x[1]
    value = y.value if isinstance(y, JetScalar) else float(y)
    if value <= 0:
        raise DomainError(f"y = {value:.6g} is outside the upper half-plane")
    w = 1.0 / (y * y)
    return [[w, 0.0], [0.0, w]]


def sphere2() -> MetricField:
    """Round unit sphere in ``(theta, phi)``."""
    return MetricField(2, _sphere, "sphere2")


def hyperbolic2() -> MetricField:
    """Upper half-plane model, curvature ``-1``."""
    return MetricField(2, _hyperbolic, "hyperbolic2")


METRIC_PRESETS = {
    "euclidean": euclidean,
    "sphere2": lambda dim=2: sphere2(),
    "hyperbolic2": lambda dim=2: hyperbolic2(),
}


def jet_inverse(m: Sequence[Sequence[JetScalar]]) -> list[list[JetScalar]]:
    """Gauss-Jordan inverse of a small matrix of jets (pivoting on values)."""
    n = len(m)
    shape = m[0][0].shape
    a = [list(row) + [constant(shape, 1.0 if i == j else 0.0) for j in range(n)]
         for i, row in enumerate(m)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col].value))
        if abs(a[pivot][col].value) < 1e-300:
            raise SingularityError("singular metric matrix")
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1.0 / a[col][col]
        a[col] = [e * inv for e in a[col]]
        for r in range(n):
            if r != col:
                factor = a[r][col]
                a[r] = [e - factor * p for e, p in zip(a[r], a[col])]
    return [row[n:] for row in a]


def _metric_and_partials(g: MetricField, xs: Sequence[JetScalar]):
    """``g_ab`` and ``dg[d][a][b] = d_d g_ab`` at jet-valued ``xs``."""
    dim = g.dim
    ext_shape = JetShape(xs[0].shape.orders + (1,))
    base = [extend(x) for x in xs]
    unit = seed_variable(ext_shape, 0.0, ext_shape.rank - 1)
    dg = []
    gmat = None
    for d in range(dim):
        probe = [x + unit if i == d else x for i, x in enumerate(base)]
        ge = g.jets(probe)
        if gmat is None:
            gmat = [[part(e, 0) for e in row] for row in ge]
        dg.append([[part(e, 1) for e in row] for row in ge])
    return gmat, dg


def christoffel_jets(g: MetricField, xs: Sequence) -> list[list[list[JetScalar]]]:
    """``Gamma[c][a][b]`` at jet-valued coordinates; symmetric in ``a, b``."""
    xs = list(xs)
    if len(xs) != g.dim:
        raise UsageError(f"point has {len(xs)} coordinates, metric needs {g.dim}")
    shape = next((x.shape for x in xs if isinstance(x, JetScalar)), JetShape(()))
    xs = [promote(x, shape) for x in xs]
    dim = g.dim
    gmat, dg = _metric_and_partials(g, xs)
    ginv = jet_inverse(gmat)
    gamma = [[[None] * dim for _ in range(dim)] for _ in range(dim)]
    for c in range(dim):
        for a in range(dim):
            for b in range(a, dim):
                total = constant(shape, 0.0)
                for d in range(dim):
                    total = total + ginv[c][d] * (dg[a][d][b] + dg[b][d][a] - dg[d][a][b])
                total = total * 0.5
                gamma[c][a][b] = total
                gamma[c][b][a] = total
    return gamma


def christoffel(g: MetricField, x) -> np.ndarray:
    """``Gamma[c, a, b]`` at a plain point."""
    metric_matrix(g, x)
    xs = [constant((), v) for v in np.asarray(x, dtype=float)]
    gam = christoffel_jets(g, xs)
    return np.array([[[e.value for e in row] for row in plane] for plane in gam])


def curvature(g: MetricField, x):
    """Riemann tensor ``R[d, c, a, b] = R^d_{cab}`` and its lowered form.

    ``R(X, Y) Z`` has components ``R^d_{cab} Z^c X^a Y^b``; the lowered
    array is ``g_de R^e_{cab}``.
    """
    x = np.asarray(x, dtype=float)
    dim = g.dim
    gmat = metric_matrix(g, x)
    gam = christoffel(g, x)
    dgam = np.empty((dim, dim, dim, dim))  # dgam[a, c, p, q] = d_a Gamma^c_pq
    shape = JetShape((1,))
    for a in range(dim):
        xs = [seed_variable(shape, v, 0) if i == a else constant(shape, v)
              for i, v in enumerate(x)]
        jets = christoffel_jets(g, xs)
        dgam[a] = [[[e[1] for e in row] for row in plane] for plane in jets]
    r = (
        np.einsum("adbc->dcab", dgam)
        - np.einsum("bdac->dcab", dgam)
        + np.einsum("dae,ebc->dcab", gam, gam)
        - np.einsum("dbe,eac->dcab", gam, gam)
    )
    lowered = np.einsum("de,ecab->dcab", gmat, r)
    return r, lowered


def covariant_derivative_jets(g: MetricField, gamma_jets, v_jets):
    """One covariant time derivative of a field given as univariate jets.

    ``gamma_jets`` need order at least ``n + 1`` where ``n`` is the order of
    ``v_jets``; the result has order ``n - 1``.
    """
    n = v_jets[0].shape.orders[0]
    pos = [truncate(x, (n,)) for x in gamma_jets]
    vel = [shift(truncate(x, (n + 1,))) for x in gamma_jets]
    gam = christoffel_jets(g, pos)
    dim = g.dim
    out = []
    for c in range(dim):
        acc = constant((n,), 0.0)
        for a in range(dim):
            for b in range(dim):
                acc = acc + gam[c][a][b] * vel[a] * v_jets[b]
        out.append(shift(v_jets[c]) + truncate(acc, (n - 1,)))
    return out


def _curve_jets(gamma, t: float, m: int) -> list[JetScalar]:
    return list(curve_jet(gamma, t, m).coords)


def covariant_derivative_along(g: MetricField, gamma, field, t: float, m: int) -> np.ndarray:
    """``D_t^m V`` at ``t``; ``field`` is a jet-capable map ``t -> V(t)``."""
    if m < 0:
        raise UsageError("derivative order must be non-negative")
    shape = JetShape((m,))
    tau = seed_variable(shape, float(t), 0)
    v = [promote(c, shape) for c in field(tau)]
    path = _curve_jets(gamma, t, m + 1)
    for _ in range(m):
        v = covariant_derivative_jets(g, path, v)
    return np.array([c.value for c in v])


def _velocity_derivatives(g: MetricField, gamma, t: float, m: int):
    """``[gamma', D_t gamma', ..., D_t^m gamma']`` as float vectors."""
    path = _curve_jets(gamma, t, m + 1)
    v = [shift(x) for x in path]
    out = [np.array([c.value for c in v])]
    for _ in range(m):
        v = covariant_derivative_jets(g, path, v)
        out.append(np.array([c.value for c in v]))
    return out


def cubic_lagrangian(g: MetricField) -> Lagrangian:
    """``L = g(D_t gamma', D_t gamma')`` as a second-order Lagrangian."""
    dim = g.dim

    def evaluator(x):
        pos = [x[a][0] for a in range(dim)]
        shape = next(
            (e.shape for row in x for e in row if isinstance(e, JetScalar)), JetShape(())
        )
        pos = [promote(p, shape) for p in pos]
        vel = [promote(x[a][1], shape) for a in range(dim)]
        acc = [promote(x[a][2], shape) for a in range(dim)]
        gam = christoffel_jets(g, pos)
        cov = []
        for c in range(dim):
            term = acc[c]
            for a in range(dim):
                for b in range(dim):
                    term = term + gam[c][a][b] * vel[a] * vel[b]
            cov.append(term)
        gmat = g.jets(pos)
        total = constant(shape, 0.0)
        for c in range(dim):
            for d in range(dim):
                total = total + gmat[c][d] * cov[c] * cov[d]
        return total

    return Lagrangian(2, dim, evaluator, f"cubic[{g.name}]")


def cubic_el_residual(g: MetricField, gamma, t: float) -> np.ndarray:
    """``D_t^3 gamma' + R(D_t gamma', gamma') gamma'`` at ``t``."""
    vel, d1, _, d3 = _velocity_derivatives(g, gamma, t, 3)
    point = curve_jet(gamma, t, 0).point
    r, _ = curvature(g, point)
    return d3 + np.einsum("dcab,c,a,b->d", r, vel, d1, vel)


def cubic_boundary_term(g: MetricField, gamma, delta, t: float) -> float:
    """``2 [g(D_t dg, D_t gamma') - g(dg, D_t^2 gamma')]`` at ``t``."""
    _, d1, d2 = _velocity_derivatives(g, gamma, t, 2)
    shape = JetShape((1,))
    tau = seed_variable(shape, float(t), 0)
    dv = [promote(c, shape) for c in delta(tau)]
    path = _curve_jets(gamma, t, 2)
    d_delta = np.array([c.value for c in covariant_derivative_jets(g, path, dv)])
    delta0 = np.array([c.value for c in dv])
    gmat = metric_matrix(g, curve_jet(gamma, t, 0).point)
    return 2.0 * (d_delta @ gmat @ d1 - delta0 @ gmat @ d2)
