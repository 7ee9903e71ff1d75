"""Randomized identity checks shared by ``jetvar verify`` and the test suite.

Each group draws its own random instances from a counter-based (Philox)
stream keyed by ``(seed, group index)`` and reports the worst relative
error ``|a - b| / max(1, |a|, |b|)`` against its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bundles import (
    HigherVelocity,
    LiftedVectorElement,
    SemiHolonomicElement,
    alpha_lift_eval,
    curve_jet,
    holonomic_include,
    is_holonomic,
)
from .canonical_maps import (
    CotangentLift,
    dual_eps,
    flip_kappa,
    momenta_array,
    nest,
    pair_higher_array,
    pair_iterated_array,
    pairing_cotangent,
    pairing_higher,
    pairing_iterated,
    project_pk,
    unnest,
    upsilon,
    upsilon_array,
    upsilon_via_pairing,
)
from .variational import (
    Lagrangian,
    force_along,
    force_local_oracle,
    infinitesimal_identity,
    _partials_seed_first,
    lagrangian_jet_element,
    momentum_along,
    momentum_local_oracle,
)
from .weil_algebra import (
    JetScalar,
    JetShape,
    exp,
    merge_coeffs,
    split_coeffs,
)

__all__ = [
    "rel_err",
    "make_rng",
    "GroupResult",
    "random_semi_holonomic",
    "random_polynomial_curve",
    "random_polynomial_lagrangian",
    "check_well_defined",
    "check_recurrence_b",
    "check_recurrence_c",
    "check_identity_d",
    "check_general_recurrence",
    "check_kappa_eps_duality",
    "check_pk_section",
    "check_functoriality",
    "check_force_pipeline",
    "check_momentum_pipeline",
    "GROUPS",
    "run_suite",
]


def rel_err(a, b) -> float:
    """Worst entrywise ``|a - b| / max(1, |a|, |b|)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale, initial=0.0))


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class GroupResult:
    name: str
    cases: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


# -- random instances --------------------------------------------------------------

def random_semi_holonomic(rng, k: int, dim: int, rank: int | None = None) -> SemiHolonomicElement:
    rank = dim if rank is None else rank
    return SemiHolonomicElement(
        rng.standard_normal((dim, 2 * k + 1)), rng.standard_normal((k + 1, k + 1, rank))
    )


def random_polynomial_curve(rng, dim: int, degree: int, scale: float = 1.0):
    """Curve with ``x^a(t) = sum_j c_aj t^j / j!``."""
    coeffs = scale * rng.standard_normal((dim, degree + 1))
    coeffs /= np.array([math.factorial(j) for j in range(degree + 1)])

    def gamma(t):
        out = []
        for row in coeffs:
            acc = float(row[-1])
            for c in row[-2::-1]:
                acc = acc * t + float(c)
            out.append(acc)
        return out

    gamma.coeffs = coeffs
    return gamma


def random_polynomial_lagrangian(rng, k: int, dim: int, terms: int = 4) -> Lagrangian:
    """Regular part ``sum_a w_a (x^{a,(k)})^2 / 2`` plus random monomials of degree 2..3."""
    weights = 0.5 + rng.random(dim)
    monomials = []
    for _ in range(terms):
        degree = int(rng.integers(2, 4))
        factors = [(int(rng.integers(dim)), int(rng.integers(k + 1))) for _ in range(degree)]
        monomials.append((float(rng.standard_normal()) * 0.5, factors))

    def evaluator(x):
        total = 0.0
        for a in range(dim):
            total = total + 0.5 * weights[a] * x[a][k] * x[a][k]
        for coef, factors in monomials:
            term = coef
            for a, al in factors:
                term = term * x[a][al]
            total = total + term
        return total

    return Lagrangian(k, dim, evaluator, "random_polynomial")


# -- integration-by-parts identities ------------------------------------------------

def check_well_defined(phi: SemiHolonomicElement, rng) -> float:
    """Pairing route is independent of the dual extension and matches the local formula."""
    _, local = upsilon(phi)
    first = upsilon_via_pairing(phi, rng)
    second = upsilon_via_pairing(phi, rng)
    return max(rel_err(first, local), rel_err(second, local))


def composed_upsilon(phi: SemiHolonomicElement, inner: int, outer: int) -> np.ndarray:
    """``Upsilon_inner o Upsilon_outer`` through the nested layout."""
    point, fiber = upsilon(nest(phi, inner, outer))
    return upsilon(unnest(point, fiber, inner, phi.dim, phi.fiber_dim))[1]


def check_recurrence_b(phi: SemiHolonomicElement) -> float:
    k = phi.k
    if k < 2:
        return 0.0
    return rel_err(upsilon(phi)[1], composed_upsilon(phi, 1, k - 1))


def _binary_holonomic(xi: np.ndarray, k: int) -> np.ndarray:
    """Holonomic inclusion of ``xi[al]`` (``al = 0..k``) into the binary layout."""
    return xi[np.indices((2,) * k).sum(axis=0)] if k else xi[0]


def recurrence_c_terms(y: np.ndarray, xi: np.ndarray):
    """``(<mu_k Phi, j^k xi>, <Upsilon_k Phi, xi>, <T-lifted mu_{k-1} term, j^k xi>)``."""
    k = y.shape[0] - 1
    r = y.shape[2]
    lhs = pair_higher_array(momenta_array(y), xi)
    force_term = float(np.dot(upsilon_array(y), xi[0]))
    # y[b, c' + c] seen over the tangent bundle: inner index split as c' + c
    w = np.empty((k, k, 2, r))
    for c in range(2):
        w[:, :, c] = y[:k, c : c + k]
    u = momenta_array(w.reshape(k, k, 2 * r)).reshape(k, 2, r)
    grid = np.indices((2,) * k)
    jet = u[grid[: k - 1].sum(axis=0), grid[k - 1]]
    rest = pair_iterated_array(_binary_holonomic(xi, k), jet, k)
    return lhs, force_term, rest


def identity_d_terms(y: np.ndarray, xi: np.ndarray):
    """``(<Phi^{(0,k)}, j^k xi>, <Upsilon_k Phi, xi>, <T mu_{k-1} Phi^{(k,k-1)}, j^k xi>)``."""
    k = y.shape[0] - 1
    lhs = pair_higher_array(y[0], xi)
    force_term = float(np.dot(upsilon_array(y), xi[0]))
    u = np.stack([momenta_array(y[b : b + k, :k]) for b in range(2)])
    grid = np.indices((2,) * k)
    jet = u[grid[0], grid[1:].sum(axis=0)]
    rest = pair_iterated_array(_binary_holonomic(xi, k), jet, k)
    return lhs, force_term, rest


def check_recurrence_c(phi: SemiHolonomicElement, rng) -> float:
    if phi.k < 1:
        return 0.0
    xi = rng.standard_normal((phi.k + 1, phi.fiber_dim))
    lhs, a, b = recurrence_c_terms(phi.fiber, xi)
    return rel_err(lhs, a + b)


def check_identity_d(phi: SemiHolonomicElement, rng) -> float:
    if phi.k < 1:
        return 0.0
    xi = rng.standard_normal((phi.k + 1, phi.fiber_dim))
    lhs, a, b = identity_d_terms(phi.fiber, xi)
    return rel_err(lhs, a + b)


def upsilon_matrices(inner: int, outer: int, dim: int = 1):
    """Matrices of ``Upsilon_{inner+outer}`` and of the composite on basis fibers."""
    n = inner + outer
    size = (n + 1) ** 2
    base = np.zeros((dim, 2 * n + 1))
    direct = np.empty(size)
    composite = np.empty(size)
    for idx in range(size):
        fiber = np.zeros(size)
        fiber[idx] = 1.0
        phi = SemiHolonomicElement(base, fiber.reshape(n + 1, n + 1, 1))
        direct[idx] = upsilon(phi)[1][0]
        composite[idx] = composed_upsilon(phi, inner, outer)[0]
    return direct, composite


def check_general_recurrence(inner: int, outer: int) -> float:
    direct, composite = upsilon_matrices(inner, outer)
    return rel_err(direct, composite)


# -- pairings, flips, projections --------------------------------------------------

def check_kappa_eps_duality(rng, k: int, dim: int) -> float:
    """``<Psi, kappa V> = <eps Psi, V>`` over a shared base."""
    x = rng.standard_normal((dim, k + 1))
    psi = CotangentLift(x, rng.standard_normal((dim, k + 1)))
    v_arr = np.stack([x, rng.standard_normal((dim, k + 1))], axis=-1)  # shape (k, 1)
    v = HigherVelocity.from_array(v_arr)
    lhs = pairing_cotangent(psi, flip_kappa(v))
    tangent = LiftedVectorElement.from_tables(x.T, v_arr[:, :, 1].T)
    rhs = pairing_higher(dual_eps(psi), tangent)
    return rel_err(lhs, rhs)


def check_pk_section(rng, k: int, dim: int, rank: int) -> float:
    """``P_k`` undoes the holonomic inclusion."""
    base = rng.standard_normal((k + 1, dim))
    fiber = rng.standard_normal((k + 1, rank))
    lifted = LiftedVectorElement.from_tables(base, fiber)
    included = holonomic_include(lifted, (1,) * k)
    back = project_pk(included)
    return max(rel_err(back.base.table, base), rel_err(back.fiber_table, fiber))


def check_pairing_inclusion(rng, k: int, rank: int) -> float:
    """Higher pairing equals the iterated pairing of the included elements."""
    base = rng.standard_normal((k + 1, 1))
    xi = LiftedVectorElement.from_tables(base, rng.standard_normal((k + 1, rank)))
    y = LiftedVectorElement.from_tables(base, rng.standard_normal((k + 1, rank)))
    lhs = pairing_higher(xi, y)
    rhs = pairing_iterated(holonomic_include(xi, (1,) * k), holonomic_include(y, (1,) * k))
    return rel_err(lhs, rhs)


def check_complete_lift(rng, k: int, rank: int) -> float:
    """Higher pairing of curve jets is the ``k``-th derivative of the scalar pairing."""
    xi_curve = random_polynomial_curve(rng, rank, k + 2)
    y_curve = random_polynomial_curve(rng, rank, k + 2)
    t = float(rng.uniform(-1, 1))
    xi = curve_jet(xi_curve, t, k)
    y = curve_jet(y_curve, t, k)
    base = np.zeros((k + 1, 1))
    lhs = pairing_higher(
        LiftedVectorElement.from_tables(base, xi.table),
        LiftedVectorElement.from_tables(base, y.table),
    )

    def scalar(tau):
        a, b = xi_curve(tau), y_curve(tau)
        return [sum(p * q for p, q in zip(a, b))]

    rhs = curve_jet(scalar, t, k).coords[0][k]
    return rel_err(lhs, rhs)


def check_functoriality(rng, k: int, dim: int, rank: int) -> float:
    """Linear bundle morphism over a polynomial base map commutes with ``Upsilon_k``."""
    phi = random_semi_holonomic(rng, k, dim, rank)
    quad = 0.3 * rng.standard_normal((dim, dim, dim))
    a0 = rng.standard_normal((rank, rank))
    a1 = 0.3 * rng.standard_normal((rank, rank, dim))
    shape = JetShape((k, k))
    xs = [JetScalar(shape, split_coeffs(phi.base[a], (2 * k,), (k, k))) for a in range(dim)]
    ys = [JetScalar(shape, np.ascontiguousarray(phi.fiber[:, :, i])) for i in range(rank)]
    mapped = []
    for a in range(dim):
        acc = xs[a]
        for b in range(dim):
            for c in range(dim):
                acc = acc + quad[a, b, c] * xs[b] * xs[c]
        mapped.append(acc)
    if not all(is_holonomic(m) for m in mapped):
        return math.inf
    new_base = np.stack([merge_coeffs(m.coeffs, (k, k), (2 * k,)) for m in mapped])
    new_fiber = np.empty((k + 1, k + 1, rank))
    for i in range(rank):
        acc = JetScalar(shape, np.zeros(shape.dims))
        for j in range(rank):
            entry = a0[i, j]
            for b in range(dim):
                entry = entry + a1[i, j, b] * xs[b]
            acc = acc + entry * ys[j]
        new_fiber[:, :, i] = acc.coeffs
    lhs = upsilon(SemiHolonomicElement(new_base, new_fiber))[1]
    x0 = phi.base[:, 0]
    a_at = a0 + np.einsum("ijb,b->ij", a1, x0)
    rhs = a_at @ upsilon(phi)[1]
    return rel_err(lhs, rhs)


# -- variational pipeline ------------------------------------------------------------

def _random_problem(rng, k: int, dim: int):
    L = random_polynomial_lagrangian(rng, k, dim)
    gamma = random_polynomial_curve(rng, dim, 2 * k + 2, scale=0.7)
    t = float(rng.uniform(-0.5, 0.5))
    return L, gamma, t


def check_force_pipeline(rng, k: int, dim: int) -> float:
    L, gamma, t = _random_problem(rng, k, dim)
    return rel_err(force_along(L, gamma, t).value, force_local_oracle(L, gamma, t).value)


def check_momentum_pipeline(rng, k: int, dim: int) -> float:
    L, gamma, t = _random_problem(rng, k, dim)
    a = momentum_along(L, gamma, t)
    b = momentum_local_oracle(L, gamma, t)
    return max(rel_err(a.p, b.p), rel_err(a.x, b.x))


def check_infinitesimal(rng, k: int, dim: int) -> float:
    L, gamma, t = _random_problem(rng, k, dim)
    delta = random_polynomial_curve(rng, dim, k + 2)
    lhs, rhs = infinitesimal_identity(L, gamma, delta, t)
    return rel_err(lhs, rhs)


def check_semi_holonomic_lift(rng, k: int, dim: int) -> float:
    """The jet of ``Lambda_L`` does not depend on the order of its jet generators.

    Its base must be ``j^{2k} gamma`` and its fiber must agree with the one
    assembled from the transposed (seed-first) jet layout.
    """
    L, gamma, t = _random_problem(rng, k, dim)
    X = curve_jet(gamma, t, 2 * k).array
    phi = lagrangian_jet_element(L, X, k)
    D = _partials_seed_first(L, X, k)
    fiber = np.empty_like(phi.fiber)
    for c in range(k + 1):
        fiber[:, c, :] = D[:, k - c, :].T / math.comb(k, c)
    return max(rel_err(phi.base, X), rel_err(phi.fiber, fiber))


# -- algebra ----------------------------------------------------------------------------

def _random_jet(rng, orders) -> JetScalar:
    shape = JetShape(tuple(orders))
    return JetScalar(shape, rng.standard_normal(shape.dims))


def check_ring_axioms(rng, orders) -> float:
    a, b, c = (_random_jet(rng, orders) for _ in range(3))
    return max(
        rel_err(((a * b) * c).coeffs, (a * (b * c)).coeffs),
        rel_err((a * (b + c)).coeffs, (a * b + a * c).coeffs),
        rel_err((a * b).coeffs, (b * a).coeffs),
    )


def check_exp_homomorphism(rng, orders) -> float:
    a = _random_jet(rng, orders) * 0.5
    b = _random_jet(rng, orders) * 0.5
    return rel_err(exp(a + b).coeffs, (exp(a) * exp(b)).coeffs)


def check_alpha_leibniz(rng, k: int) -> float:
    """``(fg)^{(al)} = sum C(al, be) f^{(be)} g^{(al - be)}`` on a random velocity."""
    v = HigherVelocity.from_array(rng.standard_normal((2, k + 1)))
    cf = rng.standard_normal(3)
    cg = rng.standard_normal(3)

    def f(x):
        return cf[0] + cf[1] * x[0] + cf[2] * x[0] * x[1]

    def g(x):
        return cg[0] + cg[1] * x[1] * x[1] + cg[2] * x[0]

    worst = 0.0
    for al in range(k + 1):
        lhs = alpha_lift_eval(lambda x: f(x) * g(x), v, al)
        rhs = sum(
            math.comb(al, be) * alpha_lift_eval(f, v, be) * alpha_lift_eval(g, v, al - be)
            for be in range(al + 1)
        )
        worst = max(worst, rel_err(lhs, rhs))
    return worst


# -- suite --------------------------------------------------------------------------------

def _over(max_k: int, dims=(1, 2, 3), min_k: int = 1):
    return [(k, d) for k in range(min_k, max_k + 1) for d in dims]


def _group_ring(rng, max_k, n):
    shapes = [(m,) for m in range(1, 4)] + [(m, l) for m in range(1, 4) for l in range(1, 4)]
    return [check_ring_axioms(rng, s) for s in shapes for _ in range(n)]


def _group_exp(rng, max_k, n):
    return [check_exp_homomorphism(rng, s) for s in [(3,), (2, 2), (1, 1, 1)] for _ in range(n)]


def _group_split_merge(rng, max_k, n):
    out = []
    for _ in range(n):
        for total in range(1, max_k + 2):
            arr = rng.standard_normal(total + 1)
            split = split_coeffs(arr, (total,), (1,) * total)
            out.append(rel_err(merge_coeffs(split, (1,) * total, (total,)), arr))
    return out


def _group_pairing(rng, max_k, n):
    out = []
    for _ in range(n):
        for k in range(1, max_k + 1):
            out.append(check_pairing_inclusion(rng, k, 2))
            out.append(check_complete_lift(rng, k, 2))
    return out


def _group_duality(rng, max_k, n):
    return [check_kappa_eps_duality(rng, k, d) for k, d in _over(max_k) for _ in range(n)]


def _group_pk(rng, max_k, n):
    return [check_pk_section(rng, k, d, d) for k, d in _over(max_k) for _ in range(n)]


def _phis(rng, max_k, n, min_k=1):
    for k, d in _over(max_k, min_k=min_k):
        for _ in range(n):
            yield random_semi_holonomic(rng, k, d)


def _group_well_defined(rng, max_k, n):
    return [check_well_defined(phi, rng) for phi in _phis(rng, max_k, n)]


def _group_b(rng, max_k, n):
    return [check_recurrence_b(phi) for phi in _phis(rng, max_k, n, min_k=2)]


def _group_c(rng, max_k, n):
    return [check_recurrence_c(phi, rng) for phi in _phis(rng, max_k, n)]


def _group_d(rng, max_k, n):
    return [check_identity_d(phi, rng) for phi in _phis(rng, max_k, n)]


def _group_general(rng, max_k, n):
    pairs = [(1, 1), (1, 2), (2, 1)]
    return [check_general_recurrence(i, o) for i, o in pairs if i + o <= max(max_k, 2)]


def _group_functoriality(rng, max_k, n):
    return [check_functoriality(rng, k, d, 2) for k, d in _over(max_k, dims=(1, 2)) for _ in range(max(1, n // 5))]


def _group_force(rng, max_k, n):
    return [check_force_pipeline(rng, k, d) for k, d in _over(max_k) for _ in range(max(1, n // 10))]


def _group_momentum(rng, max_k, n):
    return [check_momentum_pipeline(rng, k, d) for k, d in _over(max_k) for _ in range(max(1, n // 10))]


def _group_infinitesimal(rng, max_k, n):
    return [check_infinitesimal(rng, k, d) for k, d in _over(max_k, dims=(1, 2)) for _ in range(max(1, n // 10))]


def _group_semi_holonomic(rng, max_k, n):
    return [check_semi_holonomic_lift(rng, k, d) for k, d in _over(max_k, dims=(1, 2))]


def _group_leibniz(rng, max_k, n):
    return [check_alpha_leibniz(rng, k) for k in range(1, max_k + 2) for _ in range(n)]


GROUPS: list[tuple[str, Callable, float]] = [
    ("ring_axioms", _group_ring, 1e-12),
    ("exp_homomorphism", _group_exp, 1e-10),
    ("split_merge_roundtrip", _group_split_merge, 1e-12),
    ("alpha_lift_leibniz", _group_leibniz, 1e-10),
    ("pairing_inclusion_and_lift", _group_pairing, 1e-12),
    ("kappa_eps_duality", _group_duality, 1e-12),
    ("pk_after_inclusion", _group_pk, 1e-12),
    ("upsilon_well_defined", _group_well_defined, 1e-12),
    ("recurrence_b", _group_b, 1e-12),
    ("recurrence_c", _group_c, 1e-12),
    ("identity_d", _group_d, 1e-12),
    ("general_recurrence", _group_general, 1e-12),
    ("functoriality", _group_functoriality, 1e-9),
    ("force_vs_classical", _group_force, 1e-9),
    ("momentum_vs_classical", _group_momentum, 1e-9),
    ("infinitesimal_variation", _group_infinitesimal, 1e-9),
    ("lambda_jet_layouts", _group_semi_holonomic, 1e-12),
]


def run_suite(seed: int = 0, max_k: int = 3, samples: int = 10) -> list[GroupResult]:
    """Run every group; ``samples`` scales the per-configuration case count."""
    results = []
    for index, (name, group, tol) in enumerate(GROUPS):
        errors = group(make_rng(seed, index), max_k, samples)
        worst = max(errors) if errors else 0.0
        results.append(GroupResult(name, len(errors), worst, tol))
    return results
