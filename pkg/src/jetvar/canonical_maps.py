"""Canonical morphisms between lifted bundles, in adapted coordinates.

Array-level helpers (suffix ``_array``) act on the leading exponent axes
and carry any trailing component axes along untouched, so the same code
serves scalar fibers, vector fibers and basis-matrix probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundles import (
    HigherVelocity,
    LiftedVectorElement,
    SemiHolonomicElement,
    is_holonomic,
)
from .errors import HolonomyError, PairingDomainError, UsageError
from .weil_algebra import JetScalar, JetShape

BASE_MATCH_TOL = 1e-9

__all__ = [
    "CovectorVelocity",
    "CotangentLift",
    "pairing_iterated",
    "pairing_higher",
    "pairing_lifted",
    "pairing_cotangent",
    "flip_kappa",
    "flip_kappa_inverse",
    "dual_eps",
    "dual_eps_inverse",
    "project_pk",
    "upsilon",
    "upsilon_via_pairing",
    "momenta",
    "nest",
    "reindex_block",
    "upsilon_array",
    "upsilon_tilde_array",
    "project_pk_array",
    "momenta_array",
    "pair_higher_array",
    "pair_iterated_array",
]


@dataclass(frozen=True)
class CovectorVelocity(LiftedVectorElement):
    """Point ``(x^{a,(al)}, p_a^{(al)})`` of ``T^k T*M``."""

    @classmethod
    def from_arrays(cls, x, p) -> "CovectorVelocity":
        """From ``x`` and ``p`` both shaped ``(dim, k + 1)``."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if x.shape != p.shape or x.ndim != 2:
            raise UsageError(f"x {x.shape} and p {p.shape} must both be (dim, k+1)")
        lifted = LiftedVectorElement.from_tables(x.T, p.T)
        return cls(lifted.base, lifted.fiber)

    @property
    def k(self) -> int:
        return self.shape.orders[0]

    @property
    def x(self) -> np.ndarray:
        return self.base.array

    @property
    def p(self) -> np.ndarray:
        """``p[a, al]`` for ``al = 0..k``."""
        return np.stack([f.coeffs for f in self.fiber])


@dataclass(frozen=True)
class CotangentLift:
    """Point ``(x^{a,(al)}, p_{a,(al)})`` of ``T* T^k M``."""

    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        p = np.array(self.p, dtype=float)
        if x.shape != p.shape or x.ndim != 2:
            raise UsageError(f"x {x.shape} and p {p.shape} must both be (dim, k+1)")
        x.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.x.shape[0]

    @property
    def k(self) -> int:
        return self.x.shape[1] - 1


# -- array-level building blocks ---------------------------------------------

def _binom(n: int, r: int) -> int:
    return math.comb(n, r)


def pair_higher_array(xi: np.ndarray, y: np.ndarray) -> float:
    """``sum_al C(k, al) xi[al] . y[k - al]`` over leading axis length ``k+1``."""
    k = xi.shape[0] - 1
    weights = np.array([_binom(k, a) for a in range(k + 1)], dtype=float)
    return float(np.sum(weights.reshape((-1,) + (1,) * (xi.ndim - 1)) * xi * y[::-1]))


def pair_iterated_array(xi: np.ndarray, y: np.ndarray, rank: int) -> float:
    """``sum_e xi[e] . y[(1..1) - e]`` over ``rank`` binary leading axes."""
    flipped = y[(slice(None, None, -1),) * rank]
    return float(np.sum(xi * flipped))


def reindex_block(y: np.ndarray, j: int, k: int) -> np.ndarray:
    """Place ``y[b, c]`` of orders ``(j, k - j)`` into the binary layout.

    Output has ``k`` binary axes with ``out[e] = y[|e[:j]|, |e[j:]|]``.
    """
    grid = np.indices((2,) * k).reshape(k, -1) if k else np.zeros((0, 1), int)
    outer = grid[:j].sum(axis=0)
    inner = grid[j:].sum(axis=0)
    return y[outer, inner].reshape((2,) * k + y.shape[2:])


def project_pk_array(z: np.ndarray, k: int) -> np.ndarray:
    """Degree-wise average ``C(k, al)^-1 sum_{|e| = al} z[e]``."""
    out = np.zeros((k + 1,) + z.shape[k:])
    if k == 0:
        out[0] = z
        return out
    degree = np.indices((2,) * k).sum(axis=0).ravel()
    flat = z.reshape((2**k,) + z.shape[k:])
    np.add.at(out, degree, flat)
    weights = np.array([_binom(k, a) for a in range(k + 1)], dtype=float)
    return out / weights.reshape((-1,) + (1,) * (out.ndim - 1))


def upsilon_array(y: np.ndarray) -> np.ndarray:
    """Alternating binomial sum over the top anti-diagonal of ``y[b, c]``."""
    k = y.shape[0] - 1
    if y.shape[1] != k + 1:
        raise UsageError(f"upsilon needs equal orders, got {y.shape[:2]}")
    return sum((-1) ** a * _binom(k, a) * y[a, k - a] for a in range(k + 1))


def upsilon_tilde_array(y: np.ndarray) -> np.ndarray:
    """``sum_j (-1)^j C(k, j) y^{(j, k - j)}`` in the binary layout."""
    k = y.shape[0] - 1
    return sum(
        (-1) ** j * _binom(k, j) * reindex_block(y[: j + 1, : k - j + 1], j, k)
        for j in range(k + 1)
    )


def momenta_array(y: np.ndarray) -> np.ndarray:
    """Momentum map on fiber ``y[b, c, ...]`` of orders ``(k, k)``.

    Returns ``(k + 1, ...)``: the averaged alternating combination
    ``sum_j (-1)^j C(k + 1, j + 1) y^{(j, k - j)}``.
    """
    k = y.shape[0] - 1
    if y.shape[1] != k + 1:
        raise UsageError(f"momenta needs equal orders, got {y.shape[:2]}")
    total = sum(
        (-1) ** j * _binom(k + 1, j + 1) * reindex_block(y[: j + 1, : k - j + 1], j, k)
        for j in range(k + 1)
    )
    return project_pk_array(total, k)


# -- object-level operations --------------------------------------------------

def _check_bases(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise PairingDomainError(f"base shapes differ: {a.shape} vs {b.shape}")
    gap = float(np.max(np.abs(a - b), initial=0.0))
    if gap > BASE_MATCH_TOL:
        raise PairingDomainError(f"bases differ by {gap:.3g}")


def _check_pair(xi: LiftedVectorElement, v: LiftedVectorElement) -> None:
    if xi.shape != v.shape:
        raise UsageError(f"shape mismatch: {xi.shape} vs {v.shape}")
    if xi.fiber_dim != v.fiber_dim:
        raise UsageError("dual fibers must have equal rank")
    _check_bases(xi.base.table, v.base.table)


def pairing_iterated(xi: LiftedVectorElement, v: LiftedVectorElement) -> float:
    """Pairing on iterated first-order lifts (shape ``(1, ..., 1)``)."""
    _check_pair(xi, v)
    if any(n != 1 for n in xi.shape.orders):
        raise UsageError(f"iterated pairing needs shape (1, ..., 1), got {xi.shape}")
    return pair_iterated_array(xi.fiber_table, v.fiber_table, xi.shape.rank)


def pairing_higher(xi: LiftedVectorElement, v: LiftedVectorElement) -> float:
    """Pairing on ``T^k E* x T^k E`` with binomial weights."""
    _check_pair(xi, v)
    if xi.shape.rank != 1:
        raise UsageError(f"higher pairing needs shape (k), got {xi.shape}")
    return pair_higher_array(xi.fiber_table, v.fiber_table)


def pairing_lifted(xi: LiftedVectorElement, v: LiftedVectorElement) -> float:
    """Any lifted pairing: top coefficient of ``sum_i xi_i * y_i``."""
    _check_pair(xi, v)
    total = JetScalar(xi.shape, np.zeros(xi.shape.dims))
    for a, b in zip(xi.fiber, v.fiber):
        total = total + a * b
    return total[xi.shape.orders]


def pairing_cotangent(psi: CotangentLift, w: HigherVelocity) -> float:
    """Natural pairing of ``T* T^k M`` with ``T T^k M`` (shape ``(1, k)``).

    ``w`` stores base ``x^{(0, al)}`` and tangent part ``x^{(1, al)}``.
    """
    k = psi.k
    if w.shape.orders != (1, k):
        raise UsageError(f"expected shape (1, {k}), got {w.shape}")
    arr = w.array
    _check_bases(psi.x, arr[:, 0, :])
    return float(np.sum(psi.p * arr[:, 1, :]))


def _transpose_velocity(v: HigherVelocity) -> HigherVelocity:
    return HigherVelocity.from_array(np.transpose(v.array, (0, 2, 1)))


def flip_kappa(v):
    """Canonical flip ``T^k T -> T T^k``: shape ``(k, 1)`` to ``(1, k)``."""
    rank_ok = v.shape.rank == 2 and v.shape.orders[1] == 1
    if not rank_ok:
        raise UsageError(f"flip needs shape (k, 1), got {v.shape}")
    return _transpose(v)


def flip_kappa_inverse(w):
    """Inverse flip: shape ``(1, k)`` back to ``(k, 1)``."""
    if not (w.shape.rank == 2 and w.shape.orders[0] == 1):
        raise UsageError(f"inverse flip needs shape (1, k), got {w.shape}")
    return _transpose(w)


def _transpose(v):
    if isinstance(v, HigherVelocity):
        return _transpose_velocity(v)
    if isinstance(v, LiftedVectorElement):
        fiber = tuple(JetScalar(JetShape(f.shape.orders[::-1]),
                                np.ascontiguousarray(f.coeffs.T)) for f in v.fiber)
        return type(v)(_transpose_velocity(v.base), fiber)
    raise UsageError(f"cannot flip {type(v).__name__}")


def dual_eps(psi: CotangentLift) -> CovectorVelocity:
    """``p^{(al)} = C(k, al)^-1 p_{(k - al)}``, base copied."""
    k = psi.k
    weights = np.array([_binom(k, a) for a in range(k + 1)], dtype=float)
    return CovectorVelocity.from_arrays(psi.x, psi.p[:, ::-1] / weights)


def dual_eps_inverse(cv: CovectorVelocity) -> CotangentLift:
    """``p_{(al)} = C(k, al) p^{(k - al)}`` (closed form, no solve)."""
    k = cv.k
    weights = np.array([_binom(k, a) for a in range(k + 1)], dtype=float)
    return CotangentLift(cv.x, (cv.p * weights)[:, ::-1])


def project_pk(x: LiftedVectorElement) -> LiftedVectorElement:
    """Average an iterated first-order lift down to shape ``(k)``."""
    orders = x.shape.orders
    if any(n != 1 for n in orders):
        raise UsageError(f"P_k needs shape (1, ..., 1), got {x.shape}")
    if not is_holonomic(x.base):
        raise HolonomyError("P_k needs a holonomic base")
    k = len(orders)
    base_table = x.base.table
    degree_rep = tuple(
        tuple([1] * a + [0] * (k - a)) for a in range(k + 1)
    )
    base = np.stack([base_table[e] for e in degree_rep])
    fiber = project_pk_array(x.fiber_table, k)
    return LiftedVectorElement.from_tables(base, fiber)


def upsilon(phi: SemiHolonomicElement):
    """Integration-by-parts map: ``(base point, fiber vector)``."""
    return phi.base[:, 0].copy(), upsilon_array(phi.fiber)


def upsilon_via_pairing(phi: SemiHolonomicElement, rng=None, xi_higher=None):
    """Evaluate the alternating sum against a holonomic dual jet.

    For each fiber index ``i`` a dual jet with value ``e_i`` and random (or
    supplied, ``xi_higher[i]`` shaped ``(k, R)``) higher coefficients is
    paired with ``sum_j (-1)^j C(k, j) Phi^{(j, k - j)}``.
    """
    k = phi.k
    r = phi.fiber_dim
    tilde = upsilon_tilde_array(phi.fiber)
    if rng is None:
        rng = np.random.default_rng(0)
    out = np.empty(r)
    for i in range(r):
        xi = np.zeros((k + 1, r))
        xi[0, i] = 1.0
        xi[1:] = rng.standard_normal((k, r)) if xi_higher is None else xi_higher[i]
        xi_binary = xi[np.indices((2,) * k).sum(axis=0)] if k else xi[0]
        out[i] = pair_iterated_array(xi_binary, tilde, k)
    return out


def momenta(phi: SemiHolonomicElement) -> LiftedVectorElement:
    """Momentum map: a shape ``(k)`` lift over the truncated base."""
    k = phi.k
    fiber = momenta_array(phi.fiber)
    return LiftedVectorElement.from_tables(phi.base[:, : k + 1].T, fiber)


def nest(phi: SemiHolonomicElement, inner: int, outer: int) -> SemiHolonomicElement:
    """View an element of orders ``(inner + outer)^2`` as an element of orders
    ``(outer, outer)`` over the semi-holonomic bundle of orders ``(inner, inner)``.

    Fiber component ``(b, c, i)`` at outer position ``(s, u)`` reads
    ``y[s + b, u + c, i]``; the base chart of the inner bundle has
    coordinates ``x^{(b)}`` for ``b <= 2 inner``.
    """
    m, n = phi.orders
    if m != n or m != inner + outer:
        raise UsageError(f"cannot nest orders {phi.orders} as {inner} + {outer}")
    y = phi.fiber
    r = phi.fiber_dim
    fiber = np.empty((outer + 1, outer + 1, inner + 1, inner + 1, r))
    for s in range(outer + 1):
        for u in range(outer + 1):
            fiber[s, u] = y[s : s + inner + 1, u : u + inner + 1]
    dim = phi.dim
    base = np.empty((dim, 2 * inner + 1, 2 * outer + 1))
    for b in range(2 * inner + 1):
        base[:, b, :] = phi.base[:, b : b + 2 * outer + 1]
    return SemiHolonomicElement(
        base.reshape(dim * (2 * inner + 1), 2 * outer + 1),
        fiber.reshape(outer + 1, outer + 1, (inner + 1) ** 2 * r),
    )


def unnest(point: np.ndarray, fiber: np.ndarray, inner: int, dim: int, r: int):
    """Rebuild an inner semi-holonomic element from a nested point and fiber."""
    return SemiHolonomicElement(
        np.asarray(point).reshape(dim, 2 * inner + 1),
        np.asarray(fiber).reshape(inner + 1, inner + 1, r),
    )
