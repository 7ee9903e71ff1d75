"""Coordinate points of higher tangent bundles and their vector-bundle lifts.

Everything lives in one global chart ``R^dim``.  A point of the iterated
bundle ``T^{n_1}...T^{n_r}M`` is a :class:`HigherVelocity`: one jet of shape
``(n_1, ..., n_r)`` per chart coordinate.  Lifting a vector bundle adds a
fiber of jets of the same shape (:class:`LiftedVectorElement`).  The
semi-holonomic bundle used by the integration-by-parts maps keeps a single
``2k``-velocity as base and a doubly indexed fiber
(:class:`SemiHolonomicElement`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import UsageError
from .weil_algebra import (
    HOLONOMY_TOL,
    JetScalar,
    JetShape,
    as_shape,
    holonomic_defect,
    promote,
    seed_variable,
    split_coeffs,
)

CurveEvaluator = Callable[[JetScalar], Sequence]
ChartFunction = Callable[[Sequence], object]

MAX_CURVE_ORDER = 24

__all__ = [
    "HigherVelocity",
    "LiftedVectorElement",
    "SemiHolonomicElement",
    "curve_jet",
    "curve_derivatives",
    "alpha_lift_eval",
    "project",
    "holonomic_include",
    "is_holonomic",
    "MAX_CURVE_ORDER",
]


def _stack(jets: Sequence[JetScalar]) -> np.ndarray:
    """Exponent-first array ``(*dims, n)`` from ``n`` jets."""
    if not jets:
        raise UsageError("need at least one coordinate")
    return np.stack([j.coeffs for j in jets], axis=-1)


def _unstack(shape: JetShape, arr: np.ndarray) -> tuple[JetScalar, ...]:
    arr = np.asarray(arr, dtype=float)
    if arr.shape[:-1] != shape.dims:
        raise UsageError(f"array of shape {arr.shape} does not fit {shape}")
    return tuple(JetScalar(shape, np.ascontiguousarray(arr[..., i]))
                 for i in range(arr.shape[-1]))


@dataclass(frozen=True)
class HigherVelocity:
    """Coordinates ``x^{a,(e)}`` of a point of ``T^{n_1..n_r} R^dim``."""

    coords: tuple[JetScalar, ...]

    def __post_init__(self):
        coords = tuple(self.coords)
        if not coords:
            raise UsageError("a velocity needs at least one coordinate")
        shape = coords[0].shape
        if any(c.shape != shape for c in coords):
            raise UsageError("all coordinates must share one jet shape")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def from_array(cls, arr) -> "HigherVelocity":
        """Build from an array shaped ``(dim, n_1 + 1, ..., n_r + 1)``."""
        arr = np.asarray(arr, dtype=float)
        shape = JetShape(tuple(d - 1 for d in arr.shape[1:]))
        return cls(tuple(JetScalar(shape, np.ascontiguousarray(row)) for row in arr))

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def shape(self) -> JetShape:
        return self.coords[0].shape

    @property
    def array(self) -> np.ndarray:
        """Coordinates as ``(dim, *dims)``."""
        return np.stack([c.coeffs for c in self.coords])

    @property
    def table(self) -> np.ndarray:
        """Coordinates as ``(*dims, dim)``: exponent axes first."""
        return _stack(self.coords)

    @property
    def point(self) -> np.ndarray:
        """Base point ``x^{a,(0)}``."""
        return np.array([c.value for c in self.coords])


@dataclass(frozen=True)
class LiftedVectorElement:
    """Point ``(x^{a,(e)}, y^{i,(e)})`` of a lifted vector bundle."""

    base: HigherVelocity
    fiber: tuple[JetScalar, ...]

    def __post_init__(self):
        fiber = tuple(self.fiber)
        if not fiber:
            raise UsageError("fiber rank must be positive")
        if any(f.shape != self.base.shape for f in fiber):
            raise UsageError("fiber jets must share the base shape")
        object.__setattr__(self, "fiber", fiber)

    @classmethod
    def from_tables(cls, base_table, fiber_table):
        """Build from exponent-first arrays ``(*dims, dim)`` and ``(*dims, R)``."""
        base_table = np.asarray(base_table, dtype=float)
        shape = JetShape(tuple(d - 1 for d in base_table.shape[:-1]))
        return cls(HigherVelocity(_unstack(shape, base_table)),
                   _unstack(shape, fiber_table))

    @property
    def shape(self) -> JetShape:
        return self.base.shape

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def fiber_dim(self) -> int:
        return len(self.fiber)

    @property
    def fiber_table(self) -> np.ndarray:
        """Fiber as ``(*dims, R)``."""
        return _stack(self.fiber)


@dataclass(frozen=True)
class SemiHolonomicElement:
    """Point of the semi-holonomic bundle of orders ``(m, n)``.

    ``base`` is a genuine ``(m+n)``-velocity, shaped ``(dim, m+n+1)``;
    ``fiber[b, c, i]`` is ``y^{i,(b,c)}`` with ``b`` the outer order.
    """

    base: np.ndarray
    fiber: np.ndarray

    def __post_init__(self):
        base = np.array(self.base, dtype=float)
        fiber = np.array(self.fiber, dtype=float)
        if base.ndim != 2 or fiber.ndim != 3:
            raise UsageError("base must be (dim, m+n+1) and fiber (m+1, n+1, R)")
        m, n = fiber.shape[0] - 1, fiber.shape[1] - 1
        if base.shape[1] != m + n + 1:
            raise UsageError(
                f"base carries order {base.shape[1] - 1}, fiber needs {m + n}"
            )
        base.flags.writeable = False
        fiber.flags.writeable = False
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "fiber", fiber)

    @property
    def orders(self) -> tuple[int, int]:
        return self.fiber.shape[0] - 1, self.fiber.shape[1] - 1

    @property
    def k(self) -> int:
        m, n = self.orders
        if m != n:
            raise UsageError(f"element has unequal orders {self.orders}")
        return m

    @property
    def dim(self) -> int:
        return self.base.shape[0]

    @property
    def fiber_dim(self) -> int:
        return self.fiber.shape[2]

    def as_iterated(self) -> LiftedVectorElement:
        """The same point as a ``(m, n)``-velocity with holonomic base."""
        m, n = self.orders
        base_table = split_coeffs(self.base.T, (m + n,), (m, n))
        return LiftedVectorElement.from_tables(base_table, self.fiber)


# -- operations ----------------------------------------------------------------

def curve_jet(gamma: CurveEvaluator, t: float, m: int) -> HigherVelocity:
    """Taylor data ``j^m_t gamma`` of a jet-capable curve."""
    if not 0 <= m <= MAX_CURVE_ORDER:
        raise UsageError(f"curve order {m} outside 0..{MAX_CURVE_ORDER}")
    shape = JetShape((m,))
    tau = seed_variable(shape, float(t), 0)
    values = gamma(tau)
    return HigherVelocity(tuple(promote(v, shape) for v in values))


def curve_derivatives(gamma: CurveEvaluator, t: float, m: int) -> np.ndarray:
    """``x^{a,(j)}`` of ``gamma`` at ``t`` as an array ``(dim, m + 1)``."""
    return curve_jet(gamma, t, m).array


def alpha_lift_eval(f: ChartFunction, v: HigherVelocity, alpha: int) -> float:
    """Value of the lift ``f^{(alpha)}`` at the ``k``-velocity ``v``."""
    if v.shape.rank != 1:
        raise UsageError(f"alpha lifts need a shape (k) velocity, got {v.shape}")
    k = v.shape.orders[0]
    if not 0 <= alpha <= k:
        raise UsageError(f"alpha = {alpha} outside 0..{k}")
    value = promote(f(list(v.coords)), v.shape)
    return value[alpha]


def _truncate_table(table: np.ndarray, dims) -> np.ndarray:
    return np.ascontiguousarray(table[tuple(slice(0, d) for d in dims)])


def project(v, to_orders):
    """Truncate ``v`` to lower orders.

    Works for :class:`HigherVelocity`, :class:`LiftedVectorElement` and
    :class:`SemiHolonomicElement`; the last keeps base order ``m + n``.
    """
    to = tuple(int(n) for n in (to_orders if np.ndim(to_orders) else (to_orders,)))
    if isinstance(v, SemiHolonomicElement):
        m, n = v.orders
        if len(to) != 2 or to[0] > m or to[1] > n or min(to) < 0:
            raise UsageError(f"cannot project orders {(m, n)} to {to}")
        return SemiHolonomicElement(
            v.base[:, : to[0] + to[1] + 1], v.fiber[: to[0] + 1, : to[1] + 1]
        )
    shape = v.shape
    if len(to) != shape.rank or any(a > b or a < 0 for a, b in zip(to, shape.orders)):
        raise UsageError(f"cannot project {shape} to {to}")
    dims = tuple(n + 1 for n in to)
    if isinstance(v, HigherVelocity):
        return HigherVelocity.from_array(
            np.stack([_truncate_table(c.coeffs, dims) for c in v.coords])
        )
    if isinstance(v, LiftedVectorElement):
        return LiftedVectorElement.from_tables(
            _truncate_table(v.base.table, dims), _truncate_table(v.fiber_table, dims)
        )
    raise UsageError(f"cannot project {type(v).__name__}")


def holonomic_include(v, target_orders):
    """Holonomic inclusion: ``x^{(e)} := x^{(|e|)}`` grouped by total degree.

    ``target_orders`` must sum (group-wise) to the orders of ``v``; for a
    shape ``(k + l)`` velocity use ``(l, k)``.
    """
    target = tuple(as_shape(target_orders).orders)
    if isinstance(v, HigherVelocity):
        table = split_coeffs(v.table, v.shape.orders, target)
        return HigherVelocity(_unstack(JetShape(target), table))
    if isinstance(v, LiftedVectorElement):
        src = v.shape.orders
        return LiftedVectorElement.from_tables(
            split_coeffs(v.base.table, src, target),
            split_coeffs(v.fiber_table, src, target),
        )
    raise UsageError(f"cannot include {type(v).__name__}")


def is_holonomic(w, source_orders=None, tol: float = HOLONOMY_TOL) -> bool:
    """Whether ``w`` lies in the image of the holonomic inclusion.

    By default all generators of ``w`` are merged into one; pass
    ``source_orders`` for a partial merge.  For lifted elements only the
    base is tested.
    """
    if isinstance(w, LiftedVectorElement):
        w = w.base
    if isinstance(w, JetScalar):
        table = w.coeffs[..., None]
        orders = w.shape.orders
    elif isinstance(w, HigherVelocity):
        table = w.table
        orders = w.shape.orders
    else:
        raise UsageError(f"cannot test {type(w).__name__}")
    if source_orders is None:
        source_orders = (sum(orders),)
    return holonomic_defect(table, tuple(source_orders), orders) <= tol
