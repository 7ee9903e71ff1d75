"""Truncated multivariate Taylor arithmetic.

A :class:`JetScalar` is an element of ``R[v_1..v_r] / <v_j^(n_j+1)>``.  The
coefficient stored at multi-exponent ``e`` is the *derivative-style* value
``d^e f(0)`` (not divided by ``e!``), so products carry explicit Leibniz
weights::

    (a*b)[e] = sum_{d <= e} prod_j C(e_j, d_j) a[d] b[e - d]

Every value is immutable; all operations are pure.
"""

from __future__ import annotations

import itertools
import math
import numbers
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import HolonomyError, SingularityError, UsageError

MAX_COEFFICIENTS = 4096
HOLONOMY_TOL = 1e-12

__all__ = [
    "JetShape",
    "JetScalar",
    "as_shape",
    "seed_variable",
    "constant",
    "lift_univariate",
    "reinterpret",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "atan",
    "power",
    "ELEMENTARY_FUNCTIONS",
    "promote",
    "extend",
    "part",
    "truncate",
    "shift",
    "integer_power",
]


@dataclass(frozen=True)
class JetShape:
    """Truncation orders ``(n_1, ..., n_r)``; ``r == 0`` is a plain scalar."""

    orders: tuple[int, ...] = ()

    def __post_init__(self):
        orders = tuple(int(n) for n in self.orders)
        if any(n < 0 for n in orders):
            raise UsageError(f"orders must be non-negative, got {orders}")
        size = math.prod(n + 1 for n in orders)
        if size > MAX_COEFFICIENTS:
            raise UsageError(
                f"shape {orders} needs {size} coefficients (cap {MAX_COEFFICIENTS})"
            )
        object.__setattr__(self, "orders", orders)

    @property
    def rank(self) -> int:
        return len(self.orders)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.orders)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    @property
    def total_order(self) -> int:
        return sum(self.orders)

    def exponents(self):
        """Multi-exponents in lexicographic order."""
        return itertools.product(*(range(d) for d in self.dims))

    def __iter__(self):
        return iter(self.orders)

    def __len__(self):
        return len(self.orders)

    def __repr__(self):
        return f"JetShape{self.orders}"


def as_shape(shape) -> JetShape:
    if isinstance(shape, JetShape):
        return shape
    if isinstance(shape, numbers.Integral):
        return JetShape((int(shape),))
    return JetShape(tuple(shape))


@lru_cache(maxsize=None)
def _product_table(orders: tuple[int, ...]):
    """Index triples and Leibniz weights for the truncated product."""
    dims = tuple(n + 1 for n in orders)
    per_axis = []
    for n in orders:
        d, e, w = [], [], []
        for ee in range(n + 1):
            for dd in range(ee + 1):
                d.append(dd)
                e.append(ee)
                w.append(math.comb(ee, dd))
        per_axis.append((np.array(d), np.array(e), np.array(w, dtype=float)))
    grids = np.meshgrid(*(np.arange(len(p[0])) for p in per_axis), indexing="ij")
    grids = [g.ravel() for g in grids]
    delta = tuple(p[0][g] for p, g in zip(per_axis, grids))
    target = tuple(p[1][g] for p, g in zip(per_axis, grids))
    rest = tuple(t - d for t, d in zip(target, delta))
    weight = np.ones(len(grids[0]))
    for p, g in zip(per_axis, grids):
        weight = weight * p[2][g]
    i = np.ravel_multi_index(delta, dims)
    j = np.ravel_multi_index(rest, dims)
    k = np.ravel_multi_index(target, dims)
    return i, j, k, weight


@lru_cache(maxsize=None)
def _factorials(n: int) -> np.ndarray:
    return np.array([math.factorial(i) for i in range(n + 1)], dtype=float)


def _mul_raw(a: np.ndarray, b: np.ndarray, orders: tuple[int, ...]) -> np.ndarray:
    if not orders:
        return a * b
    if len(orders) == 1:
        # univariate: plain truncated convolution of Taylor-normalised data
        fac = _factorials(orders[0])
        return np.convolve(a / fac, b / fac)[: orders[0] + 1] * fac
    i, j, k, w = _product_table(orders)
    af = a.ravel()
    bf = b.ravel()
    out = np.bincount(k, weights=w * af[i] * bf[j], minlength=af.size)
    return out.reshape(a.shape)


def _frozen(arr) -> np.ndarray:
    if not isinstance(arr, np.ndarray):
        arr = np.asarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


class JetScalar:
    """Truncated Taylor polynomial with derivative-style coefficients.

    ``coeffs`` is an n-d array indexed directly by the multi-exponent.  A
    flat coefficient list (constructor input, :attr:`flat`) enumerates
    exponents with the first index varying fastest, so shape ``(1, 1)``
    reads ``(00, 10, 01, 11)``.
    """

    __slots__ = ("shape", "coeffs")
    __array_priority__ = 1000

    def __init__(self, shape, coeffs):
        shape = as_shape(shape)
        arr = np.array(coeffs, dtype=float)
        if arr.size != shape.size:
            raise UsageError(
                f"{shape} needs {shape.size} coefficients, got {arr.size}"
            )
        if arr.shape != shape.dims:
            # flat input lists the first exponent fastest: (00, 10, 01, 11)
            arr = np.ascontiguousarray(arr.reshape(shape.dims, order="F"))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "coeffs", _frozen(arr))

    @classmethod
    def _wrap(cls, shape: JetShape, arr: np.ndarray) -> "JetScalar":
        obj = object.__new__(cls)
        object.__setattr__(obj, "shape", shape)
        object.__setattr__(obj, "coeffs", _frozen(arr))
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("JetScalar is immutable")

    # -- inspection -------------------------------------------------------
    @property
    def value(self) -> float:
        """Constant term."""
        return float(self.coeffs.flat[0])

    @property
    def flat(self) -> np.ndarray:
        """Coefficients listed with the first exponent varying fastest."""
        return self.coeffs.ravel(order="F")

    def __getitem__(self, exponent) -> float:
        if isinstance(exponent, numbers.Integral):
            exponent = (exponent,)
        return float(self.coeffs[tuple(exponent)])

    def __repr__(self):
        return f"JetScalar({self.shape.orders}, {self.flat.tolist()})"

    def __float__(self):
        if self.shape.rank:
            raise TypeError("only shape-() jets convert to float")
        return self.value

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> np.ndarray | None:
        if isinstance(other, JetScalar):
            if other.shape is not self.shape and other.shape.orders != self.shape.orders:
                raise UsageError(f"shape mismatch: {self.shape} vs {other.shape}")
            return other.coeffs
        if isinstance(other, numbers.Real):
            return None
        return NotImplemented

    def __add__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return NotImplemented
        if c is None:
            out = self.coeffs.copy()
            out.flat[0] += other
            return JetScalar._wrap(self.shape, out)
        return JetScalar._wrap(self.shape, self.coeffs + c)

    __radd__ = __add__

    def __sub__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return NotImplemented
        if c is None:
            out = self.coeffs.copy()
            out.flat[0] -= other
            return JetScalar._wrap(self.shape, out)
        return JetScalar._wrap(self.shape, self.coeffs - c)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        return JetScalar._wrap(self.shape, -self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return NotImplemented
        if c is None:
            return JetScalar._wrap(self.shape, self.coeffs * other)
        return JetScalar._wrap(self.shape, _mul_raw(self.coeffs, c, self.shape.orders))

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = self._coerce(other)
        if c is NotImplemented:
            return NotImplemented
        if c is None:
            if other == 0:
                raise SingularityError("division by zero")
            return JetScalar._wrap(self.shape, self.coeffs / other)
        if not self.shape.rank:
            if c.flat[0] == 0:
                raise SingularityError("division by a non-unit jet")
            return JetScalar._wrap(self.shape, self.coeffs / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        if not isinstance(other, numbers.Real):
            return NotImplemented
        if not self.shape.rank:
            if self.value == 0:
                raise SingularityError("division by a non-unit jet")
            return JetScalar._wrap(self.shape, other / self.coeffs)
        return self.reciprocal() * other

    def reciprocal(self) -> "JetScalar":
        return lift_univariate("pow", self, -1)

    def __pow__(self, exponent):
        if isinstance(exponent, JetScalar):
            return exp(exponent * log(self))
        if isinstance(exponent, numbers.Integral):
            return integer_power(self, int(exponent))
        if isinstance(exponent, numbers.Real):
            if float(exponent).is_integer():
                return integer_power(self, int(exponent))
            return lift_univariate("pow", self, float(exponent))
        return NotImplemented

    def __rpow__(self, base):
        if not isinstance(base, numbers.Real):
            return NotImplemented
        return exp(self * log(float(base)))


def integer_power(a: JetScalar, n: int) -> JetScalar:
    """``a**n`` by repeated multiplication (reciprocal for ``n < 0``)."""
    if n < 0:
        return 1.0 / integer_power(a, -n)
    if n == 0:
        return constant(a.shape, 1.0)
    result = a
    for _ in range(n - 1):
        result = result * a
    return result


def constant(shape, value: float) -> JetScalar:
    shape = as_shape(shape)
    arr = np.zeros(shape.dims)
    arr.flat[0] = value
    return JetScalar._wrap(shape, arr)


def seed_variable(shape, value: float, generator_index: int) -> JetScalar:
    """``value + v_j`` for generator ``j = generator_index``."""
    shape = as_shape(shape)
    arr = np.zeros(shape.dims)
    arr.flat[0] = value
    if shape.rank == 0:
        return JetScalar._wrap(shape, arr)
    if not 0 <= generator_index < shape.rank:
        raise UsageError(
            f"generator index {generator_index} out of range for {shape}"
        )
    if shape.orders[generator_index] >= 1:
        unit = [0] * shape.rank
        unit[generator_index] = 1
        arr[tuple(unit)] = 1.0
    return JetScalar._wrap(shape, arr)


# -- elementary functions ---------------------------------------------------

def _taylor_coefficients(name: str, x0: float, n: int, c: float | None):
    """Normalised Taylor coefficients ``f^(m)(x0)/m!`` for ``m = 0..n``."""
    out = np.zeros(n + 1)
    if name == "exp":
        e = math.exp(x0)
        for m in range(n + 1):
            out[m] = e / math.factorial(m)
    elif name in ("sin", "cos"):
        s, co = math.sin(x0), math.cos(x0)
        cycle = (s, co, -s, -co) if name == "sin" else (co, -s, -co, s)
        for m in range(n + 1):
            out[m] = cycle[m % 4] / math.factorial(m)
    elif name == "log":
        if x0 <= 0:
            raise SingularityError(f"log of non-positive constant term {x0}")
        out[0] = math.log(x0)
        for m in range(1, n + 1):
            out[m] = (-1) ** (m - 1) / (m * x0**m)
    elif name in ("pow", "sqrt"):
        if name == "sqrt":
            c = 0.5
        integral = float(c).is_integer()
        if not integral and x0 < 0:
            raise SingularityError(f"non-integer power of negative value {x0}")
        if x0 == 0 and (c < 0 or (not integral and n > 0)):
            raise SingularityError(f"power {c} is singular at zero")
        coef = 1.0
        for m in range(n + 1):
            if integral and c >= 0 and m > c:
                break
            out[m] = coef * x0 ** (c - m) if (c - m != 0 or x0 != 0) else coef
            coef *= (c - m) / (m + 1)
    elif name == "atan":
        out[0] = math.atan(x0)
        # series of 1/(1 + (x0+s)^2) then integrate termwise
        d0, d1 = 1.0 + x0 * x0, 2.0 * x0
        q = np.zeros(max(n, 1))
        q[0] = 1.0 / d0
        for m in range(1, len(q)):
            prev2 = q[m - 2] if m >= 2 else 0.0
            q[m] = -(d1 * q[m - 1] + prev2) / d0
        for m in range(1, n + 1):
            out[m] = q[m - 1] / m
    else:
        raise UsageError(f"unknown elementary function {name!r}")
    return out


_MATH = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": math.sqrt,
    "atan": math.atan,
}

ELEMENTARY_FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt", "pow", "atan")


def lift_univariate(name: str, a: JetScalar, c: float | None = None) -> JetScalar:
    """Taylor composition ``f(a)`` truncated to ``a.shape``.

    ``name`` is one of ``exp, log, sin, cos, sqrt, pow, atan``; ``pow``
    needs the exponent ``c``.
    """
    if name == "pow" and c is None:
        raise UsageError("pow needs an exponent")
    x0 = a.value
    shape = a.shape
    if shape.rank == 0:
        return JetScalar._wrap(shape, np.array(_scalar_eval(name, x0, c)))
    n = shape.total_order
    coef = _taylor_coefficients(name, x0, n, c)
    h = a.coeffs.copy()
    h.flat[0] = 0.0
    result = np.zeros(shape.dims)
    result.flat[0] = coef[n]
    for m in range(n - 1, -1, -1):
        result = _mul_raw(result, h, shape.orders)
        result.flat[0] += coef[m]
    return JetScalar._wrap(shape, result)


def _scalar_eval(name: str, x: float, c: float | None = None) -> float:
    try:
        if name == "pow":
            if float(c).is_integer():
                if x == 0 and c < 0:
                    raise SingularityError("negative power of zero")
                return float(x) ** int(c)
            if x < 0:
                raise SingularityError(f"non-integer power of negative value {x}")
            return float(x) ** c
        if name == "log" and x <= 0:
            raise SingularityError(f"log of non-positive value {x}")
        if name == "sqrt" and x < 0:
            raise SingularityError(f"sqrt of negative value {x}")
        return _MATH[name](x)
    except (ValueError, OverflowError, ZeroDivisionError) as exc:
        raise SingularityError(f"{name}({x}): {exc}") from exc


def _dispatch(name):
    def fn(x):
        if isinstance(x, JetScalar):
            return lift_univariate(name, x)
        return _scalar_eval(name, float(x))

    fn.__name__ = name
    fn.__doc__ = f"{name} of a float or a JetScalar."
    return fn


exp = _dispatch("exp")
log = _dispatch("log")
sin = _dispatch("sin")
cos = _dispatch("cos")
sqrt = _dispatch("sqrt")
atan = _dispatch("atan")


def power(x, c: float):
    """``x**c`` for a constant exponent, on floats or jets."""
    if isinstance(x, JetScalar):
        return lift_univariate("pow", x, c)
    return _scalar_eval("pow", float(x), c)


# -- re-indexing between shapes ----------------------------------------------

def _group_axes(source: tuple[int, ...], target: tuple[int, ...]):
    """Split ``target`` axes into consecutive groups summing to each source order."""
    groups = []
    pos = 0
    for n in source:
        start = pos
        total = 0
        while total < n:
            if pos >= len(target):
                raise UsageError(f"cannot split {source} into {target}")
            total += target[pos]
            pos += 1
        if total != n:
            raise UsageError(f"cannot split {source} into {target}")
        groups.append(tuple(range(start, pos)))
    if pos != len(target):
        if any(target[p] for p in range(pos, len(target))):
            raise UsageError(f"cannot split {source} into {target}")
        groups[-1] = groups[-1] + tuple(range(pos, len(target))) if groups else ()
    return groups


def _split_index(source, target):
    groups = _group_axes(source, target)
    dims = tuple(n + 1 for n in target)
    idx = np.indices(dims).reshape(len(dims), -1) if dims else np.zeros((0, 1), int)
    src = tuple(idx[list(g)].sum(axis=0) if g else np.zeros(idx.shape[1], int)
                for g in groups)
    return src, dims


def split_coeffs(arr: np.ndarray, source, target) -> np.ndarray:
    """Holonomic re-indexing ``out[e] = arr[|e_group|...]`` along leading axes.

    Trailing axes of ``arr`` beyond ``len(source)`` are carried along.
    """
    source = tuple(source)
    target = tuple(target)
    src, dims = _split_index(source, target)
    rest = arr.shape[len(source):]
    if not source:
        return np.broadcast_to(arr, dims + rest).copy()
    return arr[src].reshape(dims + rest)


def holonomic_defect(arr: np.ndarray, source, target) -> float:
    """Normalised spread of coefficients sharing a total degree per group."""
    source = tuple(source)
    target = tuple(target)
    groups = _group_axes(source, target)
    dims = tuple(n + 1 for n in target)
    idx = np.indices(dims).reshape(len(dims), -1)
    keys = np.stack([idx[list(g)].sum(axis=0) for g in groups]) if groups else None
    flat = arr.reshape((int(np.prod(dims)),) + arr.shape[len(target):])
    scale = 1.0 + float(np.max(np.abs(flat))) if flat.size else 1.0
    if keys is None:
        return 0.0
    first = {}
    worst = 0.0
    for pos in range(flat.shape[0]):
        key = tuple(keys[:, pos])
        if key in first:
            diff = float(np.max(np.abs(flat[pos] - flat[first[key]]), initial=0.0))
            worst = max(worst, diff)
        else:
            first[key] = pos
    return worst / scale


def merge_coeffs(arr: np.ndarray, source, target, tol: float = HOLONOMY_TOL) -> np.ndarray:
    """Inverse of :func:`split_coeffs` on holonomic-symmetric input.

    ``source`` is the fine (iterated) layout, ``target`` the coarse one.
    """
    source = tuple(source)
    target = tuple(target)
    if holonomic_defect(arr, target, source) > tol:
        raise HolonomyError("coefficients are not holonomic-symmetric")
    groups = _group_axes(target, source)
    tdims = tuple(n + 1 for n in target)
    rest = arr.shape[len(source):]
    out = np.empty(tdims + rest)
    for texp in itertools.product(*(range(d) for d in tdims)):
        fine = []
        for g, total in zip(groups, texp):
            remaining = total
            for axis in g:
                take = min(remaining, source[axis])
                fine.append(take)
                remaining -= take
        out[texp] = arr[tuple(fine)]
    return out


def reinterpret(a: JetScalar, from_shape, to_shape, mode: str) -> JetScalar:
    """Re-index ``a`` between layouts.

    ``split`` realises the holonomic inclusion ``x^(e) := x^(|e|)``,
    ``merge`` is its inverse on holonomic-symmetric input and ``transpose``
    swaps the two exponents of a rank-2 jet.
    """
    src = as_shape(from_shape)
    dst = as_shape(to_shape)
    if a.shape != src:
        raise UsageError(f"jet has shape {a.shape}, expected {src}")
    if mode == "split":
        return JetScalar._wrap(dst, split_coeffs(a.coeffs, src.orders, dst.orders))
    if mode == "merge":
        return JetScalar._wrap(dst, merge_coeffs(a.coeffs, src.orders, dst.orders))
    if mode == "transpose":
        if src.rank != 2 or dst.orders != src.orders[::-1]:
            raise UsageError(f"transpose needs (m, n) -> (n, m), got {src} -> {dst}")
        return JetScalar._wrap(dst, np.ascontiguousarray(a.coeffs.T))
    raise UsageError(f"unknown reinterpret mode {mode!r}")


# -- slicing helpers used by the bundle and geometry layers ------------------

def promote(x, shape) -> JetScalar:
    """Turn a float into a constant jet; pass jets of ``shape`` through."""
    shape = as_shape(shape)
    if isinstance(x, JetScalar):
        if x.shape != shape:
            raise UsageError(f"expected shape {shape}, got {x.shape}")
        return x
    return constant(shape, float(x))


def extend(a: JetScalar, order: int = 1) -> JetScalar:
    """Embed ``a`` into a shape with one extra trailing generator."""
    shape = JetShape(a.shape.orders + (order,))
    arr = np.zeros(shape.dims)
    arr[..., 0] = a.coeffs
    return JetScalar._wrap(shape, arr)


def part(a: JetScalar, index: int) -> JetScalar:
    """Coefficient ``index`` along the last generator, as a jet of the rest."""
    if a.shape.rank == 0:
        raise UsageError("part needs at least one generator")
    shape = JetShape(a.shape.orders[:-1])
    return JetScalar._wrap(shape, np.ascontiguousarray(a.coeffs[..., index]))


def truncate(a: JetScalar, orders) -> JetScalar:
    """Drop coefficients beyond ``orders`` (componentwise <= current orders)."""
    shape = as_shape(orders)
    if shape.rank != a.shape.rank or any(
        n > m for n, m in zip(shape.orders, a.shape.orders)
    ):
        raise UsageError(f"cannot truncate {a.shape} to {shape}")
    index = tuple(slice(0, d) for d in shape.dims)
    return JetScalar._wrap(shape, np.ascontiguousarray(a.coeffs[index]))


def shift(a: JetScalar) -> JetScalar:
    """Time derivative of a univariate jet: order ``n`` to order ``n - 1``."""
    if a.shape.rank != 1 or a.shape.orders[0] == 0:
        raise UsageError(f"shift needs a univariate jet of order >= 1, got {a.shape}")
    shape = JetShape((a.shape.orders[0] - 1,))
    return JetScalar._wrap(shape, a.coeffs[1:].copy())
