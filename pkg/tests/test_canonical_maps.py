import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jetvar.bundles import (
    HigherVelocity,
    LiftedVectorElement,
    SemiHolonomicElement,
    holonomic_include,
)
from jetvar.canonical_maps import (
    CotangentLift,
    CovectorVelocity,
    dual_eps,
    dual_eps_inverse,
    flip_kappa,
    flip_kappa_inverse,
    momenta,
    pairing_higher,
    pairing_iterated,
    pairing_lifted,
    project_pk,
    upsilon,
    upsilon_via_pairing,
)
from jetvar.errors import HolonomyError, PairingDomainError, UsageError
from jetvar.identities import (
    check_complete_lift,
    check_functoriality,
    check_general_recurrence,
    check_identity_d,
    check_kappa_eps_duality,
    check_pk_section,
    check_recurrence_b,
    check_recurrence_c,
    check_well_defined,
    identity_d_terms,
    make_rng,
    random_semi_holonomic,
    recurrence_c_terms,
)

K_DIM = [(k, d) for k in range(1, 4) for d in range(1, 4)]


def lifted(fiber_flat, orders, base=None):
    dims = tuple(n + 1 for n in orders)
    fiber = np.asarray(fiber_flat, float).reshape(dims, order="F")[..., None]
    base = np.zeros(dims + (1,)) if base is None else base
    return LiftedVectorElement.from_tables(base, fiber)


def semi(fiber_flat, k, base=None):
    fiber = np.asarray(fiber_flat, float).reshape((k + 1, k + 1), order="F")[..., None]
    base = np.zeros((1, 2 * k + 1)) if base is None else base
    return SemiHolonomicElement(base, fiber)


# -- pairings ----------------------------------------------------------------------

def test_pairing_examples():
    assert pairing_iterated(lifted([1, 2], (1,)), lifted([3, 4], (1,))) == 10
    assert pairing_higher(lifted([1, 2], (1,)), lifted([3, 4], (1,))) == 10
    assert pairing_higher(lifted([1, 0, 0], (2,)), lifted([0, 0, 5], (2,))) == 5


def test_iterated_pairing_top_component_reads_bottom():
    xi = lifted([0, 0, 0, 0, 0, 0, 0, 1], (1, 1, 1))
    y = lifted(np.arange(8.0) + 3.0, (1, 1, 1))
    assert pairing_iterated(xi, y) == 3.0


def test_pairing_is_bilinear():
    rng = np.random.default_rng(0)
    xi = lifted(rng.standard_normal(4), (3,))
    y = lifted(rng.standard_normal(4), (3,))
    xi2 = lifted(2 * xi.fiber_table[:, 0], (3,))
    assert pairing_higher(xi2, y) == pytest.approx(2 * pairing_higher(xi, y), rel=1e-15)


def test_pairing_rejects_different_bases():
    base = np.zeros((2, 1))
    other = np.array([[0.0], [1.0]])
    with pytest.raises(PairingDomainError):
        pairing_higher(lifted([1, 2], (1,), base), lifted([1, 2], (1,), other))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_higher_pairing_is_restricted_iterated_pairing(k):
    rng = np.random.default_rng(k)
    base = rng.standard_normal((k + 1, 2))
    xi = LiftedVectorElement.from_tables(base, rng.standard_normal((k + 1, 3)))
    y = LiftedVectorElement.from_tables(base, rng.standard_normal((k + 1, 3)))
    inc = (1,) * k
    lhs = pairing_higher(xi, y)
    assert lhs == pytest.approx(pairing_iterated(holonomic_include(xi, inc), holonomic_include(y, inc)), rel=1e-12)
    assert lhs == pytest.approx(pairing_lifted(xi, y), rel=1e-12)


@pytest.mark.parametrize("k", [0, 1, 2, 3, 4])
def test_higher_pairing_is_non_degenerate(k):
    base = np.zeros((k + 1, 1))
    gram = np.empty((k + 1, k + 1))
    for i in range(k + 1):
        for j in range(k + 1):
            gram[i, j] = pairing_higher(
                LiftedVectorElement.from_tables(base, np.eye(k + 1)[i][:, None]),
                LiftedVectorElement.from_tables(base, np.eye(k + 1)[j][:, None]),
            )
    assert abs(np.linalg.det(gram)) > 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_complete_lift_property(seed, k):
    assert check_complete_lift(make_rng(seed), k, 2) <= 1e-12


# -- flips and duals -------------------------------------------------------------------

def test_flip_is_a_transpose():
    arr = np.arange(6.0).reshape(1, 3, 2)  # shape (2, 1)
    v = HigherVelocity.from_array(arr)
    w = flip_kappa(v)
    assert w.shape.orders == (1, 2)
    assert w.coords[0][(1, 2)] == v.coords[0][(2, 1)]
    assert np.array_equal(flip_kappa(flip_kappa_inverse(w)).array, w.array)
    sym = holonomic_include(HigherVelocity.from_array([[1.0, 2.0, 3.0]]), (1, 1))
    assert np.array_equal(flip_kappa(sym).array, sym.array)
    with pytest.raises(UsageError):
        flip_kappa(HigherVelocity.from_array(np.zeros((1, 3, 3))))


@pytest.mark.parametrize(
    "p_lower, p_upper",
    [([6, 4, 2], [2, 2, 6]), ([1.5, -2.0], [-2.0, 1.5])],
)
def test_dual_eps_examples(p_lower, p_upper):
    k = len(p_lower) - 1
    psi = CotangentLift(np.zeros((1, k + 1)), [p_lower])
    out = dual_eps(psi)
    assert np.array_equal(out.p[0], p_upper)
    assert np.array_equal(dual_eps_inverse(out).p, psi.p)


@pytest.mark.parametrize("k, dim", K_DIM)
def test_kappa_eps_duality(k, dim):
    rng = make_rng(11, k * 10 + dim)
    assert max(check_kappa_eps_duality(rng, k, dim) for _ in range(50)) <= 1e-12


def test_covector_velocity_accessors():
    cv = CovectorVelocity.from_arrays([[1.0, 2.0]], [[3.0, 4.0]])
    assert cv.k == 1 and np.array_equal(cv.x, [[1.0, 2.0]]) and np.array_equal(cv.p, [[3.0, 4.0]])


# -- P_k ----------------------------------------------------------------------------------

def test_pk_example():
    out = project_pk(lifted([1, 2, 4, 5], (1, 1)))
    assert np.array_equal(out.fiber_table[:, 0], [1, 3, 5])


def test_pk_requires_holonomic_base():
    base = np.zeros((2, 2, 1))
    base[1, 0, 0] = 1.0
    with pytest.raises(HolonomyError):
        project_pk(lifted([1, 2, 4, 5], (1, 1), base))


@pytest.mark.parametrize("k, dim", K_DIM)
def test_pk_undoes_inclusion(k, dim):
    rng = make_rng(12, k * 10 + dim)
    assert max(check_pk_section(rng, k, dim, dim) for _ in range(50)) <= 1e-12


def test_pk_is_linear():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal(8), rng.standard_normal(8)
    pa, pb = (project_pk(lifted(x, (1, 1, 1))).fiber_table for x in (a, b))
    assert np.allclose(project_pk(lifted(a + b, (1, 1, 1))).fiber_table, pa + pb, rtol=1e-14)


# -- Upsilon and mu ---------------------------------------------------------------------------

def test_upsilon_examples():
    assert upsilon(semi([7, 2, 5, 9], 1))[1][0] == 3.0
    y = np.zeros((3, 3, 1))
    y[0, 2], y[1, 1], y[2, 0] = 1.0, 2.0, 3.0
    assert upsilon(SemiHolonomicElement(np.zeros((1, 5)), y))[1][0] == 0.0


def test_upsilon_ignores_lower_degrees():
    rng = np.random.default_rng(5)
    phi = random_semi_holonomic(rng, 2, 1)
    fiber = np.array(phi.fiber)
    fiber[0, 0] += 10.0
    fiber[1, 0] -= 4.0
    assert np.array_equal(upsilon(SemiHolonomicElement(phi.base, fiber))[1], upsilon(phi)[1])


def test_upsilon_returns_base_point():
    base = np.array([[1.5, 2.0, 3.0]])
    assert upsilon(semi([7, 2, 5, 9], 1, base))[0][0] == 1.5


def test_upsilon_via_pairing_with_supplied_extension():
    phi = semi([7, 2, 5, 9], 1)
    assert upsilon_via_pairing(phi, xi_higher=[[[123.0]]])[0] == pytest.approx(3.0)


def test_momenta_examples():
    m = momenta(semi([1, 2, 4, 5], 1))
    assert np.array_equal(m.fiber_table[:, 0], [1, 6])
    phi0 = SemiHolonomicElement(np.array([[0.5]]), np.array([[[2.0, -1.0]]]))
    assert np.array_equal(momenta(phi0).fiber_table, [[2.0, -1.0]])


def test_momenta_are_linear():
    rng = np.random.default_rng(6)
    base = rng.standard_normal((2, 7))
    a, b = rng.standard_normal((4, 4, 2)), rng.standard_normal((4, 4, 2))
    ma, mb, mab = (momenta(SemiHolonomicElement(base, f)).fiber_table for f in (a, b, a + b))
    assert np.allclose(mab, ma + mb, rtol=1e-13, atol=1e-13)


# -- identities on 50 random elements per (k, dim) ------------------------------------

@pytest.mark.parametrize("k, dim", K_DIM)
def test_integration_by_parts_identities(k, dim):
    rng = make_rng(2024, k * 10 + dim)
    worst = 0.0
    for _ in range(50):
        phi = random_semi_holonomic(rng, k, dim)
        worst = max(
            worst,
            check_well_defined(phi, rng),
            check_recurrence_b(phi),
            check_recurrence_c(phi, rng),
            check_identity_d(phi, rng),
        )
    assert worst <= 1e-12


@pytest.mark.parametrize("inner, outer", [(1, 1), (1, 2), (2, 1)])
def test_general_recurrence(inner, outer):
    assert check_general_recurrence(inner, outer) <= 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_functoriality(k):
    rng = make_rng(77, k)
    assert max(check_functoriality(rng, k, 2, 2) for _ in range(20)) <= 1e-9


@pytest.mark.parametrize("k", [1, 2, 3])
def test_recurrence_terms_are_not_trivial(k):
    # both right-hand terms of (c) and (d) contribute, so neither identity holds vacuously
    rng = make_rng(1, k)
    phi = random_semi_holonomic(rng, k, 2)
    xi = rng.standard_normal((k + 1, 2))
    for terms in (recurrence_c_terms, identity_d_terms):
        lhs, force_term, rest = terms(phi.fiber, xi)
        assert abs(force_term) > 1e-3 and abs(rest) > 1e-3
        assert lhs == pytest.approx(force_term + rest, rel=1e-12)
        assert abs(lhs - rest) > 1e-3
