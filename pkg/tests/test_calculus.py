import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qbtrace import calculus as C
from qbtrace import triple
from qbtrace.errors import DepthExceeded, DimensionMismatch, SingularInverse, StencilHitsSpectrum
from qbtrace.models import ModelConfig, build, build_sl1d

from conftest import built, shipped_models

MODELS = shipped_models()
IDS = [c.kind for c, _ in MODELS]


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


# ------------------------------------------------------- micro model values


def test_weyl_derivatives_micro(micro):
    # M(lam) = I/2 - (2/lam) J with J the all-ones matrix
    d1 = C.derivative(C.Weyl(), 1, micro, 4.0)
    np.testing.assert_allclose(d1, np.full((2, 2), 0.125), atol=1e-12)
    d2 = C.derivative(C.Weyl(), 2, micro, 4.0)
    np.testing.assert_allclose(d2, np.full((2, 2), -1 / 16), atol=1e-12)


def micro_weyl_closed_form(lam):
    # interior node u1, boundary u0, u2: (8 - lam) u1 = 4(u0 + u2), Neumann data 2(u0 - u1), 2(u2 - u1)
    a = np.array([[2.0, -2.0, 0.0], [0.0, -2.0, 2.0], [-4.0, 8.0 - lam, -4.0]])
    sol = np.linalg.solve(a, np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]))
    return sol[[0, 2], :]


def test_micro_weyl_matches_hand_algebra(micro):
    for lam in (4.0, -1.0, 2 + 1j):
        np.testing.assert_allclose(C.evaluate(C.Weyl(), micro, lam), micro_weyl_closed_form(lam), atol=1e-12)


def test_inverse_weyl_derivative_micro_value(micro):
    np.testing.assert_allclose(C.derivative(C.WeylInv(), 1, micro, 4.0), np.full((2, 2), -0.5), atol=1e-12)


def test_second_weyl_derivative_through_neumann_resolvent(micro):
    g = C.evaluate(C.Gamma(), micro, 4.0)
    gs = C.evaluate(C.GammaStar(), micro, 4.0)
    np.testing.assert_allclose(C.derivative(C.Weyl(), 2, micro, 4.0), 2 * gs @ np.array([[-0.25]]) @ g, atol=1e-12)


def test_inverse_weyl_derivative_micro(micro):
    # (M^-1)' = -M^-1 M' M^-1
    m = micro_weyl_closed_form(4.0)
    minv = np.linalg.inv(m)
    expect = -minv @ np.full((2, 2), 0.125) @ minv
    np.testing.assert_allclose(C.derivative(C.WeylInv(), 1, micro, 4.0), expect, atol=1e-12)


# ---------------------------------------------------------- Leibniz tables


def test_leibniz_binary():
    assert C.leibniz_expand(2, 2) == {(2, 0): 1, (1, 1): 2, (0, 2): 1}


def test_leibniz_binary_order_one():
    assert C.leibniz_expand(1, 2) == {(1, 0): 1, (0, 1): 1}


def test_leibniz_ternary_order_two():
    t = C.leibniz_expand(2, 3)
    assert len(t) == 6
    assert t[(2, 0, 0)] == 1 and t[(1, 1, 0)] == 2 and t[(0, 1, 1)] == 2


def test_leibniz_ternary_order_one():
    assert C.leibniz_expand(1, 3) == {(1, 0, 0): 1, (0, 1, 0): 1, (0, 0, 1): 1}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 7), st.integers(1, 5))
def test_leibniz_coefficients_sum_to_power(order, arity):
    table = C.leibniz_expand(order, arity)
    assert sum(table.values()) == arity**order
    assert len(table) == math.comb(order + arity - 1, arity - 1)
    assert all(sum(k) == order for k in table)


def test_leibniz_validation():
    with pytest.raises(ValueError):
        C.leibniz_expand(-1, 2)


# ------------------------------------------------------- structural identities


@pytest.mark.parametrize("cfg,specs", MODELS, ids=IDS)
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_weyl_derivative_matches_gamma_product_route(cfg, specs, k):
    """M' = gamma(conj lam)* gamma(lam), so M^(k) = d^(k-1)(gamma* gamma) by the product rule."""
    tr = build(cfg)
    lam = -1.3 + 0.4j
    a = C.derivative(C.Weyl(), k, tr, lam)
    b = C.derivative(C.Product((C.GammaStar(), C.Gamma())), k - 1, tr, lam)
    assert rel(a, b) <= 1e-10


@pytest.mark.parametrize("cfg,specs", MODELS, ids=IDS)
def test_weyl_derivative_against_dense_resolvent(cfg, specs):
    tr = build(cfg)
    dense = tr.to_dense()
    lam = -0.8 + 0.3j
    an = triple.restrict_to_kernel(dense, "gamma0")
    res = np.linalg.inv(an - lam * np.eye(an.shape[0]))
    g = triple.gamma(tr, lam)
    gs = C.evaluate(C.GammaStar(), tr, lam)
    for k in range(1, 5):
        direct = math.factorial(k) * gs @ np.linalg.matrix_power(res, k - 1) @ g
        assert rel(C.derivative(C.Weyl(), k, tr, lam), direct) <= 1e-11


@pytest.mark.parametrize("cfg,specs", MODELS, ids=IDS)
def test_product_with_own_inverse_is_constant(cfg, specs):
    tr, params = built(cfg, specs)
    x = C.Identity() - C.Const(params[0]) @ C.Weyl()
    e = C.Product((x, C.Inverse(x)))
    for k in (1, 2, 3):
        d = C.derivative(e, k, tr, -2 + 1j)
        assert np.abs(d).max() <= 1e-11


@pytest.mark.parametrize("cfg,specs", MODELS, ids=IDS)
def test_robin_to_neumann_first_derivative(cfg, specs):
    tr, params = built(cfg, specs)
    lam = -1 + 0.5j
    b = params[0].B
    t = C.evaluate(C.T_B(b), tr, lam)
    mp = C.derivative(C.Weyl(), 1, tr, lam)
    assert rel(C.derivative(C.T_B(b), 1, tr, lam), t @ b @ mp @ t) <= 1e-10


def test_v_orders_agree():
    tr = build_sl1d(ModelConfig("sl1d", N=20, coefficients={"a0": 0.5}))
    b = np.diag([1.0, 2.5])
    other = C.Product((C.WeylInv(), C.Inverse(C.Identity() - C.Weyl() @ C.Const(b))))
    for k in range(4):
        assert rel(C.derivative(C.V(b), k, tr, -1.0), C.derivative(other, k, tr, -1.0)) <= 1e-10


def test_sum_and_deriv_nodes(micro):
    e = 2.0 * C.Weyl() - C.Deriv(C.Weyl(), 1)
    expect = 2 * C.derivative(C.Weyl(), 1, micro, 3.0) - C.derivative(C.Weyl(), 2, micro, 3.0)
    np.testing.assert_allclose(C.derivative(e, 1, micro, 3.0), expect, atol=1e-12)


def test_resolvent_leaf(micro):
    # single interior node, A_0 = 0 on it
    np.testing.assert_allclose(C.derivative(C.Resolvent(), 2, micro, 2.0), [[2 * (-2.0) ** -3]])


# ------------------------------------------------------------------ errors


def test_depth_exceeded(micro):
    with pytest.raises(DepthExceeded):
        C.derivative(C.Weyl(), 9, micro, 4.0)


def test_singular_inverse(micro):
    with pytest.raises(SingularInverse):
        C.evaluate(C.Inverse(C.Weyl() - C.Weyl()), micro, 4.0)


def test_dimension_mismatch(micro):
    with pytest.raises(DimensionMismatch):
        C.evaluate(C.Gamma() @ C.Gamma(), micro, 4.0)


def test_negative_order(micro):
    with pytest.raises(ValueError):
        C.derivative(C.Weyl(), -1, micro, 4.0)


def test_stencil_hits_spectrum(micro):
    # Neumann eigenvalue 0 lies one step from lam
    with pytest.raises(StencilHitsSpectrum):
        C.fd_derivative(C.Weyl(), 1, micro, 0.5, h=0.25)


# --------------------------------------------------- finite-difference oracle


def test_fd_central_micro(micro):
    for h in (None, 1e-3):
        d = C.fd_derivative(C.Weyl(), 1, micro, 4.0, h=h)
        np.testing.assert_allclose(d, np.full((2, 2), 0.125), rtol=1e-8)


def test_fd_constant_and_resolvent_nodes(micro):
    np.testing.assert_array_equal(C.derivative(C.Const(np.eye(2)), 2, micro, 4.0), 0)
    np.testing.assert_allclose(C.fd_derivative(C.Const(np.eye(2)), 1, micro, 4.0), 0, atol=1e-12)
    np.testing.assert_allclose(C.fd_derivative(C.Resolvent(), 1, micro, 4.0, h=1e-3), [[1 / 16]], rtol=1e-8)


def test_zero_order_is_evaluation(micro):
    np.testing.assert_array_equal(C.derivative(C.S(), 0, micro, 4.0), C.evaluate(C.S(), micro, 4.0))


@pytest.mark.parametrize("scheme", ["central", "circle"])
def test_fd_oracle_sl1d(scheme):
    tr = build_sl1d(ModelConfig("sl1d", N=30, coefficients={"a": lambda x: 1 + x, "a0": 0.2}))
    b = np.diag([1.0, -0.5])
    for name, e in [("M", C.Weyl()), ("S", C.S()), ("T_B", C.T_B(b)), ("V", C.V(b))]:
        for k in (1, 2):
            ex = C.derivative(e, k, tr, -2.0)
            fd = C.fd_derivative(e, k, tr, -2.0, scheme=scheme)
            assert rel(ex, fd) <= 1e-6, (name, k)


def test_fd_scheme_validation(micro):
    with pytest.raises(ValueError):
        C.fd_derivative(C.Weyl(), 1, micro, 4.0, scheme="forward")
    with pytest.raises(ValueError):
        C.fd_derivative(C.Weyl(), 5, micro, 4.0)


def test_singularity_distance_includes_robin(micro):
    # A_N = 0, A_D = 8, A_[I] = -8 on the single interior node
    assert C.singularity_distance(C.Weyl(), micro, 1.0) == pytest.approx(1.0)
    assert C.singularity_distance(C.Weyl(), micro, -7.5) == pytest.approx(7.5)
    assert C.singularity_distance(C.T_B(np.eye(2)), micro, -7.5) == pytest.approx(0.5)


def test_module_doctest():
    import doctest

    assert doctest.testmod(C).failed == 0
