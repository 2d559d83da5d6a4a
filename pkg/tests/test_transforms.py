import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloaksim.media import CloakSpec, RadialObject
from cloaksim.transforms import (
    Composition,
    Dilation,
    DomainError,
    Identity,
    Kelvin,
    TensorField,
    jacobian,
    map_point,
    pushforward,
    verify_complementary_identity,
)

from conftest import random_points

radii = st.floats(0.2, 5.0)
dims = st.sampled_from([2, 3])


def numeric_jacobian(T, x, h=1e-6):
    d = x.shape[-1]
    cols = []
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        cols.append((map_point(T, x + e) - map_point(T, x - e)) / (2 * h))
    return np.stack(cols, -1)


def test_kelvin_maps_unit_point_outward():
    assert np.allclose(map_point(Kelvin(2.0), [1.0, 0.0]), [4.0, 0.0])


def test_kelvin_fixes_its_sphere():
    x = np.array([0.6, 0.8])
    assert np.allclose(map_point(Kelvin(1.0), x), x, atol=1e-15)


def test_double_inversion_is_a_dilation():
    F, G = Kelvin(1.0), Kelvin(4.0)
    assert np.allclose(map_point(Composition(G, F), [0.5, 0.0]), [8.0, 0.0])


@pytest.mark.parametrize("x", [[0.0, 0.0], [1e-14, 0.0]])
def test_origin_is_rejected(x):
    with pytest.raises(DomainError):
        map_point(Kelvin(1.0), x)


def test_points_outside_declared_annulus_are_rejected():
    T = Kelvin(1.0, domain=(0.5, 1.0))
    with pytest.raises(DomainError):
        map_point(T, [2.0, 0.0])
    with pytest.raises(DomainError):
        T.inverse([0.5, 0.0])


def test_dilation_jacobian_is_scaled_identity():
    J = jacobian(Dilation(3.0), np.array([[0.1, 0.2, 0.3]]))
    assert np.allclose(J, 3.0 * np.eye(3))


def test_kelvin_jacobian_on_axis():
    R, r = 1.7, 0.9
    J = jacobian(Kelvin(R), np.array([r, 0.0]))
    expected = (R**2 / r**2) * (np.eye(2) - 2 * np.diag([1.0, 0.0]))
    assert np.allclose(J, expected, rtol=1e-14)


@given(d=dims, R=radii, seed=st.integers(0, 2**16))
def test_kelvin_jacobian_matches_finite_differences(d, R, seed):
    rng = np.random.default_rng(seed)
    x = random_points(rng, d, 1, 0.3 * R, 3 * R)[0]
    J = jacobian(Kelvin(R), x)
    Jn = numeric_jacobian(Kelvin(R), x)
    assert np.linalg.norm(J - Jn) <= 1e-8 * np.linalg.norm(J)


@given(d=dims, R=radii, r=st.floats(0.1, 10.0))
def test_kelvin_determinant(d, R, r):
    x = np.zeros(d)
    x[0] = r
    det = abs(np.linalg.det(jacobian(Kelvin(R), x)))
    assert det == pytest.approx((R**2 / r**2) ** d, rel=1e-12)


@given(d=dims, R=radii, seed=st.integers(0, 2**16))
def test_kelvin_is_an_involution(d, R, seed):
    rng = np.random.default_rng(seed)
    x = random_points(rng, d, 1000, 0.05 * R, 20 * R)
    y = map_point(Kelvin(R), map_point(Kelvin(R), x))
    assert np.max(np.linalg.norm(y - x, axis=1) / np.linalg.norm(x, axis=1)) <= 1e-12


@given(d=dims, R=radii, seed=st.integers(0, 2**16))
def test_kelvin_product_of_radii(d, R, seed):
    x = random_points(np.random.default_rng(seed), d, 50, 0.1, 10)
    y = map_point(Kelvin(R), x)
    assert np.allclose(np.linalg.norm(x, axis=1) * np.linalg.norm(y, axis=1), R**2, rtol=1e-13)


@given(d=dims, a=radii, b=radii, seed=st.integers(0, 2**16))
def test_chain_rule(d, a, b, seed):
    x = random_points(np.random.default_rng(seed), d, 20, 0.2, 5)
    T = Composition(Kelvin(b), Kelvin(a))
    J = jacobian(T, x)
    J2 = jacobian(Kelvin(b), map_point(Kelvin(a), x)) @ jacobian(Kelvin(a), x)
    assert np.max(np.abs(J - J2)) <= 1e-10 * np.max(np.abs(J))


def test_identity_pushforward_returns_the_field(rng):
    b = TensorField(2, lambda x: (1 + x[..., 0] ** 2)[..., None, None] * np.array([[2.0, 0.3], [0.3, 1.0]]))
    y = random_points(rng, 2, 10, 0.5, 2)
    assert np.allclose(pushforward(Identity(), b, y), b(y))


@given(R=radii, seed=st.integers(0, 2**16))
def test_two_dimensional_kelvin_preserves_identity(R, seed):
    y = random_points(np.random.default_rng(seed), 2, 200, 0.1, 10)
    out = pushforward(Kelvin(R), TensorField.identity(2), y)
    assert np.max(np.abs(out - np.eye(2))) <= 1e-12


def test_three_dimensional_kelvin_scales_identity():
    out = pushforward(Kelvin(1.0), TensorField.identity(3), np.array([2.0, 0.0, 0.0]))
    assert np.allclose(out, 0.25 * np.eye(3), rtol=1e-14)


@given(R=radii, r=st.floats(0.2, 8.0))
def test_three_dimensional_kelvin_identity_closed_form(R, r):
    y = np.array([0.0, r, 0.0])
    out = pushforward(Kelvin(R), TensorField.identity(3), y)
    assert np.allclose(out, (r**2 / R**2) ** (2 - 3) * np.eye(3), rtol=1e-12)


@given(d=dims, a=radii, b=radii, seed=st.integers(0, 2**16))
def test_pushforward_functoriality(d, a, b, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(d, d))
    M = M @ M.T + d * np.eye(d)
    field = TensorField(d, lambda x: (1 + np.linalg.norm(x, axis=-1))[..., None, None] * M)
    S, T = Kelvin(b), Kelvin(a)
    inner = TensorField(d, lambda y: pushforward(T, field, y))
    y = random_points(rng, d, 30, 0.3, 4)
    lhs = pushforward(Composition(S, T), field, y)
    rhs = pushforward(S, inner, y)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


@pytest.mark.parametrize("d,r3,core", [(2, 4.0, 1.0), (3, 4.0, 16.0), (2, 8.0, None), (3, 8.0, None)])
def test_complementary_identity_holds(d, r3, core):
    spec = CloakSpec(d, 1.0, r3, 12.0, RadialObject.identity(1.0), 0.1, core_coefficient=core)
    assert verify_complementary_identity(spec) <= 1e-12


def test_wrong_core_is_detected():
    # the dilation by 16 sends c*I to c*16^(2-d)*I: a core of 1 leaves a residual of 15/16 per diagonal entry
    spec = CloakSpec(3, 1.0, 4.0, 12.0, RadialObject.identity(1.0), 0.1, core_coefficient=1.0)
    assert verify_complementary_identity(spec) == pytest.approx(np.sqrt(3) * 15 / 16, rel=1e-10)
