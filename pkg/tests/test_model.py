import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noncolliding.model import (
    InteractionMatrix,
    derivative_mismatch,
    field_from_name,
    full_coupling,
    nearest_neighbor,
    singular_drift,
    uniform_system,
    validate_system,
)

ZERO = field_from_name("zero")


def make_system(d, gamma, x0, b=None, sigma=None):
    return uniform_system(d, gamma, b or ZERO, sigma or ZERO, x0)


# --- catalog -----------------------------------------------------------------


@pytest.mark.parametrize(
    "spec,x,value,deriv",
    [
        ("zero", 0.7, 0.0, 0.0),
        ("constant(2.5)", -3.0, 2.5, 0.0),
        ("affine(2.0, 1.0)", 2.0, 5.0, 2.0),
        ("sin", 0.0, 0.0, 1.0),
        ("halfsin2", np.pi / 4, 0.5, 0.0),
        ("linear(0.5)", 4.0, 2.0, 0.5),
    ],
)
def test_catalog_values(spec, x, value, deriv):
    f = field_from_name(spec)
    assert np.isclose(f.value(x), value, atol=1e-12)
    assert np.isclose(f.derivative(x), deriv, atol=1e-12)


@pytest.mark.parametrize(
    "spec", ["zero", "constant(0.5)", "affine(0.3, -1.0)", "sin", "halfsin2", "linear(0.7)"]
)
def test_catalog_derivative_consistency(spec):
    # central difference with eps=1e-5 agrees with the stored derivative
    assert derivative_mismatch(field_from_name(spec)) <= 1e-6


def test_catalog_vectorized():
    f = field_from_name("halfsin2")
    x = np.linspace(-2, 2, 7)
    assert np.allclose(f.value(x), np.sin(2 * x) / 2)
    assert np.allclose(f.derivative(x), np.cos(2 * x))


@pytest.mark.parametrize("bad", ["nope", "sin(1)", "constant()", "affine(1)", "constant(x)"])
def test_catalog_rejects_bad_specs(bad):
    with pytest.raises(ValueError):
        field_from_name(bad)


# --- validation --------------------------------------------------------------


def test_validate_ok_by_construction():
    sys2 = make_system(2, nearest_neighbor(2, 1.0), [0.0, 1.0])
    assert validate_system(sys2) == []


def test_validate_flags_zero_adjacent_coupling():
    g = InteractionMatrix(2, np.zeros((2, 2)))
    sys2 = make_system(2, g, [0.0, 1.0])
    msgs = validate_system(sys2)
    assert any("gamma[1][2] must be > 0" in m for m in msgs)


def test_validate_flags_unordered_x0():
    sys3 = make_system(3, nearest_neighbor(3, 1.0), [0.0, 2.0, 1.0])
    msgs = validate_system(sys3)
    assert any("x0 not strictly increasing at index 2" in m for m in msgs)


def test_validate_flags_negative_and_asymmetric_gamma():
    g = np.array([[0.0, -1.0], [2.0, 0.0]])
    msgs = validate_system(make_system(2, InteractionMatrix(2, g), [0.0, 1.0]))
    assert any("must be >= 0" in m for m in msgs)
    assert any("!=" in m for m in msgs)


def test_unbounded_field_with_coupling_warns():
    lin = field_from_name("linear(0.5)")
    sys2 = make_system(2, nearest_neighbor(2, 1.0), [0.0, 1.0], b=lin)
    with pytest.warns(UserWarning, match="unbounded"):
        assert validate_system(sys2) == []


def test_unbounded_field_without_coupling_is_quiet(recwarn):
    lin = field_from_name("linear(0.5)")
    sys1 = make_system(1, InteractionMatrix(1, np.zeros((1, 1))), [0.0], b=lin)
    assert validate_system(sys1) == []
    assert not recwarn.list


# --- singular drift ----------------------------------------------------------


def test_drift_single_pair():
    sys2 = make_system(2, nearest_neighbor(2, 1.0), [0.0, 1.0])
    assert np.allclose(singular_drift(sys2, [0.0, 1.0]), [-1.0, 1.0])


def test_drift_three_particles_matches_brute_force():
    sys3 = make_system(3, full_coupling(3, 1.0), [0.0, 1.0, 3.0])
    x = np.array([0.0, 1.0, 3.0])
    # independent oracle: direct summation pair by pair
    expect = np.zeros(3)
    for i in range(3):
        for j in range(3):
            if j != i:
                expect[i] += 1.0 / (x[i] - x[j])
    got = singular_drift(sys3, x)
    assert np.allclose(got, expect, rtol=1e-14)
    assert np.allclose(got, [-4.0 / 3.0, 0.5, 5.0 / 6.0], rtol=1e-14)


def test_drift_rejects_unordered_state():
    sys2 = make_system(2, nearest_neighbor(2, 1.0), [0.0, 1.0])
    with pytest.raises(ValueError):
        singular_drift(sys2, [1.0, 1.0])
    with pytest.raises(ValueError):
        singular_drift(sys2, [2.0, 1.0])


@st.composite
def ordered_vectors(draw, max_d=6):
    d = draw(st.integers(min_value=2, max_value=max_d))
    base = draw(st.floats(min_value=-10, max_value=10))
    gaps = draw(
        st.lists(st.floats(min_value=1e-3, max_value=5.0), min_size=d - 1, max_size=d - 1)
    )
    return np.concatenate([[base], base + np.cumsum(gaps)])


@st.composite
def symmetric_gammas(draw, d):
    vals = draw(
        st.lists(
            st.floats(min_value=0.1, max_value=10.0),
            min_size=d * (d - 1) // 2,
            max_size=d * (d - 1) // 2,
        )
    )
    g = np.zeros((d, d))
    iu = np.triu_indices(d, k=1)
    g[iu] = vals
    g += g.T
    return InteractionMatrix(d, g)


@given(data=st.data())
@settings(max_examples=60, deadline=None)
def test_drift_components_sum_to_zero(data):
    x = data.draw(ordered_vectors())
    gamma = data.draw(symmetric_gammas(len(x)))
    sysd = make_system(len(x), gamma, x)
    F = singular_drift(sysd, x)
    scale = max(1.0, np.max(np.abs(F)))
    assert abs(F.sum()) <= 1e-12 * scale


@given(x=ordered_vectors())
@settings(max_examples=40, deadline=None)
def test_adjacent_repulsion_signs(x):
    # couple one adjacent pair only: left particle pushed down, right pushed up
    d = len(x)
    i = d // 2 - 1
    g = np.zeros((d, d))
    g[i, i + 1] = g[i + 1, i] = 1.0
    sysd = make_system(d, InteractionMatrix(d, g), x)
    F = singular_drift(sysd, x)
    assert F[i] < 0.0 < F[i + 1]
