import math

import numpy as np
import pytest

from emhd.errors import ConfigurationError, FrameMismatchError
from emhd.frames import (
    CLARKE,
    J2,
    J3,
    Frame,
    TriVector,
    clarke,
    convert,
    inverse_clarke,
    rot2,
    rot2_matrix,
    rot3,
    rot3_matrix,
    wrap_angle,
)

ABC = Frame.ABC
AB0 = Frame.ALPHABETA0


def test_clarke_zero():
    assert np.all(clarke(TriVector((0, 0, 0), ABC)).values == 0.0)


def test_clarke_common_mode():
    out = clarke(TriVector((1, 1, 1), ABC))
    assert out.frame is AB0
    np.testing.assert_allclose(out.values, [0.0, 0.0, math.sqrt(3)], atol=1e-15)


def test_clarke_unit_phase_a():
    # independent product written out by hand
    expected = np.array([math.sqrt(2 / 3), 0.0, math.sqrt(2 / 3) * math.sqrt(2) / 2])
    np.testing.assert_allclose(clarke(TriVector((1, 0, 0), ABC)).values, expected, atol=1e-15)
    np.testing.assert_allclose(expected, [0.8165, 0.0, 0.5774], atol=5e-5)
    assert abs(expected[2] - 1 / math.sqrt(3)) < 1e-15


def test_inverse_clarke_examples(rng):
    np.testing.assert_allclose(inverse_clarke(TriVector((0, 0, math.sqrt(3)), AB0)).values, [1, 1, 1], atol=1e-15)
    assert np.all(inverse_clarke(TriVector((0, 0, 0), AB0)).values == 0.0)
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=3)
        back = inverse_clarke(clarke(TriVector(x, ABC))).values
        worst = max(worst, np.abs(back - x).max())
    assert worst < 1e-14


def test_clarke_rejects_wrong_frame():
    with pytest.raises(FrameMismatchError):
        clarke(TriVector((1, 0, 0), AB0))
    with pytest.raises(FrameMismatchError):
        inverse_clarke(TriVector((1, 0, 0), ABC))


def test_clarke_orthogonal():
    np.testing.assert_allclose(CLARKE @ CLARKE.T, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(CLARKE.T @ CLARKE, np.eye(3), atol=1e-14)


def test_rotations(rng):
    v = rng.normal(size=3)
    np.testing.assert_array_equal(rot3(0.0, v), v)
    np.testing.assert_allclose(rot2(math.pi / 2, (1, 0)), [0, 1], atol=1e-16)
    for _ in range(20):
        a, b = rng.uniform(-10, 10, 2)
        v = rng.normal(size=3)
        np.testing.assert_allclose(rot3(a, rot3(b, v)), rot3(a + b, v), atol=1e-13)
        assert rot3(a, v)[2] == v[2]


def test_rot3_keeps_tag():
    v = TriVector((1, 2, 3), Frame.DQ0)
    assert rot3(0.3, v).frame is Frame.DQ0


@pytest.mark.parametrize("which", [2, 3])
def test_rotation_derivative(which):
    h = 1e-6
    R, Jm = (rot2_matrix, J2) if which == 2 else (rot3_matrix, J3)
    for eta in (0.0, 0.4, 2.5, -1.7):
        fd = (R(eta + h) - R(eta)) / h
        assert np.abs(fd - Jm @ R(eta)).max() < 10 * h


def test_convert_abc_to_rotor_frame_at_zero_is_clarke(rng):
    v = rng.normal(size=3)
    out = convert(TriVector(v, ABC), Frame.ROTOR_DQ0, theta=0.0)
    np.testing.assert_allclose(out.values, CLARKE @ v, atol=1e-15)


def test_convert_rotor_to_dq0_cancels_when_angles_match(rng):
    v = rng.normal(size=3)
    out = convert(TriVector(v, Frame.ROTOR_DQ0), Frame.DQ0, theta=1.1, theta_s=1.1)
    np.testing.assert_allclose(out.values, v, atol=1e-15)


def test_convert_round_trip_through_dq0(rng):
    for _ in range(20):
        v = rng.normal(size=3)
        mid = convert(TriVector(v, ABC), Frame.DQ0, theta=0.7, theta_s=1.3)
        back = convert(mid, ABC, theta=0.7, theta_s=1.3)
        assert np.abs(back.values - v).max() < 1e-13


def test_convert_stator_and_rotor_rules():
    v = TriVector((1.0, 0.0, 0.5), AB0)
    th, ths = 0.4, 1.0
    np.testing.assert_allclose(convert(v, Frame.ROTOR_DQ0, theta=th).values, rot3_matrix(-th) @ v.values)
    np.testing.assert_allclose(convert(v, Frame.DQ0, theta=th, theta_s=ths).values, rot3_matrix(-ths) @ v.values)
    # rotor quantities: identity in DQ0, R3(theta - theta_s) in dq0
    np.testing.assert_allclose(convert(v, Frame.ROTOR_DQ0, theta=th, kind="rotor").values, v.values)
    np.testing.assert_allclose(
        convert(v, Frame.DQ0, theta=th, theta_s=ths, kind="rotor").values, rot3_matrix(th - ths) @ v.values
    )


def test_convert_chain_round_trips(rng):
    frames = [ABC, AB0, Frame.DQ0, Frame.ROTOR_DQ0]
    for kind in ("stator", "rotor"):
        for _ in range(10):
            v = TriVector(rng.normal(size=3), frames[rng.integers(4)])
            w = v
            for k in rng.permutation(4):
                w = convert(w, frames[k], theta=0.9, theta_s=-0.2, kind=kind)
            w = convert(w, v.frame, theta=0.9, theta_s=-0.2, kind=kind)
            assert np.abs(w.values - v.values).max() < 1e-13


def test_convert_is_linear(rng):
    v, w = rng.normal(size=3), rng.normal(size=3)
    a, b = 1.7, -0.4
    f = lambda x: convert(TriVector(x, ABC), Frame.DQ0, theta=0.2, theta_s=2.1).values
    np.testing.assert_allclose(f(a * v + b * w), a * f(v) + b * f(w), atol=1e-13)


def test_convert_missing_angles():
    v = TriVector((1, 0, 0), ABC)
    with pytest.raises(ConfigurationError):
        convert(v, Frame.ROTOR_DQ0)
    with pytest.raises(ConfigurationError):
        convert(v, Frame.DQ0, theta=0.1)
    with pytest.raises(ConfigurationError):
        convert(v, Frame.DQ0, theta_s=0.1, kind="rotor")


def test_trivector_frame_checks():
    a = TriVector((1, 2, 3), ABC)
    b = TriVector((1, 1, 1), ABC)
    np.testing.assert_array_equal((a + b).values, [2, 3, 4])
    assert a.dot(b) == 6.0
    np.testing.assert_array_equal((2 * a - b).values, [1, 3, 5])
    with pytest.raises(FrameMismatchError):
        a + TriVector((1, 1, 1), AB0)
    with pytest.raises(ValueError):
        TriVector((1, math.nan, 0), ABC)


def test_wrap_angle():
    assert wrap_angle(-0.5) == pytest.approx(2 * math.pi - 0.5)
    assert wrap_angle(7.0) == pytest.approx(7.0 - 2 * math.pi)
    assert 0.0 <= wrap_angle(-2 * math.pi) < 2 * math.pi


def test_frame_parse():
    assert Frame.parse("DQ0") is Frame.ROTOR_DQ0
    assert Frame.parse("dq0") is Frame.DQ0
    assert Frame.parse("ab0") is AB0
    with pytest.raises(ConfigurationError):
        Frame.parse("xyz")
