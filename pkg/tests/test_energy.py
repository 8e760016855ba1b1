import math

import numpy as np
import pytest
import sympy as sp

from conftest import GAMMA_D, GAMMA_Q, PHI_M
from emhd.dynamics import FullState, constitutive
from emhd.energy import (
    N_QUADRATIC_COEFFICIENTS,
    IMParams,
    MechanicalParams,
    NonSinusoidalTerm,
    PMSMParams,
    QuadraticEnergyParams,
    RawCurrentMap,
    SaturatedPMSMParams,
    build_im,
    build_nonsinusoidal_pmsm,
    build_pmsm,
    build_quadratic,
    build_saturated_pmsm,
    build_synrm,
    check_reciprocity,
    check_symmetry,
    eval_with_derivatives,
    expected_symmetries,
    sample_points,
    reference_mech,
    reference_saturated_params,
    transform_energy,
)
from emhd.errors import ConfigurationError, EvaluationError, ParameterError, SymmetryViolationError
from emhd.frames import Frame, TriVector

# symbolic oracles, written directly from the printed energies

sD, sQ, s0, rD, rQ, r0 = sp.symbols("sD sQ s0 rD rQ r0", real=True)


def saturated_symbolic(p):
    psi = sD - p.phi_m
    q = sQ**2
    fD = p.gamma_d * (psi**2 + psi**3 / (6 * sp.Float(p.phi1_d)) + psi**4 / (12 * sp.Float(p.phi2_d) ** 2))
    fQ = p.gamma_q * (q + q**2 / (12 * sp.Float(p.phi1_q) ** 2))
    fX = p.gamma_d * (psi / (2 * sp.Float(p.phi1_x)) + psi**2 / sp.Float(p.phi2_x) ** 2) * q
    return sp.Rational(1, 2) * (fD + fQ + fX) + sp.Rational(1, 2) * p.gamma_0 * s0**2


def gradient_oracle(expr, symbols):
    return sp.lambdify(symbols, [sp.diff(expr, s) for s in symbols], "math")


def test_pmsm_magnet_equilibrium(pmsm):
    d = eval_with_derivatives(pmsm, (PHI_M, 0, 0), None, 0.3, 0.0)
    assert d.value == 0.0
    assert not d.d_phis.any()
    assert d.d_phir is None


def test_pmsm_value_and_current_at_offset(pmsm):
    d = eval_with_derivatives(pmsm, (0.175, 0, 0), None, 0.0, 0.0)
    expected = 0.5 * GAMMA_D * 0.02**2
    assert d.value == pytest.approx(expected, rel=1e-12)
    assert d.value == pytest.approx(2.2727e-2, rel=1e-4)
    assert d.d_phis[0] == pytest.approx(GAMMA_D * 0.02, rel=1e-12)
    assert d.d_phis[0] == pytest.approx(2.2727, rel=1e-4)


def test_kinetic_term_and_speed(pmsm, mech):
    rho = 0.37
    d = eval_with_derivatives(pmsm, (PHI_M, 0, 0), None, 0.0, rho)
    assert d.value == pytest.approx(rho**2 / (2 * mech.J * mech.n**2), rel=1e-15)
    omega0 = 123.0
    out = constitutive(pmsm, FullState(TriVector((0.1, 0.2, 0), Frame.ROTOR_DQ0), None, 0.0, mech.J * omega0, Frame.ROTOR_DQ0))
    assert out.omega == pytest.approx(omega0, rel=1e-14)


def test_evaluation_error_carries_point(mech):
    H = build_nonsinusoidal_pmsm(PMSMParams(1.0, 1.0, 1.0, 0.1, mech), [NonSinusoidalTerm(3, ((0, 0, 1, 1e308),))])
    with pytest.raises(EvaluationError) as exc:
        eval_with_derivatives(H, (0.1, 0.0, 1e10), None, 0.0, 0.0)
    assert exc.value.coordinate is not None


def _models(mech):
    sat = reference_saturated_params(mech)
    terms = [NonSinusoidalTerm(6, ((0, 0, 0, 0.01), (1, 0, 0, 0.02)), ((0, 1, 0, 0.05),)),
             NonSinusoidalTerm(3, ((0, 0, 1, 0.02),))]
    quad = QuadraticEnergyParams(
        b=[0.1, -0.2, 0.3], c=[0.0, 0.1, 0.0], D=np.diag([50.0, 60.0, 70.0]) + 5.0,
        E=np.arange(9.0).reshape(3, 3), F=np.diag([80.0, 90.0, 100.0]),
    )
    return [
        build_synrm(20.0, 60.0, 20.0, mech),
        build_pmsm(PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech)),
        build_im(IMParams(5.0, 100.0, 100.0, 100.0, 100.0, mech)),
        build_saturated_pmsm(sat),
        build_nonsinusoidal_pmsm(sat, terms),
        build_quadratic(quad, mech),
    ]


def test_gradients_match_finite_differences(rng, mech):
    h = 1e-6
    for H in _models(mech):
        pts = sample_points(H, 50, rng)
        for p in pts:
            _, g, hess = H.derivatives(p[:7])
            f = lambda x: H(x[0:3], x[3:6], x[6], 0.0)
            scale = max(1.0, np.abs(g).max())
            for k in range(7):
                if k in (3, 4, 5) and H.rotor_dim == 0:
                    continue
                e = np.zeros(7)
                e[k] = h
                fd = (f(p[:7] + e) - f(p[:7] - e)) / (2 * h)
                assert abs(fd - g[k]) <= 1e-6 * scale, (H.name, k)
            assert np.abs(hess - hess.T).max() < 1e-12 * max(1.0, np.abs(hess).max())


def test_real_inputs_equal_dual_value_part(rng, mech):
    for H in _models(mech):
        for p in sample_points(H, 10, rng):
            val, _, _ = H.derivatives_dual(p[:7])
            assert H.magnetic(tuple(p[0:3]), tuple(p[3:6]), p[6], math) == val


def test_analytic_gradients_cross_check(rng, mech):
    for H in _models(mech):
        if not hasattr(H, "analytic_gradient"):
            continue
        for p in sample_points(H, 50, rng):
            _, g, _ = H.derivatives(p[:7])
            i_s, i_r, d_th = H.analytic_gradient(p[0:3], p[3:6], p[6])
            scale = max(1.0, np.abs(g).max())
            np.testing.assert_allclose(g[0:3], i_s, atol=1e-12 * scale)
            if H.rotor_dim:
                np.testing.assert_allclose(g[3:6], i_r, atol=1e-12 * scale)


# classical closed forms


def test_synrm_closed_forms(rng, mech):
    gd, gq, g0 = 20.0, 60.0, 25.0
    H = build_synrm(gd, gq, g0, mech)
    expr = sp.Rational(1, 2) * (gd * sD**2 + gq * sQ**2 + g0 * s0**2)
    grad = gradient_oracle(expr, (sD, sQ, s0))
    for p in sample_points(H, 100, rng):
        st = FullState.from_array(p, Frame.ROTOR_DQ0, 0)
        out = constitutive(H, st)
        np.testing.assert_allclose(out.i_s.values, grad(*p[0:3]), rtol=1e-12, atol=1e-12)
        te = mech.n * (gq - gd) * p[0] * p[1]
        assert abs(out.Te - te) <= 1e-12 * max(1.0, abs(te))
        # odd in phi_Q
        p2 = p.copy()
        p2[1] = -p2[1]
        assert constitutive(H, FullState.from_array(p2, Frame.ROTOR_DQ0, 0)).Te == pytest.approx(-out.Te, abs=1e-12)


def test_pmsm_closed_forms(rng, mech):
    g0 = 90.0
    H = build_pmsm(PMSMParams(GAMMA_D, GAMMA_Q, g0, PHI_M, mech))
    expr = sp.Rational(1, 2) * (GAMMA_D * (sD - PHI_M) ** 2 + GAMMA_Q * sQ**2 + g0 * s0**2)
    grad = gradient_oracle(expr, (sD, sQ, s0))
    for p in sample_points(H, 100, rng):
        out = constitutive(H, FullState.from_array(p, Frame.ROTOR_DQ0, 0))
        i = grad(*p[0:3])
        np.testing.assert_allclose(out.i_s.values, i, rtol=1e-12, atol=1e-12)
        # n (phi_D i_Q - phi_Q i_D) with the oracle currents
        te = mech.n * (p[0] * i[1] - p[1] * i[0])
        assert abs(out.Te - te) <= 1e-12 * max(1.0, abs(te))


def test_pmsm_torque_example_closed_form(pmsm, mech):
    phi_d, phi_q = PHI_M + 0.02, 0.02
    out = constitutive(pmsm, FullState(TriVector((phi_d, phi_q, 0), Frame.ROTOR_DQ0), None, 0.4, 0.0, Frame.ROTOR_DQ0))
    n = mech.n
    expected = n * GAMMA_D * phi_q * PHI_M + n * (GAMMA_Q - GAMMA_D) * phi_d * phi_q
    assert out.Te == pytest.approx(expected, rel=1e-12)
    assert out.Te == pytest.approx(2.0455, rel=1e-4)


def test_pmsm_with_zero_magnet_equals_synrm(rng, mech):
    a = build_pmsm(PMSMParams(30.0, 70.0, 40.0, 0.0, mech))
    b = build_synrm(30.0, 70.0, 40.0, mech)
    for p in sample_points(a, 100, rng):
        assert a(p[0:3], None, p[6], p[7]) == b(p[0:3], None, p[6], p[7])


def test_nonsalient_pmsm_torque(rng, mech):
    H = build_pmsm(PMSMParams(GAMMA_D, GAMMA_D, GAMMA_D, PHI_M, mech))
    for p in sample_points(H, 20, rng):
        te = constitutive(H, FullState.from_array(p, Frame.ROTOR_DQ0, 0)).Te
        assert te == pytest.approx(mech.n * GAMMA_D * p[1] * PHI_M, rel=1e-12, abs=1e-12)


def test_im_closed_forms(rng):
    mech = MechanicalParams(J=0.01, n=2)
    gm, gls, glr, gls0, glr0 = 5.0, 100.0, 110.0, 120.0, 130.0
    H = build_im(IMParams(gm, gls, glr, gls0, glr0, mech))
    assert H.frame is Frame.DQ0 and H.rotor_dim == 3
    expr = (
        sp.Rational(1, 2) * gls0 * s0**2 + sp.Rational(1, 2) * glr0 * r0**2
        + sp.Rational(1, 2) * gm * ((sD + rD) ** 2 + (sQ + rQ) ** 2)
        + sp.Rational(1, 2) * gls * (sD**2 + sQ**2) + sp.Rational(1, 2) * glr * (rD**2 + rQ**2)
    )
    syms = (sD, sQ, s0, rD, rQ, r0)
    grad = gradient_oracle(expr, syms)
    J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
    for p in sample_points(H, 100, rng):
        out = constitutive(H, FullState.from_array(p, Frame.DQ0, 3), omega_s=50.0)
        i = np.array(grad(*p[0:6]))
        np.testing.assert_allclose(out.i_s.values, i[0:3], rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(out.i_r.values, i[3:6], rtol=1e-12, atol=1e-12)
        # direct algebraic relations
        np.testing.assert_allclose(out.i_s.values[0:2], gm * (p[0:2] + p[3:5]) + gls * p[0:2], rtol=1e-12)
        te = mech.n * p[3:5] @ J2 @ i[3:5]
        assert abs(out.Te - te) <= 1e-12 * max(1.0, abs(te))


# quadratic energies


def test_quadratic_half_identity(rng, mech):
    H = build_quadratic(QuadraticEnergyParams(D=0.5 * np.eye(3)), mech)
    for p in sample_points(H, 20, rng):
        expected = 0.5 * p[0:3] @ p[0:3] + p[7] ** 2 / (2 * mech.J * mech.n**2)
        assert H(p[0:3], None, p[6], p[7]) == pytest.approx(expected, rel=1e-14)


def test_quadratic_pmsm_mapping(rng, mech):
    b = np.array([-GAMMA_D * PHI_M, 0, 0])
    D = np.diag([GAMMA_D / 2, GAMMA_Q / 2, GAMMA_D / 2])
    a = PHI_M**2 * GAMMA_D / 2
    Hq = build_quadratic(QuadraticEnergyParams(a=a, b=b, D=D), mech)
    Hp = build_pmsm(PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech))
    for p in sample_points(Hp, 100, rng):
        x, y = Hq(p[0:3], None, p[6], p[7]), Hp(p[0:3], None, p[6], p[7])
        assert abs(x - y) <= 1e-12 * max(1.0, abs(y))
    assert -b[0] / (2 * D[0, 0]) == pytest.approx(PHI_M, rel=1e-15)


def test_quadratic_coefficient_count():
    assert N_QUADRATIC_COEFFICIENTS == 27
    assert QuadraticEnergyParams(D=np.eye(3)).coefficients().size == 27


def test_quadratic_validation():
    with pytest.raises(ParameterError):
        QuadraticEnergyParams(D=np.array([[1.0, 0.2, 0], [0.0, 1.0, 0], [0, 0, 1.0]]))
    with pytest.raises(ParameterError):
        QuadraticEnergyParams(D=-np.eye(3))
    with pytest.raises(ParameterError):
        QuadraticEnergyParams(D=np.eye(3), E=np.eye(3), F=np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ParameterError):
        QuadraticEnergyParams(D=np.eye(3), b=[np.inf, 0, 0])


def test_parameter_validation(mech):
    with pytest.raises(ParameterError):
        PMSMParams(0.0, 1.0, 1.0, 0.1, mech)
    with pytest.raises(ParameterError):
        PMSMParams(1.0, 1.0, 1.0, -0.1, mech)
    with pytest.raises(ParameterError):
        IMParams(1.0, 1.0, -1.0, 1.0, 1.0, mech)
    with pytest.raises(ParameterError):
        reference_saturated_params(mech).with_vector([1, 1, 0.5, 0.5, 0.0, 0.5, 0.5])
    with pytest.raises(ParameterError):
        MechanicalParams(J=0.0, n=1)
    with pytest.raises(ParameterError):
        MechanicalParams(J=1.0, n=1.5)


# saturated model


def test_saturated_currents_against_symbolic():
    p = reference_saturated_params()
    H = build_saturated_pmsm(p)
    grad = gradient_oracle(saturated_symbolic(p), (sD, sQ, s0))
    for phi in [(PHI_M + 0.1, 0.0, 0.0), (PHI_M, 0.1, 0.0), (PHI_M - 0.07, -0.13, 0.02)]:
        _, g, _ = H.derivatives(np.array([*phi, 0, 0, 0, 0.0]))
        ref = grad(*phi)
        np.testing.assert_allclose(g[0:3], ref, rtol=1e-10, atol=1e-12)


def test_saturated_example_values():
    p = reference_saturated_params()
    H = build_saturated_pmsm(p)
    psi = 0.1
    i_d = H.derivatives(np.array([PHI_M + psi, 0, 0, 0, 0, 0, 0.0]))[1][0]
    i_q = H.derivatives(np.array([PHI_M, 0.1, 0, 0, 0, 0, 0.0]))[1][1]
    assert i_d == pytest.approx(GAMMA_D * (psi + psi**2 / (4 * 0.533) + psi**3 / (6 * 0.2**2)), rel=1e-12)
    assert i_q == pytest.approx(GAMMA_Q * (0.1 + 0.1**3 / (6 * 0.228**2)), rel=1e-12)
    assert round(i_d, 2) == 12.37 and round(i_q, 2) == 13.40
    assert GAMMA_D * psi == pytest.approx(11.36, abs=5e-3)
    assert H.derivatives(np.array([PHI_M, 0, 0, 0, 0, 0, 0.0]))[1][0] == 0.0


def test_saturated_reduces_to_pmsm(rng, mech):
    big = SaturatedPMSMParams(GAMMA_D, GAMMA_Q, PHI_M, 1e9, 1e9, 1e9, 1e9, 1e9, mech)
    Hs = build_saturated_pmsm(big)
    Hp = build_pmsm(PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech))
    for p in sample_points(Hs, 100, rng):
        assert abs(Hs(p[0:3], None, p[6], p[7]) - Hp(p[0:3], None, p[6], p[7])) < 1e-6


def test_saturated_reciprocity_box(rng, saturated):
    pts = np.zeros((1000, 8))
    pts[:, 0] = PHI_M + rng.uniform(-0.3, 0.3, 1000)
    pts[:, 1] = rng.uniform(-0.3, 0.3, 1000)
    pts[:, 6] = rng.uniform(-6, 6, 1000)
    rep = check_reciprocity(saturated, pts)
    assert rep.passed and rep.value < 1e-12


def test_unsaturated_models_are_quadratic(rng, mech):
    for H in _models(mech)[:3]:
        for p in sample_points(H, 10, rng):
            d = rng.normal(size=7) * 1e-3
            if H.rotor_dim == 0:
                d[3:6] = 0
            f = lambda k: H.magnetic(tuple(p[0:3] + k * d[0:3]), tuple(p[3:6] + k * d[3:6]), p[6] + k * d[6], math)
            third = f(3) - 3 * f(2) + 3 * f(1) - f(0)
            assert abs(third) < 1e-8


# non-sinusoidal model


def test_nonsinusoidal_empty_equals_base(rng, mech):
    base = PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech)
    a, b = build_nonsinusoidal_pmsm(base, []), build_pmsm(base)
    for p in sample_points(b, 20, rng):
        assert a(p[0:3], None, p[6], p[7]) == b(p[0:3], None, p[6], p[7])


def test_nonsinusoidal_single_term_theta_derivative(rng, mech):
    eps = 0.03
    H = build_nonsinusoidal_pmsm(PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech), [NonSinusoidalTerm(6, ((0, 0, 0, eps),))])
    for p in sample_points(H, 20, rng):
        _, g, _ = H.derivatives(p[:7])
        assert g[6] == pytest.approx(-6 * eps * math.sin(6 * p[6]), abs=1e-14)


def test_nonsinusoidal_period(rng, mech):
    terms = [NonSinusoidalTerm(3, ((1, 0, 1, 0.4),), ((0, 1, 1, 0.2),)), NonSinusoidalTerm(6, ((2, 1, 0, 0.5),))]
    H = build_nonsinusoidal_pmsm(reference_saturated_params(mech), terms)
    for p in sample_points(H, 100, rng):
        a = H(p[0:3], None, p[6], p[7])
        b = H(p[0:3], None, p[6] + 2 * math.pi / 3, p[7])
        assert abs(a - b) < 1e-12 * max(1.0, abs(a))


def test_nonsinusoidal_validation(mech):
    base = PMSMParams(GAMMA_D, GAMMA_Q, GAMMA_D, PHI_M, mech)
    with pytest.raises(SymmetryViolationError):
        build_nonsinusoidal_pmsm(base, [NonSinusoidalTerm(4, ((0, 0, 0, 1.0),))])
    with pytest.raises(SymmetryViolationError):
        build_nonsinusoidal_pmsm(base, [NonSinusoidalTerm(3, ((0, 0, 0, 1.0),))])  # needs odd phi_0 power
    with pytest.raises(SymmetryViolationError):
        build_nonsinusoidal_pmsm(base, [NonSinusoidalTerm(3, ((0, 0, 1, 1.0),))], star_reduced=True)
    with pytest.raises(SymmetryViolationError):
        build_nonsinusoidal_pmsm(base, [NonSinusoidalTerm(6, ((0, 0, 2, 1.0),))], star_reduced=True)
    with pytest.raises(ParameterError):
        NonSinusoidalTerm(0)
    build_nonsinusoidal_pmsm(base, [NonSinusoidalTerm(12, ((1, 1, 0, 1.0),))], star_reduced=True)


# structural checks


def test_reciprocity_all_models(rng, mech):
    for H in _models(mech):
        rep = check_reciprocity(H, sample_points(H, 200, rng))
        assert rep.passed, rep.line()


def test_non_gradient_map_fails_reciprocity(rng):
    raw = RawCurrentMap(lambda x: [x[1], -x[0], x[2] * 0, x[3] * 0, x[4] * 0, x[5] * 0])
    rep = check_reciprocity(raw, rng.normal(size=(5, 8)))
    assert not rep.passed
    assert rep.value == pytest.approx(2.0)


def test_expected_symmetries_hold(rng, mech):
    for H in _models(mech)[:5]:
        pts = sample_points(H, 100, rng)
        table = expected_symmetries(H)
        assert table
        for kind, holds in table:
            rep = check_symmetry(H, kind, pts)
            assert rep.passed is holds, (H.name, kind, rep.value)


def test_pmsm_swap_parities(rng, pmsm):
    pts = sample_points(pmsm, 100, rng)
    assert check_symmetry(pmsm, "swapQ", pts).passed
    assert not check_symmetry(pmsm, "swapD", pts).passed


def test_im_rotor_permutation(rng, im):
    pts = sample_points(im, 100, rng)
    for eta in (2 * math.pi / 3, 4 * math.pi / 3):
        assert check_symmetry(im, "rotor_perm", pts, eta=eta).passed


def test_symmetry_frame_applicability(rng, pmsm):
    with pytest.raises(ConfigurationError):
        check_symmetry(pmsm, "rotor_perm", sample_points(pmsm, 2, rng))
    with pytest.raises(ConfigurationError):
        check_symmetry(pmsm, "mirror", sample_points(pmsm, 2, rng))


def test_symmetries_survive_frame_transform(rng, mech):
    H = build_saturated_pmsm(reference_saturated_params(mech))
    for frame in (Frame.ALPHABETA0, Frame.ABC):
        Ht = transform_energy(H, frame)
        pts = sample_points(Ht, 50, rng)
        for kind in ("stator_perm", "stator_rev", "swapQ"):
            assert check_symmetry(Ht, kind, pts).passed, (frame, kind)
        assert check_reciprocity(Ht, pts).passed


def test_transform_energy_consistency(rng, mech):
    H = build_saturated_pmsm(reference_saturated_params(mech))
    Ha = transform_energy(H, Frame.ABC)
    assert transform_energy(Ha, Frame.ROTOR_DQ0) is H
    from emhd.frames import convert_array

    for p in sample_points(H, 20, rng):
        x_abc = convert_array(p[0:3], Frame.ROTOR_DQ0, Frame.ABC, theta=p[6])
        assert Ha(x_abc, None, p[6], p[7]) == pytest.approx(H(p[0:3], None, p[6], p[7]), rel=1e-12, abs=1e-12)
    with pytest.raises(ConfigurationError):
        transform_energy(H, Frame.DQ0)
