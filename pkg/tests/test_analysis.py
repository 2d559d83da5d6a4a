import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cloaksim.analysis import (
    PreconditionError,
    assemble_W,
    auxiliary_decomposition,
    closed_form_difference,
    coefficient_relations,
    combined_exponents,
    detect_localized_resonance,
    fitted_bound_constant,
    gamma_exponent,
    interpolation_exponent,
    interpolation_trials,
    measured_exponents,
    reflect_pair,
    reflect_through_sphere,
    removed_singularity,
    resonance_profile,
    three_spheres_report,
    trace_identity_residuals,
)
from cloaksim.analysis.proof import predicted_c, predicted_d
from cloaksim.analysis.three_spheres import harmonic_field, random_harmonic
from cloaksim.media import RadialObject, build_cloak
from cloaksim.spectral import Layer, ModalSource, ModeExpansion, RadialLayeredMedium, combine, norm_ball_l2, solve_field
from cloaksim.transforms import DomainError


def direction(d):
    return 0.3 if d == 2 else (0.7, 0.3)


def cloak_field(d, delta, n_max=16, obj=None, rho=10.0):
    _, med = build_cloak(d, 1.0, 8.0, 12.0, obj, delta)
    src = ModalSource.point(d, rho, direction(d), n_max)
    return med, src, solve_field(med.radial_layers(), src)


def single_layer(d, coeffs, lo, hi, modes):
    c = np.asarray(coeffs, complex).reshape(len(modes), 1, 2)
    return ModeExpansion(d, (Layer(lo, hi, 1.0),), modes, c)


def test_reflecting_a_constant():
    v = single_layer(2, [[2.5, 0.0]], 0.0, 1.0, [[0, 0]])
    w = reflect_through_sphere(v, 1.0)
    x = np.array([[3.0, 0.0], [0.0, 1.5]])
    assert np.allclose(w.evaluate(x), 2.5)


@pytest.mark.parametrize("n", [1, 3, 6])
def test_reflecting_a_monomial(n):
    R = 1.4
    w = reflect_through_sphere(single_layer(2, [[1.0, 0.0]], 0.0, R, [[n, n]]), R)
    assert w.coeffs[0, 0, 0] == 0
    assert w.coeffs[0, 0, 1] == pytest.approx(R ** (2 * n), rel=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_reflection_is_an_involution(d, rng):
    med = RadialLayeredMedium.from_breaks(d, [0.5, 1.0, 2.0], [1.0, 3.0 + 0.2j, 0.5])
    e = solve_field(med, ModalSource.point(d, 1.5, direction(d), 8))
    back = reflect_through_sphere(reflect_through_sphere(e, 0.8), 0.8)
    assert np.allclose(back.coeffs, e.coeffs, rtol=1e-12, atol=1e-14)
    assert np.allclose(back.edges, e.edges, rtol=1e-14)


@given(d=st.sampled_from([2, 3]), seed=st.integers(0, 2**16))
def test_trace_identities_on_random_media(d, seed):
    rng = np.random.default_rng(seed)
    R = 2.0
    cuts = np.sort(rng.uniform(0.2, 1.9, rng.integers(1, 4)))
    sig = rng.uniform(0.2, 3.0, len(cuts) + 2) * np.exp(1j * rng.uniform(-0.3, 0.3, len(cuts) + 2))
    med = RadialLayeredMedium.from_breaks(d, list(cuts) + [R, 3.0], list(sig))
    e = solve_field(med, ModalSource.point(d, 2.5, direction(d), 16))
    w = reflect_through_sphere(e, R, side="inside")
    assert max(trace_identity_residuals(e, w, R, "-")) <= 1e-10


def test_mode_relations_in_the_limit_of_no_loss():
    e = np.array([1.0, 2.0 - 1j])
    assert np.all(predicted_d(2, [1, 2], e, 0.0, 8.0) == 0)
    assert np.allclose(predicted_c(2, [1, 2], e, 0.0, 8.0), e)


def test_mode_relation_ratio_at_unit_loss():
    assert predicted_c(2, 3, 1.0, 1.0, 8.0) == pytest.approx((2 - 1j) / (2 * (1 - 1j)))


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("delta", [1.0, 0.1, 1e-3])
def test_solver_coefficients_satisfy_the_mode_relations(d, delta):
    _, _, u = cloak_field(d, delta, n_max=16 if d == 3 else 32)
    rel = coefficient_relations(reflect_pair(u, 1.0, 8.0), delta)
    assert rel.max_residual <= 1e-9


def test_decaying_coefficient_for_mode_three():
    delta = 0.1
    _, _, u = cloak_field(2, delta, n_max=4)
    rel = coefficient_relations(reflect_pair(u, 1.0, 8.0), delta)
    i = [tuple(m) for m in rel.modes.tolist()].index((3, 3))
    expected = -1j * delta * 8.0**6 / (2 * (1 - 1j * delta))
    assert rel.d_coef[i] / rel.e[i] == pytest.approx(expected, rel=1e-9)


def test_relations_need_a_harmonic_matching_annulus():
    _, _, u = cloak_field(2, 0.1, obj=RadialObject((1.0, 2.0), (2.0,)))
    # the object occupies (r2, 2 r2); its image under reflection makes u1 non-harmonic below 2 r2
    pair = reflect_pair(u, 1.0, 8.0)
    pair_shifted = type(pair)(pair.u_delta, pair.u1, pair.u2, 0.5, 8.0)
    with pytest.raises(PreconditionError):
        coefficient_relations(pair_shifted, 0.1)


def test_removed_singularity_vanishes_without_loss():
    uh = removed_singularity(2, [[1, 1], [2, -2]], [1.0, 1.0], 0.0, 8.0, 3.0, 12.0)
    assert np.all(uh.coeffs == 0)


def test_removed_singularity_single_mode():
    delta = 0.1
    uh = removed_singularity(2, [[1, 1]], [1.0], delta, 8.0, 3.0, 12.0)
    r = 5.0
    expected = (-0.1j / (2 * (1 - 0.1j))) * 64 / r
    assert uh.radial(r)[0, 0] == pytest.approx(expected, rel=1e-14)


def test_removed_singularity_is_undefined_near_the_object():
    uh = removed_singularity(2, [[1, 1]], [1.0], 0.1, 8.0, 3.0, 12.0)
    with pytest.raises(DomainError):
        uh.evaluate(np.array([[2.0, 0.0]]))


@pytest.mark.parametrize("d", [2, 3])
def test_difference_of_reflections_in_closed_form(d):
    delta = 0.1
    _, _, u = cloak_field(d, delta)
    pair = reflect_pair(u, 1.0, 8.0)
    e = pair.u2.coeffs[:, 0, 0]
    direct = combine(1.0, pair.u1, -1.0, pair.u2, 3.0, 8.0)
    closed = closed_form_difference(d, u.modes, e, delta, 8.0, 3.0, 8.0)
    r = np.array([3.5, 5.0, 7.9])
    a, b = direct.radial(r), closed.radial(r)
    scale = np.maximum(np.abs(a).max(axis=1, keepdims=True), 1e-300)
    assert np.max(np.abs(a - b) / scale) <= 1e-10


def test_inner_jump_of_W_decomposes():
    delta = 0.1
    _, _, u = cloak_field(2, delta)
    pair = reflect_pair(u, 1.0, 8.0)
    e = pair.u2.coeffs[:, 0, 0]
    uh = removed_singularity(2, u.modes, e, delta, 8.0, 3.0, 12.0)
    W = assemble_W(u, uh, pair.u2, 1.0, 8.0)
    ns = u.modes[:, 0]
    amp = np.where(ns > 0, 1j * delta / (2 * (1 - 1j * delta)), 0.0) * 3.0**ns * e
    expected = u.radial(3.0)[:, 0] - pair.u1.radial(3.0)[:, 0] + amp
    assert np.allclose(W.jump_3r2.value, expected, rtol=1e-10, atol=1e-14)


def test_W_jumps_shrink_along_the_sweep():
    jumps = []
    for k in range(1, 7):
        delta = 10.0**-k
        _, _, u = cloak_field(2, delta, obj=RadialObject((1.0, 2.0), (2.0,)))
        pair = reflect_pair(u, 1.0, 8.0)
        uh = removed_singularity(2, u.modes, pair.u2.coeffs[:, 0, 0], delta, 8.0, 3.0, 12.0)
        W = assemble_W(u, uh, pair.u2, 1.0, 8.0)
        jumps.append([W.jump_r3.value_norm, W.jump_r3.deriv_norm, W.jump_3r2.value_norm, W.jump_3r2.deriv_norm])
    j = np.array(jumps)
    assert np.all(j[1:] <= 1.01 * j[:-1])


@pytest.mark.parametrize("d", [2, 3])
def test_auxiliary_decomposition(d):
    med, _, u = cloak_field(d, 0.01, obj=RadialObject((1.0, 2.0), (2.0,)))
    dec = auxiliary_decomposition(u, med)
    c = dec.checks
    assert c["U_value_jump"] <= 1e-10
    assert c["U_flux_jump_error"] <= 1e-10
    assert c["V_transmission_residual"] <= 1e-9
    assert c["V_l2_inner"] == pytest.approx(c["w_l2_inner"], rel=1e-10)


def test_auxiliary_constant_is_stable_across_loss():
    consts = []
    for delta in (1e-1, 1e-3, 1e-5):
        med, _, u = cloak_field(2, delta, obj=RadialObject((1.0, 2.0), (2.0,)))
        consts.append(auxiliary_decomposition(u, med).checks["w_constant"])
    assert max(consts) <= 2 * min(consts)


def test_homogeneous_medium_shows_no_resonance():
    med = RadialLayeredMedium.homogeneous(2, 12.0)
    src = ModalSource.point(2, 10.0, 0.3, 16)
    u = solve_field(med, src)
    annuli = [(0.0, 1.0), (1.0, 8.0), (8.0, 12.0)]
    profiles = [resonance_profile(u, annuli, (0.125, 1.0), delta) for delta in (1e-1, 1e-2, 1e-3)]
    assert not detect_localized_resonance(profiles, [0, 1], 2).flagged
    E = np.array([p.shell_dissipation for p in profiles])
    assert np.allclose(E[1:] / E[:-1], 0.1)
    C = fitted_bound_constant(profiles, src.surface_norm(2))
    assert np.allclose(C[1:] / C[:-1], 0.1)


def test_interpolation_exponent_lies_in_unit_interval():
    lam = interpolation_exponent(0.5, 1.0, 4.0)
    assert 0 < lam < 1
    assert interpolation_exponent(0.5, 1.0, 4.0, printed=True) == pytest.approx(1 / lam)


@pytest.mark.parametrize("d", [2, 3])
def test_random_interpolation_trials(d):
    corr = interpolation_trials(d, 200, 12, (0.5, 1.0, 2.0), seed=3)
    printed = interpolation_trials(d, 200, 12, (0.5, 1.0, 2.0), seed=3, printed=True)
    assert corr.max() <= 1.01
    assert np.mean(printed > 1.01) > 0.9


def test_gamma_tends_to_one():
    g = [gamma_exponent(1.0, R3) for R3 in (8.0, 1e2, 1e4, 1e8)]
    assert np.all(np.diff(g) > 0) and g[-1] > 0.9


@pytest.mark.parametrize("d", [2, 3])
def test_monomial_norms_in_closed_form(d):
    n, R1, R2, R3 = 3, 1.0, 4.0, 16.0
    v = harmonic_field(d, {(n, n) if d == 2 else (n, 0): 1.0}, R3)
    rep = three_spheres_report(v, R1, R2, R3)
    ang = 2 * np.pi if d == 2 else 1.0
    ball = lambda R: np.sqrt(ang * R ** (2 * n + d) / (2 * n + d))
    assert rep.norms == pytest.approx((ball(R1), ball(R2), ball(R3)), rel=1e-13)
    assert rep.c_eff == pytest.approx(ball(R2) / (ball(R1) ** (2 / 3) * ball(R3) ** (1 / 3)), rel=1e-13)


@given(R3=st.sampled_from([24.0, 40.0, 100.0]), d=st.sampled_from([2, 3]))
def test_combined_exponents(R3, d):
    m = measured_exponents(d, 1.0, 4.0, R3)
    b, g = m["beta"], m["gamma"]
    assert g == pytest.approx(gamma_exponent(4.0, R3), rel=1e-12)
    x1, x2 = combined_exponents(b, g)
    assert x1 + x2 <= 1 + 1e-12
    assert (m["inner"], m["outer"]) == pytest.approx((x1, x2), rel=0.05)


def test_three_spheres_rejects_non_solutions_and_singular_fields(rng):
    v = random_harmonic(2, 4, 8.0, rng, decaying=True, inner=0.5)
    with pytest.raises(PreconditionError):
        three_spheres_report(v, 1.0, 2.0, 8.0)
    bad = ModeExpansion(2, (Layer(0.0, 1.0, 1.0), Layer(1.0, 8.0, 1.0)), [[1, 1]],
                        np.array([[[1.0, 0.0], [5.0, 0.0]]]))
    with pytest.raises(PreconditionError):
        three_spheres_report(bad, 1.0, 2.0, 8.0)


@pytest.mark.parametrize("ratio", [8.0, 16.0])
def test_effective_constant_is_finite(ratio, rng):
    for _ in range(20):
        v = random_harmonic(2, 16, ratio, rng)
        rep = three_spheres_report(v, 1.0, 4.0, ratio)
        assert np.isfinite(rep.c_eff) and rep.c_eff > 0
        assert norm_ball_l2(v, 4.0) == pytest.approx(rep.norms[1])
