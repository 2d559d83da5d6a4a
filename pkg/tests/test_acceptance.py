"""End-to-end acceptance checks, one test per requirement, with the agreed tolerances."""

import time

import numpy as np
import pytest

from cloaksim.analysis import (
    assemble_W,
    coefficient_relations,
    detect_localized_resonance,
    fitted_bound_constant,
    gamma_exponent,
    high_mode_source,
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
from cloaksim.analysis.three_spheres import random_harmonic
from cloaksim.gridsolver import assemble, compare_with_spectral, grid_for, solve
from cloaksim.media import RadialObject, build_cloak, verify_complementary_identity
from cloaksim.spectral import ModalSource, RadialLayeredMedium, combine, energy_identity, norm_annulus_h1, norm_l2, solve_field

R2, R3, R_OMEGA, RHO = 1.0, 8.0, 12.0, 10.0
SWEEP = [10.0**-k for k in range(1, 9)]
OBJECT = RadialObject((1.0, 2.0), (2.0,))
N_MAX = {2: 64, 3: 16}


def direction(d):
    return 0.3 if d == 2 else (0.7, 0.3)


def loglog_slope(deltas, values):
    return float(np.polyfit(np.log10(deltas), np.log10(values), 1)[0])


def sweep(d, deltas=SWEEP, obj=OBJECT):
    """Spectral solves along the loss sweep with the reference field and W-patch jumps."""
    src = ModalSource.point(d, RHO, direction(d), N_MAX[d])
    _, med0 = build_cloak(d, R2, R3, R_OMEGA, obj, deltas[0])
    ref = solve_field(med0.reference_layers(), src)
    ref_norm = norm_l2(ref, R3, R_OMEGA)
    rows = []
    for delta in deltas:
        _, med = build_cloak(d, R2, R3, R_OMEGA, obj, delta)
        u = solve_field(med.radial_layers(), src)
        err = norm_l2(combine(1.0, u, -1.0, ref, R3, R_OMEGA), R3, R_OMEGA)
        pair = reflect_pair(u, R2, R3)
        uh = removed_singularity(d, u.modes, pair.u2.coeffs[:, 0, 0], delta, R3, 3 * R2, R_OMEGA)
        W = assemble_W(u, uh, pair.u2, R2, R3)
        rows.append({
            "delta": delta, "u": u, "error": err, "relative": err / ref_norm,
            "jumps": (W.jump_r3.value_norm, W.jump_r3.deriv_norm, W.jump_3r2.value_norm, W.jump_3r2.deriv_norm),
            "energy": energy_identity(u, [src]).residual,
            "bound": delta * norm_annulus_h1(u, 0.0, R_OMEGA) / src.surface_norm(d),
        })
    return rows


def check_complementary_identity(dims):
    t0 = time.perf_counter()
    worst = 0.0
    for d in dims:
        for r3 in (4.0, 8.0):
            spec, _ = build_cloak(d, R2, r3, 1.5 * r3, None, 0.1)
            worst = max(worst, verify_complementary_identity(spec, n_samples=1000))
    return worst, time.perf_counter() - t0


def check_reflection_traces(d, n_media=20):
    t0 = time.perf_counter()
    worst = 0.0
    R = 2.0
    for seed in range(n_media):
        rng = np.random.default_rng(seed)
        cuts = np.sort(rng.uniform(0.3, 1.9, rng.integers(1, 4)))
        sig = rng.uniform(0.2, 3.0, len(cuts) + 2) * np.exp(1j * rng.uniform(-0.3, 0.3, len(cuts) + 2))
        med = RadialLayeredMedium.from_breaks(d, list(cuts) + [R, 3.0], list(sig))
        e = solve_field(med, ModalSource.point(d, 2.5, direction(d), 16))
        w = reflect_through_sphere(e, R, side="inside")
        worst = max(worst, *trace_identity_residuals(e, w, R, "-"))
    return worst, time.perf_counter() - t0


def check_mode_relations(d, n_max):
    worst = 0.0
    for delta in (1.0, 0.1, 1e-3):
        _, med = build_cloak(d, R2, R3, R_OMEGA, None, delta)
        u = solve_field(med.radial_layers(), ModalSource.point(d, RHO, direction(d), n_max))
        worst = max(worst, coefficient_relations(reflect_pair(u, R2, R3), delta).max_residual)
    return worst


def check_convergence(rows):
    errors = np.array([r["error"] for r in rows])
    return bool(np.all(np.diff(errors) < 0)), rows[-1]["relative"]


def check_jump_decay(rows):
    deltas = [r["delta"] for r in rows]
    jumps = np.array([r["jumps"] for r in rows])
    slopes = [loglog_slope(deltas, jumps[:, k]) for k in range(4)]
    shrink = jumps[-1] / jumps[0]
    return slopes, shrink


def test_complementary_identity_holds_to_round_off():
    worst, elapsed = check_complementary_identity((2, 3))
    assert worst <= 1e-10
    assert elapsed < 1.0


def test_reflected_field_trace_identities():
    worst, elapsed = check_reflection_traces(2)
    assert worst <= 1e-10
    assert elapsed < 5.0


def test_solver_coefficients_obey_mode_relations():
    assert check_mode_relations(2, 32) <= 1e-9


def test_exterior_field_converges_to_reference():
    t0 = time.perf_counter()
    monotone, final = check_convergence(sweep(2))
    assert monotone
    assert final < 1e-4
    assert time.perf_counter() - t0 < 30.0


def test_patch_jumps_decay_with_positive_slope():
    slopes, shrink = check_jump_decay(sweep(2))
    assert min(slopes) > 0
    assert np.all(shrink < 1e-2)


def test_energy_identity_and_loss_bound():
    configs = [sweep(2), sweep(2, obj=None), sweep(3)]
    assert max(r["energy"] for rows in configs for r in rows) <= 1e-9
    for rows in configs:
        C = np.array([r["bound"] for r in rows])
        assert np.all(np.isfinite(C)) and C.max() <= 2.0 * C[0]


def test_three_spheres_interpolation_and_exponents():
    corrected = interpolation_trials(2, 1000, 16, (0.5 * R2, R2, 2 * R2), seed=7)
    assert corrected.max() <= 1.01
    rng = np.random.default_rng(8)
    for ratio in (8.0, 16.0):
        Rs = (R2, 4 * R2, ratio * R2)
        c_eff = [three_spheres_report(random_harmonic(2, 16, Rs[2], rng), *Rs, alpha=2 / 3).c_eff
                 for _ in range(100)]
        assert np.all(np.isfinite(c_eff))
        lam = interpolation_exponent(Rs[1] / 2, 2 * Rs[1], Rs[2] / 2)
        assert gamma_exponent(Rs[1], Rs[2]) == pytest.approx(lam, rel=1e-12)
        assert measured_exponents(2, *Rs)["gamma"] == pytest.approx(lam, rel=1e-12)


def test_grid_oracle_matches_spectral_at_second_order():
    t0 = time.perf_counter()
    _, med = build_cloak(2, R2, R3, R_OMEGA, OBJECT, 0.1)
    src = ModalSource.point(2, RHO, 0.3, 16)
    exact = solve_field(med.radial_layers(), src)
    errors = []
    for n in (64, 128, 256):
        df = solve(assemble(med, grid_for(med, n, n, extra=[RHO]), [src]))
        errors.append(compare_with_spectral(df, exact, (R3, R_OMEGA))["relative_l2"])
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert errors[-1] <= 0.01
    assert np.all(ratios > 1)
    assert np.log2(ratios[-1]) >= 1.9
    assert time.perf_counter() - t0 < 120.0


def test_localized_resonance_for_source_near_the_cloak():
    r1 = R2**2 / R3
    annuli = [(0.0, r1), (r1, 0.5 * (r1 + R2)), (0.5 * (r1 + R2), R2), (R2, 2 * R2), (2 * R2, R3), (R3, R_OMEGA)]
    src = high_mode_source(2, 1.05 * R3, 16, 32)
    profiles = []
    for delta in SWEEP:
        _, med = build_cloak(2, R2, R3, R_OMEGA, OBJECT, delta)
        u = solve_field(med.radial_layers(), src)
        profiles.append(resonance_profile(u, annuli, (r1, R2), delta))
    flag = detect_localized_resonance(profiles, [0, 1, 2, 3, 4], 5)
    assert flag.flagged
    assert flag.interior_growth[:, flag.best_annulus].min() >= 10.0
    assert flag.exterior_drift.max() <= 0.10
    assert np.all(np.isfinite(fitted_bound_constant(profiles, src.surface_norm(2))))


def test_three_dimensional_parity():
    worst, elapsed = check_complementary_identity((3,))
    assert worst <= 1e-10 and elapsed < 1.0
    worst, elapsed = check_reflection_traces(3)
    assert worst <= 1e-10 and elapsed < 5.0
    assert check_mode_relations(3, 16) <= 1e-9
    t0 = time.perf_counter()
    rows = sweep(3)
    monotone, final = check_convergence(rows)
    assert monotone and final < 1e-4
    assert time.perf_counter() - t0 < 30.0
    slopes, shrink = check_jump_decay(rows)
    assert min(slopes) > 0 and np.all(shrink < 1e-2)
