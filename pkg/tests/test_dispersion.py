import math

import numpy as np
import pytest

from nskstab.dispersion import (BracketError, DispersionSolver, WaveVector,
                                dispersion_csv, dispersion_curve,
                                lattice_magnitudes, solve_lambda_j,
                                unstable_set)
from nskstab.mesh import build_mesh
from nskstab.profile import PhysicalParams, make_profile


def test_wavevector_magnitude_and_zero_rejected():
    assert WaveVector(3.0, 4.0).k == pytest.approx(5.0)
    with pytest.raises(ValueError):
        WaveVector(0.0, 0.0)


def test_lattice_magnitudes_dedup():
    mags = lattice_magnitudes(1.0, 3.2)
    ks = [round(k * k) for k, _ in mags]
    assert ks == [1, 2, 4, 5, 8, 9, 10]  # 3, 6, 7 are not sums of two squares
    # one representative per magnitude, n1 >= n2 >= 0
    for _, wv in mags:
        assert wv.k1 >= wv.k2 >= 0.0


def test_lattice_respects_period():
    mags = lattice_magnitudes(2.0, 1.1)
    assert [round((k * 2.0) ** 2) for k, _ in mags] == [1, 2, 4]


def test_solve_returns_none_above_sigma_ck(mesh64, linear_profile):
    # closed form: sigma_c(k) = g/(k^2 + pi^2) for rho0 = 1 + x3
    k = 2.0
    sck = 1.0 / (k * k + math.pi ** 2)
    params = PhysicalParams(g=1.0, mu=0.1, sigma=1.05 * sck, L=1.0)
    assert solve_lambda_j(linear_profile, params, k, 1, mesh64) is None


def test_solve_none_for_large_mode_index(solver64):
    at0 = solver64.gamma_at(math.pi, 0.0, count=10)
    j_over = at0.n_positive + 1
    assert solver64.solve_lambda_j(math.pi, j_over) is None


def test_fixed_point_residual_and_refinement(cv_pi_1, linear_profile, params, mesh128):
    assert cv_pi_1.gamma_residual <= 1e-10
    assert 0.0 < cv_pi_1.lam <= 1.0
    cv128 = DispersionSolver(mesh128, linear_profile, params).solve_lambda_j(math.pi, 1)
    assert abs(cv_pi_1.lam - cv128.lam) <= 1e-6 * cv128.lam


def test_gamma_monotone_in_lambda(solver64):
    lams = np.linspace(0.0, solver64.lambda_max, 5)
    for k in (1.0, math.pi):
        g = [solver64.gamma_at(k, lam, 1).gammas[0] for lam in lams]
        assert all(a > b for a, b in zip(g[:-1], g[1:]))


def test_lambda_ordering_and_bound(solver64):
    cvs = solver64.solve_all_j(math.pi, 4)
    assert len(cvs) >= 1
    lams = [cv.lam for cv in cvs]
    assert all(a > b for a, b in zip(lams[:-1], lams[1:]))
    assert all(lam <= solver64.lambda_max + 1e-12 for lam in lams)


def test_limit_behavior_of_fixed_point_map(solver64):
    # lambda/gamma_1 is small near 0 and exceeds 1 at the bracket end when a
    # root lies strictly inside
    k = math.pi
    r = [lam / solver64.gamma_at(k, lam, 1).gammas[0] for lam in (1e-3, 1e-2)]
    assert 0 < r[0] < r[1] < 1
    lam_hi = solver64.lambda_max
    g_hi = solver64.gamma_at(k, lam_hi, 1).gammas[0]
    assert lam_hi / g_hi > 1.0


def test_unstable_set_closed_form_members(mesh64, linear_profile):
    # sigma = 0.05: members satisfy k^2 < g/sigma - pi^2 = 20 - pi^2 ~ 10.13
    params = PhysicalParams(g=1.0, mu=0.1, sigma=0.05, L=1.0)
    us = unstable_set(linear_profile, params, mesh64)
    got = sorted(round(wv.k ** 2) for wv in us.members)
    assert got == [1, 2, 4, 5, 8, 9, 10]
    assert us.Lambda is not None
    assert us.Lambda <= 1.0 + 1e-12  # sqrt(g/L0) = 1
    assert us.Lambda == pytest.approx(max(us.lambda1), rel=1e-15)
    assert all(l1 > (2.0 / 3.0) * us.Lambda
               for wv, l1 in zip(us.members, us.lambda1) if wv in us.S_Lambda)


def test_unstable_set_empty_above_sigma_c(mesh64, linear_profile):
    params = PhysicalParams(g=1.0, mu=0.1, sigma=0.2, L=1.0)  # > 1/pi^2
    us = unstable_set(linear_profile, params, mesh64)
    assert us.members == []
    assert us.Lambda is None


def test_unstable_set_warns_on_truncation(mesh64, linear_profile):
    params = PhysicalParams(g=1.0, mu=0.1, sigma=0.05, L=1.0)
    with pytest.warns(UserWarning, match="truncates"):
        us = unstable_set(linear_profile, params, mesh64, k_max=2.0)
    assert us.truncated
    assert sorted(round(wv.k ** 2) for wv in us.members) == [1, 2, 4]


def test_unstable_set_sigma_zero_needs_kmax(mesh64, linear_profile):
    params = PhysicalParams(g=1.0, mu=0.1, sigma=0.0, L=1.0)
    with pytest.raises(ValueError, match="k_max"):
        unstable_set(linear_profile, params, mesh64)
    with pytest.warns(UserWarning):
        us = unstable_set(linear_profile, params, mesh64, k_max=2.0)
    assert [round(wv.k ** 2) for wv in us.members] == [1, 2, 4]


def test_threaded_sweep_matches_serial(mesh32, linear_profile):
    params = PhysicalParams(g=1.0, mu=0.1, sigma=0.05, L=1.0)
    us1 = unstable_set(linear_profile, params, mesh32, threads=1)
    us4 = unstable_set(linear_profile, params, mesh32, threads=4)
    assert [wv.k for wv in us1.members] == [wv.k for wv in us4.members]
    assert np.allclose(us1.lambda1, us4.lambda1, rtol=0, atol=0)


def test_dispersion_curve_rows_and_csv(mesh32, linear_profile):
    params = PhysicalParams(g=1.0, mu=0.1, sigma=0.05, L=1.0)
    assert dispersion_curve(linear_profile, params, mesh32, [], 2) == []
    k_stable = 4.0  # sigma_c(4) = 1/(16 + pi^2) ~ 0.039 < 0.05
    rows = dispersion_curve(linear_profile, params, mesh32, [1.0, k_stable], 2)
    assert rows[0]["k"] == 1.0
    assert rows[0]["lambdas"][0] is not None
    assert rows[1]["lambdas"] == [None, None]
    csv = dispersion_csv(rows, 2, header_lines=["config_hash=x"])
    lines = csv.strip().splitlines()
    assert lines[0] == "# config_hash=x"
    assert lines[1] == "k,sigma_c_k,lambda_1,lambda_2"
    assert lines[3].endswith(",,")  # blank cells for missing roots


def test_lambda1_decreasing_in_sigma(mesh32, linear_profile):
    lams = []
    for sigma in (0.01, 0.04):
        params = PhysicalParams(g=1.0, mu=0.1, sigma=sigma, L=1.0)
        cv = solve_lambda_j(linear_profile, params, 2.0, 1, mesh32)
        lams.append(cv.lam)
    assert lams[0] > lams[1]


def test_exponential_profile_sweep(mesh32, exp_profile):
    params = PhysicalParams(g=1.0, mu=0.2, sigma=0.05, L=1.0)
    us = unstable_set(exp_profile, params, mesh32)
    assert us.members, "exponential profile should be unstable at sigma = 0.05"
    assert us.Lambda <= math.sqrt(1.0 / 1.0) + 1e-12  # L0 = 1 for e^x
