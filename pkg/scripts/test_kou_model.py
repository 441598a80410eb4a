"""
Kou model tests
Covers parameter validation, the jump density and the expected relative jump sizes
"""

import math

import numpy as np
from scipy.integrate import quad

from runner import expect_raises, run_tests
from models.kou_model import (PARAM_KEYS, KouParams, expected_relative_jump_size,
                              jump_density, jump_density_factor)


def _integrate_factor(fn, p, eta_p, eta_q):
    lower, _ = quad(lambda y: fn(y) * jump_density_factor(y, p, eta_p, eta_q), 0.0, 1.0,
                    epsabs=1e-13, epsrel=1e-13, limit=200)
    upper, _ = quad(lambda y: fn(y) * jump_density_factor(y, p, eta_p, eta_q), 1.0, np.inf,
                    epsabs=1e-13, epsrel=1e-13, limit=200)
    return lower + upper


def test_default_parameter_set():
    params = KouParams()
    assert params.sigma1 == 0.30 and params.sigma2 == 0.40
    assert params.lam == 0.50 and params.K == 100.0 and params.T == 0.5
    assert math.isclose(params.q1, 0.6) and math.isclose(params.q2, 0.4)
    assert math.isclose(params.eta_p1, 5.0)


def test_zeta_closed_form():
    zeta = expected_relative_jump_size(0.4, 5.0, 1.0 / 0.15)
    expected = 0.4 * 5.0 / 4.0 + 0.6 * (1.0 / 0.15) / (1.0 / 0.15 + 1.0) - 1.0
    assert math.isclose(zeta, expected, rel_tol=1e-15)
    assert math.isclose(expected_relative_jump_size(1.0, 2.0, 3.0), 1.0)
    assert math.isclose(expected_relative_jump_size(0.0, 2.0, 1.0), -0.5)


def test_zeta_rejects_bad_rates():
    expect_raises(ValueError, expected_relative_jump_size, 0.4, 1.0, 5.0)
    expect_raises(ValueError, expected_relative_jump_size, 0.4, 5.0, 0.0)
    expect_raises(ValueError, expected_relative_jump_size, 1.5, 5.0, 5.0)


def test_density_integrates_to_one():
    params = KouParams()
    for p, eta_p, eta_q in ((params.p1, params.eta_p1, params.eta_q1),
                            (params.p2, params.eta_p2, params.eta_q2)):
        total = _integrate_factor(lambda y: 1.0, p, eta_p, eta_q)
        assert abs(total - 1.0) < 1e-8


def test_zeta_matches_quadrature_moment():
    params = KouParams()
    moments = params.moments
    for zeta, (p, eta_p, eta_q) in ((moments.zeta1, (params.p1, params.eta_p1, params.eta_q1)),
                                    (moments.zeta2, (params.p2, params.eta_p2, params.eta_q2))):
        moment = _integrate_factor(lambda y: y - 1.0, p, eta_p, eta_q)
        assert abs(moment - zeta) < 1e-8


def test_zeta_matches_monte_carlo():
    params = KouParams()
    rng = np.random.default_rng(20240501)
    n = 2_000_000
    up = rng.random(n) < params.p1
    log_jump = np.where(up, rng.exponential(1.0 / params.eta_p1, n),
                        -rng.exponential(1.0 / params.eta_q1, n))
    estimate = np.mean(np.exp(log_jump)) - 1.0
    assert abs(estimate - params.moments.zeta1) < 1.5e-3


def test_joint_density_is_product_of_factors():
    params = KouParams()
    y1 = np.array([0.5, 1.0, 2.0])
    y2 = np.array([0.8, 1.5, 1.0])
    joint = jump_density(y1, y2, params)
    f1 = jump_density_factor(y1, params.p1, params.eta_p1, params.eta_q1)
    f2 = jump_density_factor(y2, params.p2, params.eta_p2, params.eta_q2)
    assert np.allclose(joint, f1 * f2, rtol=1e-15)
    # y = 1 belongs to the upward branch
    assert math.isclose(jump_density_factor(1.0, 0.4, 5.0, 3.0), 0.4 * 5.0)


def test_density_rejects_nonpositive_ratios():
    expect_raises(ValueError, jump_density_factor, 0.0, 0.4, 5.0, 3.0)
    expect_raises(ValueError, jump_density_factor, np.array([1.0, -1.0]), 0.4, 5.0, 3.0)


def test_validation_errors():
    expect_raises(ValueError, KouParams, sigma1=0.0)
    expect_raises(ValueError, KouParams, lam=-0.1)
    expect_raises(ValueError, KouParams, eta_p2=1.0)
    expect_raises(ValueError, KouParams, eta_q1=-2.0)
    expect_raises(ValueError, KouParams, p1=1.2)
    expect_raises(ValueError, KouParams, rho=1.5)
    expect_raises(ValueError, KouParams, T=0.0)
    expect_raises(ValueError, KouParams, K=float('nan'))


def test_dict_conversion():
    params = KouParams(lam=0.25, rho=-0.3)
    data = params.to_dict()
    assert tuple(data) == PARAM_KEYS
    assert data['lambda'] == 0.25
    assert KouParams.from_dict(data) == params
    assert KouParams.from_dict({'lambda': 0.0}).lam == 0.0
    expect_raises(ValueError, KouParams.from_dict, {'lam': 0.3})


def main():
    return run_tests("Kou model tests", globals())


if __name__ == "__main__":
    exit(main())
