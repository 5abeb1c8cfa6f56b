import math

import numpy as np
import pytest

from nskstab.profile import (CharacteristicLength, PhysicalParams, ProfileError,
                             characteristic_length, lambda_upper_bound,
                             make_profile)


def test_linear_profile_derivatives():
    p = make_profile("linear", [1.0, 1.0])
    xs = np.linspace(0, 1, 7)
    assert np.allclose(p(xs), 1.0 + xs)
    assert np.allclose(p(xs, 1), 1.0)
    assert np.allclose(p(xs, 2), 0.0)
    assert np.allclose(p(xs, 3), 0.0)


def test_exponential_profile_derivatives():
    p = make_profile("exponential", [1.0, 1.0])
    xs = np.linspace(0, 1, 7)
    for order in range(4):
        assert np.allclose(p(xs, order), np.exp(xs))


def test_decreasing_profile_rejected():
    with pytest.raises(ProfileError, match="not increasing"):
        make_profile("linear", [1.0, -1.0])


def test_nonpositive_profile_rejected():
    with pytest.raises(ProfileError, match="not positive"):
        make_profile("linear", [-0.5, 1.0])


def test_unknown_kind_rejected():
    with pytest.raises(ProfileError, match="unknown profile kind"):
        make_profile("quadratic", [1.0, 1.0])


def test_tabulated_profile_matches_samples():
    xs = np.linspace(0, 1, 21)
    table = list(zip(xs, 1.0 + xs + 0.2 * xs ** 2))
    p = make_profile("tabulated", table=table)
    assert np.allclose(p(xs), 1.0 + xs + 0.2 * xs ** 2, atol=1e-12)
    mid = np.linspace(0.05, 0.95, 50)
    assert np.allclose(p(mid), 1.0 + mid + 0.2 * mid ** 2, atol=1e-5)


@pytest.mark.parametrize("kind,args", [
    ("linear", [1.0, 1.0]),
    ("linear", [2.0, 0.5]),
    ("exponential", [1.0, 1.0]),
    ("exponential", [0.5, 2.0]),
])
def test_finite_difference_consistency(kind, args):
    # central differences at step 1e-5 against the analytic derivatives
    p = make_profile(kind, args)
    rng = np.random.default_rng(42)
    xs = rng.uniform(1e-4, 1.0 - 1e-4, size=100)
    h = 1e-5
    for order in (1, 2, 3):
        fd = (p(xs + h, order - 1) - p(xs - h, order - 1)) / (2 * h)
        ref = p(xs, order)
        scale = np.maximum(np.abs(ref), 1.0)
        assert np.max(np.abs(fd - ref) / scale) <= 1e-6


def test_characteristic_length_linear():
    # max of 1/(1+x) is 1 at x = 0
    p = make_profile("linear", [1.0, 1.0])
    cl = characteristic_length(p)
    assert cl.L0 == pytest.approx(1.0, abs=1e-12)
    assert cl.argmax_x3 == pytest.approx(0.0, abs=1e-3)


def test_characteristic_length_exponential():
    p = make_profile("exponential", [1.0, 1.0])
    assert characteristic_length(p).L0 == pytest.approx(1.0, abs=1e-12)


def test_characteristic_length_shifted_linear():
    p = make_profile("linear", [2.0, 1.0])
    assert characteristic_length(p).L0 == pytest.approx(2.0, abs=1e-12)


def test_characteristic_length_scale_invariant():
    from nskstab.profile import DensityProfile
    p = make_profile("exponential", [1.0, 0.7])
    p3 = DensityProfile(p.kind, p.params,
                        lambda x: 3 * p(x, 0), lambda x: 3 * p(x, 1),
                        lambda x: 3 * p(x, 2), lambda x: 3 * p(x, 3))
    assert characteristic_length(p).L0 == characteristic_length(p3).L0


def test_lambda_upper_bound_values():
    p = make_profile("linear", [1.0, 1.0])
    pp = lambda g: PhysicalParams(g=g, mu=1.0, sigma=0.0, L=1.0)
    assert lambda_upper_bound(p, pp(1.0)) == pytest.approx(1.0, abs=1e-12)
    assert lambda_upper_bound(p, pp(9.8)) == pytest.approx(math.sqrt(9.8), abs=1e-12)
    p2 = make_profile("linear", [2.0, 1.0])
    assert lambda_upper_bound(p2, pp(1.0)) == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_lambda_upper_bound_sqrt_g_scaling():
    p = make_profile("exponential", [1.0, 1.3])
    pp = lambda g: PhysicalParams(g=g, mu=1.0, sigma=0.0, L=1.0)
    b1 = lambda_upper_bound(p, pp(1.0))
    b2 = lambda_upper_bound(p, pp(2.0))
    assert b2 == pytest.approx(math.sqrt(2.0) * b1, rel=1e-14)


def test_physical_params_invariants():
    with pytest.raises(ValueError, match="g must be positive"):
        PhysicalParams(g=0.0, mu=1.0, sigma=0.0, L=1.0)
    with pytest.raises(ValueError, match="mu must be positive"):
        PhysicalParams(g=1.0, mu=-1.0, sigma=0.0, L=1.0)
    with pytest.raises(ValueError, match="sigma must be nonnegative"):
        PhysicalParams(g=1.0, mu=1.0, sigma=-0.1, L=1.0)
    with pytest.raises(ValueError, match="L must be positive"):
        PhysicalParams(g=1.0, mu=1.0, sigma=0.0, L=0.0)
