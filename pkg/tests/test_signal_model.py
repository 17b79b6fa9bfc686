import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poisson_source.geometry import DegenerateGeometryError, Region, SensorNetwork, travel_times
from poisson_source.signal_model import (
    NonSmoothModelError,
    PowerLaw,
    Tabulated,
    ZeroInformationError,
    arrival_fisher,
    fisher_matrix,
    fisher_weight,
    information_integral,
    intensity_at,
    intensity_derivative_at,
)

from .oracles import adaptive_simpson, fisher_integral, power_law


def test_intensity_examples():
    m = PowerLaw(1.0, 1.0)
    assert intensity_at(m, 0, 1.0, 0.7, 0.5) == 0.5
    assert intensity_at(m, 0, 1.0, 2.0, 0.5) == 1.5
    step = PowerLaw(2.0, 0.0)
    for t in (1.0, 1.5, 3.0):
        assert intensity_at(step, 0, 1.0, t, 0.5) == 2.5
    assert intensity_at(step, 0, 1.0, 0.99, 0.5) == 0.5


def test_intensity_derivative_examples():
    assert intensity_derivative_at(PowerLaw(1.0, 2.0), 0, 1.0, 3.0) == 4.0
    assert intensity_derivative_at(PowerLaw(1.0, 2.0), 0, 1.0, 0.5) == 0.0
    assert intensity_derivative_at(PowerLaw(1.0, 0.5), 0, 1.0, 0.5) == 0.0
    with pytest.raises(NonSmoothModelError):
        intensity_derivative_at(PowerLaw(1.0, 0.5), 0, 1.0, 2.0)


def test_tabulated_derivative_matches_finite_difference():
    tab = Tabulated(lambda s: np.sin(s) ** 2 + s, lambda s: 2 * np.sin(s) * np.cos(s) + 1)
    for t in (1.3, 2.0, 3.7):
        h = 1e-6
        fd = (intensity_at(tab, 0, 1.0, t + h, 0.0) - intensity_at(tab, 0, 1.0, t - h, 0.0)) / (2 * h)
        assert intensity_derivative_at(tab, 0, 1.0, t) == pytest.approx(fd, rel=1e-5)


def test_tabulated_integral_fallback_matches_closed_form():
    tab = Tabulated(lambda s: 3 * s**2, lambda s: 6 * s)
    np.testing.assert_allclose(tab.integral(np.array([0.5, 2.0, -1.0])), [0.125, 8.0, 0.0], rtol=1e-10)


def test_fisher_weight_against_simpson_oracle():
    net = SensorNetwork([(1.0, 0.0)] * 3, nu=1.0, T=1.0, lambda0=0.5,
                        theta_region=Region(-1, 1, -1, 1), validate=False)
    m = PowerLaw(1.0, 2.0)
    # theta at distance 0.2 would put tau at 0.2 but change d; use nu so that tau=0.2 with d=1
    net5 = SensorNetwork([(1.0, 0.0)] * 3, nu=5.0, T=1.0, lambda0=0.5,
                         theta_region=Region(-1, 1, -1, 1), validate=False)
    oracle = adaptive_simpson(lambda s: (2 * s) ** 2 / (s * s + 0.5), 0.0, 0.8, tol=1e-14)
    assert fisher_weight(net5, m, 0, (0.0, 0.0)) * 25.0 == pytest.approx(oracle, rel=1e-6)
    # t_end <= tau gives zero
    assert fisher_weight(net, m, 0, (0.0, 0.0), t_end=1.0) == 0.0


def test_fisher_weight_scales_with_inverse_nu_squared():
    # d = 1 in both; T is shifted so that T - tau_j, and hence the integral, is the same
    m = PowerLaw(1.0, 2.0)
    a = SensorNetwork([(1.0, 0.0)] * 3, 1.0, 2.0, 0.5, Region(-1, 1, -1, 1), validate=False)
    b = SensorNetwork([(1.0, 0.0)] * 3, 2.0, 1.5, 0.5, Region(-1, 1, -1, 1), validate=False)
    assert fisher_weight(b, m, 0, (0.0, 0.0)) / fisher_weight(a, m, 0, (0.0, 0.0)) == 0.25


def test_fisher_weight_degenerate_geometry():
    net = SensorNetwork([(1.0, 0.0), (0.0, 5.0), (-5.0, 0.0)], 1.0, 10.0, 0.5, Region(-1, 1, -1, 1))
    with pytest.raises(DegenerateGeometryError):
        fisher_weight(net, PowerLaw(1.0, 2.0), 0, (1.0, 0.0))


@given(st.floats(0.5, 5), st.floats(0.6, 4), st.floats(0.1, 3), st.floats(0.05, 3))
def test_information_integral_against_oracle(a, kappa, lambda0, s_end):
    lam, dlam = power_law(a, kappa)
    oracle = fisher_integral(lam, dlam, lambda0, s_end)
    assert information_integral(PowerLaw(a, kappa), lambda0, s_end) == pytest.approx(oracle, rel=1e-6, abs=1e-9)


def test_fisher_matrix_zero_and_rank_one(net, model):
    theta = (0.3, 0.4)
    taus = np.sort(travel_times(net, theta))
    assert np.all(fisher_matrix(net, model, theta, t_end=0.9 * taus[0]).matrix == 0)
    m = fisher_matrix(net, model, theta, t_end=0.5 * (taus[0] + taus[1])).matrix
    assert abs(np.linalg.det(m)) <= 1e-12 * np.linalg.norm(m) ** 2
    assert np.linalg.matrix_rank(m) == 1


def test_fisher_matrix_reference_values(net, model):
    info = fisher_matrix(net, model, (0.3, 0.4))
    np.testing.assert_allclose(info.matrix, info.matrix.T)
    assert info.kind == "full"
    lam, dlam = power_law(3.0, 2.0)
    manual = np.zeros((2, 2))
    for s in net.sensors:
        v = np.array([s.x - 0.3, s.y - 0.4])
        d = np.hypot(*v)
        manual += fisher_integral(lam, dlam, 1.0, 6.0 - d) / d**2 * np.outer(v, v)
    np.testing.assert_allclose(info.matrix, manual, rtol=1e-8)


def test_fisher_loewner_monotone_in_time(net, model):
    ts = np.linspace(1.5, 6.0, 25)
    mats = [fisher_matrix(net, model, (0.3, 0.4), t_end=t).matrix for t in ts]
    for m1, m2 in zip(mats[:-1], mats[1:]):
        assert np.linalg.eigvalsh(m2 - m1).min() >= -1e-10


def test_fisher_positive_definite_on_grid(net, model):
    for x in np.linspace(0, 1, 20):
        for y in np.linspace(0, 1, 20):
            assert fisher_matrix(net, model, (x, y)).min_eigenvalue() > 0


def test_fisher_permutation_invariant(net, model):
    a = fisher_matrix(net, model, (0.7, 0.2)).matrix
    b = fisher_matrix(net.permuted([2, 0, 3, 1]), model, (0.7, 0.2)).matrix
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_arrival_fisher_relations(net, model):
    theta = (0.3, 0.4)
    af = arrival_fisher(net, model, theta)
    d = np.hypot(*(net.positions - np.array(theta)).T)
    for j in range(net.k):
        w = fisher_weight(net, model, j, theta)
        assert af.diag[j] == pytest.approx(net.nu**2 * d[j] ** 2 * w, rel=1e-14)
    np.testing.assert_allclose(af.sigma2, 1 / af.diag)
    # equidistant detectors from the centre of the square
    sym = arrival_fisher(net, model, (0.5, 0.5))
    np.testing.assert_allclose(sym.diag, sym.diag[0], rtol=1e-12)


def test_arrival_fisher_zero_information(net):
    with pytest.raises(ZeroInformationError):
        arrival_fisher(net, PowerLaw(0.0, 2.0), (0.3, 0.4))


def test_power_law_validation():
    with pytest.raises(ValueError):
        PowerLaw(-1.0, 2.0)
    with pytest.raises(ValueError):
        PowerLaw(1.0, -0.6)
    assert PowerLaw(1.0, 0.6).smooth and not PowerLaw(1.0, 0.5).smooth
    assert math.isinf(PowerLaw(1.0, -0.25).sup(1.0))
    with pytest.raises(NonSmoothModelError):
        information_integral(PowerLaw(1.0, 0.5), 1.0, 1.0)
