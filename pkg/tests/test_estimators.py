import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poisson_source import PowerLaw, Region, SensorNetwork
from poisson_source.estimators import (
    ArrivalEstimates,
    DegenerateInformationError,
    SingularDesignError,
    WrongExponentError,
    arrival_estimates,
    arrival_mle,
    bayes_estimate,
    estimate_delay_sqrt_case,
    joint_mle,
    lse_estimate,
    lse_estimate_unknown_start,
    one_step,
    one_step_process,
    sqrt_case_gamma2,
)
from poisson_source.estimators.arrival import maximize_profile
from poisson_source.geometry import domain_bounds, travel_times
from poisson_source.likelihood import detector_profiles, log_likelihood
from poisson_source.pp_sim import ObservationSet, sample_paths, thin, thinning_probability
from poisson_source.signal_model import arrival_fisher, fisher_matrix

from . import montecarlo

THETA0 = (0.3, 0.4)


def exact_arrivals(net, theta, sigma2=None):
    taus = travel_times(net, theta)
    s2 = np.ones(net.k) if sigma2 is None else sigma2
    return ArrivalEstimates(tau_hat=taus, sigma2=s2, window=[domain_bounds(net, j) for j in range(net.k)])


# ------------------------------------------------------------------ arrivals


def test_arrival_flat_likelihood_returns_midpoint(net):
    flat_model = PowerLaw(0.0, 2.0)
    obs = sample_paths(net, flat_model, THETA0, 50.0, 0)
    tau, s2, info = arrival_mle(net, flat_model, 0, obs)
    alpha, beta = domain_bounds(net, 0)
    assert tau == 0.5 * (alpha + beta) and info["flat"] and math.isinf(s2)


@given(st.integers(0, 10_000), st.floats(5, 200))
def test_arrival_within_window(seed, n):
    net = SensorNetwork([(-1, -1), (2, -1), (2, 2), (-1, 2)], 1.0, 6.0, 1.0, Region(0, 1, 0, 1))
    model = PowerLaw(3.0, 2.0)
    arr = arrival_estimates(net, model, sample_paths(net, model, THETA0, n, seed))
    assert np.all(arr.window[:, 0] <= arr.tau_hat) and np.all(arr.tau_hat <= arr.window[:, 1])


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_arrival_maximizer_against_brute_force(net, model, seed):
    obs = sample_paths(net, model, THETA0, 30.0, seed)
    prof = detector_profiles(net, model, obs)[1]
    lo, hi = domain_bounds(net, 1)
    tau, val, _ = maximize_profile(prof, lo, hi)
    grid = np.linspace(lo, hi, 20001)
    brute = np.array([prof(t) for t in grid])
    assert val >= brute.max() - 1e-9
    assert val == pytest.approx(prof(tau), abs=1e-9)


def test_arrival_sigma2_matches_arrival_fisher(net, model):
    obs = sample_paths(net, model, THETA0, 1e3, 4)
    arr = arrival_estimates(net, model, obs)
    ref = 1.0 / np.array([arrival_fisher(net, model, THETA0).diag])[0]
    np.testing.assert_allclose(arr.sigma2, ref, rtol=0.05)


# ------------------------------------------------------------------ lse


def delta_method_covariance(net, taus, sigma2, h=1e-6):
    """Jacobian of gamma*(tau) by central differences, pushed through diag(sigma2)."""
    J = np.zeros((3, net.k))
    for j in range(net.k):
        up, dn = taus.copy(), taus.copy()
        up[j] += h
        dn[j] -= h
        g_up = lse_estimate(net, ArrivalEstimates(up, np.ones(net.k), np.zeros((net.k, 2)))).gamma
        g_dn = lse_estimate(net, ArrivalEstimates(dn, np.ones(net.k), np.zeros((net.k, 2)))).gamma
        J[:, j] = (g_up - g_dn) / (2 * h)
    return J @ np.diag(sigma2) @ J.T


def test_lse_covariance_matches_delta_method(net, model):
    s2 = arrival_fisher(net, model, THETA0).sigma2
    res = lse_estimate(net, exact_arrivals(net, THETA0, s2))
    np.testing.assert_allclose(res.D, delta_method_covariance(net, travel_times(net, THETA0), s2), rtol=1e-6)
    np.testing.assert_allclose(res.D, res.D.T, atol=1e-15)
    assert np.linalg.eigvalsh(res.D).min() > 0
    np.testing.assert_array_equal(res.M, res.D[:2, :2])


def test_lse_exact_recovery_random_geometries(rng):
    worst = 0.0
    for _ in range(100):
        sensors = rng.uniform(-3, 3, size=(rng.integers(3, 7), 2))
        theta = rng.uniform(-1, 1, size=2)
        net = SensorNetwork(sensors, 1.3, 100.0, 1.0, Region(-1, 1, -1, 1), validate=False)
        if net.positions.std(axis=0).min() < 0.1:
            continue
        res = lse_estimate(net, exact_arrivals(net, theta))
        truth = np.array([theta[0], theta[1], theta @ theta])
        worst = max(worst, np.max(np.abs(res.gamma - truth)))
        assert res.s_n < 1e-9
    assert worst < 1e-10


def test_lse_collinear_sensors_singular():
    net = SensorNetwork([(0, 0), (1, 0), (2, 0)], 1.0, 10.0, 1.0, Region(0, 1, 0, 1), validate=False)
    with pytest.raises(SingularDesignError):
        lse_estimate(net, exact_arrivals(net, (0.5, 0.5)))
    with pytest.raises(np.linalg.LinAlgError):
        lse_estimate(net, exact_arrivals(net, (0.5, 0.5)))


def test_lse_unknown_start_exact(rng):
    net = SensorNetwork([(-1, -1), (2, -1), (2, 2), (-1, 2), (0.5, 3)], 1.0, 10.0, 1.0, Region(0, 1, 0, 1))
    theta = np.array([0.3, 0.4])
    taus = travel_times(net, theta)
    for start in (0.7, 0.0):
        arr = ArrivalEstimates(taus + start, np.ones(net.k), np.zeros((net.k, 2)))
        res = lse_estimate_unknown_start(net, arr)
        np.testing.assert_allclose(res.gamma[:2], theta, atol=1e-10)
        assert res.emission_time == pytest.approx(start, abs=1e-10)
        assert res.consistency < 1e-9
    known = lse_estimate(net, exact_arrivals(net, theta)).gamma[:2]
    np.testing.assert_allclose(res.gamma[:2], known, atol=1e-8)


def test_lse_unknown_start_needs_four_sensors():
    net = SensorNetwork([(-1, -1), (2, -1), (2, 2)], 1.0, 10.0, 1.0, Region(0, 1, 0, 1))
    with pytest.raises(SingularDesignError):
        lse_estimate_unknown_start(net, exact_arrivals(net, THETA0))


def test_lse_sanity_statistic_flag(net):
    res = lse_estimate(net, exact_arrivals(net, THETA0), n=1e4)
    assert res.s_n_ok
    noisy = exact_arrivals(net, THETA0)
    noisy.tau_hat = noisy.tau_hat + np.array([0.3, 0.0, 0.0, 0.0])
    assert not lse_estimate(net, noisy, n=1e4).s_n_ok


# ------------------------------------------------------------------ joint MLE / Bayes


def test_mirrored_sources_are_indistinguishable():
    net = SensorNetwork([(0, 0), (1, 0), (3, 0)], 1.0, 20.0, 1.0, Region(-2, 2, -2, 2), validate=False)
    model = PowerLaw(3.0, 2.0)
    obs = sample_paths(net, model, (0.7, 0.9), 100.0, 3)
    a = log_likelihood(net, model, (0.7, 0.9), obs)
    b = log_likelihood(net, model, (0.7, -0.9), obs)
    assert a == pytest.approx(b, rel=1e-10)


@pytest.mark.parametrize("seed", [0, 1])
def test_mle_beats_fine_grid(net, model, seed):
    obs = sample_paths(net, model, THETA0, 300.0, seed)
    res = joint_mle(net, model, obs)
    value = log_likelihood(net, model, res.theta, obs)
    xs = np.linspace(0, 1, 41)
    coarse = max(log_likelihood(net, model, (x, y), obs) for x in xs for y in xs)
    assert value >= coarse - 1e-9
    # a fine grid around the answer does not find anything better
    g = np.linspace(-3e-3, 3e-3, 13)
    local = max(log_likelihood(net, model, (res.theta.x + dx, res.theta.y + dy), obs) for dx in g for dy in g
                if net.theta_region.contains((res.theta.x + dx, res.theta.y + dy)))
    assert value >= local - 1e-7
    np.testing.assert_allclose(res.normalized_cov, fisher_matrix(net, model, res.theta).inverse())


def test_mle_translation_equivariant(net, model):
    shift = np.array([3.5, -1.25])
    moved = net.translated(*shift)
    a = joint_mle(net, model, sample_paths(net, model, THETA0, 1e3, 9))
    b = joint_mle(moved, model, sample_paths(moved, model, np.array(THETA0) + shift, 1e3, 9))
    np.testing.assert_allclose(b.as_array() - shift, a.as_array(), atol=1e-7)


def test_bayes_flat_posterior_is_centroid(net):
    flat = PowerLaw(0.0, 2.0)
    res = bayes_estimate(net, flat, sample_paths(net, flat, THETA0, 10.0, 0))
    np.testing.assert_allclose(res.as_array(), [0.5, 0.5], atol=1e-12)


def test_bayes_close_to_mle_and_posterior_covariance(net, model):
    n = 1e4
    obs = sample_paths(net, model, THETA0, n, 21)
    be = bayes_estimate(net, model, obs)
    mle = joint_mle(net, model, obs)
    inv = fisher_matrix(net, model, THETA0).inverse()
    assert np.linalg.norm(be.as_array() - mle.as_array()) * math.sqrt(n) < 0.5 * math.sqrt(np.trace(inv))
    np.testing.assert_allclose(be.diagnostics["posterior_cov"] * n, inv, rtol=0.3, atol=0.1 * np.trace(inv))


def test_bayes_nonuniform_prior_pulls_estimate(net, model):
    obs = sample_paths(net, model, THETA0, 30.0, 2)
    flat = bayes_estimate(net, model, obs)
    pulled = bayes_estimate(net, model, obs, prior=lambda x, y: np.exp(-40 * ((x - 1) ** 2 + (y - 1) ** 2)))
    assert pulled.theta.x > flat.theta.x and pulled.theta.y > flat.theta.y


# ------------------------------------------------------------------ one-step


@pytest.fixture(scope="module")
def thinned(net, model):
    n = 1e4
    obs = sample_paths(net, model, THETA0, n, 31)
    p = thinning_probability(n, 0.4)
    return thin(obs, p, 31), p


def test_one_step_before_first_arrival_returns_preliminary(net, model, thinned):
    pair, p = thinned
    pre = (0.32, 0.38)
    t1 = np.sort(travel_times(net, pre))[0]
    res = one_step(net, model, pre, pair.x_tilde, p, t=0.99 * t1)
    assert res.status == "pre-arrival" and tuple(res.theta) == pre
    results = one_step_process(net, model, pre, pair.x_tilde, p, np.linspace(0.1, 0.9 * t1, 5))
    assert all(tuple(r.theta) == pre for r in results)


def test_one_step_degenerate_between_first_and_second_arrival(net, model, thinned):
    pair, p = thinned
    t1, t2 = np.sort(travel_times(net, THETA0))[:2]
    with pytest.raises(DegenerateInformationError):
        one_step(net, model, THETA0, pair.x_tilde, p, t=0.5 * (t1 + t2))
    res = one_step_process(net, model, THETA0, pair.x_tilde, p, [0.5 * (t1 + t2)])[0]
    assert res.status == "degenerate" and res.theta is None


def test_one_step_process_consistency(net, model, thinned):
    pair, p = thinned
    pre = (0.31, 0.41)
    grid = np.linspace(0.5, 6.0, 40)
    trace = one_step_process(net, model, pre, pair.x_tilde, p, grid)
    final = one_step(net, model, pre, pair.x_tilde, p)
    assert final.label == "OneStep"
    np.testing.assert_array_equal(trace[-1].as_array(), final.as_array())
    dets = [r.diagnostics["det_info"] for r in trace if "det_info" in r.diagnostics]
    assert all(b >= a - 1e-12 * abs(b) for a, b in zip(dets[:-1], dets[1:]))
    with pytest.raises(ValueError):
        one_step_process(net, model, pre, pair.x_tilde, p, [3.0, 2.0])


def test_one_step_improves_rough_start(net, model, thinned):
    pair, p = thinned
    res = one_step(net, model, (0.33, 0.37), pair.x_tilde, p)
    sd = math.sqrt(np.trace(fisher_matrix(net, model, THETA0).inverse()) / 1e4)
    assert np.linalg.norm(res.as_array() - THETA0) < 5 * sd


def test_one_step_translation_equivariant(net, model):
    shift = np.array([-2.0, 0.75])
    moved = net.translated(*shift)
    n, pre = 1e4, np.array([0.31, 0.41])
    p = thinning_probability(n, 0.4)
    a = thin(sample_paths(net, model, THETA0, n, 5), p, 5)
    b = thin(sample_paths(moved, model, np.array(THETA0) + shift, n, 5), p, 5)
    ra = one_step(net, model, pre, a.x_tilde, p)
    rb = one_step(moved, model, pre + shift, b.x_tilde, p)
    np.testing.assert_allclose(rb.as_array() - shift, ra.as_array(), atol=1e-9)


def test_lse_translation_equivariant(net, model):
    shift = np.array([1.5, 2.5])
    moved = net.translated(*shift)
    a = lse_estimate(net, arrival_estimates(net, model, sample_paths(net, model, THETA0, 1e3, 6)))
    b = lse_estimate(moved, arrival_estimates(moved, model, sample_paths(moved, model, np.array(THETA0) + shift, 1e3, 6)))
    np.testing.assert_allclose(b.gamma[:2] - shift, a.gamma[:2], atol=1e-9)


# ------------------------------------------------------------------ square-root onset


def test_sqrt_case_gamma2_example():
    assert sqrt_case_gamma2(1.0, 0.5, 1.0) == pytest.approx(1.0 / 12.0)


def test_sqrt_case_requires_half_exponent():
    with pytest.raises(WrongExponentError):
        estimate_delay_sqrt_case(PowerLaw(1.0, 2.0), 0.5, 2.0, [0.5, 1.5], 100.0)


def test_sqrt_case_estimate_near_truth():
    from poisson_source.pp_sim import sample_detector_superposition, stream

    m = PowerLaw(1.0, 0.5)
    ev = sample_detector_superposition(stream(0, 0, 0, "paths"), m, 1.0, 0.5, 1e5, 2.0)
    tau, var = estimate_delay_sqrt_case(m, 0.5, 2.0, ev, 1e5, window=(0.5, 1.5))
    assert abs(tau - 1.0) < 10 * math.sqrt(var)


# ------------------------------------------------------------------ Monte Carlo checks on the shared runs


@pytest.mark.slow
def test_mc_arrivals_within_five_sigma(net, model):
    rep = montecarlo.reference_run()
    taus = travel_times(net, THETA0)
    s2 = arrival_fisher(net, model, THETA0).sigma2
    for j in range(net.k):
        v = rep.values(f"tau{j}", 1e4)[:1000, 0]
        assert np.mean(np.abs(v - taus[j]) < 5 * np.sqrt(s2[j] / 1e4)) >= 0.99


@pytest.mark.slow
def test_mc_mle_within_five_sd(net, model):
    rep = montecarlo.reference_run()
    v = rep.values("mle", 1e4)[:1000]
    bound = 5 * math.sqrt(np.trace(fisher_matrix(net, model, THETA0).inverse()) / 1e4)
    assert np.mean(np.linalg.norm(v - THETA0, axis=1) < bound) >= 0.99


@pytest.mark.slow
def test_mc_lse_sanity_statistic_rarely_large():
    rep = montecarlo.reference_run()
    st_ = rep.get("lse", 1e4)["statuses"]
    assert st_.get("ok:s_n", 0) / 2000 < 0.10


def _unknown_start_propagation(net, model, n, draws=20_000, seed=0):
    """Delta-method covariance and the covariance of Gaussian arrival noise pushed
    through the exact solver, both for sqrt(n) * error."""
    sigma2 = 1.0 / np.asarray(arrival_fisher(net, model, THETA0).diag)
    tau = travel_times(net, THETA0)

    def solve(t):
        return lse_estimate_unknown_start(net, ArrivalEstimates(t, sigma2, np.zeros((4, 2)))).gamma[:2]

    h = 1e-6
    J = np.column_stack([(solve(tau + h * e) - solve(tau - h * e)) / (2 * h) for e in np.eye(4)])
    rng = np.random.default_rng(seed)
    err = np.array([solve(tau + rng.normal(0.0, np.sqrt(sigma2 / n))) - THETA0 for _ in range(draws)])
    return J @ np.diag(sigma2) @ J.T, np.cov(err.T) * n


def test_unknown_start_propagation_tends_to_delta_method(net, model):
    delta, nonlinear = _unknown_start_propagation(net, model, 1e7)
    assert np.linalg.norm(nonlinear - delta) / np.linalg.norm(delta) < 0.05


@pytest.mark.slow
def test_mc_unknown_start_matches_propagated_arrival_noise(net, model):
    # the square layout nearly confounds position with emission time (Jacobian gain ~24),
    # so at n = 1e4 second-order terms still inflate the spread past the delta method
    _, target = _unknown_start_propagation(net, model, 1e4)
    e = montecarlo.reference_run().get("lse4", 1e4)
    cov = np.array(e["cov_n"])
    assert np.linalg.norm(cov - target) / np.linalg.norm(target) <= 0.20
    assert e["failures"] == 0


@pytest.mark.slow
def test_mc_bayes_agrees_with_mle():
    rep = montecarlo.bayes_run()
    be, mle = rep.values("be", 1e4), rep.values("mle", 1e4)
    gap = np.linalg.norm(be - mle, axis=1) * 100.0
    assert gap.max() < 0.1  # sqrt(n) |BE - MLE| stays far below the sd ~ 0.17


@pytest.mark.slow
def test_mc_one_step_with_oracle_start_unbiased(net, model):
    n, M = 1e4, 2000
    p = thinning_probability(n, 0.4)
    est = np.array([
        one_step(net, model, THETA0, thin(sample_paths(net, model, THETA0, n, 77, rep=r), p, 77, rep=r).x_tilde, p).as_array()
        for r in range(M)
    ])
    err = math.sqrt(n) * (est - THETA0)
    se = err.std(axis=0, ddof=1) / math.sqrt(M)
    assert np.linalg.norm(err.mean(axis=0)) < 3 * np.linalg.norm(se)
