import cvxpy as cp
import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from rsfog.compute import (BETA_MAX, energy_constraint_terms, energy_rate, energy_rate_linearized,
                           local_cost, local_time_constraint_terms, local_time_linearized,
                           optimal_local_frequency, server_cost)
from rsfog.rates import InfeasibleRateError

beta_s = st.floats(0.0, 0.99)
freq_s = st.floats(1e6, 1e9)


def test_server_cost_zero_offload():
    assert server_cost(0.0, 1e6, 297.2, 0.0) == (0.0, 0.0)


def test_server_cost_reference_values():
    T, E = server_cost(1.0, 1e6, 297.2, 1e9, kappa=1e-24)
    assert T == pytest.approx(0.2972)
    # kappa f^2 = 1e-6 J/cycle over 2.972e8 cycles
    assert E == pytest.approx(297.2)


def test_server_cost_needs_cpu():
    with pytest.raises(InfeasibleRateError):
        server_cost(0.5, 1e6, 297.2, 0.0)


def test_local_cost_full_offload():
    assert local_cost(1.0, 1e6, 297.2, 3e6) == (0.0, 0.0)


def test_local_cost_reference_time():
    T, _ = local_cost(0.0, 1e6, 297.2, 3e6)
    assert T == pytest.approx(99.0667, abs=1e-4)


@given(beta=st.floats(0.0, 0.999), f=freq_s)
def test_local_energy_over_time_is_kappa_f_cubed(beta, f):
    T, E = local_cost(beta, 2e6, 297.2, f, kappa=1e-24)
    assume(T > 0)
    assert E / T == pytest.approx(1e-24 * f ** 3, rel=1e-9)


@pytest.mark.parametrize("P, kappa, F, expected", [
    (1.0, 1.0, 2.0, 1.0),
    (0.01, 1e-24, 3e6, 3e6),
    (0.01, 1e-24, np.inf, np.cbrt(0.01 / 1e-24)),
])
def test_optimal_local_frequency(P, kappa, F, expected):
    assert optimal_local_frequency(P, kappa, F) == pytest.approx(expected)


def test_optimal_frequency_reference_branch():
    assert np.cbrt(0.01 / 1e-24) == pytest.approx(2.154e7, rel=1e-3)


@given(P=st.floats(1e-4, 10), F=st.floats(1e5, 1e8))
def test_optimal_frequency_meets_both_caps_one_tight(P, F):
    kappa = 1e-24
    f = optimal_local_frequency(P, kappa, F)
    assert kappa * f ** 3 <= P * (1 + 1e-12) and f <= F
    assert np.isclose(kappa * f ** 3, P, rtol=1e-9) or np.isclose(f, F, rtol=1e-12)


def test_partial_fraction_identity_value():
    assert energy_rate(2.0, 0.5, 1.0, 1.0) == pytest.approx(4 * 0.25 / 0.75)


@given(f=freq_s, beta=st.floats(-0.99, 0.99), ft=freq_s)
def test_partial_fraction_identity(f, beta, ft):
    partial = 1e-24 * ft * (-f ** 2 + f ** 2 / (2 * (1 - beta)) + f ** 2 / (2 * (1 + beta)))
    # the partial fraction cancels terms of size kappa f_tilde f^2 / (1 - |beta|)
    scale = 1e-24 * ft * f ** 2 / (1 - abs(beta))
    assert energy_rate(f, beta, ft, 1e-24) == pytest.approx(partial, abs=1e-14 * scale)


def test_no_offload_no_server_energy():
    assert energy_rate(5e8, 0.0, 3e6, 1e-24) == pytest.approx(0.0, abs=1e-20)


def test_taylor_exact_at_expansion_point():
    f = 3e8
    # the tangent of -f^2 at f_prev = f is exact
    assert energy_rate_linearized(f, 0.4, 3e6, f, 1e-24) == pytest.approx(energy_rate(f, 0.4, 3e6, 1e-24))


@given(f=freq_s, fp=freq_s, beta=beta_s)
def test_linearization_is_upper_bound(f, fp, beta):
    assert energy_rate_linearized(f, beta, 3e6, fp, 1e-24) >= energy_rate(f, beta, 3e6, 1e-24)


@given(f=freq_s, fp=freq_s, beta=beta_s)
def test_linearization_is_the_tangent(f, fp, beta):
    ft, kappa = 3e6, 1e-24
    tangent = kappa * ft * (-fp * (2 * f - fp) + f ** 2 / (2 * (1 - beta)) + f ** 2 / (2 * (1 + beta)))
    scale = kappa * ft * max(f, fp) ** 2 / (1 - beta)
    assert energy_rate_linearized(f, beta, ft, fp, kappa) == pytest.approx(tangent, abs=1e-13 * scale)


@pytest.mark.parametrize("beta", [1.0, -1.0, 1.2])
def test_beta_domain(beta):
    with pytest.raises(ValueError):
        energy_rate(1.0, beta, 1.0, 1.0)
    with pytest.raises(ValueError):
        energy_rate_linearized(1.0, beta, 1.0, 1.0, 1.0)


def test_local_time_tangent_exact_at_point():
    assert local_time_linearized(0.6, 0.6, 3e6, 1e6, 297.2) == pytest.approx(
        local_cost(0.6, 1e6, 297.2, 3e6)[0])


def test_local_time_tangent_from_zero():
    assert local_time_linearized(0.8, 0.0, 3e6, 1e6, 297.2) == pytest.approx(297.2 * 1e6 / 3e6)


def test_local_time_tangent_dominates_on_grid():
    betas = np.linspace(0, 0.999, 200)
    for bp in np.linspace(0, BETA_MAX, 25):
        lin = local_time_linearized(betas, bp, 3e6, 1e6, 297.2)
        exact = 297.2 * (1 - betas ** 2) * 1e6 / 3e6
        assert np.all(lin >= exact - 1e-9)


def test_constraint_builders_match_numeric(rng):
    K = 3
    f = cp.Variable(K)
    beta = cp.Variable(K)
    ft = np.array([3e6, 2e6, 1e6])
    fp = rng.uniform(0.1, 0.5, K)
    f.value = rng.uniform(0.1, 0.5, K)
    beta.value = rng.uniform(0, 0.9, K)
    terms = energy_constraint_terms(f, beta, ft, fp, 1.0)
    for k, t in enumerate(terms):
        assert t.is_convex()
        assert t.value == pytest.approx(energy_rate_linearized(f.value[k], beta.value[k], ft[k], fp[k], 1.0))
    L = np.full(K, 1e6)
    lt = local_time_constraint_terms(beta, fp, ft, L, np.full(K, 297.2))
    for k, t in enumerate(lt):
        assert t.is_affine()
        assert t.value == pytest.approx(local_time_linearized(beta.value[k], fp[k], ft[k], 1e6, 297.2))


@given(seed=st.integers(0, 10_000))
def test_convexified_points_meet_true_constraints(seed):
    """Feasible for the convexified energy/local-time bounds => feasible for the originals."""
    rng = np.random.default_rng(seed)
    K, kappa, P_b, P_k = 4, 1e-24, 1.0, 0.01
    L = rng.uniform(1e6, 5e6, K)
    omega = 297.2
    ft = optimal_local_frequency(P_k, kappa, 3e6) * np.ones(K)
    beta = rng.uniform(0, 0.99, K)
    beta_prev = rng.uniform(0, 0.99, K)
    f_prev = rng.uniform(1e6, 2e8, K)
    f = rng.uniform(1e6, 2e8, K)
    lin = sum(energy_rate_linearized(f[k], beta[k], ft[k], f_prev[k], kappa) for k in range(K))
    f = f * np.sqrt(P_b / lin) if lin > P_b else f  # land on the convexified boundary
    lin = sum(energy_rate_linearized(f[k], beta[k], ft[k], f_prev[k], kappa) for k in range(K))
    assume(lin <= P_b * (1 + 1e-12))
    T_p = max(local_time_linearized(beta[k], beta_prev[k], ft[k], L[k], omega) for k in range(K))
    T_p = max(T_p, np.max(omega * beta ** 2 * L / f))
    server_energy = np.sum(kappa * f ** 2 * omega * beta ** 2 * L)
    local_energy = kappa * ft ** 2 * omega * (1 - beta ** 2) * L
    assert server_energy <= P_b * T_p * (1 + 1e-9)
    assert np.all(local_energy <= P_k * T_p * (1 + 1e-9))
