import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab.errors import InvalidArgumentError, UnsupportedProblemError
from holderlab.galerkin import (
    default_problem,
    exact_linear_second_moment_error,
    galerkin_paths,
    galerkin_rate_experiment,
    pathwise_slopes,
    semilinear_default,
    simulate_linear_exact,
    simulate_semilinear,
)
from holderlab.grid_paths import uniform_partition
from holderlab.rng import root_stream
from holderlab.schemes import fit_rate

# ||(P_0 - P_16) X_1||_{L²(P; H)} for the default linear problem
EXACT_N16_T1 = 0.006944770630714928


def zeta_oracle(N, s=0.6):
    # at t = 1 the factors 1 - e^{-2π² n²} equal 1 in double precision for n > 1
    with mp.workdps(30):
        return float(mp.sqrt(mp.zeta(2 + 2 * mp.mpf(s), N + 1) / (2 * mp.pi**2)))


def test_exact_error_golden():
    assert exact_linear_second_moment_error(default_problem(), 16, 1.0) == pytest.approx(EXACT_N16_T1, rel=1e-13)


@pytest.mark.parametrize("N", [1, 3, 16, 100])
@pytest.mark.parametrize("s", [0.6, 1.0])
def test_exact_error_against_hurwitz_zeta(N, s):
    got = exact_linear_second_moment_error(default_problem(s=s), N, 1.0)
    assert got == pytest.approx(zeta_oracle(N, s), rel=1e-12)


def test_exact_error_small_time_against_direct_sum():
    prob = default_problem()
    t = 1e-3
    with mp.workdps(30):
        tm = mp.mpf(t)
        f = lambda n: mp.mpf(n) ** -1.2 * -mp.expm1(-2 * mp.pi**2 * n * n * tm) / (2 * mp.pi**2 * n * n)
        # beyond n = 3000 the exponential is below e^{-10^5}
        head = mp.fsum(f(n) for n in range(5, 3001))
        oracle = float(mp.sqrt(head + mp.zeta(3.2, 3001) / (2 * mp.pi**2)))
    assert exact_linear_second_moment_error(prob, 4, t) == pytest.approx(oracle, rel=1e-12)


def test_exact_error_truncated_reference_and_initial_data():
    prob = default_problem(x0=(1.0, 0.5, 0.25))
    full = exact_linear_second_moment_error(prob, 1, 0.01)
    part = exact_linear_second_moment_error(prob, 1, 0.01, n_max=64)
    assert part < full
    assert exact_linear_second_moment_error(prob, 64, 0.01, n_max=64) == 0.0
    # at t = 0 only the initial coefficients above N remain
    assert exact_linear_second_moment_error(prob, 1, 0.0) == pytest.approx(math.hypot(0.5, 0.25), rel=1e-15)


def test_exact_error_needs_linear_problem():
    with pytest.raises(UnsupportedProblemError):
        exact_linear_second_moment_error(semilinear_default(), 4, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 200), st.floats(0.01, 1.0))
def test_exact_error_decreases_in_N(N, t):
    prob = default_problem()
    assert exact_linear_second_moment_error(prob, N + 1, t) <= exact_linear_second_moment_error(prob, N, t)


# --- regularity bookkeeping ---------------------------------------------------


def test_default_problem_satisfies_conditions():
    prob = default_problem()
    witness = [prob.iota_witness(N) for N in (1, 10, 100, 1000)]
    assert max(witness) <= 1 / math.pi**2


@pytest.mark.parametrize(
    "kw",
    [
        dict(lambda_family="cubic"),
        dict(s=0.2),  # noise not Hilbert-Schmidt
        dict(s=0.5, theta_target=0.45),  # truncation too slow
        dict(lambda_family="linear", iota=2.0),  # spectrum too slow for ι
        dict(theta_target=0.6),
        dict(chi=0.6),
    ],
)
def test_invalid_problems_rejected(kw):
    with pytest.raises(InvalidArgumentError):
        default_problem(**kw)


# --- simulation ---------------------------------------------------------------


def test_ou_mode_variance_is_exact():
    prob = default_problem(s=0.6)
    theta = uniform_partition(3)
    X = galerkin_paths(prob, 2, theta, root_stream(0).child("ou"), 0, 40_000)
    lam = np.pi**2 * np.array([1.0, 4.0])
    b2 = np.array([1.0, 2.0**-1.2])
    target = b2 * -np.expm1(-2 * lam * theta.points[1]) / (2 * lam)
    var = X[:, 1, :].var(axis=0)
    assert np.all(np.abs(var / target - 1) < 5 * math.sqrt(2 / 40_000))


@pytest.mark.parametrize("factory", [default_problem, semilinear_default])
def test_fewer_modes_are_a_truncation(factory):
    prob = factory()
    theta = uniform_partition(16)
    s = root_stream(2).child("g")
    big = galerkin_paths(prob, 32, theta, s, 3, 7)
    small = galerkin_paths(prob, 8, theta, s, 3, 7)
    assert np.array_equal(big[..., :8], small)


def test_zero_nonlinearity_reproduces_linear_recursion():
    theta = uniform_partition(8)
    s = root_stream(3).child("g")
    lin = galerkin_paths(default_problem(), 4, theta, s, 0, 5)
    zero = galerkin_paths(default_problem(nonlinearity=lambda x, n: np.zeros_like(x)), 4, theta, s, 0, 5)
    assert np.allclose(zero, lin, rtol=0, atol=1e-15)


def test_samples_are_chunk_invariant():
    prob = semilinear_default()
    theta = uniform_partition(8)
    s = root_stream(5).child("g")
    whole = galerkin_paths(prob, 4, theta, s, 0, 6)
    parts = np.concatenate([galerkin_paths(prob, 4, theta, s, 0, 2), galerkin_paths(prob, 4, theta, s, 2, 6)])
    assert np.array_equal(whole, parts)


def test_simulate_linear_exact_shape_and_guard():
    path = simulate_linear_exact(default_problem(), 5, uniform_partition(4), root_stream(0))
    assert path.values.shape == (5, 5)
    assert np.all(path.values[0] == 0)
    with pytest.raises(UnsupportedProblemError):
        simulate_linear_exact(semilinear_default(), 5, uniform_partition(4), root_stream(0))


# --- experiments --------------------------------------------------------------


def test_rate_experiment_matches_closed_form():
    rows, fit = galerkin_rate_experiment(default_problem(), [4, 8, 16], N_ref=64, M=3000, seed=1)
    for r in rows:
        assert abs(r["error"] - r["exact_error"]) <= 4 * r["stderr"]
    assert fit.slope < -0.9


def test_rate_experiment_thread_determinism_and_checks():
    kw = dict(problem=semilinear_default(), Ns=[2, 4], N_ref=16, M=40, time_steps=16, seed=4)
    assert galerkin_rate_experiment(threads=1, **kw)[0] == galerkin_rate_experiment(threads=4, **kw)[0]
    with pytest.raises(InvalidArgumentError):
        galerkin_rate_experiment(default_problem(), [4, 8], N_ref=16, M=10)


def test_holder_in_time_error_rows():
    rows, _ = galerkin_rate_experiment(default_problem(), [2, 4], N_ref=16, delta=0.2, M=50, time_steps=8)
    assert all(r["exact_error"] is None and r["error"] > 0 for r in rows)


def test_pathwise_slopes_concentrate():
    slopes = pathwise_slopes(default_problem(), [4, 8, 16], N_ref=64, M=64, seed=2)
    assert slopes.shape == (64,)
    assert np.median(slopes) < -0.8


# --- noiseless and stationary cases -------------------------------------------


def test_exact_error_without_noise():
    prob = default_problem(noise_scale=0.0, x0=(1.0, 0.5, 0.25))
    assert exact_linear_second_moment_error(prob, 3, 0.7) == 0.0
    assert exact_linear_second_moment_error(prob, 5, 1.0) == 0.0
    expect = 0.25 * math.exp(-9 * np.pi**2 * 0.7)
    assert exact_linear_second_moment_error(prob, 2, 0.7) == pytest.approx(expect, rel=1e-14)


def test_heat_decay_without_noise():
    prob = default_problem(noise_scale=0.0, x0=(1.0,))
    theta = uniform_partition(10)
    path = simulate_linear_exact(prob, 3, theta, root_stream(0))
    assert np.allclose(path.values[:, 0], np.exp(-np.pi**2 * theta.points), rtol=1e-14, atol=0)
    assert np.all(path.values[:, 1:] == 0.0)


def test_stationary_variance():
    # λ_n T <= -π² for every mode, so Var(X_{T,n}) = b_n²/(2|λ_n|) up to e^{-2π²}
    prob = default_problem()
    M = 100_000
    X = galerkin_paths(prob, 3, uniform_partition(2), root_stream(1).child("stat"), 0, M)[:, -1, :]
    n = np.arange(1, 4)
    target = n ** -1.2 / (2 * np.pi**2 * n**2)
    se = X.var(axis=0) * math.sqrt(2 / M)
    assert np.all(np.abs(np.mean(X * X, axis=0) - target) < 3 * se)


def test_exponential_euler_against_ode():
    # B = 0, F(x) = -x: mode 1 solves x' = (λ_1 - 1) x
    prob = default_problem(noise_scale=0.0, x0=(1.0,), nonlinearity=lambda x, n: -x)
    exact = math.exp(-np.pi**2 - 1)
    hs, errs = [], []
    for steps in (64, 128, 256, 512, 1024):
        x = simulate_semilinear(prob, 1, uniform_partition(steps), root_stream(0)).values[-1, 0]
        hs.append(1 / steps)
        errs.append(abs(x - exact))
    assert errs[-1] < 1e-2 * exact
    assert fit_rate(hs, errs).slope == pytest.approx(1.0, abs=0.05)


def test_semilinear_paths_stay_bounded():
    prob = semilinear_default()
    theta = uniform_partition(256)
    for seed in range(100):
        path = simulate_semilinear(prob, 32, theta, root_stream(seed))
        assert np.linalg.norm(path.values, axis=1).max() < 1e3


def test_semilinear_rate():
    prob = semilinear_default()
    _, fit = galerkin_rate_experiment(prob, [4, 8, 16, 32], 256, M=1000, time_steps=256, seed=0)
    assert fit.slope <= -2 * prob.theta_target + 0.15
