import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab._numerics import tree_mean
from holderlab.errors import ContractViolation, CouplingError, InvalidArgumentError
from holderlab.grid_paths import Partition, SampledPath, uniform_partition
from holderlab.mlmc import (
    CoupledSample,
    MlmcSchedule,
    euler_level_sampler,
    geometric_schedule,
    identity_functional,
    level_sum_direct,
    mc_mean,
    mlmc_convergence_experiment,
    mlmc_mean,
    path_distance,
    rademacher_sum_check,
    replica_stream,
    saturating_functional,
    spot_check_functional,
    theoretical_level_sum,
)
from holderlab.rng import root_stream
from holderlab.schemes import (
    brownian_motion,
    euler_maruyama_values,
    fit_rate,
    geometric_brownian_motion,
    linear_ode,
    sample_brownian,
)


def test_geometric_schedule():
    s = geometric_schedule(3, N0=2)
    assert s.level_resolutions == (2, 4, 8, 16)
    assert s.sample_counts == (8, 4, 2, 1)
    assert s.L == 3
    assert s.total_cost == 4 * 16


def test_schedule_validation():
    with pytest.raises(InvalidArgumentError):
        MlmcSchedule((2, 3), (1, 1))
    with pytest.raises(InvalidArgumentError):
        MlmcSchedule((1, 2), (1,))
    with pytest.raises(InvalidArgumentError):
        geometric_schedule(-1)


def test_deterministic_problem_telescopes_to_finest_level():
    prob = linear_ode(rate=0.7)
    sched = geometric_schedule(4)
    est = mlmc_mean(euler_level_sampler(prob), sched)
    grid = uniform_partition(16)
    direct = euler_maruyama_values(prob, 16, grid, np.zeros((1, 17, 1)))[0]
    assert est.mean_path.grid == grid
    assert np.allclose(est.mean_path.values, direct, rtol=1e-14, atol=0)
    assert all(s.correction_norm_var == pytest.approx(0.0, abs=1e-28) for s in est.per_level)


def test_mlmc_thread_determinism():
    sampler = euler_level_sampler(geometric_brownian_motion())
    a = mlmc_mean(sampler, geometric_schedule(4), saturating_functional(), root_stream(1), threads=1)
    b = mlmc_mean(sampler, geometric_schedule(4), saturating_functional(), root_stream(1), threads=4)
    assert a.mean_path == b.mean_path
    assert a.per_level == b.per_level


def test_mlmc_brownian_mean_is_unbiased():
    sched = MlmcSchedule((1, 2, 4), (4000, 2000, 1000))
    est = mlmc_mean(euler_level_sampler(brownian_motion()), sched, stream=root_stream(2))
    # Var of the estimate at t = 1 is 1/4000; corrections vanish there
    assert abs(est.mean_path.values[-1, 0]) < 5 / np.sqrt(4000)


def _bad_sampler(kind):
    base = euler_level_sampler(brownian_motion())

    def sampler(level, k, stream):
        cs = base(level, k, stream)
        if kind == "driver":
            return CoupledSample(cs.fine, cs.coarse, stream.child("other"), cs.coarse_driver)
        if level == 0:
            return cs
        if kind == "missing":
            return CoupledSample(cs.fine, None, stream, stream)
        return CoupledSample(cs.fine, cs.coarse, stream, stream.child("independent"))

    return sampler


@pytest.mark.parametrize("kind", ["driver", "missing", "decoupled"])
def test_coupling_violations_are_detected(kind):
    with pytest.raises(CouplingError):
        mlmc_mean(_bad_sampler(kind), geometric_schedule(2))


def test_mc_mean_and_distance():
    theta = uniform_partition(8)
    mean, dist = mc_mean(lambda s: sample_brownian(theta, 1, s), 2000, root_stream(3),
                         reference=SampledPath(theta, np.zeros((9, 1))))
    assert dist == pytest.approx(float(np.abs(mean.values).max()))
    assert dist < 5 / np.sqrt(2000)
    diff = np.linspace(0, 1, 9)[:, None]
    assert path_distance(theta.points, diff, None) == 1.0
    assert path_distance(theta.points, diff, 1.0) == pytest.approx(2.0)


@pytest.mark.parametrize("factory", [identity_functional, saturating_functional])
@pytest.mark.parametrize("alpha", [0.0, 0.2])
def test_functional_constants_hold_on_random_paths(factory, alpha):
    assert spot_check_functional(factory(alpha), pairs=60, seed=7) <= 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 2.0), st.integers(1, 40))
def test_level_sum_closed_form(rho, L):
    assert theoretical_level_sum(rho, L) == pytest.approx(level_sum_direct(rho, L), rel=1e-12)


def test_level_sum_equal_rates():
    assert theoretical_level_sum(0.5, 6) == pytest.approx(6 * 2.0**-3, rel=1e-15)
    with pytest.raises(InvalidArgumentError):
        theoretical_level_sum(0.3, 0)


def test_rademacher_inequalities_hold_for_fixed_vectors():
    x = np.array([[1.0, 0.0], [0.5, 2.0], [0.0, -1.0], [3.0, 1.0]])
    rep = rademacher_sum_check(x, p=2.0, trials=20_000, stream=root_stream(4))
    assert rep.randomisation_holds and rep.type_holds
    # for symmetric vectors the randomised sum has the same law
    assert rep.sum_norm == pytest.approx(rep.randomized_norm, abs=5 * rep.sum_norm_se + 5 * rep.randomized_norm_se)
    assert rademacher_sum_check(x, p=4.0, trials=5000).type_holds is None


def test_rademacher_centred_sampler_accepted_and_noncentred_rejected():
    centred = lambda s, n: s.normals(n * 6).reshape(n, 3, 2)
    assert rademacher_sum_check(centred, trials=5000).randomisation_holds
    shifted = lambda s, n: s.normals(n * 6).reshape(n, 3, 2) + 1.0
    with pytest.raises(ContractViolation):
        rademacher_sum_check(shifted, trials=5000)


def test_convergence_experiment_small_run():
    res = mlmc_convergence_experiment(
        geometric_brownian_motion(), saturating_functional(0.1), [1, 2], repetitions=4, M_ref=512, seed=1
    )
    rows, fit = res
    assert [r["L"] for r in rows] == [1, 2]
    assert [r["cost"] for r in rows] == [4.0, 12.0]
    assert len(res.level_rows) == 5
    assert set(res.plain_mc) == {1, 2}
    assert np.isfinite(fit.slope)


def test_convergence_experiment_requires_gamma_below_alpha():
    with pytest.raises(InvalidArgumentError):
        mlmc_convergence_experiment(brownian_motion(), identity_functional(), [1, 2], gamma=0.1, alpha=0.1)


def test_level_sum_examples():
    assert theoretical_level_sum(0.5, 4) == 1.0
    assert theoretical_level_sum(0.0, 3) == pytest.approx(0.5 + 2**-0.5 + 1, rel=1e-15)


def test_zero_level_schedule_is_plain_mc():
    theta = uniform_partition(4)
    sampler = lambda level, k, s: CoupledSample(sample_brownian(theta, 1, s), None, s)
    est = mlmc_mean(sampler, MlmcSchedule((4,), (16,)), stream=root_stream(6))
    direct = tree_mean(np.stack([sample_brownian(theta, 1, replica_stream(root_stream(6), 0, k)).values for k in range(16)]))
    assert np.array_equal(est.mean_path.values, direct)


def test_mc_mean_deterministic_sampler():
    f = SampledPath.from_function(uniform_partition(4), lambda t: t * t)
    mean, err = mc_mean(lambda s: f, 5, reference=f)
    assert np.array_equal(mean.values, f.values) and err == 0.0


def test_mc_mean_variance_of_the_mean():
    # scalar N(μ, σ²): E|mean - μ|² = σ²/M; 1000 repetitions within 10%
    grid = Partition(np.array([0.0, 1.0]))
    mu, sigma, M = 1.5, 2.0, 8
    sampler = lambda s: SampledPath(grid, mu + sigma * s.normals(2)[:, None])
    sq = [mc_mean(sampler, M, root_stream(1).child("rep", r))[0].values[0, 0] for r in range(1000)]
    mse = np.mean((np.array(sq) - mu) ** 2)
    assert mse == pytest.approx(sigma**2 / M, rel=0.1)


def test_mc_mean_brownian_rate():
    theta = uniform_partition(8)
    zero = SampledPath(theta, np.zeros((9, 1)))
    Ms = [2**k for k in range(4, 11)]
    rms = []
    for M in Ms:
        errs = [mc_mean(lambda s: sample_brownian(theta, 1, s), M, root_stream(M).child("rep", r), zero)[1] for r in range(50)]
        rms.append(np.sqrt(np.mean(np.square(errs))))
    assert fit_rate(Ms, rms).slope == pytest.approx(-0.5, abs=0.1)


def test_rademacher_single_symmetric_vector():
    rep = rademacher_sum_check(lambda s, n: s.normals(n * 2).reshape(n, 1, 2), p=3.0, trials=50_000)
    assert abs(rep.sum_norm - rep.randomized_norm) <= 3 * np.hypot(rep.sum_norm_se, rep.randomized_norm_se)
