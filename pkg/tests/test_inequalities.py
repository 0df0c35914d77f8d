import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holderlab.errors import InvalidArgumentError
from holderlab.grid_paths import Partition, SampledPath, uniform_partition
from holderlab.inequalities import (
    SUITE_NAMES,
    InequalityReport,
    SuiteConfig,
    affine_error_bound,
    affine_target_bound,
    grid_difference_bound,
    interpolant_band_seminorm_bound,
    interpolant_seminorm_contraction,
    interpolation_inequality,
    run_inequality_suite,
    run_trial,
    total_failures,
)


def tent(n=64):
    return SampledPath.from_function(uniform_partition(n), lambda t: 0.5 - np.abs(t - 0.5))


ENDS = Partition(np.array([0.0, 1.0]))


def test_report_tolerance():
    assert InequalityReport("x", 1.0, 1.0).holds
    assert InequalityReport("x", 1.0 + 5e-13, 1.0).holds
    assert not InequalityReport("x", 1.0 + 1e-9, 1.0).holds
    assert InequalityReport("x", 0.5, 1.0).slack == 0.5


def test_affine_error_bound_is_sharp_for_tent():
    # sup |f - [f]| = 1/2 at t = 1/2 and (d/2)^1 |f|_1 = 1/2
    rep = affine_error_bound(tent(), ENDS, 1.0)
    assert rep.lhs == pytest.approx(0.5, abs=1e-15)
    assert rep.rhs == pytest.approx(0.5, abs=1e-15)
    assert rep.holds


def test_affine_paths_have_zero_interpolation_error():
    f = SampledPath.from_function(uniform_partition(16), lambda t: 3 * t - 1)
    assert affine_error_bound(f, ENDS, 0.5).lhs == pytest.approx(0.0, abs=1e-15)
    assert interpolant_seminorm_contraction(f, ENDS, 0.7).slack == pytest.approx(0.0, abs=1e-14)


def test_interpolation_inequality_on_tent():
    open_far, closed_far = interpolation_inequality(tent(), 0.25, 0.0, 0.5, 1.0)
    assert open_far.holds and closed_far.holds
    assert open_far.lhs == pytest.approx(np.sqrt(0.5), abs=1e-14)


def test_band_bound_on_tent():
    theta = uniform_partition(4)
    rep = interpolant_band_seminorm_bound(tent(), theta, 0.3, theta.d_max)
    assert rep.holds
    # slopes of the interpolant are 1, so |[f]|_{0.3,(0,c]} = c^0.7
    assert rep.lhs == pytest.approx(0.25**0.7, rel=1e-13)


def test_two_path_bounds_on_identical_paths():
    f = tent(16)
    semi, norm = grid_difference_bound(f, f, uniform_partition(4), 0.4, 0.6)
    assert semi.lhs == 0.0 and norm.lhs == 0.0 and semi.holds
    semi, norm = affine_target_bound(f, f, uniform_partition(4), 0.4, 0.6)
    assert semi.holds and norm.holds


def test_argument_checks():
    with pytest.raises(InvalidArgumentError):
        affine_error_bound(tent(8), uniform_partition(3), 0.5)  # θ not nested
    with pytest.raises(InvalidArgumentError):
        interpolation_inequality(tent(8), 0.5, 0.6, 0.5, 0.7)  # exponents out of order
    with pytest.raises(InvalidArgumentError):
        interpolation_inequality(tent(8), 0.0, 0.1, 0.5, 0.7)
    with pytest.raises(InvalidArgumentError):
        grid_difference_bound(tent(8), tent(16), ENDS, 0.2, 0.4)
    with pytest.raises(InvalidArgumentError):
        affine_error_bound(tent(8), ENDS, 1.5)


def test_suite_report_shape_and_determinism():
    a = run_inequality_suite(60, seed=3, threads=1)
    b = run_inequality_suite(60, seed=3, threads=4)
    assert a == b
    assert list(a) == list(SUITE_NAMES)
    assert all(v["trials"] == 60 for v in a.values())
    assert total_failures(a) == 0


def test_worst_example_reproduces():
    report = run_inequality_suite(40, seed=9)
    for name, entry in report.items():
        reps = {r.name: r for r in run_trial(9, entry["example_seed_of_worst"])}
        assert reps[name].slack == entry["worst_slack"]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(0, 10**6))
def test_random_trials_hold(seed, trial):
    for rep in run_trial(seed, trial, SuiteConfig(max_points=20)):
        assert rep.holds, (rep.name, rep.lhs, rep.rhs)


def test_suite_config_validation():
    with pytest.raises(InvalidArgumentError):
        SuiteConfig(min_points=1)
    with pytest.raises(InvalidArgumentError):
        run_inequality_suite(0, seed=1)
