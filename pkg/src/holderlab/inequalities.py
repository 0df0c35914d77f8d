"""Executable checks of the deterministic Hölder-interpolation bounds.

Each checker evaluates both sides on one refined point set, which contains
the partition θ and the path's own grid, and returns them in an
:class:`InequalityReport`. The bounds hold for seminorms taken over any
point set containing θ, so a failure beyond the rounding tolerance is a bug.

Notation: d = d_max(θ), d_min = d_min(θ), |·|_r the Hölder seminorm,
||·||_r = sup norm + |·|_r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._numerics import ordered_map
from .errors import InvalidArgumentError
from .grid_paths import (
    FULL,
    DistanceBand,
    Partition,
    SampledPath,
    _norms,
    evaluate_affine,
    nested_indices,
    nested_subpartition,
    pair_seminorm,
    random_partition,
    refine,
)

TOL_ABS = 1e-12
TOL_REL = 1e-12


@dataclass(frozen=True)
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    tol_abs: float = TOL_ABS
    tol_rel: float = TOL_REL

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + self.tol_abs + self.tol_rel * abs(self.rhs)


# --- helpers -------------------------------------------------------------------


def _check_exponents(*rs):
    for r in rs:
        if not 0.0 <= r <= 1.0:
            raise InvalidArgumentError(f"exponent must lie in [0, 1], got {r!r}")
    if any(a > b for a, b in zip(rs, rs[1:])):
        raise InvalidArgumentError(f"exponents must be ordered, got {rs!r}")


def _semi(path: SampledPath, r: float, band: DistanceBand = FULL) -> float:
    return float(pair_seminorm(path.times, path.values, r, band))


def _sup(values: np.ndarray) -> float:
    return float(_norms(values).max(initial=0.0))


def _interp_on(theta: Partition, path: SampledPath) -> np.ndarray:
    """[path]_θ evaluated on path.grid (θ must be nested in it)."""
    idx = nested_indices(path.grid, theta)
    return evaluate_affine(theta, path.values[idx], path.times)


def _sup_on_theta(theta: Partition, path: SampledPath) -> float:
    return _sup(path.values[nested_indices(path.grid, theta)])


def _same_grid(f: SampledPath, g: SampledPath):
    if f.grid != g.grid:
        raise InvalidArgumentError("paths do not share a grid")
    if f.dim != g.dim:
        raise InvalidArgumentError("paths have different dimensions")


def _nested(theta: Partition, path: SampledPath):
    nested_indices(path.grid, theta)  # raises if θ is not a sub-partition


# --- checkers ------------------------------------------------------------------


def interpolation_inequality(
    path: SampledPath, c: float, alpha: float, beta: float, gamma: float, oversample: int = 2
) -> tuple[InequalityReport, InequalityReport]:
    """|f|_β against max{c^(α-β) |f|_{α, far}, c^(γ-β) |f|_{γ, near}} for the two band splits.

    The first report splits the distances into (c, ∞) and (0, c], the second
    into [c, ∞) and (0, c).
    """
    _check_exponents(alpha, beta, gamma)
    if not c > 0:
        raise InvalidArgumentError("c must be positive")
    f = refine(path, oversample)
    lhs = _semi(f, beta)
    reports = []
    for name, far, near in (
        ("interpolation_open_far", DistanceBand.above(c), DistanceBand.up_to(c)),
        ("interpolation_closed_far", DistanceBand.at_least(c), DistanceBand.below(c)),
    ):
        rhs = max(c ** (alpha - beta) * _semi(f, alpha, far), c ** (gamma - beta) * _semi(f, gamma, near))
        reports.append(InequalityReport(name, lhs, rhs))
    return reports[0], reports[1]


def affine_error_bound(path: SampledPath, theta: Partition, alpha: float, oversample: int = 2) -> InequalityReport:
    """sup ||f - [f]_θ|| <= (d/2)^α |f|_α."""
    _check_exponents(alpha)
    _nested(theta, path)
    f = refine(path, oversample)
    lhs = _sup(f.values - _interp_on(theta, f))
    rhs = (theta.d_max / 2) ** alpha * _semi(f, alpha)
    return InequalityReport("affine_error_bound", lhs, rhs)


def grid_difference_bound(
    f: SampledPath, g: SampledPath, theta: Partition, alpha: float, beta: float, oversample: int = 2
) -> tuple[InequalityReport, InequalityReport]:
    """Hölder distance of f and g from their distance on θ and their β-seminorms.

    Seminorm: |f-g|_α <= (2/d^α) [sup_θ ||f-g|| + (d^β/2^β)(|f|_β + |g|_β)].
    Norm: the same with prefactor 2/d^α + 1.
    """
    _check_exponents(alpha, beta)
    _same_grid(f, g)
    _nested(theta, f)
    F, G = refine(f, oversample), refine(g, oversample)
    D = SampledPath(F.grid, F.values - G.values)
    d = theta.d_max
    bracket = _sup_on_theta(theta, D) + d**beta / 2**beta * (_semi(F, beta) + _semi(G, beta))
    semi = _semi(D, alpha)
    return (
        InequalityReport("grid_difference_seminorm", semi, 2 / d**alpha * bracket),
        InequalityReport("grid_difference_norm", _sup(D.values) + semi, (2 / d**alpha + 1) * bracket),
    )


def interpolant_band_seminorm_bound(
    f: SampledPath, theta: Partition, alpha: float, c: float, oversample: int = 2
) -> InequalityReport:
    """|[f]_θ|_{α, (0,c]} <= (c^(1-α)/d_min) max_j ||f(θ_j) - f(θ_{j-1})||."""
    _check_exponents(alpha)
    if not c > 0:
        raise InvalidArgumentError("c must be positive")
    _nested(theta, f)
    F = refine(f, oversample)
    interp = SampledPath(F.grid, _interp_on(theta, F))
    lhs = _semi(interp, alpha, DistanceBand.up_to(c))
    jumps = np.diff(f.values[nested_indices(f.grid, theta)], axis=0)
    rhs = c ** (1 - alpha) / theta.d_min * _sup(jumps)
    return InequalityReport("interpolant_band_seminorm_bound", lhs, rhs)


def interpolant_seminorm_contraction(
    f: SampledPath, theta: Partition, alpha: float, oversample: int = 2
) -> InequalityReport:
    """|[f]_θ|_α <= |f|_α."""
    _check_exponents(alpha)
    _nested(theta, f)
    F = refine(f, oversample)
    lhs = _semi(SampledPath(F.grid, _interp_on(theta, F)), alpha)
    return InequalityReport("interpolant_seminorm_contraction", lhs, _semi(F, alpha))


def affine_target_bound(
    f: SampledPath, g: SampledPath, theta: Partition, alpha: float, beta: float, oversample: int = 2
) -> tuple[InequalityReport, InequalityReport]:
    """Distance from f to the θ-interpolant of g.

    Seminorm: |f - [g]_θ|_α <= (2 d^(1-α)/d_min) sup_θ ||f-g|| + 2 d^(β-α) |f|_β.
    Norm: ||f - [g]_θ||_α <= (2 d^(1-α)/d_min + 1) sup_θ ||f-g|| + (2/d^α + 2^(-β)) d^β |f|_β.
    """
    _check_exponents(alpha, beta)
    _same_grid(f, g)
    _nested(theta, f)
    F, G = refine(f, oversample), refine(g, oversample)
    E = SampledPath(F.grid, F.values - _interp_on(theta, G))
    d, dmin = theta.d_max, theta.d_min
    on_theta = _sup_on_theta(theta, SampledPath(F.grid, F.values - G.values))
    f_beta = _semi(F, beta)
    semi = _semi(E, alpha)
    return (
        InequalityReport(
            "affine_target_seminorm", semi, 2 * d ** (1 - alpha) / dmin * on_theta + 2 * d ** (beta - alpha) * f_beta
        ),
        InequalityReport(
            "affine_target_norm",
            _sup(E.values) + semi,
            (2 * d ** (1 - alpha) / dmin + 1) * on_theta + (2 / d**alpha + 2**-beta) * d**beta * f_beta,
        ),
    )


# --- random suite --------------------------------------------------------------

SUITE_NAMES = (
    "interpolation_open_far",
    "interpolation_closed_far",
    "affine_error_bound",
    "grid_difference_seminorm",
    "grid_difference_norm",
    "interpolant_band_seminorm_bound",
    "interpolant_seminorm_contraction",
    "affine_target_seminorm",
    "affine_target_norm",
)


@dataclass(frozen=True)
class SuiteConfig:
    """Generator for random admissible inputs.

    Grid sizes are uniform in [min_points, max_points], values i.i.d.
    uniform[-1, 1] per coordinate, dimension drawn from ``dims``; θ keeps each
    interior grid point with probability ``keep_prob``. With probability
    ``tie_prob`` the exponents are tied or pinned to 0 or 1.
    """

    min_points: int = 3
    max_points: int = 33
    dims: tuple[int, ...] = (1, 3)
    T: float = 1.0
    keep_prob: float = 0.4
    tie_prob: float = 0.2
    oversample: int = 2

    def __post_init__(self):
        if not 2 <= self.min_points <= self.max_points:
            raise InvalidArgumentError("need 2 <= min_points <= max_points")


def _exponents(rng: np.random.Generator, k: int, tie_prob: float) -> list[float]:
    xs = sorted(rng.uniform(0, 1, size=k).tolist())
    if rng.random() < tie_prob:
        mode = rng.integers(3)
        if mode == 0:
            xs = [xs[0]] * k
        elif mode == 1:
            xs[0] = 0.0
        else:
            xs[-1] = 1.0
    return xs


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial)]))


def run_trial(seed: int, trial: int, config: SuiteConfig = SuiteConfig()) -> list[InequalityReport]:
    """All checkers on one random input drawn from ``(seed, trial)``."""
    rng = trial_rng(seed, trial)
    n = int(rng.integers(config.min_points, config.max_points + 1))
    d = int(rng.choice(config.dims))
    grid = random_partition(rng, n, config.T)
    f = SampledPath(grid, rng.uniform(-1, 1, size=(n, d)))
    g = SampledPath(grid, rng.uniform(-1, 1, size=(n, d)))
    theta = nested_subpartition(rng, grid, config.keep_prob)
    os_ = config.oversample
    a, b, c = _exponents(rng, 3, config.tie_prob)
    c_split = grid.d_max if rng.random() < 0.5 else config.T / 2
    a2, b2 = _exponents(rng, 2, config.tie_prob)
    c_band = theta.d_max * (1.0 if rng.random() < 0.5 else 2.0)
    out = list(interpolation_inequality(f, c_split, a, b, c, os_))
    out.append(affine_error_bound(f, theta, a2, os_))
    out.extend(grid_difference_bound(f, g, theta, a2, b2, os_))
    out.append(interpolant_band_seminorm_bound(f, theta, a2, c_band, os_))
    out.append(interpolant_seminorm_contraction(f, theta, b2, os_))
    out.extend(affine_target_bound(f, g, theta, a2, b2, os_))
    return out


def run_inequality_suite(trials: int, seed: int, config: SuiteConfig = SuiteConfig(), threads: int = 1) -> dict:
    """Run every checker on ``trials`` random inputs.

    Returns ``{name: {trials, failures, worst_slack, example_seed_of_worst}}``
    where ``example_seed_of_worst`` is the trial index whose input (re-created
    by ``run_trial(seed, index)``) gave the smallest slack.
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be at least 1")
    results = ordered_map(lambda k: run_trial(seed, k, config), range(trials), threads)
    report = {name: dict(trials=0, failures=0, worst_slack=math.inf, example_seed_of_worst=None) for name in SUITE_NAMES}
    for k, reps in enumerate(results):
        for rep in reps:
            entry = report[rep.name]
            entry["trials"] += 1
            entry["failures"] += int(not rep.holds)
            if rep.slack < entry["worst_slack"]:
                entry["worst_slack"] = rep.slack
                entry["example_seed_of_worst"] = k
    return report


def total_failures(report: dict) -> int:
    return sum(entry["failures"] for entry in report.values())
