"""Monte Carlo and multilevel Monte Carlo means of path-valued random variables.

Paths are compared in discrete C^γ norms on a common output grid. The
multilevel estimator uses geometric levels, N_ℓ = N0 2^ℓ with 2^(L-ℓ)
replicas on level ℓ, and couples the two resolutions inside each
correction term through one driver stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import chunk_ranges, ordered_map, tree_mean
from .errors import ContractViolation, CouplingError, InvalidArgumentError
from .grid_paths import (
    Partition,
    SampledPath,
    _norms,
    batch_holder_norms,
    evaluate_affine,
    holder_norm,
    nested_indices,
    uniform_partition,
)
from .rng import RngStream, root_stream
from .schemes import (
    SdeProblem,
    RateFit,
    _pth_root_with_se,
    brownian_batch,
    euler_maruyama_values,
    fit_rate,
    sample_brownian,
)

# --- schedules and functionals ------------------------------------------------


@dataclass(frozen=True)
class MlmcSchedule:
    level_resolutions: tuple[int, ...]
    sample_counts: tuple[int, ...]

    def __post_init__(self):
        Ns = tuple(int(n) for n in self.level_resolutions)
        Ms = tuple(int(m) for m in self.sample_counts)
        object.__setattr__(self, "level_resolutions", Ns)
        object.__setattr__(self, "sample_counts", Ms)
        if not Ns or len(Ns) != len(Ms):
            raise InvalidArgumentError("need one sample count per level")
        if min(Ns) < 1 or min(Ms) < 1:
            raise InvalidArgumentError("resolutions and sample counts must be positive")
        for a, b in zip(Ns, Ns[1:]):
            if b % a:
                raise InvalidArgumentError(f"level resolutions are not nested: {a} does not divide {b}")

    @property
    def L(self) -> int:
        return len(self.level_resolutions) - 1

    @property
    def total_cost(self) -> int:
        return sum(m * n for m, n in zip(self.sample_counts, self.level_resolutions))


def geometric_schedule(L: int, N0: int = 1) -> MlmcSchedule:
    """N_ℓ = N0 2^ℓ and M_ℓ = 2^(L-ℓ) for ℓ = 0..L."""
    if L < 0 or N0 < 1:
        raise InvalidArgumentError("need L >= 0 and N0 >= 1")
    return MlmcSchedule(tuple(N0 * 2**l for l in range(L + 1)), tuple(2 ** (L - l) for l in range(L + 1)))


@dataclass(frozen=True)
class PathFunctional:
    """A map between paths on the same time grid.

    The declared constants promise
    ||f(v) - f(w)|| <= c (1 + ||v||^r + ||w||^r) ||v - w|| in the C^α norm;
    :func:`spot_check_functional` tests this on random paths.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    lipschitz_c: float
    growth_r: float
    alpha: float = 0.0
    name: str = "functional"

    def __call__(self, path: SampledPath) -> SampledPath:
        return SampledPath(path.grid, self.fn(path.values))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.fn(values)


def identity_functional(alpha: float = 0.0) -> PathFunctional:
    return PathFunctional(lambda v: np.array(v, dtype=float), 1.0, 0.0, alpha, "identity")


def _phi(v):
    v = np.asarray(v, dtype=float)
    return v / (1.0 + _norms(v))[..., None]


def saturating_functional(alpha: float = 0.0) -> PathFunctional:
    """Pointwise x / (1 + ||x||); declared c = 4, r = 1."""
    return PathFunctional(_phi, 4.0, 1.0, alpha, "saturating")


FUNCTIONALS = {"identity": identity_functional, "saturating": saturating_functional}


def spot_check_functional(g: PathFunctional, pairs: int = 200, n: int = 33, d: int = 1, seed: int = 0) -> float:
    """Largest ratio of the Lipschitz-type inequality over random path pairs; <= 1 passes.

    Pairs are Brownian paths with random scales and small perturbations of them.
    """
    theta = uniform_partition(n - 1, 1.0)
    root = root_stream(seed).child("spot_check")
    worst = 0.0
    for k in range(pairs):
        s = root.child("pair", k)
        scale = 10.0 ** s.uniforms(2, offset=0)[0] * 4 - 2
        v = sample_brownian(theta, d, s.child("v")).values * scale
        eps = 10.0 ** (-6 * s.uniforms(1, offset=1)[0])
        w = v + eps * sample_brownian(theta, d, s.child("w")).values
        lhs = holder_norm(SampledPath(theta, g.apply(v) - g.apply(w)), g.alpha, oversample=1)
        nv = holder_norm(SampledPath(theta, v), g.alpha, oversample=1)
        nw = holder_norm(SampledPath(theta, w), g.alpha, oversample=1)
        nd = holder_norm(SampledPath(theta, v - w), g.alpha, oversample=1)
        rhs = g.lipschitz_c * (1 + nv**g.growth_r + nw**g.growth_r) * nd
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    return worst


# --- plain Monte Carlo ---------------------------------------------------------


def path_distance(t: np.ndarray, diff: np.ndarray, gamma: float | None) -> np.ndarray:
    """Sup norm (``gamma=None``) or discrete C^γ norm of ``diff`` with shape (..., n, d)."""
    single = diff.ndim == 2
    v = diff[None] if single else diff
    out = _norms(v).max(axis=1) if gamma is None else batch_holder_norms(t, v, gamma, "norm")
    return out[0] if single else out


def mc_mean(
    sampler: Callable[[RngStream], SampledPath],
    M: int,
    stream: RngStream | None = None,
    reference: SampledPath | None = None,
    gamma: float | None = None,
    threads: int = 1,
) -> tuple[SampledPath, Optional[float]]:
    """Pointwise mean of ``M`` samples drawn from ``stream.child("sample", k)``.

    With a ``reference`` on the same grid the distance in the sup norm
    (``gamma=None``) or discrete C^γ norm is returned as well.
    """
    if M < 1:
        raise InvalidArgumentError("need at least one sample")
    stream = stream or root_stream(0)
    paths = ordered_map(lambda k: sampler(stream.child("sample", k)), range(M), threads)
    grid = paths[0].grid
    if any(q.grid != grid for q in paths):
        raise InvalidArgumentError("samples do not share a grid")
    mean = SampledPath(grid, tree_mean(np.stack([q.values for q in paths])))
    if reference is None:
        return mean, None
    if reference.grid != grid:
        raise InvalidArgumentError("reference lives on a different grid")
    return mean, float(path_distance(grid.points, mean.values - reference.values, gamma))


# --- multilevel Monte Carlo ----------------------------------------------------


@dataclass(frozen=True)
class CoupledSample:
    """Fine and coarse paths of one correction term, with the streams that drove them."""

    fine: SampledPath
    coarse: Optional[SampledPath]
    fine_driver: RngStream
    coarse_driver: Optional[RngStream] = None


@dataclass(frozen=True)
class LevelStats:
    level: int
    N: int
    M: int
    correction_norm_mean: float
    correction_norm_var: float


@dataclass(frozen=True)
class MlmcEstimate:
    mean_path: SampledPath
    per_level: tuple[LevelStats, ...]
    total_cost: float


def replica_stream(stream: RngStream, level: int, k: int) -> RngStream:
    return stream.child("mlmc", level).child("replica", k)


def mlmc_mean(
    coupled_sampler: Callable[[int, int, RngStream], CoupledSample],
    schedule: MlmcSchedule,
    g: PathFunctional | None = None,
    stream: RngStream | None = None,
    threads: int = 1,
) -> MlmcEstimate:
    """Telescoping multilevel estimate of E[g(Y^{N_L})] on the finest output grid.

    Level ℓ averages ``M_ℓ`` corrections g(fine) - g(coarse), replica ``k``
    driven by ``stream/("mlmc", ℓ)/("replica", k)``; level 0 has no coarse
    part. Coarse outputs are lifted to the output grid by affine
    interpolation. Level statistics use the sup norm of the corrections:
    ``correction_norm_mean`` is the mean norm and ``correction_norm_var`` the
    sample mean square distance of the corrections from their average.
    """
    g = g or identity_functional()
    stream = stream or root_stream(0)
    tasks = [(l, k) for l, M in enumerate(schedule.sample_counts) for k in range(M)]

    def run(task):
        l, k = task
        s = replica_stream(stream, l, k)
        cs = coupled_sampler(l, k, s)
        if cs.fine_driver != s:
            raise CouplingError(f"level {l} replica {k} was not driven by its own stream")
        if l > 0:
            if cs.coarse is None:
                raise CouplingError(f"level {l} replica {k} has no coarse path")
            if cs.coarse_driver != cs.fine_driver:
                raise CouplingError(f"level {l} replica {k}: fine and coarse paths use different drivers")
        fine = g(cs.fine)
        coarse = g(cs.coarse) if l > 0 else None
        return fine, coarse

    outputs = ordered_map(run, tasks, threads)
    grid = outputs[-1][0].grid

    def lift(path: SampledPath) -> np.ndarray:
        if path.grid == grid:
            return path.values
        return evaluate_affine(path.grid, path.values, grid.points)

    total = None
    stats = []
    pos = 0
    for l, M in enumerate(schedule.sample_counts):
        block = outputs[pos : pos + M]
        pos += M
        if l == 0:
            corr = np.stack([lift(f) for f, _ in block])
        else:
            corr = np.stack([lift(f) - lift(c) for f, c in block])
        level_mean = tree_mean(corr)
        total = level_mean if total is None else total + level_mean
        norms = _norms(corr).max(axis=1)
        spread = _norms(corr - level_mean).max(axis=1)
        var = float(tree_mean(spread**2)) * M / (M - 1) if M > 1 else 0.0
        stats.append(LevelStats(l, schedule.level_resolutions[l], M, float(tree_mean(norms)), var))
    return MlmcEstimate(SampledPath(grid, total), tuple(stats), float(schedule.total_cost))


def euler_level_sampler(problem: SdeProblem, N0: int = 1) -> Callable[[int, int, RngStream], CoupledSample]:
    """Euler–Maruyama at N0 2^ℓ and N0 2^(ℓ-1) steps from one Brownian path per replica."""

    def sampler(level: int, k: int, stream: RngStream) -> CoupledSample:
        N = N0 * 2**level
        fine_grid = uniform_partition(N, problem.T)
        w = sample_brownian(fine_grid, problem.m, stream)
        fine = euler_maruyama_values(problem, N, fine_grid, w.values[None])[0]
        coarse = None
        if level > 0:
            coarse_grid = uniform_partition(N // 2, problem.T)
            y = euler_maruyama_values(problem, N // 2, fine_grid, w.values[None])[0]
            coarse = SampledPath(coarse_grid, y[nested_indices(fine_grid, coarse_grid)])
        return CoupledSample(SampledPath(fine_grid, fine), coarse, stream, stream if level > 0 else None)

    return sampler


# --- randomisation checks ------------------------------------------------------


@dataclass(frozen=True)
class RademacherReport:
    p: float
    k: int
    d: int
    trials: int
    sum_norm: float
    sum_norm_se: float
    randomized_norm: float
    randomized_norm_se: float
    type_bound: float
    type_bound_se: float
    randomisation_holds: bool
    type_holds: Optional[bool]


def rademacher_sum_check(
    xi: np.ndarray | Callable[[RngStream, int], np.ndarray],
    p: float = 2.0,
    trials: int = 100_000,
    stream: RngStream | None = None,
    margin: float = 4.0,
) -> RademacherReport:
    """Monte Carlo check of ||Σ ξ_j||_p <= 2 ||Σ r_j ξ_j||_p and, for p = 2,
    ||Σ ξ_j||_2 <= 2 (Σ ||ξ_j||_2²)^(1/2), each up to ``margin`` standard errors.

    ``xi`` is either a sampler ``(stream, trials) -> (trials, k, d)`` of
    independent centred vectors, or a fixed array ``(k, d)`` of vectors x_j,
    in which case ξ_j = ε_j x_j with independent signs ε_j.
    """
    if trials < 2:
        raise InvalidArgumentError("need at least two trials")
    stream = stream or root_stream(0)
    if callable(xi):
        samples = np.asarray(xi(stream.child("xi"), trials), dtype=float)
        if samples.ndim != 3 or samples.shape[0] != trials:
            raise InvalidArgumentError("sampler must return an array of shape (trials, k, d)")
        mean = tree_mean(samples)
        se = np.sqrt(tree_mean((samples - mean) ** 2) / (trials - 1))
        if np.any(np.abs(mean) > 6 * se + 1e-12):
            raise ContractViolation("sampler is not centred")
    else:
        x = np.asarray(xi, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if not np.all(_norms(x) > 0):
            raise InvalidArgumentError("vectors must be nonzero")
        signs = stream.child("signs").rademacher(trials * x.shape[0]).reshape(trials, x.shape[0])
        samples = signs[:, :, None] * x[None]
    _, k, d = samples.shape
    r = stream.child("rademacher").rademacher(trials * k).reshape(trials, k)
    plain = _norms(samples.sum(axis=1))
    rand = _norms((r[:, :, None] * samples).sum(axis=1))
    first, first_se = _pth_root_with_se(plain**p, p)
    second, second_se = _pth_root_with_se(rand**p, p)
    third, third_se = _pth_root_with_se(np.sum(_norms(samples) ** 2, axis=1), 2.0)
    holds_a = first <= 2 * second + margin * math.hypot(first_se, 2 * second_se)
    holds_b = None
    if p == 2:
        holds_b = first <= 2 * third + margin * math.hypot(first_se, 2 * third_se)
    return RademacherReport(
        p, k, d, trials, first, first_se, second, second_se, third, third_se, bool(holds_a), holds_b
    )


# --- level sums ------------------------------------------------------------------


def level_sum_direct(rho: float, L: int) -> float:
    return math.fsum(2.0 ** (-rho * l) * 2.0 ** (-(L - l) / 2) for l in range(1, L + 1))


def theoretical_level_sum(rho: float, L: int) -> float:
    """Σ_{ℓ=1}^{L} 2^(-ρℓ) 2^(-(L-ℓ)/2) in closed form."""
    if L < 1:
        raise InvalidArgumentError("need L >= 1")
    if rho < 0:
        raise InvalidArgumentError("need rho >= 0")
    if rho == 0.5:
        return 2.0 ** (-L / 2) * L
    gap = abs(0.5 - rho)
    return 2.0 ** (-L * min(rho, 0.5)) * -math.expm1(-gap * L * math.log(2)) / abs(-math.expm1((rho - 0.5) * math.log(2)))


# --- convergence experiment -------------------------------------------------------

MLMC_COLUMNS = ("L", "p", "gamma", "error", "stderr", "cost", "ref_error")
MLMC_LEVEL_COLUMNS = ("L", "level", "N", "M", "corr_mean", "corr_var")

REFERENCE_SAMPLES = 2**16
REFERENCE_FACTOR = 4


@dataclass
class MlmcConvergenceResult:
    rows: list[dict]
    level_rows: list[dict]
    fit: RateFit
    plain_mc: dict[int, tuple[float, float]] = field(default_factory=dict)
    inconclusive: bool = False

    def __iter__(self):
        yield self.rows
        yield self.fit


def plain_mc_reference(
    problem: SdeProblem, g: PathFunctional, N: int, M: int, stream: RngStream, threads: int = 1, chunk: int = 4096
) -> tuple[Partition, np.ndarray, np.ndarray]:
    """Mean of g(Y^N) over ``M`` samples on uniform(N), with pointwise standard errors."""
    grid = uniform_partition(N, problem.T)

    def part(a, b):
        W = brownian_batch(grid, problem.m, stream, a, b)
        return g.apply(euler_maruyama_values(problem, N, grid, W))

    vals = np.concatenate(ordered_map(lambda r: part(*r), chunk_ranges(M, chunk), threads), axis=0)
    mean = tree_mean(vals)
    se = np.sqrt(tree_mean((vals - mean) ** 2) * M / (M - 1) / M)
    return grid, mean, se


def mlmc_convergence_experiment(
    problem: SdeProblem,
    g: PathFunctional,
    Ls: Sequence[int],
    p: float = 2.0,
    gamma: float = 0.0,
    repetitions: int = 50,
    seed: int = 0,
    alpha: float = 0.1,
    N0: int = 1,
    M_ref: int = REFERENCE_SAMPLES,
    threads: int = 1,
) -> MlmcConvergenceResult:
    """Error of the geometric MLMC estimator against a plain MC reference, per L.

    For each L, ``repetitions`` independent estimates are compared to a plain
    MC mean of ``M_ref`` samples at ``4 N_L`` steps in the discrete C^γ norm on
    uniform(N_L); the error is the L^p mean over repetitions. A plain MC run
    with the same budget, all samples at N_L, is measured the same way. The
    run is inconclusive when the reference error (3 times its largest
    pointwise standard error) is not below 1/5 of the smallest MLMC error.
    """
    if gamma >= alpha:
        raise InvalidArgumentError(f"need gamma < alpha, got gamma={gamma!r}, alpha={alpha!r}")
    if repetitions < 2:
        raise InvalidArgumentError("need at least two repetitions")
    Ls = [int(L) for L in Ls]
    root = root_stream(seed).child("mlmc_conv")
    sampler = euler_level_sampler(problem, N0)
    rows, level_rows, plain = [], [], {}
    for L in Ls:
        sched = geometric_schedule(L, N0)
        N_L = sched.level_resolutions[-1]
        out = uniform_partition(N_L, problem.T)
        ref_grid, ref_mean, ref_se = plain_mc_reference(
            problem, g, REFERENCE_FACTOR * N_L, M_ref, root.child("reference", L), threads
        )
        idx = nested_indices(ref_grid, out)
        ref = ref_mean[idx]
        ref_error = 3.0 * float(_norms(ref_se).max())

        ests = [mlmc_mean(sampler, sched, g, root.child("L", L).child("rep", r), threads) for r in range(repetitions)]
        errs = path_distance(out.points, np.stack([e.mean_path.values for e in ests]) - ref, gamma)
        err, se = _pth_root_with_se(errs**p, p)
        rows.append(dict(L=L, p=float(p), gamma=float(gamma), error=err, stderr=se, cost=float(sched.total_cost), ref_error=ref_error))
        for l in range(L + 1):
            level_rows.append(
                dict(
                    L=L,
                    level=l,
                    N=sched.level_resolutions[l],
                    M=sched.sample_counts[l],
                    corr_mean=float(tree_mean(np.array([e.per_level[l].correction_norm_mean for e in ests]))),
                    corr_var=float(tree_mean(np.array([e.per_level[l].correction_norm_var for e in ests]))),
                )
            )

        M_plain = max(1, sched.total_cost // N_L)
        plain_errs = []
        for r in range(repetitions):
            s = root.child("plain", L).child("rep", r)
            W = brownian_batch(out, problem.m, s, 0, M_plain)
            mean = tree_mean(g.apply(euler_maruyama_values(problem, N_L, out, W)))
            plain_errs.append(path_distance(out.points, mean - ref, gamma))
        plain[L] = _pth_root_with_se(np.asarray(plain_errs) ** p, p)

    fit = fit_rate([2.0**L for L in Ls], [r["error"] for r in rows])
    smallest = min(r["error"] for r in rows)
    inconclusive = max(r["ref_error"] for r in rows) >= smallest / 5
    return MlmcConvergenceResult(rows, level_rows, fit, plain, inconclusive)
