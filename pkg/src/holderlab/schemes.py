"""Brownian sampling, Euler–Maruyama, Monte Carlo Hölder-error estimators,
exact Brownian interpolation errors and convergence-rate fits.

Two error norms are estimated from ``M`` coupled samples of an error process
``E`` on a common grid:

* ``L^p(P; C^α)`` -- the p-th moment of the pathwise Hölder norm
  (expectation outside, supremum inside);
* ``C^α([0,T]; L^p)`` -- suprema over times of L^p norms
  (supremum outside, expectation inside).

For the same samples the first always dominates the second.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import chunk_ranges, ordered_map, tree_mean
from .errors import DomainError, InvalidArgumentError
from .grid_paths import (
    Partition,
    SampledPath,
    _norms,
    batch_holder_norms,
    evaluate_affine,
    nested_indices,
    refine_values,
    uniform_partition,
)
from .rng import RngStream, root_stream
from .special import brownian_ratio_f, gaussian_abs_moment

# samples generated per block in the batch experiments
SAMPLE_CHUNK = 1024


# --- problems ---------------------------------------------------------------


@dataclass(frozen=True)
class SdeProblem:
    """dX = μ(X) dt + σ(X) dW on [0, T] with X_0 = x0.

    ``drift`` maps ``(..., d) -> (..., d)`` and ``diffusion`` maps
    ``(..., d) -> (..., d, m)``; both act on batches. ``exact_solution``, if
    given, maps ``(x0, times, W)`` with ``W`` of shape ``(..., n, m)`` to the
    solution values ``(..., n, d)`` driven by that Brownian path.
    """

    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    x0: np.ndarray
    T: float = 1.0
    m: int = 1
    exact_solution: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None
    lipschitz_drift: float = math.nan
    lipschitz_diffusion: float = math.nan
    name: str = "sde"

    def __post_init__(self):
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        if not self.T > 0:
            raise InvalidArgumentError("T must be positive")
        if self.m < 1:
            raise InvalidArgumentError("noise dimension must be at least 1")

    @property
    def d(self) -> int:
        return int(self.x0.size)


def brownian_motion(T: float = 1.0, d: int = 1) -> SdeProblem:
    """μ = 0, σ = identity; the Euler scheme reproduces the affine interpolant of W."""
    eye = np.eye(d)
    return SdeProblem(
        drift=lambda x: np.zeros_like(x),
        diffusion=lambda x: np.broadcast_to(eye, x.shape + (d,)),
        x0=np.zeros(d),
        T=T,
        m=d,
        exact_solution=lambda x0, t, W: x0 + W,
        lipschitz_drift=0.0,
        lipschitz_diffusion=0.0,
        name="brownian",
    )


def geometric_brownian_motion(mu: float = 0.5, sigma: float = 0.2, x0: float = 1.0, T: float = 1.0) -> SdeProblem:
    def exact(x0_, t, W):
        return x0_ * np.exp((mu - 0.5 * sigma**2) * t[:, None] + sigma * W)

    return SdeProblem(
        drift=lambda x: mu * x,
        diffusion=lambda x: (sigma * x)[..., None],
        x0=[x0],
        T=T,
        m=1,
        exact_solution=exact,
        lipschitz_drift=abs(mu),
        lipschitz_diffusion=abs(sigma),
        name="gbm",
    )


def linear_ode(rate: float = 1.0, x0: float = 1.0, T: float = 1.0) -> SdeProblem:
    """x' = rate * x with no noise."""
    return SdeProblem(
        drift=lambda x: rate * x,
        diffusion=lambda x: np.zeros(x.shape + (1,)),
        x0=[x0],
        T=T,
        m=1,
        exact_solution=lambda x0_, t, W: x0_ * np.exp(rate * t)[:, None] + 0.0 * W,
        lipschitz_drift=abs(rate),
        lipschitz_diffusion=0.0,
        name="linear_ode",
    )


# --- Brownian paths ---------------------------------------------------------


def brownian_values(theta: Partition, m: int, normals: np.ndarray) -> np.ndarray:
    """Brownian values on ``theta`` from standard normals of shape ``(..., n-1, m)``."""
    incr = normals * np.sqrt(theta.gaps)[:, None]
    out = np.zeros(normals.shape[:-2] + (theta.size, m))
    np.cumsum(incr, axis=-2, out=out[..., 1:, :])
    return out


def sample_brownian(theta: Partition, m: int, stream: RngStream) -> SampledPath:
    """W(0) = 0 and independent N(0, gap * I_m) increments."""
    if m < 1:
        raise InvalidArgumentError("m must be at least 1")
    z = stream.normals((theta.size - 1) * m).reshape(theta.size - 1, m)
    return SampledPath(theta, brownian_values(theta, m, z))


def brownian_batch(theta: Partition, m: int, stream: RngStream, start: int, stop: int) -> np.ndarray:
    """Samples ``start .. stop-1`` of a Brownian family on ``theta``: shape ``(B, n, m)``.

    Sample ``k`` is row ``k`` of ``stream`` with stride ``(n-1) * m``, so any
    chunking of the sample range reproduces the same paths.
    """
    stride = (theta.size - 1) * m
    z = stream.normal_block(stop - start, stride, first_row=start)
    return brownian_values(theta, m, z.reshape(stop - start, theta.size - 1, m))


# --- Euler–Maruyama ---------------------------------------------------------


def euler_maruyama_values(problem: SdeProblem, N: int, grid: Partition, W: np.ndarray) -> np.ndarray:
    """Batch Euler–Maruyama on ``grid`` for Brownian values ``W`` of shape ``(B, n, m)``.

    On ``[nT/N, (n+1)T/N]`` the value at time t is
    ``Y_n + (t - t_n) μ(Y_n) + ((t - t_n)/h) σ(Y_n) ΔW_n``: drift scaled by the
    elapsed time, noise by the elapsed fraction of the full increment.
    """
    coarse = uniform_partition(N, problem.T)
    try:
        idx = nested_indices(grid, coarse)
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(f"grid is not nested over the {N}-step uniform grid") from exc
    W = np.asarray(W, dtype=float)
    B = W.shape[0]
    d = problem.d
    out = np.empty((B, grid.size, d))
    y = np.broadcast_to(problem.x0, (B, d)).copy()
    out[:, 0] = y
    pts = grid.points
    for n in range(N):
        i0, i1 = idx[n], idx[n + 1]
        dW = W[:, i1, :] - W[:, i0, :]
        mu = problem.drift(y)
        sig = problem.diffusion(y)
        noise = np.einsum("bdm,bm->bd", sig, dW)
        t0 = pts[i0]
        h = pts[i1] - t0
        elapsed = pts[i0 + 1 : i1 + 1] - t0
        frac = elapsed / h
        seg = y[:, None, :] + elapsed[None, :, None] * mu[:, None, :] + frac[None, :, None] * noise[:, None, :]
        out[:, i0 + 1 : i1 + 1] = seg
        y = seg[:, -1, :]
    return out


def euler_maruyama(problem: SdeProblem, N: int, w: SampledPath) -> SampledPath:
    """Y^N on ``w.grid`` driven by the Brownian path ``w``."""
    if w.dim != problem.m:
        raise InvalidArgumentError("Brownian path dimension does not match the problem")
    vals = euler_maruyama_values(problem, N, w.grid, w.values[None])
    return SampledPath(w.grid, vals[0])


# --- exact Brownian interpolation errors -------------------------------------


class ErrorKind(enum.Enum):
    SUP_OF_LP = "sup_of_lp"
    SEMINORM = "seminorm"
    FULL_NORM = "full_norm"


def brownian_interp_error_exact(kind: ErrorKind | str, alpha: float, p: float, T: float, N: int) -> float:
    """Exact C^α([0,T]; L^p) errors of the N-step affine interpolant of W.

    SUP_OF_LP  -> ||W_T||_p / (2 sqrt(N))
    SEMINORM   -> N^(α-1/2) T^(-α) ||W_T||_p f(α)
    FULL_NORM  -> N^(α-1/2) T^(-α) ||W_T||_p (T^α / (2 N^α) + f(α))
    """
    kind = ErrorKind(kind)
    if not (0.0 <= alpha <= 0.5):
        raise DomainError(f"alpha must lie in [0, 1/2], got {alpha!r}")
    if N < 1 or not T > 0:
        raise InvalidArgumentError("need N >= 1 and T > 0")
    w_norm = math.sqrt(T) * gaussian_abs_moment(p)
    if kind is ErrorKind.SUP_OF_LP:
        return w_norm / (2.0 * math.sqrt(N))
    scale = N ** (alpha - 0.5) * T ** (-alpha) * w_norm
    if kind is ErrorKind.SEMINORM:
        return scale * brownian_ratio_f(alpha)
    return scale * (T**alpha / (2.0 * N**alpha) + brownian_ratio_f(alpha))


# --- Monte Carlo norm estimators ---------------------------------------------


class EstimateKind(enum.Enum):
    LP_OF_HOLDER = "lp_of_holder"
    HOLDER_OF_LP = "holder_of_lp"
    SUP_OF_LP = "sup_of_lp"


@dataclass(frozen=True)
class LpHolderEstimate:
    p: float
    alpha: float
    value: float
    std_error: float
    samples: int
    refinement: int
    kind: EstimateKind
    part: str = "norm"


def _pth_root_with_se(w: np.ndarray, p: float) -> tuple[float, float]:
    """(mean(w))^(1/p) and its delta-method standard error."""
    M = w.shape[0]
    m = float(tree_mean(w))
    if m <= 0.0:
        return 0.0, 0.0
    var = float(tree_mean((w - m) ** 2)) * M / (M - 1)
    se_m = math.sqrt(max(var, 0.0) / M)
    value = m ** (1.0 / p)
    return value, value * se_m / (p * m)


def _pow(x: np.ndarray, p: float) -> np.ndarray:
    return x * x if p == 2 else x**p


def _check_samples(M: int):
    if M < 2:
        raise InvalidArgumentError("need at least two samples")


def lp_of_holder_from_values(
    t: np.ndarray, values: np.ndarray, p: float, alpha: float, part: str = "norm", refinement: int = 1
) -> LpHolderEstimate:
    """``(E ||E||^p)^(1/p)`` with ``||·||`` the discrete C^α norm, seminorm or sup."""
    values = np.asarray(values, dtype=float)
    _check_samples(values.shape[0])
    norms = batch_holder_norms(t, values, alpha, part)
    value, se = _pth_root_with_se(_pow(norms, p), p)
    return LpHolderEstimate(p, alpha, value, se, values.shape[0], refinement, EstimateKind.LP_OF_HOLDER, part)


def _sup_of_lp(values: np.ndarray, p: float) -> tuple[float, float]:
    w = _pow(_norms(values), p)  # (M, n)
    means = tree_mean(w, axis=0)
    j = int(np.argmax(means))
    return _pth_root_with_se(w[:, j], p)


def _seminorm_of_lp(t: np.ndarray, values: np.ndarray, p: float, alpha: float) -> tuple[float, float]:
    # max over pairs of ||E_t - E_s||_p / |t - s|^α, scanned by lag with an exact cutoff
    n = t.size
    pointwise = tree_mean(_pow(_norms(values), p), axis=0) ** (1.0 / p)
    bound = 2.0 * float(pointwise.max(initial=0.0))
    best, arg = 0.0, None
    for k in range(1, n):
        gaps = t[k:] - t[:-k]
        gmin = float(gaps.min())
        if alpha > 0 and best > 0 and bound / gmin**alpha <= best:
            break
        w = _pow(_norms(values[:, k:, :] - values[:, :-k, :]), p)
        ratios = tree_mean(w, axis=0) ** (1.0 / p) / gaps**alpha
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best, arg = float(ratios[i]), (i, k)
    if arg is None:
        return 0.0, 0.0
    i, k = arg
    w = _pow(_norms(values[:, i + k, :] - values[:, i, :]), p)
    value, se = _pth_root_with_se(w, p)
    scale = (t[i + k] - t[i]) ** alpha
    return float(value / scale), float(se / scale)


def holder_of_lp_from_values(
    t: np.ndarray, values: np.ndarray, p: float, alpha: float, part: str = "seminorm", refinement: int = 1
) -> LpHolderEstimate:
    """C^α([0,T]; L^p) quantities of the sampled process.

    ``part`` is ``"sup"`` (sup_t ||E_t||_p), ``"seminorm"`` or ``"norm"``
    (their sum). Standard errors come from the delta method at the
    maximising time or pair.
    """
    values = np.asarray(values, dtype=float)
    _check_samples(values.shape[0])
    M = values.shape[0]
    if part == "sup":
        v, se = _sup_of_lp(values, p)
        return LpHolderEstimate(p, alpha, v, se, M, refinement, EstimateKind.SUP_OF_LP, part)
    semi, semi_se = _seminorm_of_lp(np.asarray(t, dtype=float), values, p, alpha)
    if part == "seminorm":
        return LpHolderEstimate(p, alpha, semi, semi_se, M, refinement, EstimateKind.HOLDER_OF_LP, part)
    if part != "norm":
        raise InvalidArgumentError(f"unknown norm part {part!r}")
    sup, sup_se = _sup_of_lp(values, p)
    return LpHolderEstimate(
        p, alpha, sup + semi, math.hypot(sup_se, semi_se), M, refinement, EstimateKind.HOLDER_OF_LP, part
    )


def _draw(error_sampler, M: int, stream: RngStream, threads: int) -> tuple[Partition, np.ndarray]:
    paths = ordered_map(lambda k: error_sampler(stream.child("sample", k)), range(M), threads)
    grid = paths[0].grid
    for q in paths:
        if q.grid != grid:
            raise InvalidArgumentError("sampled paths do not share a grid")
    return grid, np.stack([q.values for q in paths])


def estimate_lp_of_holder(
    error_sampler: Callable[[RngStream], SampledPath],
    p: float,
    alpha: float,
    M: int,
    oversample: int = 1,
    stream: RngStream | None = None,
    part: str = "norm",
    threads: int = 1,
) -> LpHolderEstimate:
    """Monte Carlo estimate of ``||E||_{L^p(P; C^α)}``.

    Sample ``k`` is drawn from ``stream.child("sample", k)``. ``oversample``
    refines each sampled path by affine interpolation before the norm is taken;
    it adds no randomness, so samplers of rough processes should already
    produce fine grids.
    """
    _check_samples(M)
    stream = stream or root_stream(0)
    grid, vals = _draw(error_sampler, M, stream, threads)
    grid, vals = refine_values(grid, vals, oversample)
    return lp_of_holder_from_values(grid.points, vals, p, alpha, part, oversample)


def estimate_holder_of_lp(
    error_sampler: Callable[[RngStream], SampledPath],
    p: float,
    alpha: float,
    M: int,
    oversample: int = 1,
    stream: RngStream | None = None,
    part: str = "seminorm",
    threads: int = 1,
) -> LpHolderEstimate:
    """Monte Carlo estimate of the C^α([0,T]; L^p) seminorm, norm, or sup."""
    _check_samples(M)
    stream = stream or root_stream(0)
    grid, vals = _draw(error_sampler, M, stream, threads)
    grid, vals = refine_values(grid, vals, oversample)
    return holder_of_lp_from_values(grid.points, vals, p, alpha, part, oversample)


# --- rate fits --------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    abscissae: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float


def fit_rate(abscissae: Sequence[float], errors: Sequence[float], log_base: float = math.e) -> RateFit:
    """Least squares fit of log(error) against log(abscissa).

    The slope does not depend on ``log_base``; the intercept does.
    """
    x = np.asarray(abscissae, dtype=float)
    y = np.asarray(errors, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise InvalidArgumentError("need at least two (abscissa, error) points")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise InvalidArgumentError("abscissae and errors must be positive")
    lx, ly = np.log(x) / math.log(log_base), np.log(y) / math.log(log_base)
    mx, my = lx.mean(), ly.mean()
    sxx = float(np.sum((lx - mx) ** 2))
    if sxx == 0:
        raise InvalidArgumentError("abscissae must not all coincide")
    slope = float(np.sum((lx - mx) * (ly - my)) / sxx)
    intercept = float(my - slope * mx)
    resid = ly - (intercept + slope * lx)
    syy = float(np.sum((ly - my) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / syy if syy > 0 else 1.0
    return RateFit(tuple(x.tolist()), tuple(y.tolist()), slope, intercept, r2)


# --- experiments ------------------------------------------------------------


def brownian_error_values(N: int, T: float, oversample: int, stream: RngStream, start: int, stop: int) -> np.ndarray:
    """W - [W]_θ for θ = uniform(N), W sampled exactly on uniform(N * oversample)."""
    fine = uniform_partition(N * oversample, T)
    W = brownian_batch(fine, 1, stream, start, stop)
    coarse = uniform_partition(N, T)
    idx = nested_indices(fine, coarse)
    return W - evaluate_affine(coarse, W[:, idx, :], fine.points)


def _batched(fn, M: int, threads: int) -> np.ndarray:
    parts = ordered_map(lambda r: fn(*r), chunk_ranges(M, SAMPLE_CHUNK), threads)
    return np.concatenate(parts, axis=0)


BROWNIAN_KINDS = (
    "sup_of_lp",
    "holder_of_lp_seminorm",
    "holder_of_lp_norm",
    "lp_of_holder_seminorm",
    "lp_of_holder_norm",
)

BROWNIAN_COLUMNS = ("alpha", "p", "N", "T", "kind", "exact", "mc_estimate", "mc_stderr", "oversample", "samples")


def brownian_exact_experiment(
    alphas: Sequence[float],
    ps: Sequence[float],
    Ns: Sequence[int],
    M: int = 10_000,
    oversample: int = 8,
    T: float = 1.0,
    seed: int = 0,
    threads: int = 1,
) -> list[dict]:
    """Exact vs. Monte Carlo errors of the affine Brownian interpolant.

    For every N one family of ``M`` error paths is sampled (on the
    ``N * oversample`` grid) and reused for all ``(p, α)``; each row carries
    one estimate kind. L^p(P; C^α) rows have no exact value (``None``).
    """
    _check_samples(M)
    root = root_stream(seed).child("brownian_exact")
    rows = []
    for N in Ns:
        stream = root.child("N", N)
        E = _batched(lambda a, b: brownian_error_values(N, T, oversample, stream, a, b), M, threads)
        t = uniform_partition(N * oversample, T).points
        for p in ps:
            sup = holder_of_lp_from_values(t, E, p, 0.0, "sup")
            for a in alphas:
                semi = holder_of_lp_from_values(t, E, p, a, "seminorm")
                full_se = math.hypot(sup.std_error, semi.std_error)
                estimates = {
                    "sup_of_lp": (sup.value, sup.std_error),
                    "holder_of_lp_seminorm": (semi.value, semi.std_error),
                    "holder_of_lp_norm": (sup.value + semi.value, full_se),
                }
                for part in ("seminorm", "norm"):
                    est = lp_of_holder_from_values(t, E, p, a, part)
                    estimates[f"lp_of_holder_{part}"] = (est.value, est.std_error)
                exact = {
                    "sup_of_lp": brownian_interp_error_exact(ErrorKind.SUP_OF_LP, a, p, T, N),
                    "holder_of_lp_seminorm": brownian_interp_error_exact(ErrorKind.SEMINORM, a, p, T, N),
                    "holder_of_lp_norm": brownian_interp_error_exact(ErrorKind.FULL_NORM, a, p, T, N),
                }
                for kind in BROWNIAN_KINDS:
                    value, se = estimates[kind]
                    rows.append(
                        dict(
                            alpha=float(a),
                            p=float(p),
                            N=int(N),
                            T=float(T),
                            kind=kind,
                            exact=exact.get(kind),
                            mc_estimate=value,
                            mc_stderr=se,
                            oversample=int(oversample),
                            samples=int(M),
                        )
                    )
    return rows


EULER_COLUMNS = ("N", "p", "alpha", "error", "stderr")


def _check_nested(Ns: Sequence[int], N_fine: int):
    Ns = list(Ns)
    if len(Ns) < 2:
        raise InvalidArgumentError("need at least two resolutions")
    for a, b in zip(Ns, Ns[1:]):
        if b % a:
            raise InvalidArgumentError(f"resolutions are not nested: {a} does not divide {b}")
    if N_fine % Ns[-1]:
        raise InvalidArgumentError("reference resolution must be a multiple of the finest N")


def euler_rate_experiment(
    problem: SdeProblem,
    Ns: Sequence[int],
    p: float = 2.0,
    alpha: float = 0.0,
    M: int = 4000,
    seed: int = 0,
    N_ref: int | None = None,
    threads: int = 1,
) -> tuple[list[dict], RateFit]:
    """Strong L^p(P; C^α) error of Y^N against a reference on a shared fine path.

    All Y^N and the reference are driven by one Brownian path per sample on
    ``uniform(N_ref)`` with ``N_ref = 8 max(Ns)`` by default. The reference
    is ``problem.exact_solution`` when available and Euler–Maruyama at
    ``N_ref`` otherwise.
    """
    _check_samples(M)
    N_ref = int(N_ref or 8 * max(Ns))
    _check_nested(Ns, N_ref)
    fine = uniform_partition(N_ref, problem.T)
    stream = root_stream(seed).child("euler")

    def chunk(a, b):
        W = brownian_batch(fine, problem.m, stream, a, b)
        if problem.exact_solution is not None:
            X = problem.exact_solution(problem.x0, fine.points, W)
        else:
            X = euler_maruyama_values(problem, N_ref, fine, W)
        return np.stack([X - euler_maruyama_values(problem, N, fine, W) for N in Ns], axis=0)

    parts = ordered_map(lambda r: chunk(*r), chunk_ranges(M, SAMPLE_CHUNK), threads)
    errs = np.concatenate(parts, axis=1)  # (len(Ns), M, n, d)
    rows = []
    for N, E in zip(Ns, errs):
        est = lp_of_holder_from_values(fine.points, E, p, alpha, "norm")
        rows.append(dict(N=int(N), p=float(p), alpha=float(alpha), error=est.value, stderr=est.std_error))
    fit = fit_rate([r["N"] for r in rows], [r["error"] for r in rows])
    return rows, fit
