"""Spectral Galerkin approximation of a diagonal stochastic evolution equation.

dX = (A X + F(X)) dt + B dW on H = span{e_n}, with A e_n = λ_n e_n, additive
diagonal noise B e_n = b_n e_n and a coefficient-wise nonlinearity F. The
N-mode approximation keeps modes 1..N and the first N noise coordinates.

Everything lives in coefficient space. Mode ``n`` is driven by the stream
``("mode", n)``, sample ``j`` and step ``k`` reading position
``j * steps + k``, so approximations with different N are couplings by
truncation of one infinite-mode driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._numerics import chunk_ranges, ordered_map
from .errors import InvalidArgumentError, UnsupportedProblemError
from .grid_paths import Partition, SampledPath, uniform_partition
from .rng import RngStream, root_stream
from .schemes import RateFit, fit_rate, holder_of_lp_from_values

LAMBDA_FAMILIES = {"laplacian": (math.pi**2, 2.0), "linear": (math.pi**2, 1.0)}

SAMPLE_CHUNK = 256


@dataclass(frozen=True)
class SpectralSeeProblem:
    """Diagonal SEE with λ_n = -c n^q and b_n = noise_scale · n^(-s).

    ``kappa`` scales the default nonlinearity F(x)_n = κ c_n tanh(x_n) with
    c_n = |λ_n|^α_F / n; ``nonlinearity`` overrides it with any map
    ``(x[..., N], n[N]) -> [..., N]`` acting mode by mode. Errors are measured
    in H_γ, i.e. with weights |λ_n|^γ.

    Construction checks the regularity bookkeeping for the power-law family:
    ϑ < min(1 - α_F, 1/2 - β), β <= χ < 1/2, the noise is Hilbert–Schmidt into
    H_{γ-β}, and N^{ιϑ} ||B (Id - P_N)||_{HS(U, H_{γ-χ})} stays bounded.
    """

    lambda_family: str = "laplacian"
    s: float = 0.6
    noise_scale: float = 1.0
    x0: tuple = ()
    T: float = 1.0
    kappa: float = 0.0
    alpha_F: float = 0.25
    beta: float = 0.0
    chi: float = 0.45
    gamma: float = 0.0
    theta_target: float = 0.45
    iota: float = 2.0
    nonlinearity: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.lambda_family not in LAMBDA_FAMILIES:
            raise InvalidArgumentError(
                f"unknown lambda_family {self.lambda_family!r}; expected one of {sorted(LAMBDA_FAMILIES)}"
            )
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)) if len(self.x0) else ())
        if not self.T > 0:
            raise InvalidArgumentError("T must be positive")
        if not math.isfinite(self.noise_scale):
            raise InvalidArgumentError("noise_scale must be finite")
        if self.iota <= 0:
            raise InvalidArgumentError("iota must be positive")
        if not 0 <= self.alpha_F < 1:
            raise InvalidArgumentError("alpha_F must lie in [0, 1)")
        if not 0 <= self.beta < 0.5 or not self.beta <= self.chi < 0.5:
            raise InvalidArgumentError("need 0 <= beta <= chi < 1/2")
        if not 0 < self.theta_target < min(1 - self.alpha_F, 0.5 - self.beta):
            raise InvalidArgumentError("theta_target must lie in (0, min(1 - alpha_F, 1/2 - beta))")
        c, q = self.lam_c, self.lam_q
        if 2 * q * (self.gamma - self.beta) - 2 * self.s >= -1:
            raise InvalidArgumentError("noise is not Hilbert-Schmidt into H_{gamma-beta} for this s")
        # ||B(Id - P_N)||^2_{HS(U,H_{γ-χ})} ~ N^{1 + 2q(γ-χ) - 2s}, so its product with N^{2ιϑ} must not grow
        if 2 * self.iota * self.theta_target + 1 + 2 * q * (self.gamma - self.chi) - 2 * self.s > 1e-12:
            raise InvalidArgumentError("noise truncation decays too slowly for the declared theta_target")
        if self.iota > q + 1e-12:
            raise InvalidArgumentError("the spectrum does not grow fast enough for the declared iota")

    @property
    def lam_c(self) -> float:
        return LAMBDA_FAMILIES[self.lambda_family][0]

    @property
    def lam_q(self) -> float:
        return LAMBDA_FAMILIES[self.lambda_family][1]

    @property
    def is_linear(self) -> bool:
        return self.nonlinearity is None and self.kappa == 0.0

    def modes(self, n_modes: int, first: int = 1) -> np.ndarray:
        return np.arange(first, first + n_modes, dtype=float)

    def eigenvalues(self, n: np.ndarray) -> np.ndarray:
        return -self.lam_c * np.asarray(n, dtype=float) ** self.lam_q

    def noise_coeffs(self, n: np.ndarray) -> np.ndarray:
        return self.noise_scale * np.asarray(n, dtype=float) ** (-self.s)

    def norm_weights(self, n: np.ndarray) -> np.ndarray:
        return np.abs(self.eigenvalues(n)) ** self.gamma

    def x0_vector(self, n_modes: int) -> np.ndarray:
        out = np.zeros(n_modes)
        k = min(n_modes, len(self.x0))
        out[:k] = self.x0[:k]
        return out

    def drift(self, x: np.ndarray, n: np.ndarray) -> np.ndarray:
        if self.nonlinearity is not None:
            return self.nonlinearity(x, n)
        if self.kappa == 0.0:
            return np.zeros_like(x)
        c_n = np.abs(self.eigenvalues(n)) ** self.alpha_F / n
        return self.kappa * c_n * np.tanh(x)

    def iota_witness(self, N: int) -> float:
        """N^ι sup{1/|λ_n| : n > N}; bounded in N when the ι-condition holds."""
        return N**self.iota / abs(float(self.eigenvalues(N + 1)))


def default_problem(**overrides) -> SpectralSeeProblem:
    """λ_n = -π² n², b_n = n^(-0.6), x0 = 0, T = 1, F = 0."""
    return SpectralSeeProblem(**overrides)


def semilinear_default(**overrides) -> SpectralSeeProblem:
    """The default problem with F(x)_n = 0.5 c_n tanh(x_n)."""
    overrides.setdefault("kappa", 0.5)
    return SpectralSeeProblem(**overrides)


# --- closed-form second moment ----------------------------------------------


def _tail_terms(problem: SpectralSeeProblem, n: np.ndarray, t: float) -> np.ndarray:
    lam = problem.eigenvalues(n)
    b = problem.noise_coeffs(n)
    w2 = problem.norm_weights(n) ** 2
    noise = b * b * -np.expm1(2 * lam * t) / (2 * np.abs(lam))
    x0 = np.zeros_like(noise)
    k = int(np.searchsorted(n, len(problem.x0), side="right"))
    if k:
        x0v = np.asarray(problem.x0)[n[:k].astype(int) - 1]
        x0[:k] = np.exp(2 * lam[:k] * t) * x0v * x0v
    return w2 * (noise + x0)


def _power_tail(e: float, K: int) -> float:
    """Σ_{n>K} n^e for e < -1 by Euler–Maclaurin; accurate to ~K^(e-7)."""
    k = float(K)
    head = k ** (e + 1) / -(e + 1) + k**e / 2 - e * k ** (e - 1) / 12
    head += e * (e - 1) * (e - 2) * k ** (e - 3) / 720
    head -= e * (e - 1) * (e - 2) * (e - 3) * (e - 4) * k ** (e - 5) / 30240
    return head - k**e


def _tail_start(problem: SpectralSeeProblem, N: int, t: float) -> int:
    # past this mode e^{2λ_n t} < e^{-40} and the Euler–Maclaurin remainder is negligible
    c, q = problem.lam_c, problem.lam_q
    k = math.ceil((20.0 / (c * t)) ** (1.0 / q))
    return max(N, len(problem.x0), 1000, k)


def exact_linear_second_moment_error(
    problem: SpectralSeeProblem, N: int, t: float, n_max: int | None = None
) -> float:
    """||(P_0 - P_N) X_t||_{L²(P; H_γ)} for the linear problem, in closed form.

    The squared error is Σ_{n>N} |λ_n|^{2γ} (e^{2λ_n t} x0_n² + b_n² (1 - e^{2λ_n t}) / (2|λ_n|)).
    With ``n_max`` the sum stops at mode ``n_max`` (the error against an
    ``n_max``-mode reference). Otherwise it is summed directly up to a mode K
    beyond which e^{2λ_n t} is negligible, and the remaining pure power tail
    c^{2γ-1} b_n² n^{q(2γ-1)} / 2 is added by Euler–Maclaurin.
    """
    if not problem.is_linear:
        raise UnsupportedProblemError("closed-form error needs F = 0")
    if not 0 <= t <= problem.T:
        raise InvalidArgumentError("t must lie in [0, T]")
    if N < 0:
        raise InvalidArgumentError("N must be nonnegative")
    if n_max is not None:
        if n_max <= N:
            return 0.0
        n = np.arange(N + 1, n_max + 1, dtype=float)
        return math.sqrt(math.fsum(_tail_terms(problem, n, t)))
    if t == 0.0:
        n = np.arange(N + 1, max(N, len(problem.x0)) + 1, dtype=float)
        return math.sqrt(math.fsum(_tail_terms(problem, n, t))) if n.size else 0.0
    K = _tail_start(problem, N, t)
    n = np.arange(N + 1, K + 1, dtype=float)
    c, q = problem.lam_c, problem.lam_q
    e = q * (2 * problem.gamma - 1) - 2 * problem.s
    tail = problem.noise_scale**2 * c ** (2 * problem.gamma - 1) / 2 * _power_tail(e, K)
    return math.sqrt(math.fsum([math.fsum(_tail_terms(problem, n, t)), tail]))


# --- sampling ----------------------------------------------------------------


def _mode_noise(stream: RngStream, n_modes: int, steps: int, start: int, stop: int) -> np.ndarray:
    """Normals of shape (B, steps, n_modes) for samples start..stop-1."""
    out = np.empty((stop - start, steps, n_modes))
    for i in range(n_modes):
        out[:, :, i] = stream.child("mode", i + 1).normal_block(stop - start, steps, first_row=start)
    return out


def _transition(problem: SpectralSeeProblem, n: np.ndarray, h: np.ndarray):
    lam = problem.eigenvalues(n)
    lh = h[:, None] * lam[None, :]
    decay = np.exp(lh)
    noise_sd = problem.noise_coeffs(n)[None, :] * np.sqrt(-np.expm1(2 * lh) / (2 * np.abs(lam))[None, :])
    drift_factor = np.expm1(lh) / lam[None, :]
    return decay, noise_sd, drift_factor


def galerkin_paths(
    problem: SpectralSeeProblem, n_modes: int, theta: Partition, stream: RngStream, start: int, stop: int
) -> np.ndarray:
    """Samples ``start..stop-1`` of the n_modes approximation on ``theta``: shape (B, |θ|, n_modes).

    Linear problems use exact Ornstein–Uhlenbeck transitions. Otherwise one
    exponential Euler step reads
    X_{k+1} = e^{λh} X_k + (e^{λh} - 1)/λ · F(X_k) + b sqrt((1 - e^{2λh}) / (2|λ|)) ξ_k,
    which integrates the additive noise exactly and reduces to the linear
    recursion when F = 0.
    """
    if n_modes < 1:
        raise InvalidArgumentError("need at least one mode")
    if abs(theta.T - problem.T) > 8 * np.finfo(float).eps * max(1.0, problem.T):
        raise InvalidArgumentError("time grid does not end at T")
    n = problem.modes(n_modes)
    steps = theta.size - 1
    xi = _mode_noise(stream, n_modes, steps, start, stop)
    decay, noise_sd, drift_factor = _transition(problem, n, theta.gaps)
    out = np.empty((stop - start, theta.size, n_modes))
    x = np.broadcast_to(problem.x0_vector(n_modes), (stop - start, n_modes)).copy()
    out[:, 0] = x
    linear = problem.is_linear
    for k in range(steps):
        y = decay[k] * x
        if not linear:
            y = y + drift_factor[k] * problem.drift(x, n)
        x = y + noise_sd[k] * xi[:, k, :]
        out[:, k + 1] = x
    return out


def simulate_linear_exact(
    problem: SpectralSeeProblem, N_modes: int, theta: Partition, stream: RngStream
) -> SampledPath:
    """One exact-in-law sample of the first N_modes coefficients on ``theta``."""
    if not problem.is_linear:
        raise UnsupportedProblemError("exact transitions need F = 0")
    return SampledPath(theta, galerkin_paths(problem, N_modes, theta, stream, 0, 1)[0])


def simulate_semilinear(problem: SpectralSeeProblem, N_modes: int, theta: Partition, stream: RngStream) -> SampledPath:
    """One exponential Euler sample of the N_modes approximation on ``theta``."""
    return SampledPath(theta, galerkin_paths(problem, N_modes, theta, stream, 0, 1)[0])


# --- rate experiment ---------------------------------------------------------

GALERKIN_COLUMNS = ("N", "p", "delta", "error", "stderr", "exact_error")


def _check_Ns(Ns: Sequence[int], N_ref: int):
    Ns = [int(N) for N in Ns]
    if len(Ns) < 2 or any(b < a for a, b in zip(Ns, Ns[1:])) or Ns[0] < 1:
        raise InvalidArgumentError("Ns must be at least two positive, nondecreasing values")
    if N_ref < 4 * Ns[-1]:
        raise InvalidArgumentError("N_ref must be at least 4 * max(Ns)")
    return Ns


def _error_samples(problem, Ns, N_ref, theta, stream, M, delta, threads):
    """Per-N error samples against the N_ref reference.

    For δ = 0 only the H_γ norms are kept (shape (M, |θ|, 1)); otherwise the
    full coefficient errors are returned.
    """
    w = problem.norm_weights(problem.modes(N_ref))

    def chunk(a, b):
        ref = galerkin_paths(problem, N_ref, theta, stream, a, b) * w
        errs = []
        for N in Ns:
            if problem.is_linear:
                # the N-mode solution is the truncation of the reference
                e = ref[..., N:]
            else:
                approx = galerkin_paths(problem, N, theta, stream, a, b) * w[:N]
                e = ref.copy()
                e[..., :N] -= approx
            if delta == 0:
                e = np.sqrt(np.sum(e * e, axis=-1, keepdims=True))
            errs.append(e)
        return errs

    parts = ordered_map(lambda r: chunk(*r), chunk_ranges(M, SAMPLE_CHUNK), threads)
    return [np.concatenate([p[i] for p in parts], axis=0) for i in range(len(Ns))]


def default_time_steps(problem: SpectralSeeProblem) -> int:
    # exact transitions need no fine grid; the sup over a few times keeps the
    # max-of-estimates bias small
    return 4 if problem.is_linear else 1024


def galerkin_rate_experiment(
    problem: SpectralSeeProblem,
    Ns: Sequence[int],
    N_ref: int = 256,
    p: float = 2.0,
    delta: float = 0.0,
    M: int = 4000,
    time_steps: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> tuple[list[dict], RateFit]:
    """Strong Galerkin error against the N_ref-mode solution, for each N.

    δ = 0 measures sup_{t∈θ} ||X_t - X^N_t||_{L^p}; δ > 0 the discrete
    C^δ(θ; L^p) norm. For linear problems with p = 2 and δ = 0 the rows also
    carry the closed-form value sup_{t∈θ} of the error against N_ref modes.
    """
    Ns = _check_Ns(Ns, N_ref)
    if M < 2:
        raise InvalidArgumentError("need at least two samples")
    steps = int(time_steps or default_time_steps(problem))
    theta = uniform_partition(steps, problem.T)
    stream = root_stream(seed).child("galerkin")
    errs = _error_samples(problem, Ns, N_ref, theta, stream, M, delta, threads)
    rows = []
    for N, E in zip(Ns, errs):
        est = holder_of_lp_from_values(theta.points, E, p, delta, "sup" if delta == 0 else "norm")
        exact = None
        if problem.is_linear and p == 2 and delta == 0:
            exact = max(exact_linear_second_moment_error(problem, N, float(t), n_max=N_ref) for t in theta.points)
        rows.append(dict(N=N, p=float(p), delta=float(delta), error=est.value, stderr=est.std_error, exact_error=exact))
    return rows, fit_rate(Ns, [r["error"] for r in rows])


def pathwise_slopes(
    problem: SpectralSeeProblem,
    Ns: Sequence[int],
    N_ref: int = 256,
    M: int = 64,
    time_steps: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> np.ndarray:
    """Per-sample fitted slopes of sup_{t∈θ} ||X_t - X^N_t||_{H_γ} against N.

    An almost-sure rate shows up as a concentrated distribution of these
    slopes; the median is the usual summary.
    """
    Ns = _check_Ns(Ns, N_ref)
    steps = int(time_steps or default_time_steps(problem))
    theta = uniform_partition(steps, problem.T)
    errs = _error_samples(problem, Ns, N_ref, theta, root_stream(seed).child("galerkin"), M, 0.0, threads)
    sups = np.stack([E[:, :, 0].max(axis=1) for E in errs], axis=1)  # (M, len(Ns))
    return np.array([fit_rate(Ns, row).slope for row in sups])
