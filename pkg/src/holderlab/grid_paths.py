"""Time partitions, sampled paths, affine interpolation and discrete Hölder norms.

Paths live on a finite partition ``0 = t_0 < ... < t_n = T`` and stand for
their piecewise-affine extension. All seminorms are maxima over pairs of
points of a (possibly refined) grid.

For the full distance band the seminorm of a piecewise-affine path is
attained at a pair of breakpoints for every exponent in [0, 1], so refinement
never changes it beyond rounding. Restricted bands can be attained off-grid;
there ``oversample`` controls the sub-grid used to approximate the supremum.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, OutOfRangeError

# upper bound on the number of pair entries materialised at once
_PAIR_MATRIX_LIMIT = 2_000_000


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Partition:
    """A finite time grid containing 0 and T."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1)
        if pts.size < 2:
            raise InvalidArgumentError("a partition needs at least two points")
        if pts[0] != 0.0:
            raise InvalidArgumentError(f"partition must start at 0, got {pts[0]!r}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("partition points must be finite")
        if not np.all(np.diff(pts) > 0):
            raise InvalidArgumentError("partition points must be strictly increasing")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return int(self.points.size)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def d_max(self) -> float:
        return float(self.gaps.max())

    @property
    def d_min(self) -> float:
        return float(self.gaps.min())

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        return f"Partition(n={self.size}, T={self.T!r})"


def uniform_partition(N: int, T: float = 1.0) -> Partition:
    """The grid {0, T/N, ..., T}.

    Points are computed as ``T * (n / N)`` so that nested uniform grids share
    their common points bit for bit (``n / N == (k n) / (k N)`` under IEEE
    division).
    """
    if int(N) != N or N < 1:
        raise InvalidArgumentError(f"N must be a positive integer, got {N!r}")
    if not T > 0:
        raise InvalidArgumentError(f"T must be positive, got {T!r}")
    N = int(N)
    pts = float(T) * (np.arange(N + 1, dtype=float) / N)
    return Partition(pts)


def mesh_stats(theta: Partition) -> tuple[float, float]:
    """Return ``(d_max, d_min)``."""
    return theta.d_max, theta.d_min


class BandKind(enum.Enum):
    OPEN_OPEN = "(c,inf)"
    CLOSED_OPEN = "[c,inf)"
    OPEN_CLOSED = "(0,c]"
    OPEN_BELOW = "(0,c)"
    FULL = "(0,inf)"


@dataclass(frozen=True)
class DistanceBand:
    """A set of admissible pair distances; ties at ``c`` follow the interval kind."""

    kind: BandKind = BandKind.FULL
    c: float | None = None

    def __post_init__(self):
        if self.kind is BandKind.FULL:
            if self.c is not None:
                raise InvalidArgumentError("the full band takes no threshold")
        elif self.c is None or not self.c > 0:
            raise InvalidArgumentError(f"band threshold must be positive, got {self.c!r}")

    @classmethod
    def full(cls) -> "DistanceBand":
        return cls()

    @classmethod
    def above(cls, c: float) -> "DistanceBand":
        return cls(BandKind.OPEN_OPEN, float(c))

    @classmethod
    def at_least(cls, c: float) -> "DistanceBand":
        return cls(BandKind.CLOSED_OPEN, float(c))

    @classmethod
    def up_to(cls, c: float) -> "DistanceBand":
        return cls(BandKind.OPEN_CLOSED, float(c))

    @classmethod
    def below(cls, c: float) -> "DistanceBand":
        return cls(BandKind.OPEN_BELOW, float(c))

    def contains(self, gaps: np.ndarray) -> np.ndarray:
        g = np.asarray(gaps)
        k, c = self.kind, self.c
        if k is BandKind.FULL:
            return g > 0
        if k is BandKind.OPEN_OPEN:
            return g > c
        if k is BandKind.CLOSED_OPEN:
            return g >= c
        if k is BandKind.OPEN_CLOSED:
            return (g > 0) & (g <= c)
        return (g > 0) & (g < c)

    def excludes_all_beyond(self, gap: float) -> bool:
        """True when every distance >= ``gap`` lies outside the band."""
        if self.kind is BandKind.OPEN_CLOSED:
            return gap > self.c
        if self.kind is BandKind.OPEN_BELOW:
            return gap >= self.c
        return False


FULL = DistanceBand.full()


class SampledPath:
    """Values of an R^d-valued path on a partition.

    ``values`` has shape ``(len(grid), d)``; 1-D input is read as ``d = 1``.
    Instances are immutable.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Partition, values):
        v = np.array(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise InvalidArgumentError("values must be an (n, d) array")
        if v.shape[0] != grid.size:
            raise InvalidArgumentError(
                f"got {v.shape[0]} values for a grid of {grid.size} points"
            )
        if v.shape[1] < 1:
            raise InvalidArgumentError("state dimension must be at least 1")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", _readonly(v))

    def __setattr__(self, name, value):
        raise AttributeError("SampledPath is immutable")

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def times(self) -> np.ndarray:
        return self.grid.points

    @classmethod
    def from_function(cls, grid: Partition, fn) -> "SampledPath":
        return cls(grid, np.asarray([np.atleast_1d(fn(t)) for t in grid.points]))

    @classmethod
    def zeros(cls, grid: Partition, dim: int = 1) -> "SampledPath":
        return cls(grid, np.zeros((grid.size, dim)))

    def _check_same_grid(self, other: "SampledPath"):
        if self.grid != other.grid:
            raise InvalidArgumentError("paths live on different grids")
        if self.dim != other.dim:
            raise InvalidArgumentError("paths have different state dimensions")

    def __add__(self, other):
        if isinstance(other, SampledPath):
            self._check_same_grid(other)
            return SampledPath(self.grid, self.values + other.values)
        return SampledPath(self.grid, self.values + np.asarray(other, dtype=float))

    def __sub__(self, other):
        if isinstance(other, SampledPath):
            self._check_same_grid(other)
            return SampledPath(self.grid, self.values - other.values)
        return SampledPath(self.grid, self.values - np.asarray(other, dtype=float))

    def __mul__(self, scalar):
        return SampledPath(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SampledPath(self.grid, -self.values)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SampledPath)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.grid, self.values.tobytes()))

    def __repr__(self) -> str:
        return f"SampledPath(n={self.grid.size}, d={self.dim}, T={self.grid.T!r})"


def _locate(points: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Index j >= 1 of the segment [points[j-1], points[j]] containing each t."""
    j = np.searchsorted(points, t, side="right")
    return np.clip(j, 1, points.size - 1)


def evaluate_affine(grid: Partition, values: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Piecewise-affine interpolant of ``values`` (shape ``(..., n, d)``) at ``ts``.

    Grid points return the stored value exactly.
    """
    pts = grid.points
    ts = np.asarray(ts, dtype=float)
    j = _locate(pts, ts)
    left, right = pts[j - 1], pts[j]
    w = ((ts - left) / (right - left))[:, None]
    vals = np.asarray(values)
    lo = vals[..., j - 1, :]
    out = lo + w * (vals[..., j, :] - lo)
    k = np.searchsorted(pts, ts, side="left")
    k = np.clip(k, 0, pts.size - 1)
    on_grid = pts[k] == ts
    if np.any(on_grid):
        out[..., on_grid, :] = vals[..., k[on_grid], :]
    return out


def interpolate_affine(path: SampledPath, t: float) -> np.ndarray:
    """Value of the piecewise-affine extension ``[f]_θ(t)``."""
    T = path.grid.T
    if not (0.0 <= t <= T):
        raise OutOfRangeError(f"t={t!r} lies outside [0, {T!r}]")
    return evaluate_affine(path.grid, path.values, np.array([float(t)]))[0].copy()


def interpolant_on(path: SampledPath, theta: Partition, grid: Partition | None = None) -> SampledPath:
    """``[f]_θ`` evaluated on ``grid`` (default: the path's own grid).

    ``theta`` must be nested in ``path.grid``; only the values at θ are used.
    """
    coarse = restrict(path, theta)
    grid = path.grid if grid is None else grid
    return SampledPath(grid, evaluate_affine(theta, coarse.values, grid.points))


def refined_points(grid: Partition, oversample: int) -> np.ndarray:
    if int(oversample) != oversample or oversample < 1:
        raise InvalidArgumentError(f"oversample must be a positive integer, got {oversample!r}")
    k = int(oversample)
    if k == 1:
        return grid.points
    pts = grid.points
    frac = np.arange(k, dtype=float) / k
    inner = pts[:-1, None] + np.diff(pts)[:, None] * frac[None, :]
    return np.concatenate([inner.reshape(-1), pts[-1:]])


def refine_partition(grid: Partition, oversample: int) -> Partition:
    if oversample == 1:
        return grid
    return Partition(refined_points(grid, oversample))


def refine(path: SampledPath, oversample: int) -> SampledPath:
    """Insert ``oversample - 1`` equispaced points in every segment."""
    pts = refined_points(path.grid, oversample)
    if oversample == 1:
        return path
    grid = Partition(pts)
    return SampledPath(grid, evaluate_affine(path.grid, path.values, pts))


def refine_values(grid: Partition, values: np.ndarray, oversample: int) -> tuple[Partition, np.ndarray]:
    """Batch form of :func:`refine` for values of shape ``(..., n, d)``."""
    if oversample == 1:
        return grid, np.asarray(values, dtype=float)
    fine = refine_partition(grid, oversample)
    return fine, evaluate_affine(grid, values, fine.points)


def nested_indices(fine: Partition, coarse: Partition) -> np.ndarray:
    """Indices of the points of ``coarse`` inside ``fine``.

    Matching tolerates a few ulps so that grids built by different but
    equivalent arithmetic (e.g. refinement vs. a finer uniform grid) nest.
    """
    if fine.T != coarse.T and abs(fine.T - coarse.T) > 8 * np.finfo(float).eps * fine.T:
        raise InvalidArgumentError("grids have different horizons")
    idx = np.searchsorted(fine.points, coarse.points)
    idx = np.clip(idx, 0, fine.size - 1)
    tol = 8 * np.finfo(float).eps * max(1.0, fine.T)
    lower = np.clip(idx - 1, 0, fine.size - 1)
    use_lower = np.abs(fine.points[lower] - coarse.points) < np.abs(fine.points[idx] - coarse.points)
    idx = np.where(use_lower, lower, idx)
    if np.any(np.abs(fine.points[idx] - coarse.points) > tol):
        raise InvalidArgumentError("coarse grid is not nested in the fine grid")
    return idx


def restrict(path: SampledPath, coarse: Partition) -> SampledPath:
    """Copy the values at the points of ``coarse`` (which must lie on path.grid)."""
    if coarse == path.grid:
        return path
    idx = nested_indices(path.grid, coarse)
    return SampledPath(coarse, path.values[idx])


def _norms(diff: np.ndarray) -> np.ndarray:
    if diff.shape[-1] == 1:
        return np.abs(diff[..., 0])
    return np.sqrt(np.sum(diff * diff, axis=-1))


def sup_norm(path: SampledPath) -> float:
    return float(_norms(path.values).max(initial=0.0))


def _check_exponent(r: float):
    if not (0.0 <= r <= 1.0):
        raise InvalidArgumentError(f"Hölder exponent must lie in [0, 1], got {r!r}")


def pair_seminorm(t: np.ndarray, values: np.ndarray, r: float, band: DistanceBand = FULL) -> np.ndarray:
    """Max of ``|v_i - v_j| / |t_i - t_j|^r`` over pairs with distance in ``band``.

    ``values`` has shape ``(n, d)`` or ``(B, n, d)``; the result has shape
    ``()`` or ``(B,)``. Returns 0 where no pair qualifies.
    """
    _check_exponent(r)
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    single = v.ndim == 2
    if single:
        v = v[None]
    B, n, d = v.shape
    if n < 2:
        out = np.zeros(B)
        return out[0] if single else out

    if band.kind is BandKind.FULL and r == 0.0 and d == 1:
        out = v[..., 0].max(axis=1) - v[..., 0].min(axis=1)
    elif B * n * (n - 1) // 2 * d <= _PAIR_MATRIX_LIMIT:
        out = _pair_seminorm_matrix(t, v, r, band)
    else:
        out = _pair_seminorm_lags(t, v, r, band)
    return out[0] if single else out


def _pair_seminorm_matrix(t, v, r, band):
    i, j = np.triu_indices(t.size, 1)
    gaps = t[j] - t[i]
    keep = band.contains(gaps)
    if not np.any(keep):
        return np.zeros(v.shape[0])
    i, j, gaps = i[keep], j[keep], gaps[keep]
    ratio = _norms(v[:, j, :] - v[:, i, :]) / gaps**r
    return ratio.max(axis=1)


def _pair_seminorm_lags(t, v, r, band):
    # Lag-k gaps grow with k, so once the diameter bound divided by the smallest
    # lag-k gap drops below the running best no later lag can improve it.
    B, n, _ = v.shape
    best = np.zeros(B)
    spread = v.max(axis=1) - v.min(axis=1)
    diam = _norms(spread)
    for k in range(1, n):
        gaps = t[k:] - t[:-k]
        gmin = float(gaps.min())
        if band.excludes_all_beyond(gmin):
            break
        if r > 0.0 and not np.any(diam / gmin**r > best):
            break
        keep = band.contains(gaps)
        if not np.any(keep):
            continue
        ratio = _norms(v[:, k:, :] - v[:, :-k, :]) / gaps**r
        if not np.all(keep):
            ratio = np.where(keep[None, :], ratio, 0.0)
        np.maximum(best, ratio.max(axis=1), out=best)
    return best


def holder_seminorm(path: SampledPath, r: float, band: DistanceBand = FULL, oversample: int = 4) -> float:
    """Discrete ``|f|_{C^{r,A}}`` over all pairs of ``refine(path, oversample)``."""
    _check_exponent(r)
    fine = refine(path, oversample)
    return float(pair_seminorm(fine.times, fine.values, r, band))


def holder_norm(path: SampledPath, r: float, oversample: int = 4) -> float:
    """``sup_norm + holder_seminorm`` on the refined grid."""
    _check_exponent(r)
    fine = refine(path, oversample)
    return sup_norm(fine) + float(pair_seminorm(fine.times, fine.values, r, FULL))


def batch_holder_norms(t: np.ndarray, values: np.ndarray, r: float, part: str = "norm") -> np.ndarray:
    """Per-path sup, seminorm, or norm for values of shape ``(B, n, d)``."""
    if part == "sup":
        return _norms(values).max(axis=1)
    semi = pair_seminorm(t, values, r, FULL)
    if part == "seminorm":
        return semi
    if part == "norm":
        return _norms(values).max(axis=1) + semi
    raise InvalidArgumentError(f"unknown norm part {part!r}")


# --- CSV serialisation -----------------------------------------------------


def path_to_csv(path: SampledPath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{i}" for i in range(path.dim)])
    for t, row in zip(path.times, path.values):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    return buf.getvalue()


def path_from_csv(text: str) -> SampledPath:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    if not header or header[0] != "t" or header[1:] != [f"x{i}" for i in range(len(header) - 1)]:
        raise InvalidArgumentError(f"unexpected path CSV header {header!r}")
    data = np.array([[float(x) for x in r] for r in body], dtype=float)
    return SampledPath(Partition(data[:, 0]), data[:, 1:])


def write_path_csv(path: SampledPath, file: str | Path) -> None:
    Path(file).write_text(path_to_csv(path))


def read_path_csv(file: str | Path) -> SampledPath:
    return path_from_csv(Path(file).read_text())


def random_partition(rng: np.random.Generator, n_points: int, T: float = 1.0) -> Partition:
    """A partition of [0, T] with ``n_points`` points, interior points uniform."""
    while True:
        inner = np.sort(rng.uniform(0.0, T, size=n_points - 2))
        pts = np.concatenate([[0.0], inner, [T]])
        if np.all(np.diff(pts) > 1e-9 * T):
            return Partition(pts)


def nested_subpartition(rng: np.random.Generator, grid: Partition, keep_prob: float = 0.4) -> Partition:
    """A random sub-partition of ``grid`` that keeps both endpoints."""
    mask = rng.random(grid.size) < keep_prob
    mask[0] = mask[-1] = True
    return Partition(grid.points[mask])


__all__ = [
    "BandKind",
    "DistanceBand",
    "FULL",
    "Partition",
    "SampledPath",
    "batch_holder_norms",
    "evaluate_affine",
    "holder_norm",
    "holder_seminorm",
    "interpolant_on",
    "interpolate_affine",
    "mesh_stats",
    "nested_indices",
    "pair_seminorm",
    "path_from_csv",
    "path_to_csv",
    "random_partition",
    "read_path_csv",
    "refine",
    "refine_partition",
    "refine_values",
    "restrict",
    "sup_norm",
    "uniform_partition",
    "write_path_csv",
]
