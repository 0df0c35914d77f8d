"""Hölder-norm error analysis for interpolation, SDE and SEE approximations,
and multilevel Monte Carlo in path space."""

from .errors import (
    ConfigError,
    ContractViolation,
    CouplingError,
    DomainError,
    HolderlabError,
    InvalidArgumentError,
    OutOfRangeError,
    SeriesTruncationError,
    UnsupportedProblemError,
)
from .grid_paths import (
    FULL,
    DistanceBand,
    Partition,
    SampledPath,
    holder_norm,
    holder_seminorm,
    interpolant_on,
    interpolate_affine,
    refine,
    restrict,
    uniform_partition,
)
from .rng import RngStream, derive_stream, root_stream
from .special import brownian_ratio_f, gamma, gaussian_abs_moment, script_e

__version__ = "0.1.0"
