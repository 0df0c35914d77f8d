"""Counter-based, label-addressed random streams.

A stream is identified by a master seed and a path of ``(tag, index)``
labels. The label path is hashed (BLAKE2b) into a Philox-4x64 key; position
``k`` of the stream is the ``k``-th 64-bit word of Philox under that key.
Every draw is therefore addressable by (labels, position), independent of
call order, chunking or thread count.

Uniforms use the top 53 bits, ``(w >> 11 + 0.5) / 2^53``, so they lie in
the open interval (0, 1). Normals are the Wichura AS241 (PPND16) inverse CDF
of those uniforms.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.random import Philox

_MASK64 = (1 << 64) - 1

# AS241 PPND16 coefficients
_A = (
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
)
_B = (
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
)
_D = (
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
)
_F = (
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _horner(coeffs, x):
    acc = np.full_like(x, coeffs[-1])
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def inverse_normal_cdf(u) -> np.ndarray:
    """Wichura's AS241 (PPND16) approximation of Φ^{-1}; about 1e-16 relative."""
    u = np.asarray(u, dtype=float)
    q = u - 0.5
    out = np.empty_like(u)
    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.where(qt < 0, u[tail], 1.0 - u[tail])
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tail] = np.where(qt < 0, -val, val)
    return out


def _encode(master_seed: int, labels: tuple[tuple[str, int], ...]) -> bytes:
    parts = [b"holderlab-stream", struct.pack("<Q", master_seed & _MASK64)]
    for tag, index in labels:
        raw = tag.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<Q", int(index) & _MASK64))
    return b"".join(parts)


@dataclass(frozen=True)
class RngStream:
    """An addressable random stream; a value type, safe to share across threads."""

    master_seed: int
    label_path: tuple[tuple[str, int], ...] = ()

    def child(self, tag: str, index: int = 0) -> "RngStream":
        return RngStream(self.master_seed, self.label_path + ((str(tag), int(index)),))

    @cached_property
    def key(self) -> tuple[int, int]:
        digest = hashlib.blake2b(_encode(self.master_seed, self.label_path), digest_size=16).digest()
        return struct.unpack("<QQ", digest)

    def raw(self, n: int, offset: int = 0) -> np.ndarray:
        """64-bit words at positions ``offset .. offset + n - 1``."""
        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        block, skip = divmod(int(offset), 4)
        bitgen = Philox(key=np.array(self.key, dtype=np.uint64), counter=[block, 0, 0, 0])
        return bitgen.random_raw(n + skip)[skip:]

    def uniforms(self, n: int, offset: int = 0) -> np.ndarray:
        words = self.raw(n, offset)
        return ((words >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53

    def normals(self, n: int, offset: int = 0) -> np.ndarray:
        return inverse_normal_cdf(self.uniforms(n, offset))

    def normal_block(self, rows: int, stride: int, first_row: int = 0) -> np.ndarray:
        """Rows ``first_row .. first_row + rows - 1`` of the stream laid out with
        ``stride`` normals per row. Row ``k`` is the same however it is fetched."""
        flat = self.normals(rows * stride, offset=first_row * stride)
        return flat.reshape(rows, stride)

    def rademacher(self, n: int, offset: int = 0) -> np.ndarray:
        words = self.raw(n, offset)
        return np.where((words >> np.uint64(63)) == 1, 1.0, -1.0)


def derive_stream(master_seed: int, tag: str, index: int = 0) -> RngStream:
    return RngStream(int(master_seed)).child(tag, index)


def root_stream(master_seed: int) -> RngStream:
    return RngStream(int(master_seed))
