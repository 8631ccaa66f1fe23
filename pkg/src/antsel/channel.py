"""Complex Gaussian channel draws and projection-height geometry.

Channel matrices are N_R x N_T arrays of i.i.d. circularly symmetric
complex Gaussian path gains with unit variance (real and imaginary parts
each N(0, 1/2)).

Distribution convention used across the whole package: "chi-square with
2n degrees of freedom" always means the law of the squared norm of an
n-dimensional unit-variance complex Gaussian vector, i.e. Gamma(shape n,
scale 1), the sum of n unit-mean exponentials.  ``analytic.chi2n_cdf``
implements exactly this law; every closed form here relies on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

# Smallest-to-largest singular value ratio below which a matrix is treated
# as rank deficient.  Under the continuous channel model this is a
# probability-zero event; raising beats returning garbage.
RANK_RATIO_TOL = 1e-12


class SingularMatrixError(ValueError):
    """A matrix required to have full column rank does not."""


def stream_generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for sub-stream ``stream`` of ``seed``.

    Distinct (seed, stream) pairs select independent Philox streams, so
    work split across streams reproduces bit-for-bit regardless of
    evaluation order or worker count.
    """
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Array of unit-variance circularly symmetric complex Gaussians."""
    z = rng.standard_normal(size=tuple(shape) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def as_channel_matrix(matrix) -> np.ndarray:
    """Validate and return ``matrix`` as a 2-D complex128 array.

    Raises ValueError for empty or non-2-D input and for non-finite
    entries.
    """
    H = np.asarray(matrix, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ValueError(f"channel matrix must be 2-D and non-empty, got shape {H.shape}")
    if not np.all(np.isfinite(H.real)) or not np.all(np.isfinite(H.imag)):
        raise ValueError("channel matrix contains non-finite entries")
    return H


@dataclass(frozen=True)
class ChannelSample:
    """One channel draw plus the RNG coordinates that produced it.

    Regenerating with the same (seed, draw_index) and dimensions yields
    bit-identical entries.
    """

    matrix: np.ndarray
    seed: int
    draw_index: int


def sample_channel(n_r: int, n_t: int, seed: int, draw_index: int) -> ChannelSample:
    """Draw one N_R x N_T channel matrix with i.i.d. CN(0, 1) entries."""
    if n_r < 1 or n_t < 1:
        raise ValueError(f"channel dimensions must be positive, got n_r={n_r}, n_t={n_t}")
    rng = stream_generator(seed, draw_index)
    matrix = complex_gaussian(rng, (n_r, n_t))
    return ChannelSample(matrix=matrix, seed=int(seed), draw_index=int(draw_index))


@dataclass(frozen=True)
class ProjectionReport:
    """Squared residual of a column against a span, with norm and angle.

    ``height_sq`` is the squared norm of the column minus its orthogonal
    projection onto the span; ``angle`` satisfies
    height_sq = norm_sq * sin(angle)^2.
    """

    height_sq: float
    norm_sq: float
    angle: float


def projection_height_sq(H, k: int, span_cols: Iterable[int]) -> ProjectionReport:
    """Squared projection height of column ``k`` of ``H`` onto the
    orthogonal complement of span{H[:, j] : j in span_cols}.

    An empty ``span_cols`` gives the squared column norm and angle pi/2.
    Heights are computed by Householder orthogonalization of the span
    columns; ``gram_inverse_diag`` offers the inverse-Gram route as an
    independent cross-check.
    """
    H = as_channel_matrix(H)
    n_r, n_t = H.shape
    k = int(k)
    cols = sorted({int(j) for j in span_cols})
    if not 0 <= k < n_t:
        raise ValueError(f"column index {k} out of range for {n_t} columns")
    if any(not 0 <= j < n_t for j in cols):
        raise ValueError(f"span column indices {cols} out of range for {n_t} columns")
    if k in cols:
        raise ValueError(f"column {k} cannot be a member of its own span set")
    if len(cols) >= n_r:
        raise ValueError(f"span of {len(cols)} columns is not a proper subspace of dimension {n_r}")

    h = H[:, k]
    norm_sq = float(np.real(np.vdot(h, h)))
    if not cols:
        return ProjectionReport(height_sq=norm_sq, norm_sq=norm_sq, angle=float(np.pi / 2))

    q, r = np.linalg.qr(H[:, cols])
    # Drop directions of numerically dependent span columns so the
    # projector matches the true column space.
    diag = np.abs(np.diagonal(r))
    keep = diag > RANK_RATIO_TOL * max(diag.max(), 1.0)
    q = q[:, keep]
    resid = h - q @ (q.conj().T @ h)
    height_sq = float(np.real(np.vdot(resid, resid)))
    if norm_sq > 0.0:
        ratio = min(1.0, max(0.0, height_sq / norm_sq))
        angle = float(np.arcsin(np.sqrt(ratio)))
    else:
        angle = 0.0
    return ProjectionReport(height_sq=height_sq, norm_sq=norm_sq, angle=angle)


def require_full_column_rank(H_s: np.ndarray) -> None:
    """Raise SingularMatrixError unless ``H_s`` has full column rank."""
    sv = np.linalg.svd(H_s, compute_uv=False)
    if H_s.shape[0] < H_s.shape[1] or sv[-1] <= RANK_RATIO_TOL * sv[0]:
        raise SingularMatrixError(
            f"matrix of shape {H_s.shape} is rank deficient "
            f"(singular value ratio {sv[-1] / sv[0] if sv[0] else 0.0:.3e})"
        )


def gram_inverse_diag(H_s) -> np.ndarray:
    """Diagonal of (H_s^H H_s)^-1 for a full-column-rank matrix.

    The reciprocal of entry k equals the squared projection height of
    column k against all other columns; used as the cross-check route for
    the pseudo-inverse based equalizer.
    """
    H_s = as_channel_matrix(H_s)
    require_full_column_rank(H_s)
    gram = H_s.conj().T @ H_s
    return np.real(np.diagonal(np.linalg.inv(gram))).copy()


def qr_factorize(H_s) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization with real non-negative diagonal of R."""
    H_s = as_channel_matrix(H_s)
    require_full_column_rank(H_s)
    q, r = np.linalg.qr(H_s)
    d = np.diagonal(r).copy()
    phase = np.where(np.abs(d) > 0, d / np.abs(d), 1.0)
    q = q * phase[None, :]
    r = np.conj(phase)[:, None] * r
    idx = np.arange(r.shape[0])
    r[idx, idx] = np.abs(d)
    return q, r
