"""Geometry distortion and rate metrics.

D1 (point-to-point) and D2 (point-to-plane) follow the pc_error convention:
each direction's MSE is averaged over the source points, the symmetric value
is the larger of the two directions, and PSNR uses the peak energy
``3 * (2^b - 1)^2``. Nearest neighbors come from an exact k-d tree search.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .container import BitAllocation
from .errors import MetricError
from .geometry import VoxelCloud

logger = logging.getLogger(__name__)

DEFAULT_NORMAL_K = 12
_RANK_TOLERANCE = 1e-9
_SIGN_EPS = 1e-12

PointsLike = VoxelCloud | np.ndarray


@dataclass(frozen=True)
class RdPoint:
    """One rate-distortion sample.

    ``d2_psnr`` is NaN when D2 was not evaluated.
    """

    bpp: float
    d1_psnr: float
    d2_psnr: float = math.nan
    base_bits: int = 0
    prior_bits: int = 0
    header_bits: int = 0
    rate_id: str = ""


@dataclass(frozen=True, eq=False)
class NormalField:
    """Unit normals, one row per point of the cloud they were computed for.

    Attributes:
        normals: ``(N, 3)`` float64 array.
        degenerate: Number of points whose neighborhood had rank < 2 and
            received the fallback normal (0, 0, 1).
    """

    normals: np.ndarray
    degenerate: int = 0

    def __len__(self) -> int:
        return int(self.normals.shape[0])


def _positions(cloud: PointsLike) -> np.ndarray:
    if isinstance(cloud, VoxelCloud):
        points = cloud.points
    else:
        points = np.asarray(cloud)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        raise MetricError("empty cloud")
    return points


def _nearest(source: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Error vectors from each source point to its nearest reference point, and the indices."""
    _dist, idx = cKDTree(reference).query(source, k=1)
    return reference[idx] - source, idx


def _normal_array(field: NormalField | np.ndarray | None, n: int, side: str) -> np.ndarray:
    if field is None:
        raise MetricError(
            f"D2 needs normals for the {side} cloud; read them from the PLY or call estimate_normals"
        )
    normals = field.normals if isinstance(field, NormalField) else np.asarray(field, dtype=np.float64)
    normals = normals.reshape(-1, 3)
    if normals.shape[0] != n:
        raise MetricError(f"{normals.shape[0]} normals for a {side} cloud of {n} points")
    return normals


def point_to_point_mse(source: PointsLike, reference: PointsLike) -> float:
    """One-directional D1: mean squared distance from ``source`` to ``reference``."""
    src, ref = _positions(source), _positions(reference)
    errors, _idx = _nearest(src, ref)
    return float(np.mean(np.sum(errors * errors, axis=1)))


def point_to_plane_mse(
    source: PointsLike,
    reference: PointsLike,
    reference_normals: NormalField | np.ndarray | None,
) -> float:
    """One-directional D2: error vectors projected on the matched reference normal."""
    src, ref = _positions(source), _positions(reference)
    normals = _normal_array(reference_normals, ref.shape[0], "reference")
    errors, idx = _nearest(src, ref)
    projected = np.sum(errors * normals[idx], axis=1)
    return float(np.mean(projected * projected))


def d1_mse(A: PointsLike, B: PointsLike) -> float:
    """Symmetric point-to-point MSE, ``max(mse(A->B), mse(B->A))``.

    Raises:
        MetricError: If either cloud is empty.

    Examples:
        >>> d1_mse(np.array([[0, 0, 0]]), np.array([[0, 0, 0], [3, 0, 0]]))
        4.5
    """
    return max(point_to_point_mse(A, B), point_to_point_mse(B, A))


def d2_mse(
    A: PointsLike,
    B: PointsLike,
    normals_a: NormalField | np.ndarray | None,
    normals_b: NormalField | np.ndarray | None,
) -> float:
    """Symmetric point-to-plane MSE; A->B uses the normals of B and vice versa.

    Raises:
        MetricError: If a cloud is empty or its normals are missing.
    """
    return max(point_to_plane_mse(A, B, normals_b), point_to_plane_mse(B, A, normals_a))


def _fix_signs(normals: np.ndarray) -> np.ndarray:
    # Orient towards +z; fall back to +y, then +x, when a component vanishes.
    signs = np.ones(normals.shape[0])
    undecided = np.ones(normals.shape[0], dtype=bool)
    for axis in (2, 1, 0):
        component = normals[:, axis]
        decided = undecided & (np.abs(component) > _SIGN_EPS)
        signs[decided] = np.sign(component[decided])
        undecided &= ~decided
    return normals * signs[:, None]


def estimate_normals(C: PointsLike, k: int = DEFAULT_NORMAL_K) -> NormalField:
    """PCA normals over each point and its ``k`` nearest neighbors.

    The normal is the eigenvector of the smallest covariance eigenvalue,
    oriented to positive z (ties: positive y, then positive x).
    Neighborhoods of rank < 2 get (0, 0, 1) and are counted in
    ``NormalField.degenerate``.

    Raises:
        MetricError: Unless ``|C| > k >= 3``.
    """
    points = _positions(C)
    if k < 3 or points.shape[0] <= k:
        raise MetricError(f"normal estimation needs |C| > k >= 3, got |C|={points.shape[0]}, k={k}")

    _dist, idx = cKDTree(points).query(points, k=k + 1)
    neighborhoods = points[idx]
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    covariance = np.einsum("nki,nkj->nij", centered, centered) / (k + 1)
    values, vectors = np.linalg.eigh(covariance)

    normals = vectors[:, :, 0]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    normals = _fix_signs(normals)

    scale = values[:, 2]
    degenerate = (scale <= 0) | (values[:, 1] <= _RANK_TOLERANCE * scale)
    normals[degenerate] = (0.0, 0.0, 1.0)
    count = int(degenerate.sum())
    if count:
        logger.warning("%d of %d points have a degenerate neighborhood; normal set to (0,0,1)",
                       count, points.shape[0])
    return NormalField(normals=normals, degenerate=count)


def psnr(mse: float, bitdepth: int) -> float:
    """Geometry PSNR in dB with peak energy ``3 * (2^bitdepth - 1)^2``.

    Examples:
        >>> round(psnr(1.0, 10), 2)
        64.97
        >>> psnr(0.0, 10)
        inf
    """
    if mse < 0:
        raise MetricError(f"mse must be non-negative, got {mse}")
    if mse == 0:
        return math.inf
    peak = 3 * ((1 << bitdepth) - 1) ** 2
    return 10 * math.log10(peak / mse)


def _curve(points: Iterable[RdPoint], which: str, label: str) -> tuple[np.ndarray, np.ndarray]:
    attr = {"d1": "d1_psnr", "d2": "d2_psnr"}.get(which.lower())
    if attr is None:
        raise MetricError(f"bd_rate metric must be 'd1' or 'd2', got {which!r}")
    points = list(points)
    kept = [p for p in points if math.isfinite(getattr(p, attr)) and p.bpp > 0]
    if len(kept) < len(points):
        logger.warning("%s curve: dropped %d points with non-finite %s", label,
                       len(points) - len(kept), attr)
    if len(kept) < 4:
        raise MetricError(f"{label} curve needs at least 4 finite RD points, got {len(kept)}")
    kept.sort(key=lambda p: p.bpp)
    rate = np.array([p.bpp for p in kept], dtype=np.float64)
    if np.any(np.diff(rate) <= 0):
        raise MetricError(f"{label} curve is not strictly increasing in rate")
    quality = np.array([getattr(p, attr) for p in kept], dtype=np.float64)
    return quality, np.log10(rate)


def bd_rate(anchor: Sequence[RdPoint], test: Sequence[RdPoint], which: str = "d1") -> float:
    """Bjontegaard-delta rate of ``test`` against ``anchor``, in percent.

    Each curve's log10(bpp) is fitted as a cubic in PSNR; the fits are
    integrated over the overlapping PSNR interval and the mean log-rate gap
    ``g`` is reported as ``100 * (10^g - 1)``. Negative means ``test`` needs
    less rate for the same quality.

    Raises:
        MetricError: On fewer than 4 usable points, non-increasing rates or
            disjoint PSNR ranges ("no overlap").
    """
    qa, ra = _curve(anchor, which, "anchor")
    qb, rb = _curve(test, which, "test")
    lo = max(qa.min(), qb.min())
    hi = min(qa.max(), qb.max())
    if hi <= lo:
        raise MetricError("no overlap")

    fit_a = np.polyint(np.polyfit(qa, ra, 3))
    fit_b = np.polyint(np.polyfit(qb, rb, 3))
    area_a = np.polyval(fit_a, hi) - np.polyval(fit_a, lo)
    area_b = np.polyval(fit_b, hi) - np.polyval(fit_b, lo)
    gap = (area_b - area_a) / (hi - lo)
    return float(100 * (10**gap - 1))


def evaluate(
    reference: PointsLike,
    test: PointsLike,
    bitdepth: int,
    *,
    reference_normals: NormalField | np.ndarray | None = None,
    test_normals: NormalField | np.ndarray | None = None,
    with_d2: bool = False,
    allocation: BitAllocation | None = None,
    n_points: int | None = None,
    rate_id: str = "",
) -> RdPoint:
    """D1/D2 PSNR of ``test`` against ``reference`` plus rate bookkeeping.

    Args:
        reference: Original cloud.
        test: Reconstructed cloud.
        bitdepth: Grid precision for the PSNR peak.
        reference_normals: Normals of ``reference`` (for D2).
        test_normals: Normals of ``test`` (for D2).
        with_d2: Compute D2; both normal fields must then be given.
        allocation: Bits spent on the stream that produced ``test``.
        n_points: Point count the rate is normalized by (default
            ``len(reference)``).
        rate_id: Label carried into the RdPoint.
    """
    d1 = psnr(d1_mse(reference, test), bitdepth)
    d2 = math.nan
    if with_d2:
        d2 = psnr(d2_mse(reference, test, reference_normals, test_normals), bitdepth)

    if allocation is None:
        return RdPoint(bpp=0.0, d1_psnr=d1, d2_psnr=d2, rate_id=rate_id)
    if n_points is None:
        n_points = _positions(reference).shape[0]
    return RdPoint(
        bpp=allocation.bpp(n_points),
        d1_psnr=d1,
        d2_psnr=d2,
        base_bits=allocation.base_bits,
        prior_bits=allocation.prior_bits,
        header_bits=allocation.header_bits,
        rate_id=rate_id,
    )
