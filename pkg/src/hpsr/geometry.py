"""Integer voxel-grid primitives shared by the encoder and the decoder.

Everything here works on exact integers: scale factors are ``Fraction``
values and rounding is round-half-up, ``[x] = floor(x + 1/2)``, evaluated
as ``(2p + q) // (2q)`` for ``x = p/q``. No float ever touches a coordinate.
"""

from __future__ import annotations

import logging
from enum import Enum
from fractions import Fraction
from itertools import product

import numpy as np

from .errors import GeometryError, ParameterError

logger = logging.getLogger(__name__)

MAX_BITDEPTH = 21
_AXIS_BITS = 21
_AXIS_LIMIT = 1 << _AXIS_BITS
_AXIS_MASK = _AXIS_LIMIT - 1


def as_rational(value: Fraction | int | str) -> Fraction:
    """Convert an exact rational spelling ("3/8", 3, Fraction) to a Fraction.

    Floats are refused.
    """
    if isinstance(value, float):
        raise ParameterError(f"scale factors must be exact rationals, got float {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ParameterError(f"not a rational number: {value!r}") from exc


def round_half_up(x: Fraction | int) -> int:
    """Round a non-negative rational to the nearest integer, ties upward.

    Args:
        x: Non-negative exact rational.

    Returns:
        ``floor(x + 1/2)``.

    Raises:
        GeometryError: If ``x`` is negative.

    Examples:
        >>> round_half_up(Fraction(7, 2))
        4
        >>> round_half_up(Fraction(5, 4))
        1
    """
    x = Fraction(x)
    if x < 0:
        raise GeometryError("negative coordinate")
    return (2 * x.numerator + x.denominator) // (2 * x.denominator)


def scale_round(coords: np.ndarray, factor: Fraction) -> np.ndarray:
    """Elementwise ``round_half_up(coords * factor)`` on an int64 array."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.size and coords.min() < 0:
        raise GeometryError("negative coordinate")
    a, b = factor.numerator, factor.denominator
    return (2 * coords * a + b) // (2 * b)


def pack_keys(points: np.ndarray) -> np.ndarray:
    """Pack (x, y, z) rows into int64 keys; key order is lexicographic order."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    return (points[:, 0] << (2 * _AXIS_BITS)) | (points[:, 1] << _AXIS_BITS) | points[:, 2]


def unpack_keys(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    out = np.empty((keys.size, 3), dtype=np.int64)
    out[:, 0] = keys >> (2 * _AXIS_BITS)
    out[:, 1] = (keys >> _AXIS_BITS) & _AXIS_MASK
    out[:, 2] = keys & _AXIS_MASK
    return out


def _required_bitdepth(points: np.ndarray) -> int:
    if points.size == 0:
        return 1
    return max(1, int(points.max()).bit_length())


class VoxelCloud:
    """A deduplicated set of non-negative voxels on a ``2**bitdepth`` grid.

    Points are stored as an ``(N, 3)`` int64 array in canonical order
    (ascending x, then y, then z). Two clouds compare equal when they hold
    the same voxels; ``bitdepth`` is bookkeeping and does not take part.
    """

    __slots__ = ("points", "bitdepth", "_keys")

    def __init__(self, points: np.ndarray, bitdepth: int):
        points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        if not 1 <= bitdepth <= MAX_BITDEPTH:
            raise GeometryError(f"bitdepth must be in [1, {MAX_BITDEPTH}], got {bitdepth}")
        if points.size:
            if points.min() < 0:
                raise GeometryError("negative coordinate")
            if points.max() >= (1 << bitdepth):
                raise GeometryError(
                    f"coordinate {int(points.max())} outside the 2^{bitdepth} grid"
                )
        keys = np.unique(pack_keys(points))
        self._keys = keys
        self.points = unpack_keys(keys)
        self.points.flags.writeable = False
        self.bitdepth = int(bitdepth)

    @classmethod
    def fitted(cls, points: np.ndarray, bitdepth: int = 1) -> "VoxelCloud":
        """Build a cloud, raising ``bitdepth`` if a coordinate needs more bits."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        depth = max(int(bitdepth), _required_bitdepth(points))
        if depth > MAX_BITDEPTH:
            raise GeometryError(f"coordinates exceed the {MAX_BITDEPTH}-bit grid")
        return cls(points, depth)

    @property
    def keys(self) -> np.ndarray:
        """Sorted packed keys of the points."""
        return self._keys

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership mask for arbitrary (possibly off-grid) rows."""
        points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        inside = np.all((points >= 0) & (points < _AXIS_LIMIT), axis=1)
        found = np.zeros(points.shape[0], dtype=bool)
        if not inside.any() or self._keys.size == 0:
            return found
        probe = pack_keys(points[inside])
        pos = np.searchsorted(self._keys, probe)
        pos_clipped = np.minimum(pos, self._keys.size - 1)
        found[inside] = self._keys[pos_clipped] == probe
        return found

    def __len__(self) -> int:
        return int(self._keys.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoxelCloud):
            return NotImplemented
        return np.array_equal(self._keys, other._keys)

    __hash__ = None

    def __repr__(self) -> str:
        return f"VoxelCloud(n={len(self)}, bitdepth={self.bitdepth})"


def _build_offsets(max_nonzero: int) -> np.ndarray:
    offsets = []
    for dz, dy, dx in product((-1, 0, 1), repeat=3):
        nonzero = (dx != 0) + (dy != 0) + (dz != 0)
        if 0 < nonzero <= max_nonzero:
            offsets.append((dx, dy, dz))
    array = np.array(offsets, dtype=np.int64)
    array.flags.writeable = False
    return array


class NeighborSet(Enum):
    """Ordered voxel neighborhoods; the value is the neighbor count.

    Offsets are ordered ascending by (dz, dy, dx). The order is part of the
    stream format: the neighborhood code of a voxel depends on it.
    """

    FACE6 = 6
    FACE_EDGE18 = 18
    FULL26 = 26

    @property
    def offsets(self) -> np.ndarray:
        return _OFFSETS[self]

    @classmethod
    def from_size(cls, size: int) -> "NeighborSet":
        try:
            return cls(int(size))
        except ValueError as exc:
            raise ParameterError(f"neighbor set must be 6, 18 or 26, got {size!r}") from exc


_OFFSETS = {
    NeighborSet.FACE6: _build_offsets(1),
    NeighborSet.FACE_EDGE18: _build_offsets(2),
    NeighborSet.FULL26: _build_offsets(3),
}


def neighborhood_codes(
    cloud: VoxelCloud,
    nbrs: NeighborSet,
    points: np.ndarray | None = None,
) -> np.ndarray:
    """Neighborhood code ``r`` of every point (all of ``cloud`` by default).

    Bit ``n`` of ``r`` is set when ``point + offsets[n]`` is occupied in
    ``cloud``. Offsets falling off the grid count as void.
    """
    if points is None:
        points = cloud.points
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    codes = np.zeros(points.shape[0], dtype=np.int64)
    for n, offset in enumerate(nbrs.offsets):
        codes |= cloud.contains(points + offset).astype(np.int64) << n
    return codes


def phi(p: tuple[int, int, int], cloud: VoxelCloud, nbrs: NeighborSet) -> int:
    """Neighborhood code of a single voxel.

    Examples:
        >>> cloud = VoxelCloud([(1, 1, 1), (1, 0, 1)], bitdepth=2)
        >>> phi((1, 1, 1), cloud, NeighborSet.FACE6)
        2
    """
    return int(neighborhood_codes(cloud, nbrs, np.array([p]))[0])


def check_factor(g: Fraction) -> Fraction:
    """Validate a fractional downsampling factor, ``1/2 <= g <= 1``."""
    g = Fraction(g)
    if not Fraction(1, 2) <= g <= 1:
        raise GeometryError("invalid fractional factor")
    return g


def preimage_bounds(X: np.ndarray, g: Fraction) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``preimage_interval``: inclusive ``(lo, hi)`` arrays."""
    g = check_factor(g)
    X = np.asarray(X, dtype=np.int64)
    if X.size and X.min() < 0:
        raise GeometryError("negative coordinate")
    a, b = g.numerator, g.denominator
    # round(x*g) == X  <=>  (2X-1)*b <= 2*x*a < (2X+1)*b
    lo = -((-(2 * X - 1) * b) // (2 * a))
    hi = -((-(2 * X + 1) * b) // (2 * a)) - 1
    return np.maximum(lo, 0), hi


def preimage_interval(X: int, g: Fraction) -> tuple[int, int]:
    """All ``x >= 0`` with ``round_half_up(x * g) == X``, as ``(lo, hi)``.

    Examples:
        >>> preimage_interval(2, Fraction(3, 4))
        (2, 3)
        >>> preimage_interval(1, Fraction(1, 2))
        (1, 2)
    """
    lo, hi = preimage_bounds(np.array([X]), g)
    return int(lo[0]), int(hi[0])


def coordinate_classes(points: np.ndarray, g: Fraction) -> np.ndarray:
    """Coordinate class of every point: bit a is set when axis a has two preimages."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    lo, hi = preimage_bounds(points, g)
    wide = (hi > lo).astype(np.int64)
    return wide[:, 0] | (wide[:, 1] << 1) | (wide[:, 2] << 2)


def coord_class(p: tuple[int, int, int], g: Fraction) -> int:
    return int(coordinate_classes(np.array([p]), g)[0])


def class_size(c: int) -> int:
    """Number of candidate preimages ``M_c`` of class ``c``."""
    return 1 << int(c).bit_count()
