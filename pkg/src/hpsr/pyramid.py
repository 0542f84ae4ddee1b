"""Point-cloud pyramid construction and codec parameter derivation.

The pyramid is V^(0) = [V / 2^(L+1-K)], then K-1 halvings, then one final
fractional step by g = 2^L * q. All rounding is round-half-up on exact
rationals (see ``geometry``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import GeometryError, ParameterError
from .geometry import VoxelCloud, as_rational, check_factor, scale_round

logger = logging.getLogger(__name__)

DEFAULT_K_MAX = 2
DEFAULT_KPRIME_MAX = 2


@dataclass(frozen=True)
class PyramidParams:
    """Codec scale parameters derived from the quantization factor ``q``.

    Attributes:
        q: Overall downsampling factor, ``0 < q < 1``.
        L: ``ceil(log2(1/q)) - 1``.
        K: Number of pyramid steps, ``1 <= K <= L + 1``.
        Kprime: Pattern-reuse iterations, ``0 <= K' <= L + 1 - K``.
        g: Final fractional factor ``2^L * q``.
    """

    q: Fraction
    L: int
    K: int
    Kprime: int
    g: Fraction

    def __post_init__(self):
        if not 0 < self.q < 1:
            raise ParameterError("q out of range")
        if self.L != level_count(self.q):
            raise ParameterError(f"L={self.L} does not match q={self.q}")
        if not 1 <= self.K <= self.L + 1:
            raise ParameterError(f"K must be in [1, {self.L + 1}], got {self.K}")
        if not 0 <= self.Kprime <= self.L + 1 - self.K:
            raise ParameterError(
                f"K' must be in [0, {self.L + 1 - self.K}], got {self.Kprime}"
            )
        if self.K == 1 and self.Kprime != 0:
            raise ParameterError("K' requires an intermediate pattern, so K must be >= 2")
        if self.g != self.q * 2**self.L:
            raise ParameterError(f"g={self.g} is not 2^L * q")
        check_factor(self.g)

    @property
    def base_shift(self) -> int:
        """Power-of-two shift from V to V^(0): ``L + 1 - K``."""
        return self.L + 1 - self.K

    @property
    def upscale_shift(self) -> int:
        """Power-of-two exponent of the final upscale: ``L + 1 - K - K'``."""
        return self.L + 1 - self.K - self.Kprime

    def with_kprime(self, kprime: int) -> "PyramidParams":
        return PyramidParams(q=self.q, L=self.L, K=self.K, Kprime=kprime, g=self.g)


def level_count(q: Fraction) -> int:
    # Smallest t with 2^t >= 1/q, by integer comparison.
    t = 0
    while q.numerator << t < q.denominator:
        t += 1
    return t - 1


def derive_params(
    q: Fraction | str,
    K_max: int = DEFAULT_K_MAX,
    Kprime_max: int = DEFAULT_KPRIME_MAX,
) -> PyramidParams:
    """Derive (L, K, K', g) from ``q`` and the user caps.

    Args:
        q: Downsampling factor, ``0 < q < 1``.
        K_max: Upper bound on K (default 2).
        Kprime_max: Upper bound on K' (default 2).

    Returns:
        PyramidParams with ``K = min(L+1, K_max)`` and
        ``K' = min(Kprime_max, L+1-K)``. K' is 0 when K is 1, since no
        intermediate pattern exists to reuse.

    Raises:
        ParameterError: If ``q`` is not in (0, 1) or a cap is invalid.

    Examples:
        >>> p = derive_params(Fraction(3, 8))
        >>> (p.L, p.K, p.Kprime, p.g)
        (1, 2, 0, Fraction(3, 4))
    """
    q = as_rational(q)
    if not 0 < q < 1:
        raise ParameterError("q out of range")
    if K_max < 1:
        raise ParameterError(f"K_max must be >= 1, got {K_max}")
    if Kprime_max < 0:
        raise ParameterError(f"Kprime_max must be >= 0, got {Kprime_max}")
    L = level_count(q)
    K = min(L + 1, K_max)
    Kprime = min(Kprime_max, L + 1 - K) if K > 1 else 0
    return PyramidParams(q=q, L=L, K=K, Kprime=Kprime, g=q * 2**L)


def _halve_or_shrink(a: int, b: int) -> Fraction:
    if Fraction(a, b) > Fraction(1, 2):
        return Fraction(a - 1, b)
    return Fraction(a, b) / 2


def map_s_to_q(s: Fraction | str) -> Fraction:
    """Map an MPEG geometry scale ``s`` to the codec's ``q = f(f(s))``.

    ``f(a/b) = (a-1)/b`` when ``a/b > 1/2`` (coprime form), else ``a/(2b)``.

    Examples:
        >>> map_s_to_q(Fraction(3, 4))
        Fraction(1, 4)
        >>> map_s_to_q(Fraction(7, 8))
        Fraction(1, 2)

    Raises:
        ParameterError: If ``s`` is outside (0, 1] or maps to a non-positive q
            (s = 1).
    """
    s = as_rational(s)
    if not 0 < s <= 1:
        raise ParameterError(f"s must be in (0, 1], got {s}")
    once = _halve_or_shrink(s.numerator, s.denominator)
    q = _halve_or_shrink(once.numerator, once.denominator)
    if q <= 0:
        raise ParameterError(f"s={s} maps to q={q}, which is not a positive scale")
    return q


@dataclass(frozen=True)
class Pyramid:
    """The clouds ``[V^(0), ..., V^(K)]`` and the parameters that built them."""

    levels: tuple[VoxelCloud, ...]
    params: PyramidParams

    @property
    def base(self) -> VoxelCloud:
        return self.levels[-1]

    def __getitem__(self, k: int) -> VoxelCloud:
        return self.levels[k]


def build_pyramid(cloud: VoxelCloud, params: PyramidParams) -> Pyramid:
    """Successively downsample ``cloud`` into the pyramid of ``params``.

    Raises:
        GeometryError: If the cloud is empty or too shallow for the pyramid.
    """
    if len(cloud) == 0:
        raise GeometryError("empty cloud")
    if cloud.bitdepth <= params.base_shift:
        raise GeometryError(
            f"bitdepth {cloud.bitdepth} too small for a {params.base_shift}-bit base shift"
        )

    depth = cloud.bitdepth - params.base_shift
    level0 = scale_round(cloud.points, Fraction(1, 2**params.base_shift))
    levels = [VoxelCloud.fitted(level0, depth)]
    for _ in range(1, params.K):
        depth = max(1, depth - 1)
        halved = scale_round(levels[-1].points, Fraction(1, 2))
        levels.append(VoxelCloud.fitted(halved, depth))
    # The fractional step keeps the power-of-two grid bound.
    scaled = scale_round(levels[-1].points, params.g)
    levels.append(VoxelCloud.fitted(scaled, levels[-1].bitdepth))

    logger.debug(
        "pyramid sizes %s for q=%s", [len(level) for level in levels], params.q
    )
    return Pyramid(levels=tuple(levels), params=params)


def level_bitdepths(bitdepth: int, params: PyramidParams) -> list[int]:
    """Bookkept bitdepths of V^(0)..V^(K) for an input at ``bitdepth``."""
    depths = [max(1, bitdepth - params.base_shift)]
    for _ in range(1, params.K):
        depths.append(max(1, depths[-1] - 1))
    depths.append(depths[-1])
    return depths


def surjective(coarse: VoxelCloud, fine: VoxelCloud, factor: Fraction) -> bool:
    """Every voxel of ``coarse`` is the image of some voxel of ``fine``."""
    images = VoxelCloud.fitted(scale_round(fine.points, factor), coarse.bitdepth)
    return bool(np.all(images.contains(coarse.points)))
