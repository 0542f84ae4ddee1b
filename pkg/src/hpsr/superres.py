"""Decoder-side coarse-to-fine reconstruction.

The base cloud is interpolated with sigma^(K), then K-1 intermediate levels
with sigma^(K-1)..sigma^(1), then sigma^(1) is reused K' more times, and the
result is scaled to the original grid. A point without a pattern is upscaled
directly: ``[p / g]`` at the base level, ``2p`` elsewhere.
"""

from __future__ import annotations

import logging
from fractions import Fraction
from typing import Callable

import numpy as np

from .geometry import NeighborSet, VoxelCloud, coordinate_classes, neighborhood_codes, scale_round
from .prior import (
    HierPrior,
    IntermediatePrior,
    LevelKPrior,
    intermediate_candidates,
    levelk_candidates,
)
from .pyramid import PyramidParams, level_bitdepths

logger = logging.getLogger(__name__)

IntermediateSource = Callable[[VoxelCloud], IntermediatePrior]


def _selected(candidates: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    """Rows of ``candidates[i, m]`` whose bit m is set in ``patterns[i]``."""
    m = np.arange(candidates.shape[1], dtype=np.int64)
    chosen = ((patterns[:, None] >> m[None, :]) & 1).astype(bool)
    return candidates[chosen]


def interpolate_base(
    VK: VoxelCloud,
    prior: LevelKPrior,
    g: Fraction,
    nbrs: NeighborSet,
    bitdepth: int | None = None,
) -> VoxelCloud:
    """Interpolate the base cloud with sigma^(K), giving V̂^(K-1)."""
    classes = coordinate_classes(VK.points, g)
    codes = neighborhood_codes(VK, nbrs)
    inverse_g = 1 / Fraction(g)

    parts = [scale_round(VK.points[classes == 0], inverse_g)]
    for c in range(1, 8):
        mask = classes == c
        if not mask.any():
            continue
        points = VK.points[mask]
        found, patterns = prior.lookup(c, codes[mask])
        parts.append(scale_round(points[~found], inverse_g))
        if found.any():
            candidates = levelk_candidates(points[found], c, g)
            parts.append(_selected(candidates, patterns[found]))

    return VoxelCloud.fitted(np.concatenate(parts), bitdepth or VK.bitdepth)


def interpolate_intermediate(
    Vk: VoxelCloud,
    prior: IntermediatePrior,
    nbrs: NeighborSet,
    bitdepth: int | None = None,
) -> VoxelCloud:
    """Interpolate one dyadic level with an intermediate prior."""
    bitdepth = bitdepth or Vk.bitdepth + 1
    if len(Vk) == 0:
        return VoxelCloud(np.empty((0, 3), dtype=np.int64), bitdepth)
    codes = neighborhood_codes(Vk, nbrs)
    found, patterns = prior.lookup(codes)

    direct = 2 * Vk.points[~found]
    children = _selected(intermediate_candidates(Vk.points[found]), patterns[found])
    children = children[np.all(children >= 0, axis=1)]
    return VoxelCloud.fitted(np.concatenate([direct, children]), bitdepth)


def extra_sr(
    V0: VoxelCloud,
    sigma1: IntermediatePrior,
    Kprime: int,
    nbrs: NeighborSet,
) -> VoxelCloud:
    """Reuse sigma^(1) for ``Kprime`` further interpolations.

    The code set of sigma^(1) stays fixed across iterations; codes outside it
    fall back to direct upscaling.
    """
    current = V0
    for _ in range(Kprime):
        current = interpolate_intermediate(current, sigma1, nbrs)
    return current


def final_upscale(V0: VoxelCloud, params: PyramidParams, bitdepth: int | None = None) -> VoxelCloud:
    """Scale to the original grid: multiply by ``2^(L+1-K-K')``."""
    shift = params.upscale_shift
    return VoxelCloud.fitted(V0.points << shift, bitdepth or V0.bitdepth + shift)


def super_resolve(
    VK: VoxelCloud,
    levelk: LevelKPrior,
    next_intermediate: IntermediateSource,
    params: PyramidParams,
    nbrsK: NeighborSet,
    nbrsI: NeighborSet,
    bitdepth: int | None = None,
) -> VoxelCloud:
    """Run the whole chain, pulling each intermediate prior on demand.

    ``next_intermediate`` receives the cloud about to be interpolated, which
    lets a stream decoder derive the cluster keys of the next prior stage.
    """
    depths = level_bitdepths(bitdepth, params) if bitdepth else [None] * (params.K + 1)
    current = interpolate_base(VK, levelk, params.g, nbrsK, bitdepth=depths[params.K - 1])
    sigma = IntermediatePrior()
    for k in range(params.K - 1, 0, -1):
        sigma = next_intermediate(current)
        current = interpolate_intermediate(current, sigma, nbrsI, bitdepth=depths[k - 1])
    current = extra_sr(current, sigma, params.Kprime, nbrsI)
    result = final_upscale(current, params, bitdepth=bitdepth)
    logger.debug("reconstructed %d points from a %d-point base", len(result), len(VK))
    return result


def decode_reconstruct(
    VK: VoxelCloud,
    prior: HierPrior,
    params: PyramidParams,
    nbrsK: NeighborSet,
    nbrsI: NeighborSet,
    bitdepth: int | None = None,
) -> VoxelCloud:
    """Reconstruct V̂ from the base cloud and a fully decoded prior."""
    stages = iter(prior.intermediates)
    return super_resolve(
        VK, prior.levelk, lambda _cloud: next(stages), params, nbrsK, nbrsI, bitdepth=bitdepth
    )


def naive_reconstruct(
    VK: VoxelCloud,
    params: PyramidParams,
    nbrsK: NeighborSet = NeighborSet.FACE_EDGE18,
    bitdepth: int | None = None,
) -> VoxelCloud:
    """Pattern-free baseline: direct upscaling at every level, no reuse."""
    empty = HierPrior(
        levelk=LevelKPrior(),
        intermediates=tuple(IntermediatePrior() for _ in range(params.K - 1)),
    )
    return decode_reconstruct(
        VK, empty, params.with_kprime(0), nbrsK, NeighborSet.FACE6, bitdepth=bitdepth
    )
