"""Encoder-side construction of the hierarchical prior.

Points of the coarse cloud are clustered by coordinate class (level K only)
and neighborhood code. For every cluster the occupancy frequency of each
candidate child in the finer cloud is counted, and a child becomes part of
the cluster's interpolation pattern when at least half of the cluster has it.

Intermediate levels are built in a closed loop: clusters come from the
reconstruction the decoder will also have, never from the original level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ParameterError
from .geometry import (
    NeighborSet,
    VoxelCloud,
    class_size,
    coordinate_classes,
    neighborhood_codes,
    preimage_bounds,
)
from .pyramid import Pyramid

logger = logging.getLogger(__name__)

Pattern = int

# (bx, by, bz) for child index m = bx + 2*by + 4*bz
_CHILD_BITS = np.array(
    [((m >> 0) & 1, (m >> 1) & 1, (m >> 2) & 1) for m in range(8)], dtype=np.int64
)


def _sorted_table(table: dict[int, int]) -> dict[int, int]:
    return {int(r): int(table[r]) for r in sorted(table)}


def _lookup(keys: np.ndarray, values: np.ndarray, query: np.ndarray):
    if keys.size == 0:
        return np.zeros(query.shape, dtype=bool), np.zeros(query.shape, dtype=np.int64)
    pos = np.minimum(np.searchsorted(keys, query), keys.size - 1)
    found = keys[pos] == query
    return found, np.where(found, values[pos], 0)


@dataclass(frozen=True)
class IntermediatePrior:
    """Patterns ``sigma_r`` of one intermediate level, keyed by ascending code r."""

    table: dict[int, Pattern] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "table", _sorted_table(self.table))

    def __len__(self) -> int:
        return len(self.table)

    def lookup(self, codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(found mask, pattern) for every code; unseen codes give pattern 0."""
        keys = np.fromiter(self.table.keys(), dtype=np.int64, count=len(self.table))
        values = np.fromiter(self.table.values(), dtype=np.int64, count=len(self.table))
        return _lookup(keys, values, np.asarray(codes, dtype=np.int64))


@dataclass(frozen=True)
class LevelKPrior:
    """Patterns ``sigma_{c,r}`` of the base level for classes c = 1..7."""

    tables: dict[int, dict[int, Pattern]] = field(default_factory=dict)

    def __post_init__(self):
        if any(not 1 <= c <= 7 for c in self.tables):
            raise ParameterError("level-K classes must be in 1..7")
        tables = {c: _sorted_table(self.tables.get(c, {})) for c in range(1, 8)}
        object.__setattr__(self, "tables", tables)

    def __len__(self) -> int:
        return sum(len(table) for table in self.tables.values())

    def lookup(self, c: int, codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        table = self.tables[c]
        keys = np.fromiter(table.keys(), dtype=np.int64, count=len(table))
        values = np.fromiter(table.values(), dtype=np.int64, count=len(table))
        return _lookup(keys, values, np.asarray(codes, dtype=np.int64))


@dataclass(frozen=True)
class HierPrior:
    """The transmitted side information: sigma^(K), then sigma^(K-1)..sigma^(1)."""

    levelk: LevelKPrior
    intermediates: tuple[IntermediatePrior, ...] = ()

    def payload_bits(self) -> int:
        """Pattern bits before padding or entropy coding."""
        bits = sum(len(self.levelk.tables[c]) * class_size(c) for c in range(1, 8))
        return bits + 8 * sum(len(level) for level in self.intermediates)


@dataclass
class FreqAccumulator:
    """Occurrence counts ``p_m`` of the candidates of one cluster of ``n`` points."""

    counts: list[int]
    size: int = 0

    @classmethod
    def for_candidates(cls, m: int) -> "FreqAccumulator":
        return cls(counts=[0] * m)

    def add(self, present: np.ndarray) -> None:
        for m, hit in enumerate(present):
            self.counts[m] += int(bool(hit))
        self.size += 1

    @property
    def frequencies(self) -> list[Fraction]:
        return [Fraction(count, self.size) for count in self.counts]

    def pattern(self) -> Pattern:
        # f_m >= 1/2  <=>  2 * p_m >= n
        return sum(1 << m for m, count in enumerate(self.counts) if 2 * count >= self.size)


def levelk_candidates(points: np.ndarray, c: int, g: Fraction) -> np.ndarray:
    """Candidates of points that all share class ``c``: shape ``(N, M_c, 3)``.

    Bit j of the candidate index selects the upper preimage on the j-th axis
    (x, y, z order) that has two preimages; singleton axes take no bit.
    """
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    lo, hi = preimage_bounds(points, g)
    axes = [a for a in range(3) if (c >> a) & 1]
    out = np.repeat(lo[:, None, :], 1 << len(axes), axis=1)
    for m in range(1 << len(axes)):
        for j, a in enumerate(axes):
            if (m >> j) & 1:
                out[:, m, a] = hi[:, a]
    return out


def candidates_levelK(p: tuple[int, int, int], c: int, g: Fraction) -> list[tuple[int, int, int]]:
    return [tuple(int(v) for v in row) for row in levelk_candidates(np.array([p]), c, g)[0]]


def intermediate_candidates(points: np.ndarray) -> np.ndarray:
    """The 8 children ``(2X-1+bx, 2Y-1+by, 2Z-1+bz)`` of each point, ``(N, 8, 3)``.

    Children with a negative coordinate stay in place so the index m is
    uniform; they are never occupied and never emitted.
    """
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    return (2 * points - 1)[:, None, :] + _CHILD_BITS[None, :, :]


def candidates_intermediate(p: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    return [tuple(int(v) for v in row) for row in intermediate_candidates(np.array([p]))[0]]


def build_pattern(
    cluster: np.ndarray,
    candidates_fn: Callable[[np.ndarray], np.ndarray],
    finer: VoxelCloud,
) -> Pattern:
    """Pattern of one cluster: bit m set when ``p_m / |cluster| >= 1/2``."""
    cluster = np.asarray(cluster, dtype=np.int64).reshape(-1, 3)
    candidates = candidates_fn(cluster)
    present = finer.contains(candidates.reshape(-1, 3)).reshape(candidates.shape[:2])
    acc = FreqAccumulator.for_candidates(candidates.shape[1])
    for row in present:
        acc.add(row)
    return acc.pattern()


def _cluster_patterns(inverse: np.ndarray, present: np.ndarray, n_clusters: int) -> np.ndarray:
    sizes = np.bincount(inverse, minlength=n_clusters)
    patterns = np.zeros(n_clusters, dtype=np.int64)
    for m in range(present.shape[1]):
        counts = np.bincount(inverse, weights=present[:, m].astype(np.float64), minlength=n_clusters)
        patterns |= (2 * counts >= sizes).astype(np.int64) << m
    return patterns


def levelk_cluster_keys(VK: VoxelCloud, g: Fraction, nbrs: NeighborSet) -> dict[int, np.ndarray]:
    """Observed codes ``R_c`` per class c = 1..7, ascending."""
    classes = coordinate_classes(VK.points, g)
    codes = neighborhood_codes(VK, nbrs)
    return {c: np.unique(codes[classes == c]) for c in range(1, 8)}


def intermediate_cluster_keys(Vk: VoxelCloud, nbrs: NeighborSet) -> np.ndarray:
    """Observed codes ``R`` of an intermediate cloud, ascending."""
    return np.unique(neighborhood_codes(Vk, nbrs))


def build_levelK_prior(
    VK: VoxelCloud,
    VKm1: VoxelCloud,
    g: Fraction,
    nbrs: NeighborSet,
) -> LevelKPrior:
    """Patterns mapping the base cloud ``VK`` towards ``VKm1``.

    Class-0 points have a single preimage and need no pattern.
    """
    classes = coordinate_classes(VK.points, g)
    codes = neighborhood_codes(VK, nbrs)
    tables: dict[int, dict[int, Pattern]] = {}
    for c in range(1, 8):
        mask = classes == c
        if not mask.any():
            continue
        keys, inverse = np.unique(codes[mask], return_inverse=True)
        candidates = levelk_candidates(VK.points[mask], c, g)
        present = VKm1.contains(candidates.reshape(-1, 3)).reshape(candidates.shape[:2])
        patterns = _cluster_patterns(inverse.ravel(), present, keys.size)
        tables[c] = dict(zip(keys.tolist(), patterns.tolist()))
    prior = LevelKPrior(tables)
    logger.debug("level-K prior: %d clusters", len(prior))
    return prior


def build_intermediate_prior(
    Vk_hat: VoxelCloud,
    Vkm1: VoxelCloud,
    nbrs: NeighborSet,
) -> IntermediatePrior:
    """Patterns mapping a reconstructed level ``Vk_hat`` towards the original ``Vkm1``."""
    if len(Vk_hat) == 0:
        return IntermediatePrior()
    codes = neighborhood_codes(Vk_hat, nbrs)
    keys, inverse = np.unique(codes, return_inverse=True)
    candidates = intermediate_candidates(Vk_hat.points)
    present = Vkm1.contains(candidates.reshape(-1, 3)).reshape(candidates.shape[:2])
    patterns = _cluster_patterns(inverse.ravel(), present, keys.size)
    return IntermediatePrior(dict(zip(keys.tolist(), patterns.tolist())))


def build_hier_prior(
    pyr: Pyramid,
    nbrsK: NeighborSet,
    nbrsI: NeighborSet,
) -> tuple[HierPrior, VoxelCloud]:
    """Build sigma^(K)..sigma^(1) in a closed loop with the decoder's steps.

    Args:
        pyr: Pyramid of the input cloud.
        nbrsK: Neighbor set for the base level.
        nbrsI: Neighbor set for intermediate levels.

    Returns:
        The prior and the reconstruction V̂^(0) the decoder will reach
        before any pattern-reuse iterations.
    """
    # superres imports this module at load time.
    from .superres import interpolate_base, interpolate_intermediate

    params = pyr.params
    K = params.K
    levelk = build_levelK_prior(pyr[K], pyr[K - 1], params.g, nbrsK)
    current = interpolate_base(pyr[K], levelk, params.g, nbrsK, bitdepth=pyr[K - 1].bitdepth)

    intermediates = []
    for k in range(K - 1, 0, -1):
        sigma = build_intermediate_prior(current, pyr[k - 1], nbrsI)
        intermediates.append(sigma)
        current = interpolate_intermediate(current, sigma, nbrsI, bitdepth=pyr[k - 1].bitdepth)
        logger.debug("level %d: %d clusters, %d points reconstructed", k, len(sigma), len(current))

    return HierPrior(levelk=levelk, intermediates=tuple(intermediates)), current
