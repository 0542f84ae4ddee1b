"""Tests for pattern learning and the hierarchical prior."""

from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest

from hpsr.errors import ParameterError
from hpsr.geometry import NeighborSet, VoxelCloud, coord_class, phi, preimage_interval
from hpsr.prior import (
    FreqAccumulator,
    HierPrior,
    IntermediatePrior,
    LevelKPrior,
    build_hier_prior,
    build_intermediate_prior,
    build_levelK_prior,
    build_pattern,
    candidates_intermediate,
    candidates_levelK,
    intermediate_cluster_keys,
    levelk_cluster_keys,
)
from hpsr.pyramid import build_pyramid, derive_params
from hpsr.superres import interpolate_base


def _brute_force_patterns(coarse, finer, nbrs, cluster_of, candidates_of):
    """Cluster point by point and count candidate occupancy with Python sets."""
    occupied = {tuple(p) for p in finer.points.tolist()}
    clusters = defaultdict(list)
    for point in coarse.points.tolist():
        key = cluster_of(tuple(point))
        if key is not None:
            clusters[key].append(tuple(point))
    patterns = {}
    for key, members in clusters.items():
        acc = None
        for point in members:
            candidates = candidates_of(point, key)
            if acc is None:
                acc = FreqAccumulator.for_candidates(len(candidates))
            acc.add(np.array([c in occupied for c in candidates]))
        patterns[key] = acc.pattern()
    return patterns


class TestCandidates:
    """Tests for candidate enumeration."""

    def test_levelk_single_axis(self):
        assert candidates_levelK((2, 0, 0), 1, Fraction(3, 4)) == [(2, 0, 0), (3, 0, 0)]

    def test_levelk_class_zero(self):
        assert candidates_levelK((0, 0, 0), 0, Fraction(3, 4)) == [(0, 0, 0)]

    def test_levelk_full_class(self):
        candidates = candidates_levelK((2, 2, 2), 7, Fraction(3, 4))
        assert len(candidates) == 8
        assert candidates[0] == (2, 2, 2)
        assert candidates[1] == (3, 2, 2)
        assert candidates[7] == (3, 3, 3)

    def test_levelk_compressed_axes(self):
        assert candidates_levelK((2, 0, 2), 5, Fraction(3, 4)) == [
            (2, 0, 2), (3, 0, 2), (2, 0, 3), (3, 0, 3),
        ]

    def test_intermediate(self):
        candidates = candidates_intermediate((1, 1, 1))
        assert candidates[0] == (1, 1, 1)
        assert candidates[1] == (2, 1, 1)
        assert candidates[2] == (1, 2, 1)
        assert candidates[4] == (1, 1, 2)
        assert candidates[7] == (2, 2, 2)

    def test_intermediate_at_origin(self):
        candidates = candidates_intermediate((0, 0, 0))
        assert candidates[0] == (-1, -1, -1)
        assert candidates[7] == (0, 0, 0)

    def test_intermediate_matches_half_preimage(self):
        for X in range(1, 30):
            lo, hi = preimage_interval(X, Fraction(1, 2))
            assert (lo, hi) == (2 * X - 1, 2 * X)
            assert candidates_intermediate((X, X, X))[0][0] == lo


class TestPattern:
    """Tests for the majority-vote pattern."""

    @staticmethod
    def _shifted(points):
        return np.stack([points, points + np.array([100, 0, 0])], axis=1)

    def test_three_point_cluster(self):
        cluster = np.array([(0, 0, 0), (1, 0, 0), (2, 0, 0)])
        finer = VoxelCloud([(0, 0, 0), (1, 0, 0), (100, 0, 0)], 7)
        assert build_pattern(cluster, self._shifted, finer) == 1

    def test_exact_half_is_kept(self):
        cluster = np.array([(0, 0, 0), (1, 0, 0)])
        finer = VoxelCloud([(0, 0, 0)], 7)
        assert build_pattern(cluster, self._shifted, finer) == 1

    def test_all_present(self):
        cluster = np.array([(0, 0, 0), (1, 0, 0)])
        finer = VoxelCloud([(0, 0, 0), (1, 0, 0), (100, 0, 0), (101, 0, 0)], 7)
        assert build_pattern(cluster, self._shifted, finer) == 3

    def test_accumulator(self):
        acc = FreqAccumulator.for_candidates(3)
        acc.add(np.array([True, False, False]))
        acc.add(np.array([True, True, False]))
        acc.add(np.array([False, True, False]))
        assert acc.counts == [2, 2, 0]
        assert acc.frequencies == [Fraction(2, 3), Fraction(2, 3), Fraction(0)]
        assert acc.pattern() == 0b011


class TestLevelKPrior:
    """Tests for sigma^(K)."""

    def test_class_zero_only(self):
        base = VoxelCloud([(0, 0, 0)], 2)
        prior = build_levelK_prior(base, base, Fraction(3, 4), NeighborSet.FACE_EDGE18)
        assert len(prior) == 0

    def test_rejects_class_zero_table(self):
        with pytest.raises(ParameterError, match="1..7"):
            LevelKPrior({0: {1: 1}})

    @pytest.mark.parametrize("q, nbrs", [
        ("3/8", NeighborSet.FACE_EDGE18),
        ("5/16", NeighborSet.FACE6),
        ("1/2", NeighborSet.FULL26),
    ])
    def test_matches_brute_force(self, make_clustered_cloud, q, nbrs):
        cloud = make_clustered_cloud(21, 7, 1500)
        params = derive_params(q)
        pyramid = build_pyramid(cloud, params)
        VK, VKm1, g = pyramid.base, pyramid[params.K - 1], params.g

        def cluster_of(point):
            c = coord_class(point, g)
            return (c, phi(point, VK, nbrs)) if c else None

        expected = _brute_force_patterns(
            VK, VKm1, nbrs, cluster_of, lambda point, key: candidates_levelK(point, key[0], g)
        )
        prior = build_levelK_prior(VK, VKm1, g, nbrs)
        actual = {(c, r): sigma for c in range(1, 8) for r, sigma in prior.tables[c].items()}
        assert actual == expected

    def test_cluster_keys_match_tables(self, make_random_cloud):
        cloud = make_random_cloud(22, 7, 2000)
        params = derive_params("3/8")
        pyramid = build_pyramid(cloud, params)
        prior = build_levelK_prior(pyramid.base, pyramid[1], params.g, NeighborSet.FACE_EDGE18)
        keys = levelk_cluster_keys(pyramid.base, params.g, NeighborSet.FACE_EDGE18)
        for c in range(1, 8):
            assert keys[c].tolist() == list(prior.tables[c])


class TestIntermediatePrior:
    """Tests for sigma^(k), k < K."""

    def test_matches_brute_force(self, make_clustered_cloud):
        cloud = make_clustered_cloud(23, 7, 1500)
        params = derive_params("1/8")
        pyramid = build_pyramid(cloud, params)
        levelk = build_levelK_prior(pyramid.base, pyramid[1], params.g, NeighborSet.FACE_EDGE18)
        V1_hat = interpolate_base(pyramid.base, levelk, params.g, NeighborSet.FACE_EDGE18)
        nbrs = NeighborSet.FACE6

        expected = _brute_force_patterns(
            V1_hat, pyramid[0], nbrs,
            lambda point: phi(point, V1_hat, nbrs),
            lambda point, _key: candidates_intermediate(point),
        )
        prior = build_intermediate_prior(V1_hat, pyramid[0], nbrs)
        assert prior.table == expected
        assert list(prior.table) == intermediate_cluster_keys(V1_hat, nbrs).tolist()

    def test_empty_cloud(self):
        prior = build_intermediate_prior(
            VoxelCloud(np.empty((0, 3)), 3), VoxelCloud([(1, 1, 1)], 3), NeighborSet.FACE6
        )
        assert len(prior) == 0

    def test_lookup(self):
        prior = IntermediatePrior({9: 3, 2: 255})
        assert list(prior.table) == [2, 9]
        found, patterns = prior.lookup(np.array([2, 5, 9]))
        assert found.tolist() == [True, False, True]
        assert patterns.tolist() == [255, 0, 3]


class TestHierPrior:
    """Tests for the closed-loop prior."""

    def test_single_step_has_no_intermediates(self, make_random_cloud):
        pyramid = build_pyramid(make_random_cloud(24, 6, 500), derive_params("1/2"))
        prior, level0 = build_hier_prior(pyramid, NeighborSet.FACE_EDGE18, NeighborSet.FACE6)
        assert prior.intermediates == ()
        assert isinstance(level0, VoxelCloud)

    def test_intermediate_count(self, make_random_cloud):
        params = derive_params("1/16", K_max=3)
        pyramid = build_pyramid(make_random_cloud(25, 8, 800), params)
        prior, _level0 = build_hier_prior(pyramid, NeighborSet.FACE_EDGE18, NeighborSet.FACE6)
        assert len(prior.intermediates) == params.K - 1

    def test_payload_bits(self):
        prior = HierPrior(
            levelk=LevelKPrior({7: {0: 255}, 1: {3: 1}}),
            intermediates=(IntermediatePrior({0: 1, 4: 2}),),
        )
        assert prior.payload_bits() == 8 + 2 + 16
