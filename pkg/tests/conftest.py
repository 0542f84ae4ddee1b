"""Shared synthetic clouds for the test suite."""

import numpy as np
import pytest

from hpsr.geometry import VoxelCloud


def random_cloud(seed: int, bitdepth: int, n: int) -> VoxelCloud:
    """Up to ``n`` uniformly random voxels (duplicates collapse)."""
    rng = np.random.default_rng(seed)
    return VoxelCloud(rng.integers(0, 1 << bitdepth, size=(n, 3)), bitdepth)


def clustered_cloud(seed: int, bitdepth: int, n: int, blobs: int = 4) -> VoxelCloud:
    """Dense Gaussian blobs: locally solid regions with empty space between."""
    rng = np.random.default_rng(seed)
    size = 1 << bitdepth
    centers = rng.uniform(0.25 * size, 0.75 * size, size=(blobs, 3))
    spread = size / 16
    which = rng.integers(0, blobs, size=n)
    points = np.floor(centers[which] + rng.normal(0, spread, size=(n, 3)) + 0.5)
    points = np.clip(points, 0, size - 1).astype(np.int64)
    return VoxelCloud(points, bitdepth)


def sphere_surface(bitdepth: int, fill: float = 0.45) -> VoxelCloud:
    """Voxelized sphere shell centred in the grid, radius ``fill * 2^bitdepth``."""
    size = 1 << bitdepth
    radius = fill * size
    center = (size - 1) / 2
    n = int(16 * np.pi * radius * radius) + 64
    i = np.arange(n) + 0.5
    polar = np.arccos(1 - 2 * i / n)
    azimuth = np.pi * (1 + 5**0.5) * i
    directions = np.column_stack([
        np.cos(azimuth) * np.sin(polar),
        np.sin(azimuth) * np.sin(polar),
        np.cos(polar),
    ])
    points = np.floor(center + radius * directions + 0.5).astype(np.int64)
    return VoxelCloud(np.clip(points, 0, size - 1), bitdepth)


def solid_block(side: int, bitdepth: int, origin: int = 0) -> VoxelCloud:
    """Every voxel of the cube ``[origin, origin + side)^3``."""
    axis = np.arange(origin, origin + side)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    return VoxelCloud(grid, bitdepth)


@pytest.fixture
def make_random_cloud():
    return random_cloud


@pytest.fixture
def make_clustered_cloud():
    return clustered_cloud


@pytest.fixture
def make_sphere():
    return sphere_surface


@pytest.fixture
def make_block():
    return solid_block


@pytest.fixture
def small_sphere():
    """A 7-bit sphere shell of a few tens of thousands of voxels."""
    return sphere_surface(7)


@pytest.fixture
def tiny_sphere():
    """A 6-bit sphere shell, quick enough for every-commit tests."""
    return sphere_surface(6)


@pytest.fixture(scope="session")
def large_sphere():
    """A 9-bit sphere shell of several hundred thousand voxels, for slow checks."""
    return sphere_surface(9)
