"""Lossless octree coder for the base cloud V^(K).

The cloud is serialized breadth-first as one occupancy byte per occupied
internal node (child m = bx + 2*by + 4*bz, b the high-half bit per axis).
Each occupancy bit is range coded under the context
(child index m, set bits so far in this node clamped to 3, depth clamped to 7).

Substream layout: ``[u8 version][u8 bitdepth][u32 LE point count][payload]``.
"""

from __future__ import annotations

import logging
import struct

import numpy as np

from .errors import GeometryError, MalformedStreamError
from .geometry import MAX_BITDEPTH, VoxelCloud
from .rangecoder import CODER_VERSION, BinDecoder, BinEncoder, new_models

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<BBI")
_DEPTH_CONTEXTS = 8
_COUNT_CONTEXTS = 4
_CONTEXTS = 8 * _COUNT_CONTEXTS * _DEPTH_CONTEXTS


def _context(m: int, count: int, depth: int) -> int:
    return (m * _COUNT_CONTEXTS + min(count, 3)) * _DEPTH_CONTEXTS + min(depth, 7)


def morton_codes(points: np.ndarray, bitdepth: int) -> np.ndarray:
    """Interleave coordinate bits, z highest within each triple."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 3)
    codes = np.zeros(points.shape[0], dtype=np.int64)
    for i in range(bitdepth):
        for axis in range(3):
            codes |= ((points[:, axis] >> i) & 1) << (3 * i + axis)
    return codes


def morton_points(codes: np.ndarray, bitdepth: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    points = np.zeros((codes.size, 3), dtype=np.int64)
    for i in range(bitdepth):
        for axis in range(3):
            points[:, axis] |= ((codes >> (3 * i + axis)) & 1) << i
    return points


def occupancy_levels(cloud: VoxelCloud) -> list[np.ndarray]:
    """Occupancy bytes of every octree level, root first, in breadth-first order."""
    depth = cloud.bitdepth
    codes = np.sort(morton_codes(cloud.points, depth))
    levels = []
    for d in range(depth):
        children = np.unique(codes >> (3 * (depth - d - 1)))
        parents = children >> 3
        starts = np.flatnonzero(np.r_[True, parents[1:] != parents[:-1]])
        levels.append(np.bitwise_or.reduceat(1 << (children & 7), starts))
    return levels


def encode_base(cloud: VoxelCloud) -> bytes:
    """Losslessly encode a non-empty cloud.

    Raises:
        GeometryError: If the cloud is empty.
    """
    if len(cloud) == 0:
        raise GeometryError("empty cloud")
    encoder = BinEncoder()
    models = new_models(_CONTEXTS)
    for d, occupancies in enumerate(occupancy_levels(cloud)):
        for occupancy in occupancies.tolist():
            count = 0
            for m in range(8):
                bit = (occupancy >> m) & 1
                encoder.encode(bit, models, _context(m, count, d))
                count += bit
    payload = encoder.finish()
    logger.debug(
        "base: %d points, bitdepth %d, %d occupancy bits -> %d bytes",
        len(cloud), cloud.bitdepth, encoder.bits, len(payload),
    )
    return _HEADER.pack(CODER_VERSION, cloud.bitdepth, len(cloud)) + payload


def decode_base(data: bytes) -> VoxelCloud:
    """Exact inverse of ``encode_base``.

    Raises:
        MalformedStreamError: On any truncated, corrupt or inconsistent stream.
    """
    if len(data) < _HEADER.size:
        raise MalformedStreamError("malformed base stream: header truncated")
    version, bitdepth, count = _HEADER.unpack_from(data)
    if version != CODER_VERSION:
        raise MalformedStreamError(f"malformed base stream: unknown coder version {version}")
    if not 1 <= bitdepth <= MAX_BITDEPTH:
        raise MalformedStreamError(f"malformed base stream: bitdepth {bitdepth}")
    if count == 0 or count > 8**bitdepth:
        raise MalformedStreamError(f"malformed base stream: point count {count}")

    decoder = BinDecoder(data, _HEADER.size)
    models = new_models(_CONTEXTS)
    nodes = np.zeros(1, dtype=np.int64)
    bit_index = np.arange(8, dtype=np.int64)
    for d in range(bitdepth):
        occupancies = np.empty(nodes.size, dtype=np.int64)
        for i in range(nodes.size):
            occupancy = 0
            count_set = 0
            for m in range(8):
                bit = decoder.decode(models, _context(m, count_set, d))
                occupancy |= bit << m
                count_set += bit
            if occupancy == 0:
                raise MalformedStreamError("malformed base stream: empty internal node")
            occupancies[i] = occupancy
        present = ((occupancies[:, None] >> bit_index[None, :]) & 1).astype(bool)
        nodes = ((nodes[:, None] << 3) | bit_index[None, :])[present]
        if nodes.size > count:
            raise MalformedStreamError("malformed base stream: more nodes than points")

    if nodes.size != count:
        raise MalformedStreamError(
            f"malformed base stream: decoded {nodes.size} points, header says {count}"
        )
    if not decoder.exhausted:
        raise MalformedStreamError("malformed base stream: trailing bytes")
    return VoxelCloud(morton_points(nodes, bitdepth), bitdepth)
