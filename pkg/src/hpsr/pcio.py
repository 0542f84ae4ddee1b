"""PLY input/output and voxelization of float clouds.

Reading and writing go through ``plyfile``; ASCII and binary little-endian
PLY 1.0 are both accepted. Only the ``vertex`` element's x/y/z (and
nx/ny/nz when present) are used; other properties are skipped.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from plyfile import PlyData, PlyElement, PlyParseError

from .errors import GeometryError, PlyFormatError
from .geometry import MAX_BITDEPTH, VoxelCloud, pack_keys

logger = logging.getLogger(__name__)

FORMAT_EXTENSIONS = {
    '.ply': 'ply',
}

_POSITION = ('x', 'y', 'z')
_NORMAL = ('nx', 'ny', 'nz')


@dataclass(frozen=True)
class VoxelTransform:
    """Affine map used by ``voxelize``: ``voxel = round((p - offset) * scale)``."""

    offset: np.ndarray
    scale: float
    bitdepth: int

    def to_original(self, points: np.ndarray) -> np.ndarray:
        """Map voxel coordinates back to the input frame."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return points / self.scale + self.offset


def _check_format(path: Path) -> None:
    suffix = path.suffix.lower()
    if FORMAT_EXTENSIONS.get(suffix) != 'ply':
        raise PlyFormatError(
            f"Cannot read point clouds from extension '{suffix}'. "
            f"Supported extensions: {', '.join(FORMAT_EXTENSIONS)}."
        )


def read_ply(data: bytes) -> tuple[np.ndarray, np.ndarray | None]:
    """Parse PLY bytes into float64 positions and optional normals.

    Returns:
        ``(positions, normals)``; both ``(N, 3)``, normals ``None`` unless
        the vertex element carries nx, ny and nz.

    Raises:
        PlyFormatError: On a missing vertex element, missing or non-numeric
            coordinates, or a truncated body.

    Examples:
        >>> positions, normals = read_ply(
        ...     b"ply\\nformat ascii 1.0\\nelement vertex 1\\n"
        ...     b"property float x\\nproperty float y\\nproperty float z\\n"
        ...     b"end_header\\n1 2 3\\n")
        >>> positions.tolist(), normals
        ([[1.0, 2.0, 3.0]], None)
    """
    try:
        ply = PlyData.read(io.BytesIO(bytes(data)), mmap=False)
    except PlyParseError as exc:
        raise PlyFormatError(f"invalid PLY: {exc}") from exc
    except (ValueError, TypeError, IndexError, EOFError, StopIteration, UnicodeDecodeError) as exc:
        raise PlyFormatError(f"invalid PLY: {exc}") from exc

    if 'vertex' not in [element.name for element in ply.elements]:
        raise PlyFormatError("invalid PLY: no 'vertex' element")
    vertex = ply['vertex']
    names = {prop.name for prop in vertex.properties}
    missing = [name for name in _POSITION if name not in names]
    if missing:
        raise PlyFormatError(f"invalid PLY: vertex element lacks {', '.join(missing)}")

    def columns(keys: tuple[str, ...]) -> np.ndarray:
        try:
            stacked = np.column_stack([np.asarray(vertex[key], dtype=np.float64) for key in keys])
        except (ValueError, TypeError) as exc:
            raise PlyFormatError(f"invalid PLY: non-numeric vertex property ({exc})") from exc
        return stacked.reshape(-1, 3)

    positions = columns(_POSITION)
    if not np.all(np.isfinite(positions)):
        raise PlyFormatError("invalid PLY: non-finite vertex coordinate")
    normals = columns(_NORMAL) if all(name in names for name in _NORMAL) else None
    logger.debug("read %d vertices (normals: %s)", positions.shape[0], normals is not None)
    return positions, normals


def write_ply(
    cloud: VoxelCloud | np.ndarray,
    binary: bool = True,
    normals: np.ndarray | None = None,
) -> bytes:
    """Serialize a cloud as a vertex-only PLY with float32 coordinates.

    Args:
        cloud: Cloud (written in canonical order) or raw ``(N, 3)`` positions.
        binary: Binary little-endian when True, ASCII otherwise.
        normals: Optional ``(N, 3)`` normals written as nx, ny, nz.
    """
    points = cloud.points if isinstance(cloud, VoxelCloud) else np.asarray(cloud)
    points = np.asarray(points).reshape(-1, 3)
    fields = [(name, 'f4') for name in _POSITION]
    if normals is not None:
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if normals.shape[0] != points.shape[0]:
            raise PlyFormatError(f"{normals.shape[0]} normals for {points.shape[0]} points")
        fields += [(name, 'f4') for name in _NORMAL]

    vertex = np.empty(points.shape[0], dtype=fields)
    for axis, name in enumerate(_POSITION):
        vertex[name] = points[:, axis]
    if normals is not None:
        for axis, name in enumerate(_NORMAL):
            vertex[name] = normals[:, axis]

    element = PlyElement.describe(vertex, 'vertex')
    out = io.BytesIO()
    PlyData([element], text=not binary, byte_order='<').write(out)
    return out.getvalue()


def voxelize(
    positions: np.ndarray,
    bitdepth: int,
    return_transform: bool = False,
) -> VoxelCloud | tuple[VoxelCloud, VoxelTransform]:
    """Map float positions onto the ``2^bitdepth`` grid.

    The minimum corner moves to the origin and all axes are scaled by
    ``(2^b - 1) / max_extent``, then rounded half up and deduplicated.
    A cloud of identical points becomes one voxel at the origin.

    Args:
        positions: ``(N, 3)`` array, N >= 1.
        bitdepth: Target grid precision in [1, 21].
        return_transform: Also return the VoxelTransform applied.

    Raises:
        GeometryError: On an empty input or invalid bitdepth.

    Examples:
        >>> voxelize(np.array([[0.0, 0.0, 0.0], [2.0, 1.0, 0.0]]), 2).points.tolist()
        [[0, 0, 0], [3, 2, 0]]
    """
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    if positions.shape[0] == 0:
        raise GeometryError("empty cloud")
    if not 1 <= bitdepth <= MAX_BITDEPTH:
        raise GeometryError(f"bitdepth must be in [1, {MAX_BITDEPTH}], got {bitdepth}")

    offset = positions.min(axis=0)
    extent = float((positions.max(axis=0) - offset).max())
    top = (1 << bitdepth) - 1
    scale = top / extent if extent > 0 else 1.0

    if extent > 0:
        grid = np.floor((positions - offset) * scale + 0.5).astype(np.int64)
        grid = np.clip(grid, 0, top)
    else:
        grid = np.zeros((1, 3), dtype=np.int64)
    cloud = VoxelCloud(grid, bitdepth)
    logger.debug("voxelized %d points to %d voxels at bitdepth %d",
                 positions.shape[0], len(cloud), bitdepth)
    if return_transform:
        return cloud, VoxelTransform(offset=offset, scale=scale, bitdepth=bitdepth)
    return cloud


def on_grid(positions: np.ndarray, bitdepth: int) -> bool:
    """True when every coordinate is an integer in ``[0, 2^bitdepth)``."""
    positions = np.asarray(positions, dtype=np.float64)
    return bool(
        positions.size
        and np.all(positions == np.floor(positions))
        and positions.min() >= 0
        and positions.max() < (1 << bitdepth)
    )


def read_point_file(filepath: str | Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read positions and optional normals from a ``.ply`` file."""
    path = Path(filepath)
    _check_format(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise PlyFormatError(f"cannot read {path}: {exc.strerror}") from exc
    return read_ply(data)


def load_voxel_cloud(
    filepath: str | Path,
    bitdepth: int,
    return_metadata: bool = False,
) -> VoxelCloud | dict:
    """Load a PLY file as a VoxelCloud at ``bitdepth``.

    Clouds already on the integer grid are kept as they are; anything else
    is voxelized.

    Args:
        filepath: Path to a ``.ply`` file.
        bitdepth: Grid precision.
        return_metadata: If True, return a dict with the cloud, the input
            point count, any normals and the voxelization transform.
    """
    positions, normals = read_point_file(filepath)
    if positions.shape[0] == 0:
        raise GeometryError("empty cloud")
    transform = None
    if on_grid(positions, bitdepth):
        cloud = VoxelCloud(positions.astype(np.int64), bitdepth)
        if normals is not None and len(cloud) == positions.shape[0]:
            normals = normals[np.argsort(pack_keys(positions.astype(np.int64)))]
        else:
            normals = None
    else:
        cloud, transform = voxelize(positions, bitdepth, return_transform=True)
        normals = None

    if return_metadata:
        return {
            'cloud': cloud,
            'input_points': int(positions.shape[0]),
            'normals': normals,
            'transform': transform,
            'filepath': str(filepath),
        }
    return cloud
