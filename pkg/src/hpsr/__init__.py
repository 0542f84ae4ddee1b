"""Point-cloud geometry compression by hierarchical super resolution.

An input voxel cloud is downsampled into a pyramid; only the coarsest level
is coded losslessly, together with compact tables of interpolation patterns
that let the decoder super-resolve it back, level by level, to the
original grid.
"""

from .codec import (
    CodecConfig,
    EncodeResult,
    decode_stream,
    encode_cloud,
    encode_naive,
    stream_allocation,
)
from .container import BitAllocation, Header, read_container, write_container
from .errors import (
    ContainerError,
    GeometryError,
    HPSRError,
    MalformedStreamError,
    MetricError,
    ParameterError,
    PlyFormatError,
    PriorDesyncError,
)
from .geometry import NeighborSet, VoxelCloud, round_half_up
from .metrics import (
    NormalField,
    RdPoint,
    bd_rate,
    d1_mse,
    d2_mse,
    estimate_normals,
    evaluate,
    psnr,
)
from .pcio import load_voxel_cloud, read_ply, voxelize, write_ply
from .priorcodec import PriorMode
from .pyramid import PyramidParams, build_pyramid, derive_params, map_s_to_q

__version__ = "0.1.0"

__all__ = [
    "CodecConfig",
    "EncodeResult",
    "encode_cloud",
    "encode_naive",
    "decode_stream",
    "stream_allocation",
    "BitAllocation",
    "Header",
    "read_container",
    "write_container",
    "HPSRError",
    "GeometryError",
    "ParameterError",
    "MalformedStreamError",
    "PriorDesyncError",
    "ContainerError",
    "PlyFormatError",
    "MetricError",
    "NeighborSet",
    "VoxelCloud",
    "round_half_up",
    "NormalField",
    "RdPoint",
    "bd_rate",
    "d1_mse",
    "d2_mse",
    "estimate_normals",
    "evaluate",
    "psnr",
    "load_voxel_cloud",
    "read_ply",
    "voxelize",
    "write_ply",
    "PriorMode",
    "PyramidParams",
    "build_pyramid",
    "derive_params",
    "map_s_to_q",
]
