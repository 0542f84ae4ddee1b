"""End-to-end HPSR encoding and decoding.

This module ties the pyramid, the hierarchical prior and the two
substream coders into a single stream, and runs the decoder-side
super-resolution from a stream.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

from .basecodec import decode_base, encode_base
from .container import HEADER_SIZE, BitAllocation, Header, read_container, write_container
from .errors import GeometryError, MalformedStreamError, ParameterError
from .geometry import NeighborSet, VoxelCloud, as_rational
from .prior import (
    IntermediatePrior,
    build_hier_prior,
    intermediate_cluster_keys,
    levelk_cluster_keys,
)
from .priorcodec import PriorMode, PriorReader, encode_prior
from .pyramid import (
    DEFAULT_K_MAX,
    DEFAULT_KPRIME_MAX,
    PyramidParams,
    build_pyramid,
    derive_params,
    map_s_to_q,
)
from .superres import extra_sr, final_upscale, naive_reconstruct, super_resolve

logger = logging.getLogger(__name__)

MAX_INPUT_BITDEPTH = 20
_U16 = 0xFFFF


class CodecConfig:
    """Configuration for HPSR encoding."""

    def __init__(
        self,
        q: Fraction | str,
        k_max: int = DEFAULT_K_MAX,
        kprime_max: int = DEFAULT_KPRIME_MAX,
        nbr_k: NeighborSet | int = NeighborSet.FACE_EDGE18,
        nbr_i: NeighborSet | int = NeighborSet.FACE6,
        prior_mode: PriorMode | str = PriorMode.RAW,
    ):
        """Initialize codec configuration.

        Args:
            q: Overall downsampling factor, ``0 < q < 1``, numerator and
                denominator below 2^16.
            k_max: Upper bound on the number of pyramid steps K.
            kprime_max: Upper bound on the pattern-reuse iterations K'.
            nbr_k: Neighbor set (or its size 6/18/26) for the base level.
            nbr_i: Neighbor set (or its size) for intermediate levels.
            prior_mode: ``raw`` or ``entropy`` prior serialization.
        """
        q = as_rational(q)
        if not 0 < q < 1:
            raise ParameterError("q out of range")
        if q.numerator > _U16 or q.denominator > _U16:
            raise ParameterError(f"q={q} does not fit 16-bit numerator/denominator")
        if k_max < 1:
            raise ParameterError(f"k_max must be >= 1, got {k_max}")
        if kprime_max < 0:
            raise ParameterError(f"kprime_max must be >= 0, got {kprime_max}")
        prior_mode = PriorMode.parse(prior_mode)

        self.q = q
        self.k_max = int(k_max)
        self.kprime_max = int(kprime_max)
        self.nbr_k = nbr_k if isinstance(nbr_k, NeighborSet) else NeighborSet.from_size(nbr_k)
        self.nbr_i = nbr_i if isinstance(nbr_i, NeighborSet) else NeighborSet.from_size(nbr_i)
        self.prior_mode = prior_mode

    @classmethod
    def from_s(cls, s: Fraction | str, **kwargs) -> "CodecConfig":
        """Configuration for an MPEG geometry scale ``s`` (mapped to ``q = f(f(s))``)."""
        return cls(map_s_to_q(s), **kwargs)

    def params(self) -> PyramidParams:
        return derive_params(self.q, self.k_max, self.kprime_max)

    def describe(self) -> str:
        """Compact tag, e.g. ``HPSR:q=1/8,K<=2,K'<=2,N18/6,raw``."""
        return (
            f"HPSR:q={self.q},K<={self.k_max},K'<={self.kprime_max},"
            f"N{self.nbr_k.value}/{self.nbr_i.value},{self.prior_mode.name.lower()}"
        )

    def __repr__(self) -> str:
        return f"CodecConfig({self.describe()})"


@dataclass(frozen=True, eq=False)
class EncodeResult:
    """Output of an encoder run.

    Attributes:
        stream: The container bytes (None for the naive baseline, which has
            no prior to carry).
        reconstruction: The cloud a decoder of ``stream`` reproduces.
        base: The transmitted base cloud V^(K).
        allocation: Header, base and prior bits.
        params: Scale parameters used.
    """

    stream: bytes | None
    reconstruction: VoxelCloud
    base: VoxelCloud
    allocation: BitAllocation
    params: PyramidParams

    def bpp(self, n_points: int) -> float:
        return self.allocation.bpp(n_points)


def _check_input(cloud: VoxelCloud) -> None:
    if len(cloud) == 0:
        raise GeometryError("empty cloud")
    if cloud.bitdepth > MAX_INPUT_BITDEPTH:
        raise GeometryError(
            f"input bitdepth {cloud.bitdepth} exceeds the codec limit of {MAX_INPUT_BITDEPTH}"
        )


def encode_cloud(cloud: VoxelCloud, config: CodecConfig) -> EncodeResult:
    """Encode ``cloud`` into an HPSR stream.

    The encoder replays every decoder step while building the prior, so
    ``EncodeResult.reconstruction`` is exactly what ``decode_stream`` will
    return for ``EncodeResult.stream``.

    Raises:
        GeometryError: If the cloud is empty, deeper than 20 bits or too
            shallow for the pyramid of ``config``.
    """
    _check_input(cloud)
    params = config.params()
    pyramid = build_pyramid(cloud, params)
    prior, level0 = build_hier_prior(pyramid, config.nbr_k, config.nbr_i)

    sigma1 = prior.intermediates[-1] if prior.intermediates else IntermediatePrior()
    reused = extra_sr(level0, sigma1, params.Kprime, config.nbr_i)
    reconstruction = final_upscale(reused, params, bitdepth=cloud.bitdepth)

    base_bytes = encode_base(pyramid.base)
    prior_bytes = encode_prior(prior, config.prior_mode)
    header = Header(
        bitdepth=cloud.bitdepth,
        q=params.q,
        K=params.K,
        Kprime=params.Kprime,
        nbr_k=config.nbr_k,
        nbr_i=config.nbr_i,
        prior_mode=config.prior_mode,
    )
    stream = write_container(header, base_bytes, prior_bytes)
    allocation = BitAllocation(
        header_bits=8 * HEADER_SIZE,
        base_bits=8 * len(base_bytes),
        prior_bits=8 * len(prior_bytes),
    )
    logger.info(
        "%s: %d points -> base %d points, %d bits (%.4f bpp)",
        config.describe(), len(cloud), len(pyramid.base), allocation.total_bits,
        allocation.bpp(len(cloud)),
    )
    return EncodeResult(
        stream=stream,
        reconstruction=reconstruction,
        base=pyramid.base,
        allocation=allocation,
        params=params,
    )


def encode_naive(cloud: VoxelCloud, config: CodecConfig) -> EncodeResult:
    """The pattern-free baseline: same base coder, direct upscaling, no prior bits."""
    _check_input(cloud)
    params = config.params()
    pyramid = build_pyramid(cloud, params)
    base_bytes = encode_base(pyramid.base)
    reconstruction = naive_reconstruct(pyramid.base, params, config.nbr_k, bitdepth=cloud.bitdepth)
    allocation = BitAllocation(header_bits=8 * HEADER_SIZE, base_bits=8 * len(base_bytes), prior_bits=0)
    return EncodeResult(
        stream=None,
        reconstruction=reconstruction,
        base=pyramid.base,
        allocation=allocation,
        params=params,
    )


def decode_stream(data: bytes, skip_kprime: bool = False) -> VoxelCloud:
    """Decode an HPSR stream into the reconstructed cloud.

    The prior is read stage by stage: the cluster keys of each stage come
    from the cloud reconstructed so far.

    Args:
        data: Container bytes.
        skip_kprime: Skip the K' pattern-reuse iterations (faster, coarser).

    Raises:
        ContainerError, MalformedStreamError, PriorDesyncError: On any
            malformed stream.
    """
    header, base_bytes, prior_bytes = read_container(data)
    params = header.params()
    base = decode_base(base_bytes)
    if base.bitdepth > header.bitdepth:
        raise MalformedStreamError(
            f"malformed base stream: bitdepth {base.bitdepth} exceeds the stream's {header.bitdepth}"
        )

    reader = PriorReader(prior_bytes, header.prior_mode)
    levelk = reader.read_levelk(levelk_cluster_keys(base, params.g, header.nbr_k))

    def next_intermediate(cloud: VoxelCloud) -> IntermediatePrior:
        return reader.read_intermediate(intermediate_cluster_keys(cloud, header.nbr_i))

    if skip_kprime:
        params = params.with_kprime(0)
    cloud = super_resolve(
        base, levelk, next_intermediate, params, header.nbr_k, header.nbr_i,
        bitdepth=header.bitdepth,
    )
    reader.finish()
    logger.info("decoded %d points from a %d-point base", len(cloud), len(base))
    return cloud


def stream_allocation(data: bytes) -> BitAllocation:
    """Bit allocation of a stream, read from its header."""
    header, _base, _prior = read_container(data)
    return header.bit_allocation()
