"""The on-disk HPSR bitstream: a fixed header followed by two substreams.

Layout (little-endian)::

    magic "HPSR" | version u8 | bitdepth u8 | q num u16 | q den u16 | K u8 |
    K' u8 | nbrK u8 | nbrI u8 | coder version u8 | prior mode u8 |
    base length u32 | prior length u32 | base bytes | prior bytes

See FORMAT.md for the field semantics.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from fractions import Fraction
from math import gcd

from .errors import ContainerError, HPSRError
from .geometry import MAX_BITDEPTH, NeighborSet
from .priorcodec import PriorMode
from .pyramid import PyramidParams, level_count
from .rangecoder import CODER_VERSION

logger = logging.getLogger(__name__)

MAGIC = b"HPSR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBHHBBBBBBII")
HEADER_SIZE = _HEADER.size
_U16 = 0xFFFF


@dataclass(frozen=True)
class BitAllocation:
    """Bits spent on each part of a stream."""

    header_bits: int
    base_bits: int
    prior_bits: int

    @property
    def total_bits(self) -> int:
        return self.header_bits + self.base_bits + self.prior_bits

    def bpp(self, n_points: int) -> float:
        """Total bits per point of the original cloud."""
        return self.total_bits / n_points


@dataclass(frozen=True)
class Header:
    """Every parameter the decoder needs besides the two substreams."""

    bitdepth: int
    q: Fraction
    K: int
    Kprime: int
    nbr_k: NeighborSet
    nbr_i: NeighborSet
    prior_mode: PriorMode = PriorMode.RAW
    coder_version: int = CODER_VERSION
    version: int = FORMAT_VERSION
    base_length: int = 0
    prior_length: int = 0

    def params(self) -> PyramidParams:
        """PyramidParams recomputed from q, K and K'."""
        L = level_count(self.q)
        return PyramidParams(q=self.q, L=L, K=self.K, Kprime=self.Kprime, g=self.q * 2**L)

    def bit_allocation(self) -> BitAllocation:
        return BitAllocation(
            header_bits=8 * HEADER_SIZE,
            base_bits=8 * self.base_length,
            prior_bits=8 * self.prior_length,
        )


def write_container(header: Header, base: bytes, prior: bytes) -> bytes:
    """Concatenate header, base substream and prior substream.

    The header's length fields are taken from the substreams.
    """
    q = Fraction(header.q)
    if q.numerator > _U16 or q.denominator > _U16:
        raise ContainerError(f"q={q} does not fit 16-bit numerator/denominator")
    header = replace(header, base_length=len(base), prior_length=len(prior))
    packed = _HEADER.pack(
        MAGIC,
        header.version,
        header.bitdepth,
        q.numerator,
        q.denominator,
        header.K,
        header.Kprime,
        header.nbr_k.value,
        header.nbr_i.value,
        header.coder_version,
        int(header.prior_mode),
        header.base_length,
        header.prior_length,
    )
    return packed + bytes(base) + bytes(prior)


def read_container(data: bytes) -> tuple[Header, bytes, bytes]:
    """Split and validate an HPSR stream.

    Raises:
        ContainerError: On bad magic, version, truncation, trailing bytes or
            parameters that violate the codec's invariants.
    """
    data = bytes(data)
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise ContainerError("not an HPSR stream")
    if len(data) < HEADER_SIZE:
        raise ContainerError("truncated HPSR stream: header incomplete")
    (
        _magic, version, bitdepth, q_num, q_den, K, Kprime,
        nbr_k, nbr_i, coder_version, prior_mode, base_length, prior_length,
    ) = _HEADER.unpack_from(data)

    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported HPSR format version {version}")
    if coder_version != CODER_VERSION:
        raise ContainerError(f"unsupported base coder version {coder_version}")
    if not 1 <= bitdepth <= MAX_BITDEPTH:
        raise ContainerError(f"invalid bitdepth {bitdepth}")
    if q_num == 0 or q_den == 0 or gcd(q_num, q_den) != 1:
        raise ContainerError(f"q={q_num}/{q_den} is not a reduced positive fraction")

    end = HEADER_SIZE + base_length + prior_length
    if len(data) < end:
        raise ContainerError(
            f"truncated HPSR stream: {len(data)} bytes, header declares {end}"
        )
    if len(data) > end:
        raise ContainerError(f"trailing bytes after HPSR stream ({len(data) - end})")

    try:
        header = Header(
            bitdepth=bitdepth,
            q=Fraction(q_num, q_den),
            K=K,
            Kprime=Kprime,
            nbr_k=NeighborSet.from_size(nbr_k),
            nbr_i=NeighborSet.from_size(nbr_i),
            prior_mode=PriorMode(prior_mode),
            coder_version=coder_version,
            version=version,
            base_length=base_length,
            prior_length=prior_length,
        )
        header.params()
    except (HPSRError, ValueError) as exc:
        raise ContainerError(f"invalid HPSR header: {exc}") from exc

    base = data[HEADER_SIZE : HEADER_SIZE + base_length]
    prior = data[HEADER_SIZE + base_length : end]
    return header, base, prior
