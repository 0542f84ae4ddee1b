"""Serialization of the hierarchical prior.

Only pattern values travel. The decoder re-derives every cluster key from
clouds it already holds, so it knows how many patterns to read at each stage
and which key each one belongs to.

Order: sigma^(K) class by class (c = 1..7, ascending r, M_c bits each,
MSB first), then sigma^(K-1)..sigma^(1) (ascending r, 8 bits each).
RAW pads each level-K class group to a byte. ENTROPY range codes the same
bits without padding, one adaptive model per bit significance.

Substream layout: ``[u8 mode][payload]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import MalformedStreamError, ParameterError, PriorDesyncError
from .geometry import class_size
from .prior import HierPrior, IntermediatePrior, LevelKPrior
from .rangecoder import BinDecoder, BinEncoder, new_models

logger = logging.getLogger(__name__)

_DESYNC = "prior/cloud desync"


class PriorMode(IntEnum):
    RAW = 0
    ENTROPY = 1

    @classmethod
    def parse(cls, value: "PriorMode | str | int") -> "PriorMode":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ParameterError(f"prior mode must be 'raw' or 'entropy', got {value!r}") from None
        try:
            return cls(value)
        except ValueError:
            raise ParameterError(f"prior mode must be 0 (raw) or 1 (entropy), got {value!r}") from None


@dataclass(frozen=True, eq=False)
class PriorLayout:
    """The cluster keys a decoder expects at every prior stage."""

    levelk_keys: dict[int, np.ndarray]
    intermediate_keys: tuple[np.ndarray, ...] = ()

    @classmethod
    def from_prior(cls, prior: HierPrior) -> "PriorLayout":
        return cls(
            levelk_keys={
                c: np.fromiter(prior.levelk.tables[c], dtype=np.int64) for c in range(1, 8)
            },
            intermediate_keys=tuple(
                np.fromiter(level.table, dtype=np.int64) for level in prior.intermediates
            ),
        )

    def counts(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        levelk = tuple(len(self.levelk_keys.get(c, ())) for c in range(1, 8))
        return levelk, tuple(len(keys) for keys in self.intermediate_keys)

    def payload_bits(self) -> int:
        levelk, intermediates = self.counts()
        return sum(n * class_size(c) for c, n in enumerate(levelk, start=1)) + 8 * sum(intermediates)


class _BitWriter:
    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.filled = 0

    def write(self, value: int, width: int) -> None:
        for j in range(width - 1, -1, -1):
            self.acc = (self.acc << 1) | ((value >> j) & 1)
            self.filled += 1
            if self.filled == 8:
                self.out.append(self.acc)
                self.acc = 0
                self.filled = 0

    def pad(self) -> None:
        if self.filled:
            self.out.append(self.acc << (8 - self.filled))
            self.acc = 0
            self.filled = 0


def _pattern_stream(prior: HierPrior):
    """(pattern, width, group) in transmission order; group changes mark RAW padding."""
    for c in range(1, 8):
        for sigma in prior.levelk.tables[c].values():
            yield sigma, class_size(c), c
    for k, level in enumerate(prior.intermediates):
        for sigma in level.table.values():
            yield sigma, 8, 8 + k


def encode_prior(prior: HierPrior, mode: PriorMode = PriorMode.RAW) -> bytes:
    """Serialize the pattern values of ``prior``.

    Examples:
        >>> encode_prior(HierPrior(LevelKPrior({7: {0: 255}})))
        b'\\x00\\xff'
    """
    mode = PriorMode.parse(mode)
    if mode is PriorMode.RAW:
        writer = _BitWriter()
        group = None
        for sigma, width, current in _pattern_stream(prior):
            if current != group:
                writer.pad()
                group = current
            writer.write(sigma, width)
        writer.pad()
        payload = bytes(writer.out)
    else:
        encoder = BinEncoder()
        models = new_models(8)
        for sigma, width, _group in _pattern_stream(prior):
            for j in range(width - 1, -1, -1):
                encoder.encode((sigma >> j) & 1, models, j)
        payload = encoder.finish() if encoder.bits else b""
    logger.debug(
        "prior: %d pattern bits -> %d bytes (%s)", prior.payload_bits(), len(payload), mode.name
    )
    return bytes([mode]) + payload


class PriorReader:
    """Reads a prior stream stage by stage as the decoder learns the keys."""

    def __init__(self, data: bytes, mode: PriorMode | None = None):
        if len(data) < 1:
            raise PriorDesyncError(f"{_DESYNC}: empty prior stream")
        try:
            self.mode = PriorMode(data[0])
        except ValueError:
            raise PriorDesyncError(f"{_DESYNC}: unknown prior mode {data[0]}") from None
        if mode is not None and PriorMode.parse(mode) is not self.mode:
            raise PriorDesyncError(f"{_DESYNC}: stream mode {self.mode.name}, expected {mode}")
        self.data = data
        self.pos = 1
        self.bit = 0
        self._decoder: BinDecoder | None = None
        self._models = new_models(8)

    def _read_raw(self, width: int) -> int:
        value = 0
        for _ in range(width):
            if self.pos >= len(self.data):
                raise PriorDesyncError(f"{_DESYNC}: prior stream shorter than expected")
            value = (value << 1) | ((self.data[self.pos] >> (7 - self.bit)) & 1)
            self.bit += 1
            if self.bit == 8:
                self.bit = 0
                self.pos += 1
        return value

    def _align(self) -> None:
        if self.mode is PriorMode.RAW and self.bit:
            self.bit = 0
            self.pos += 1

    def _read_entropy(self, width: int) -> int:
        try:
            if self._decoder is None:
                self._decoder = BinDecoder(self.data, 1)
            value = 0
            for j in range(width - 1, -1, -1):
                value |= self._decoder.decode(self._models, j) << j
            return value
        except MalformedStreamError as exc:
            raise PriorDesyncError(f"{_DESYNC}: prior stream shorter than expected") from exc

    def _read(self, width: int) -> int:
        if self.mode is PriorMode.RAW:
            return self._read_raw(width)
        return self._read_entropy(width)

    def read_levelk(self, keys: dict[int, np.ndarray]) -> LevelKPrior:
        tables = {}
        for c in range(1, 8):
            width = class_size(c)
            tables[c] = {int(r): self._read(width) for r in keys.get(c, ())}
            self._align()
        return LevelKPrior(tables)

    def read_intermediate(self, keys: np.ndarray) -> IntermediatePrior:
        table = {int(r): self._read(8) for r in keys}
        return IntermediatePrior(table)

    def finish(self) -> None:
        """Check that the stream held exactly the expected patterns."""
        if self.mode is PriorMode.RAW:
            consumed = self.pos == len(self.data) and self.bit == 0
        elif self._decoder is None:
            consumed = len(self.data) == 1
        else:
            consumed = self._decoder.exhausted
        if not consumed:
            raise PriorDesyncError(f"{_DESYNC}: prior stream longer than expected")


def decode_prior(data: bytes, layout: PriorLayout, mode: PriorMode | None = None) -> HierPrior:
    """Decode a prior whose cluster keys are all known up front.

    Raises:
        PriorDesyncError: If the stream length does not match ``layout``.
    """
    reader = PriorReader(data, mode)
    levelk = reader.read_levelk(layout.levelk_keys)
    intermediates = tuple(reader.read_intermediate(keys) for keys in layout.intermediate_keys)
    reader.finish()
    return HierPrior(levelk=levelk, intermediates=intermediates)
