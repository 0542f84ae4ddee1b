"""Adaptive binary range coder.

A 32-bit range coder with carry propagation and byte-wise renormalization
once the range drops below 2^24. Each context is an adaptive model holding
P(bit = 0) in 12 bits, initialized to 1/2 and updated with shift 5.

Streams produced by ``BinEncoder.finish`` are consumed to the last byte by
``BinDecoder``, so a truncated stream is always detected.
"""

from __future__ import annotations

from .errors import MalformedStreamError

CODER_VERSION = 1

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


def new_models(count: int) -> list[int]:
    """A fresh table of ``count`` adaptive bit models."""
    return [PROB_INIT] * count


class BinEncoder:
    """Encodes bits under adaptive models into a byte string."""

    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()
        self.bits = 0

    def _shift_low(self) -> None:
        low = self.low
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            temp = self.cache
            while True:
                self.out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if self.cache_size == 0:
                    break
            self.cache = (low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def encode(self, bit: int, models: list[int], ctx: int) -> None:
        prob = models[ctx]
        bound = (self.range >> PROB_BITS) * prob
        if bit:
            self.low += bound
            self.range -= bound
            models[ctx] = prob - (prob >> ADAPT_SHIFT)
        else:
            self.range = bound
            models[ctx] = prob + ((PROB_ONE - prob) >> ADAPT_SHIFT)
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()
        self.bits += 1

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class BinDecoder:
    """Decodes bits produced by ``BinEncoder`` with identical model updates."""

    def __init__(self, data: bytes, offset: int = 0):
        self.data = data
        self.pos = offset
        if len(data) - offset < 5:
            raise MalformedStreamError("malformed base stream: arithmetic payload too short")
        self.code = 0
        self.range = _MASK32
        for _ in range(5):
            self.code = ((self.code << 8) | data[self.pos]) & _MASK32
            self.pos += 1

    def decode(self, models: list[int], ctx: int) -> int:
        prob = models[ctx]
        bound = (self.range >> PROB_BITS) * prob
        if self.code < bound:
            self.range = bound
            models[ctx] = prob + ((PROB_ONE - prob) >> ADAPT_SHIFT)
            bit = 0
        else:
            self.code -= bound
            self.range -= bound
            models[ctx] = prob - (prob >> ADAPT_SHIFT)
            bit = 1
        while self.range < _TOP:
            if self.pos >= len(self.data):
                raise MalformedStreamError("malformed base stream: truncated arithmetic payload")
            self.range <<= 8
            self.code = ((self.code << 8) | self.data[self.pos]) & _MASK32
            self.pos += 1
        return bit

    @property
    def exhausted(self) -> bool:
        """True when every byte of the stream has been consumed."""
        return self.pos == len(self.data)
