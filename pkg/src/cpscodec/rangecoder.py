"""Byte-oriented renormalizing range coder.

Classic carry-counting construction: 32-bit range, 64-bit low, one
pending byte plus a run of 0xFF bytes that a late carry may still bump.
All frequency tables must have total mass 2**16 with every symbol given
at least one count. The coder is strictly sequential per stream; that is
its contract. Output is deterministic to the byte.
"""

from __future__ import annotations

from .errors import DecodeError

TOTAL_BITS = 16
TOTAL = 1 << TOTAL_BITS
TOP = 1 << 24
MASK32 = (1 << 32) - 1
FLUSH_BYTES = 5  # bytes emitted by finish(); also the decoder's preload


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def _shift_low(self):
        if self.low < 0xFF000000 or self.low > MASK32:
            carry = self.low >> 32
            # cache and any pending 0xFF run are finalized now
            while self.cache_size:
                self.out.append((self.cache + carry) & 0xFF)
                self.cache = 0xFF
                self.cache_size -= 1
            self.cache = (self.low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode(self, cum_lo: int, cum_hi: int):
        """Narrow the interval to [cum_lo, cum_hi) / 2**16 of its width."""
        r = self.range >> TOTAL_BITS
        self.low += r * cum_lo
        self.range = r * (cum_hi - cum_lo)
        while self.range < TOP:
            self._shift_low()
            self.range <<= 8

    def finish(self) -> bytes:
        for _ in range(FLUSH_BYTES):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.range = MASK32
        self.code = 0
        for _ in range(FLUSH_BYTES):
            self.code = ((self.code << 8) | self._byte()) & MASK32

    def _byte(self) -> int:
        if self.pos >= len(self.data):
            raise DecodeError("range-coded stream truncated")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def threshold(self) -> int:
        """Scaled position of the code inside the current interval; the
        caller looks up the symbol whose [cum_lo, cum_hi) contains it."""
        self._r = self.range >> TOTAL_BITS
        t = self.code // self._r
        if t >= TOTAL:
            raise DecodeError("corrupt stream: threshold out of range")
        return t

    def consume(self, cum_lo: int, cum_hi: int):
        self.code -= self._r * cum_lo
        self.range = self._r * (cum_hi - cum_lo)
        while self.range < TOP:
            self.code = ((self.code << 8) | self._byte()) & MASK32
            self.range <<= 8
