"""Little-endian binary writer/reader shared by the proof and snapshot formats."""

from __future__ import annotations

import struct
from typing import List, Sequence

from .field import FIELD_BYTES, felt_from_bytes, felt_to_bytes


class DecodeError(ValueError):
    pass


class Writer:
    def __init__(self):
        self._parts: List[bytes] = []

    def u8(self, v: int):
        self._parts.append(struct.pack("<B", v))
        return self

    def u16(self, v: int):
        self._parts.append(struct.pack("<H", v))
        return self

    def u32(self, v: int):
        self._parts.append(struct.pack("<I", v))
        return self

    def u64(self, v: int):
        self._parts.append(struct.pack("<Q", v))
        return self

    def felt(self, v: int):
        self._parts.append(felt_to_bytes(v))
        return self

    def felts(self, vs: Sequence[int]):
        self.u32(len(vs))
        for v in vs:
            self.felt(v)
        return self

    def raw(self, b: bytes):
        self._parts.append(bytes(b))
        return self

    def blob(self, b: bytes):
        self.u32(len(b))
        self._parts.append(bytes(b))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(bytes(data))
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("unexpected end of data")
        out = bytes(self.data[self.pos: self.pos + n])
        self.pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def felt(self) -> int:
        try:
            return felt_from_bytes(self._take(FIELD_BYTES))
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc

    def felts(self, limit: int = 1 << 24) -> List[int]:
        n = self.u32()
        if n > limit or n * FIELD_BYTES > len(self.data) - self.pos:
            raise DecodeError("field vector length out of range")
        return [self.felt() for _ in range(n)]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def done(self) -> bool:
        return self.pos == len(self.data)

    def expect_done(self):
        if not self.done():
            raise DecodeError("trailing bytes")
