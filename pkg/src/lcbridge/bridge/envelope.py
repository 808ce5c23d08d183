"""The message a relay submits to the updater."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

from ..codec import DecodeError, Reader, Writer
from .chain import BlockHeader

ENVELOPE_MAGIC = b"LCBE"
ENVELOPE_VERSION = 1
MAX_BATCH = 1 << 10


@dataclass(frozen=True)
class RelayEnvelope:
    """
    headers is a parent-linked run of one or more headers; next_committees[j]
    is the key list committed by headers[j]; proof covers all of them at once.
    """

    identity: bytes
    parent: bytes
    headers: Tuple[BlockHeader, ...]
    next_committees: Tuple[Tuple[int, ...], ...]
    proof: bytes

    @property
    def header(self) -> BlockHeader:
        return self.headers[-1]

    @property
    def batch_size(self) -> int:
        return len(self.headers)

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(ENVELOPE_MAGIC).u8(ENVELOPE_VERSION)
        w.blob(self.identity).raw(self.parent)
        w.u32(len(self.headers))
        for h, com in zip(self.headers, self.next_committees):
            w.blob(h.to_bytes())
            w.felts(com)
        w.blob(self.proof)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RelayEnvelope":
        r = Reader(bytes(data))
        if r.raw(4) != ENVELOPE_MAGIC:
            raise DecodeError("not an envelope")
        if r.u8() != ENVELOPE_VERSION:
            raise DecodeError("unsupported envelope version")
        identity = r.blob()
        parent = r.raw(32)
        n = r.u32()
        if n == 0 or n > MAX_BATCH:
            raise DecodeError("bad batch size")
        headers: List[BlockHeader] = []
        coms = []
        for _ in range(n):
            headers.append(BlockHeader.from_bytes(r.blob()))
            coms.append(tuple(r.felts(limit=1 << 12)))
        proof = r.blob()
        r.expect_done()
        return cls(identity, parent, tuple(headers), tuple(coms), proof)
