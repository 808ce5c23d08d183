"""Fiat-Shamir transcript: a SHA-256 chain over labelled, length-prefixed messages."""

from __future__ import annotations

import hashlib
import struct
from typing import List, Sequence

from .field import P, felt_to_bytes


def _h(*parts: bytes) -> bytes:
    m = hashlib.sha256()
    for p in parts:
        m.update(p)
    return m.digest()


def _lp(data: bytes) -> bytes:
    return struct.pack("<I", len(data)) + data


class Transcript:
    """
    Every challenge is a function of the domain label, the prover identity
    and every message absorbed before it. Two transcripts fed the same
    sequence produce the same challenges; a different identity changes all
    of them, which is what binds a proof to the relay that produced it.
    """

    def __init__(self, label: bytes, identity: bytes = b""):
        if isinstance(label, str):
            label = label.encode()
        if isinstance(identity, str):
            identity = identity.encode()
        self.label = label
        self.identity = identity
        self._state = _h(b"lcbridge/transcript/v1", _lp(label), _lp(identity))
        self._counter = 0

    def copy(self) -> "Transcript":
        t = Transcript.__new__(Transcript)
        t.label, t.identity = self.label, self.identity
        t._state, t._counter = self._state, self._counter
        return t

    @property
    def state(self) -> bytes:
        return self._state

    def absorb(self, tag: str, data: bytes):
        self._state = _h(self._state, b"\x01", _lp(tag.encode()), _lp(bytes(data)))

    def absorb_felts(self, tag: str, values: Sequence[int]):
        self.absorb(tag, struct.pack("<I", len(values)) + b"".join(felt_to_bytes(v) for v in values))

    def absorb_felt(self, tag: str, value: int):
        self.absorb(tag, felt_to_bytes(value))

    def _squeeze(self, tag: str) -> bytes:
        out = _h(self._state, b"\x02", _lp(tag.encode()), struct.pack("<Q", self._counter))
        self._counter += 1
        self._state = _h(self._state, b"\x03", out)
        return out

    def challenge(self, tag: str = "chal") -> int:
        # 128 bits reduced mod a 64-bit prime: bias below 2^-64
        return int.from_bytes(self._squeeze(tag)[:16], "little") % P

    def challenges(self, tag: str, n: int) -> List[int]:
        return [self.challenge(tag) for _ in range(n)]

    def challenge_index(self, tag: str, bound: int) -> int:
        if bound <= 0:
            raise ValueError("index bound must be positive")
        return int.from_bytes(self._squeeze(tag)[:16], "little") % bound
