"""Binary Merkle trees over byte-string leaves (SHA-256, 0x00/0x01 domain separation)."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple

DIGEST_SIZE = 32


def hash_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def leaf_hash(leaf: bytes) -> bytes:
    return hash_bytes(b"\x00" + struct.pack("<Q", len(leaf)) + leaf)


def node_hash(left: bytes, right: bytes) -> bytes:
    return hash_bytes(b"\x01" + left + right)


EMPTY_LEAF = leaf_hash(b"")


@dataclass(frozen=True)
class MerkleRoot:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_SIZE:
            raise ValueError("Merkle root must be 32 bytes")

    def hex(self) -> str:
        return self.digest.hex()


@dataclass(frozen=True)
class MerklePath:
    leaf_index: int
    siblings: Tuple[bytes, ...]

    def to_bytes(self) -> bytes:
        return (
            struct.pack("<QH", self.leaf_index, len(self.siblings))
            + b"".join(self.siblings)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "MerklePath":
        path, rest = cls.read(data)
        if rest:
            raise ValueError("trailing bytes after Merkle path")
        return path

    @classmethod
    def read(cls, data: bytes) -> Tuple["MerklePath", bytes]:
        if len(data) < 10:
            raise ValueError("truncated Merkle path")
        index, count = struct.unpack_from("<QH", data)
        end = 10 + DIGEST_SIZE * count
        if len(data) < end:
            raise ValueError("truncated Merkle path")
        sibs = tuple(data[10 + DIGEST_SIZE * i: 10 + DIGEST_SIZE * (i + 1)] for i in range(count))
        return cls(index, sibs), data[end:]


class MerkleTree:
    """All levels kept in memory so repeated openings cost O(log n)."""

    def __init__(self, leaves: Sequence[bytes]):
        if len(leaves) == 0:
            raise ValueError("cannot commit to an empty vector")
        self.num_leaves = len(leaves)
        size = 1
        while size < len(leaves):
            size <<= 1
        level = [leaf_hash(x) for x in leaves] + [EMPTY_LEAF] * (size - len(leaves))
        self.levels: List[List[bytes]] = [level]
        while len(level) > 1:
            level = [node_hash(level[2 * i], level[2 * i + 1]) for i in range(len(level) // 2)]
            self.levels.append(level)

    @classmethod
    def from_leaf_hashes(cls, hashes: Sequence[bytes]) -> "MerkleTree":
        tree = cls.__new__(cls)
        tree.num_leaves = len(hashes)
        size = 1
        while size < len(hashes):
            size <<= 1
        level = list(hashes) + [EMPTY_LEAF] * (size - len(hashes))
        tree.levels = [level]
        while len(level) > 1:
            level = [node_hash(level[2 * i], level[2 * i + 1]) for i in range(len(level) // 2)]
            tree.levels.append(level)
        return tree

    @property
    def root(self) -> MerkleRoot:
        return MerkleRoot(self.levels[-1][0])

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def path(self, index: int) -> MerklePath:
        if not 0 <= index < self.num_leaves:
            raise IndexError(f"leaf index {index} out of range for {self.num_leaves} leaves")
        sibs = []
        i = index
        for level in self.levels[:-1]:
            sibs.append(level[i ^ 1])
            i >>= 1
        return MerklePath(index, tuple(sibs))


def mt_commit(leaves: Sequence[bytes]) -> MerkleRoot:
    return MerkleTree(leaves).root


def mt_open(leaves: Sequence[bytes], i: int) -> Tuple[bytes, MerklePath]:
    if not 0 <= i < len(leaves):
        raise IndexError(f"leaf index {i} out of range for {len(leaves)} leaves")
    return leaves[i], MerkleTree(leaves).path(i)


def root_from_leaf_hash(path: MerklePath, digest: bytes) -> bytes:
    i = path.leaf_index
    for sib in path.siblings:
        digest = node_hash(sib, digest) if i & 1 else node_hash(digest, sib)
        i >>= 1
    if i != 0:
        raise ValueError("leaf index exceeds tree capacity")
    return digest


def verify_leaf_hash(path: MerklePath, digest: bytes, root: MerkleRoot) -> bool:
    try:
        return root_from_leaf_hash(path, digest) == root.digest
    except ValueError:
        return False


def mt_verify(path: MerklePath, leaf: bytes, root: MerkleRoot) -> bool:
    return verify_leaf_hash(path, leaf_hash(leaf), root)
