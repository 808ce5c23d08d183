"""
Sender-chain data model and a deterministic BFT-style chain simulator.

A header carries the digest of its parent, the Merkle root of its
transactions and a commitment to the committee that signs the *next*
header. Signatures are not part of the digest.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ..codec import DecodeError, Reader, Writer
from ..field import P, felt_to_bytes
from ..merkle import MerklePath, mt_commit, mt_open
from ..sigcircuit import DEFAULT_ROUNDS, keygen, sign

ZERO_DIGEST = bytes(32)
DEFAULT_QUORUM = Fraction(2, 3)


def committee_commitment(pks: Sequence[int]) -> bytes:
    h = hashlib.sha256(b"lcbridge/committee")
    h.update(len(pks).to_bytes(4, "little"))
    for pk in pks:
        h.update(felt_to_bytes(pk))
    return h.digest()


def quorum_size(committee_size: int, threshold: Fraction = DEFAULT_QUORUM) -> int:
    """Smallest signer count whose share of the committee reaches the threshold."""
    need = threshold * committee_size
    return max(1, -(-need.numerator // need.denominator))


@dataclass(frozen=True)
class BlockHeader:
    height: int
    parent: bytes
    tx_root: bytes
    validator_commitment: bytes
    signatures: Tuple[Tuple[int, int], ...] = ()

    def unsigned_bytes(self) -> bytes:
        w = Writer()
        w.raw(b"HDR1").u64(self.height).raw(self.parent).raw(self.tx_root).raw(self.validator_commitment)
        return w.getvalue()

    @property
    def digest(self) -> bytes:
        return hashlib.sha256(self.unsigned_bytes()).digest()

    def signers(self) -> List[int]:
        return [i for i, _ in self.signatures]

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(self.unsigned_bytes()).u32(len(self.signatures))
        for idx, sigma in self.signatures:
            w.u32(idx).felt(sigma)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "BlockHeader":
        if r.raw(4) != b"HDR1":
            raise DecodeError("not a header")
        height = r.u64()
        parent, tx_root, vc = r.raw(32), r.raw(32), r.raw(32)
        n = r.u32()
        if n > 1 << 12:
            raise DecodeError("too many signatures")
        sigs = tuple((r.u32(), r.felt()) for _ in range(n))
        return cls(height, parent, tx_root, vc, sigs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BlockHeader":
        r = Reader(data)
        h = cls.read(r)
        r.expect_done()
        return h


@dataclass
class Block:
    header: BlockHeader
    txs: List[bytes]

    def tx_path(self, index: int) -> Tuple[bytes, MerklePath]:
        return mt_open(self.txs, index)


def tx_root_of(txs: Sequence[bytes]) -> bytes:
    return mt_commit(list(txs)).digest if txs else mt_commit([b""]).digest


@dataclass
class Committee:
    epoch: int
    sks: List[int]
    pks: List[int]

    @property
    def commitment(self) -> bytes:
        return committee_commitment(self.pks)

    def __len__(self):
        return len(self.pks)


@dataclass
class ChainParams:
    committee_size: int = 4
    quorum: Fraction = DEFAULT_QUORUM
    rotate_every: int = 4
    rounds: int = DEFAULT_ROUNDS
    message_length: int = 1

    @property
    def quorum_count(self) -> int:
        return quorum_size(self.committee_size, self.quorum)


class KeyVault:
    """
    Secret keys indexed by public key. The toy signature relation needs the
    signer's key as witness, so whoever proves the light-client rule holds one.
    """

    def __init__(self):
        self._keys: Dict[int, int] = {}

    def add(self, sk: int, pk: int):
        self._keys[pk % P] = sk

    def get(self, pk: int) -> Optional[int]:
        return self._keys.get(pk % P)

    def __contains__(self, pk: int) -> bool:
        return pk % P in self._keys


class ChainSimulator:
    """
    Produces a canonical chain plus optional side branches. Every block is
    signed by a quorum of the committee committed in its parent.
    """

    def __init__(self, seed: int = 0, params: ChainParams = ChainParams()):
        self.seed = seed
        self.params = params
        self.vault = KeyVault()
        self._committees: Dict[int, Committee] = {}
        self.directory: Dict[bytes, Tuple[int, ...]] = {}  # commitment -> public keys, public data
        self.blocks: Dict[bytes, Block] = {}
        self.children: Dict[bytes, List[bytes]] = {}
        self.produced: List[bytes] = []  # creation order, forks included
        self.canonical: List[bytes] = []
        genesis = self._make_block(None, [b"genesis"], signers=[])
        self.canonical.append(genesis.header.digest)

    # committees rotate by epoch; the header at height h commits the committee for h + 1
    def committee_for_height(self, height: int) -> Committee:
        epoch = max(0, height - 2) // self.params.rotate_every
        if epoch not in self._committees:
            keys = [keygen(f"{self.seed}/{epoch}/{i}".encode(), self.params.rounds)
                    for i in range(self.params.committee_size)]
            com = Committee(epoch, [k[0] for k in keys], [k[1] for k in keys])
            for sk, pk in keys:
                self.vault.add(sk, pk)
            self._committees[epoch] = com
            self.directory[com.commitment] = tuple(com.pks)
        return self._committees[epoch]

    @property
    def genesis(self) -> Block:
        return self.blocks[self.canonical[0]]

    @property
    def tip(self) -> Block:
        return self.blocks[self.canonical[-1]]

    def canonical_headers(self) -> List[BlockHeader]:
        return [self.blocks[d].header for d in self.canonical]

    def block_at(self, height: int) -> Optional[Block]:
        if 1 <= height <= len(self.canonical):
            return self.blocks[self.canonical[height - 1]]
        return None

    def _block_rng(self, parent_digest: bytes) -> random.Random:
        """Block contents depend only on the seed and the position in the tree, not on scheduling."""
        n = len(self.children.get(parent_digest, ()))
        return random.Random(hashlib.sha256(f"{self.seed}/".encode() + parent_digest + n.to_bytes(4, "little")).digest())

    def _make_block(self, parent: Optional[Block], txs: Optional[Sequence[bytes]], signers=None) -> Block:
        height = 1 if parent is None else parent.header.height + 1
        parent_digest = ZERO_DIGEST if parent is None else parent.header.digest
        rng = self._block_rng(parent_digest)
        if txs is None:
            txs = [b"tx:" + rng.randbytes(12) for _ in range(rng.randint(1, 4))]
        if signers is None:
            n = self.params.committee_size
            signers = rng.sample(range(n), rng.randint(self.params.quorum_count, n))
        nxt = self.committee_for_height(height + 1)
        unsigned = BlockHeader(height, parent_digest, tx_root_of(txs), nxt.commitment)
        signing = self.committee_for_height(height)
        d = unsigned.digest
        sigs = tuple((i, sign(signing.sks[i], d, self.params.message_length, self.params.rounds))
                     for i in sorted(signers))
        block = Block(replace(unsigned, signatures=sigs), list(txs))
        digest = block.header.digest
        self.blocks[digest] = block
        self.produced.append(digest)
        self.children.setdefault(parent_digest, []).append(digest)
        return block

    def produce_block(self, txs: Optional[Sequence[bytes]] = None, signers=None) -> Block:
        """Extend the canonical chain by one block; contents are drawn when not given."""
        block = self._make_block(self.tip, txs, signers)
        self.canonical.append(block.header.digest)
        return block

    def inject_fork(self, depth: int, length: int) -> List[Block]:
        """A side branch of `length` blocks whose first block's parent is `depth` below the tip."""
        if depth < 0 or depth >= len(self.canonical):
            raise ValueError("fork point is outside the chain")
        parent = self.blocks[self.canonical[-1 - depth]]
        out = []
        for _ in range(length):
            parent = self._make_block(parent, None)
            out.append(parent)
        return out

    def all_blocks(self, upto: Optional[int] = None) -> List[Block]:
        """Blocks in (height, digest) order; upto limits to the first blocks produced."""
        ds = self.produced if upto is None else self.produced[:max(1, upto)]
        return sorted((self.blocks[d] for d in ds), key=lambda b: (b.header.height, b.header.digest))


class FullNode:
    """Serves the blocks the simulator has produced, except the `lag` most recent ones."""

    def __init__(self, chain: ChainSimulator, name: str = "node", lag: int = 0):
        self.chain = chain
        self.name = name
        self.lag = lag

    def visible(self) -> int:
        return len(self.chain.produced) - self.lag

    def headers(self) -> List[BlockHeader]:
        return [b.header for b in self.chain.all_blocks(self.visible())]

    def block(self, digest: bytes) -> Optional[Block]:
        if digest not in self.chain.produced[:max(1, self.visible())]:
            return None
        return self.chain.blocks[digest]


class ForgingFullNode(FullNode):
    """Replaces every non-genesis header it serves with a tampered copy."""

    def __init__(self, chain: ChainSimulator, name: str = "forger", lag: int = 0, mode: str = "tx_root"):
        super().__init__(chain, name, lag)
        self.mode = mode

    def forge(self, h: BlockHeader) -> BlockHeader:
        if self.mode == "signatures":
            sigs = tuple((i, (s + 1) % P) for i, s in h.signatures)
            return replace(h, signatures=sigs)
        return replace(h, tx_root=hashlib.sha256(b"forged" + h.tx_root).digest())

    def headers(self) -> List[BlockHeader]:
        return [h if h.height == 1 else self.forge(h) for h in super().headers()]
