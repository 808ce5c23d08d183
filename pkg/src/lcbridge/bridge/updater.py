"""
Receiver-side state machine: a DAG of verified headers, the light-client
state attached to each of them, fork choice, and transaction inclusion.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..codec import DecodeError, Reader, Writer
from ..merkle import MerklePath, MerkleRoot, mt_commit, mt_verify
from ..sigcircuit import DEFAULT_ROUNDS, expected_output
from ..virgo import ProofParams, virgo_verify
from .chain import DEFAULT_QUORUM, BlockHeader, committee_commitment
from .envelope import RelayEnvelope
from .lightclient import LightClientState, batch_public, copies_for, statement_circuit, structural_check

log = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"LCBS"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class BridgeParams:
    committee_size: int = 4
    quorum: Fraction = DEFAULT_QUORUM
    message_length: int = 1
    rounds: int = DEFAULT_ROUNDS
    rho: int = 8
    queries: int = 16
    confirmations: int = 2

    @property
    def n_sig(self) -> int:
        return copies_for(self.committee_size)

    @property
    def proof_params(self) -> ProofParams:
        return ProofParams(self.rho, self.queries)

    def write(self, w: Writer):
        w.u32(self.committee_size).u32(self.quorum.numerator).u32(self.quorum.denominator)
        w.u32(self.message_length).u32(self.rounds).u32(self.rho).u32(self.queries).u32(self.confirmations)

    @classmethod
    def read(cls, r: Reader) -> "BridgeParams":
        cs, qn, qd = r.u32(), r.u32(), r.u32()
        if qd == 0:
            raise DecodeError("zero quorum denominator")
        return cls(cs, Fraction(qn, qd), r.u32(), r.u32(), r.u32(), r.u32(), r.u32())


@dataclass
class DagNode:
    header: BlockHeader
    weight: int
    next_committee: Tuple[int, ...]
    lcs: LightClientState
    order: int

    @property
    def digest(self) -> bytes:
        return self.header.digest


@dataclass
class HeaderInfo:
    header: BlockHeader
    lcs: LightClientState
    on_main_chain: bool
    confirmations: int


class HeaderDag:
    def __init__(self, genesis: BlockHeader, genesis_committee: Sequence[int], quorum: Fraction):
        if genesis.validator_commitment != committee_commitment(genesis_committee):
            raise ValueError("genesis committee does not match the genesis commitment")
        lcs = LightClientState(tuple(genesis_committee), genesis.digest, genesis.height, quorum)
        self.genesis = DagNode(genesis, 1, tuple(genesis_committee), lcs, 0)
        self.nodes: Dict[bytes, DagNode] = {genesis.digest: self.genesis}
        self.order: List[bytes] = [genesis.digest]
        self.batch_roots: Dict[int, bytes] = {}
        self.best = self.genesis

    def __contains__(self, digest: bytes) -> bool:
        return digest in self.nodes

    def __len__(self):
        return len(self.nodes)

    def get(self, digest: bytes) -> Optional[DagNode]:
        return self.nodes.get(digest)

    def insert(self, header: BlockHeader, next_committee: Sequence[int]) -> DagNode:
        parent = self.nodes[header.parent]
        node = DagNode(header, parent.weight + 1, tuple(next_committee),
                       parent.lcs.advance(header, next_committee), len(self.order))
        self.nodes[node.digest] = node
        self.order.append(node.digest)
        b = self.best
        if node.weight > b.weight or (node.weight == b.weight and node.digest < b.digest):
            self.best = node
        return node

    def path_to(self, node: DagNode) -> List[DagNode]:
        out = [node]
        while out[-1].header.height > self.genesis.header.height:
            out.append(self.nodes[out[-1].header.parent])
        out.reverse()
        return out

    def tips(self) -> List[DagNode]:
        parents = {n.header.parent for n in self.nodes.values()}
        return [n for d, n in self.nodes.items() if d not in parents]


def main_chain(dag: HeaderDag, confirmations: int) -> List[BlockHeader]:
    """Heaviest path from genesis (ties to the smaller tip digest), minus the last K headers."""
    path = dag.path_to(dag.best)
    keep = len(path) - confirmations
    return [n.header for n in path[:max(0, keep)]]


class Updater:
    """
    Accepts envelopes whose proof shows that each header passes the light
    client rule against the state recorded for its parent.
    """

    def __init__(self, genesis: BlockHeader, genesis_committee: Sequence[int], params: BridgeParams = BridgeParams()):
        self.params = params
        self.dag = HeaderDag(genesis, genesis_committee, params.quorum)
        self.counters: Counter = Counter()
        self.last_reason = ""
        self.accepted_envelopes = 0

    # -- state views ------------------------------------------------------------
    @property
    def lcs(self) -> LightClientState:
        return self.dag.best.lcs

    @property
    def tip(self) -> BlockHeader:
        return self.dag.best.header

    def main_chain(self, confirmations: Optional[int] = None) -> List[BlockHeader]:
        k = self.params.confirmations if confirmations is None else confirmations
        return main_chain(self.dag, k)

    def get_header(self, t: Union[int, bytes]) -> Optional[HeaderInfo]:
        """t is a height (resolved on the heaviest path) or a header digest. None means wait."""
        path = self.dag.path_to(self.dag.best)
        if isinstance(t, int):
            i = t - self.dag.genesis.header.height
            if i < 0 or i >= len(path):
                return None
            node = path[i]
        else:
            node = self.dag.get(bytes(t))
            if node is None:
                return None
        i = node.header.height - self.dag.genesis.header.height
        on_path = i < len(path) and path[i].digest == node.digest
        depth = len(path) - 1 - i if on_path else 0
        return HeaderInfo(node.header, self.lcs, on_path and depth >= self.params.confirmations, depth)

    def verify_tx_inclusion(self, t: Union[int, bytes], tx: bytes, path: MerklePath) -> bool:
        info = self.get_header(t)
        if info is None or not info.on_main_chain:
            return False
        return mt_verify(path, tx, MerkleRoot(info.header.tx_root))

    # -- updates --------------------------------------------------------------------
    def _reject(self, reason: str) -> bool:
        self.last_reason = reason
        self.counters["rejected"] += 1
        log.debug("envelope rejected: %s", reason)
        return False

    def header_update(self, envelope: Union[RelayEnvelope, bytes]) -> bool:
        """Apply one envelope (a batch of one or more headers) atomically."""
        self.counters["envelopes"] += 1
        if not isinstance(envelope, RelayEnvelope):
            try:
                envelope = RelayEnvelope.from_bytes(envelope)
            except (DecodeError, ValueError):
                return self._reject("malformed envelope")
        headers = envelope.headers
        b = len(headers)
        if b & (b - 1) or len(envelope.next_committees) != b:
            return self._reject("batch size is not a power of two")
        self.counters["lookups"] += 1
        parent = self.dag.get(envelope.parent)
        if parent is None:
            return self._reject("parent not in the DAG")
        committees = []
        prev, lcs = parent.header, parent.lcs
        for h, nxt_com in zip(headers, envelope.next_committees):
            why = structural_check(lcs, prev, h)
            if why is not None:
                return self._reject(why)
            if len(h.signatures) > self.params.n_sig:
                return self._reject("more signatures than the statement holds")
            if committee_commitment(nxt_com) != h.validator_commitment:
                return self._reject("next committee does not match the header's commitment")
            committees.append(lcs.committee)
            prev, lcs = h, lcs.advance(h, nxt_com)
        n_sig = self.params.n_sig
        try:
            public = batch_public(headers, committees, n_sig, self.params.message_length)
        except (ValueError, IndexError):
            return self._reject("cannot build the statement")
        circuit = statement_circuit(b, n_sig, self.params.message_length, self.params.rounds)
        self.counters["verifications"] += 1
        if not virgo_verify(circuit, public, expected_output(b * n_sig), envelope.proof,
                            envelope.identity, self.params.proof_params):
            return self._reject("proof does not verify")
        fresh = [(h, c) for h, c in zip(headers, envelope.next_committees) if h.digest not in self.dag]
        if not fresh:
            self.last_reason = "duplicate"
            return True
        for h, c in fresh:
            self.dag.insert(h, c)
            self.counters["inserts"] += 1
            self.counters["lcs_updates"] += 1
        self.dag.batch_roots[len(self.dag.batch_roots)] = mt_commit([h.digest for h in headers]).digest
        self.accepted_envelopes += 1
        self.last_reason = "accepted"
        return True

    # -- snapshots ----------------------------------------------------------------
    def snapshot(self) -> bytes:
        w = Writer()
        w.raw(SNAPSHOT_MAGIC).u8(SNAPSHOT_VERSION)
        self.params.write(w)
        w.blob(self.dag.genesis.header.to_bytes())
        w.felts(self.dag.genesis.next_committee)
        w.u32(len(self.dag.order) - 1)
        for d in self.dag.order[1:]:
            node = self.dag.nodes[d]
            w.blob(node.header.to_bytes())
            w.felts(node.next_committee)
        w.u32(len(self.dag.batch_roots))
        for i in sorted(self.dag.batch_roots):
            w.u32(i).raw(self.dag.batch_roots[i])
        return w.getvalue()

    @classmethod
    def load(cls, data: bytes) -> "Updater":
        r = Reader(data)
        if r.raw(4) != SNAPSHOT_MAGIC:
            raise DecodeError("not an updater snapshot")
        if r.u8() != SNAPSHOT_VERSION:
            raise DecodeError("unsupported snapshot version")
        params = BridgeParams.read(r)
        genesis = BlockHeader.from_bytes(r.blob())
        up = cls(genesis, r.felts(limit=1 << 12), params)
        for _ in range(r.u32()):
            h = BlockHeader.from_bytes(r.blob())
            com = r.felts(limit=1 << 12)
            if h.parent not in up.dag or committee_commitment(com) != h.validator_commitment:
                raise DecodeError("snapshot node does not link into the DAG")
            up.dag.insert(h, com)
        for _ in range(r.u32()):
            i = r.u32()
            up.dag.batch_roots[i] = r.raw(32)
        r.expect_done()
        return up
