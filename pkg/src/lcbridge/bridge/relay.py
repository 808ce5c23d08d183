"""
Relay nodes: fetch headers from several full nodes, keep the ones a
majority agrees on, prove the light-client rule for them and submit.
"""

from __future__ import annotations

import logging
import random
from dataclasses import replace
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

from ..devirgo.cluster import Cluster
from ..field import P
from ..devirgo.prover import devirgo_prove
from ..virgo import virgo_prove
from .chain import BlockHeader, FullNode, KeyVault
from .envelope import RelayEnvelope
from .lightclient import batch_witness_inputs, statement_circuit
from .updater import BridgeParams, Updater

log = logging.getLogger(__name__)


class RetrySignal(Exception):
    """Nothing to relay right now: no header is both new and agreed on by a majority."""


def agreed_headers(nodes: Sequence[FullNode]) -> List[BlockHeader]:
    """Headers served identically by a strict majority of the nodes."""
    if not nodes:
        raise ValueError("at least one full node is required")
    votes: Counter = Counter()
    by_bytes: Dict[bytes, BlockHeader] = {}
    for node in nodes:
        seen = set()
        for h in node.headers():
            raw = h.to_bytes()
            if raw not in seen:
                seen.add(raw)
                votes[raw] += 1
                by_bytes[raw] = h
    need = len(nodes) // 2 + 1
    out = [by_bytes[raw] for raw, n in votes.items() if n >= need]
    out.sort(key=lambda h: (h.height, h.digest))
    return out


class Relay:
    def __init__(self, identity: bytes, vault: Optional[KeyVault], committees: Dict[bytes, Tuple[int, ...]],
                 params: BridgeParams = BridgeParams(), cluster: Optional[Cluster] = None,
                 cache: Optional[Dict] = None):
        """
        committees maps a validator commitment to its key list (public data a
        relay learns from the sender chain). vault is the signing material the
        relay uses as witness; without it the relay cannot prove anything.
        cache may be shared between relays with the same identity and params.
        """
        self.identity = identity
        self.vault = vault
        self.committees = committees
        self.params = params
        self.cluster = cluster
        self.cache: Dict[Tuple[bytes, ...], RelayEnvelope] = {} if cache is None else cache
        self.proofs_made = 0
        self.last_stats = None

    def committee_for(self, commitment: bytes) -> Tuple[int, ...]:
        com = self.committees.get(commitment)
        if com is None:
            raise ValueError("unknown committee commitment")
        return tuple(com)

    def prove(self, parent: BlockHeader, headers: Sequence[BlockHeader]) -> RelayEnvelope:
        """Envelope for a parent-linked run of headers starting right after `parent`."""
        if not headers:
            raise ValueError("nothing to prove")
        prev = parent
        for h in headers:
            if h.parent != prev.digest or h.height != prev.height + 1:
                raise ValueError("headers do not form a parent-linked run")
            prev = h
        key = (self.identity, parent.digest) + tuple(h.digest for h in headers)
        hit = self.cache.get(key)
        if hit is not None and [h.to_bytes() for h in hit.headers] == [h.to_bytes() for h in headers]:
            return hit
        if self.vault is None:
            raise PermissionError("relay holds no signing material")
        signers = [self.committee_for(parent.validator_commitment)]
        signers += [self.committee_for(h.validator_commitment) for h in headers[:-1]]
        nexts = tuple(self.committee_for(h.validator_commitment) for h in headers)
        p = self.params
        circuit = statement_circuit(len(headers), p.n_sig, p.message_length, p.rounds)
        inputs = batch_witness_inputs(headers, signers, p.n_sig, self.vault, p.message_length)
        if self.cluster is not None:
            proof, self.last_stats = devirgo_prove(self.cluster, circuit, inputs, self.identity, p.proof_params)
        else:
            proof = virgo_prove(circuit, inputs, self.identity, p.proof_params)
        self.proofs_made += 1
        env = RelayEnvelope(self.identity, parent.digest, tuple(headers), nexts, proof.to_bytes())
        self.cache[key] = env
        return env

    def candidates(self, updater: Updater, nodes: Sequence[FullNode]) -> List[BlockHeader]:
        agreed = agreed_headers(nodes)
        return [h for h in agreed if h.digest not in updater.dag]

    def relay_next_header(self, updater: Updater, nodes: Sequence[FullNode]) -> RelayEnvelope:
        """Envelope for the lowest new agreed header whose parent the updater already holds."""
        for h in self.candidates(updater, nodes):
            parent = updater.dag.get(h.parent)
            if parent is not None:
                return self.prove(parent.header, [h])
        raise RetrySignal("no agreed header extends the updater's DAG")

    def relay_batch(self, updater: Updater, nodes: Sequence[FullNode], size: int) -> RelayEnvelope:
        """Envelope for `size` consecutive agreed headers extending the updater's tip."""
        agreed = {h.digest: h for h in self.candidates(updater, nodes)}
        by_parent: Dict[bytes, BlockHeader] = {}
        for h in sorted(agreed.values(), key=lambda h: h.digest):
            by_parent.setdefault(h.parent, h)
        run, cur = [], updater.tip.digest
        while len(run) < size and cur in by_parent:
            run.append(by_parent[cur])
            cur = run[-1].digest
        if len(run) < size:
            raise RetrySignal(f"only {len(run)} agreed headers extend the tip")
        return self.prove(updater.tip, run)

    def sync(self, updater: Updater, nodes: Sequence[FullNode], limit: Optional[int] = None) -> int:
        """Relay headers until nothing new is agreed on; returns how many were accepted."""
        accepted = 0
        while limit is None or accepted < limit:
            try:
                env = self.relay_next_header(updater, nodes)
            except RetrySignal:
                break
            if not updater.header_update(env):
                log.warning("own envelope rejected: %s", updater.last_reason)
                break
            accepted += 1
        return accepted


def batch_prove_and_update(relay: Relay, updater: Updater, parent: BlockHeader, headers: Sequence[BlockHeader]) -> bool:
    """Prove B consecutive headers under one proof and submit them as one envelope."""
    b = len(headers)
    if b == 0 or b & (b - 1):
        raise ValueError("batch size must be a power of two")
    return updater.header_update(relay.prove(parent, headers))


class RelayNetwork:
    """Round-robin coordination: the relay for a height is height mod (number of relays)."""

    def __init__(self, relays: Sequence[Relay]):
        if not relays:
            raise ValueError("at least one relay is required")
        self.relays = list(relays)

    def assigned(self, height: int) -> Relay:
        return self.relays[height % len(self.relays)]

    def step(self, updater: Updater, nodes: Sequence[FullNode]) -> Optional[RelayEnvelope]:
        """One header is relayed by its assigned relay; an idle slot falls to the next relay able to prove."""
        try:
            probe = self.relays[0].candidates(updater, nodes)
        except ValueError:
            return None
        for h in probe:
            parent = updater.dag.get(h.parent)
            if parent is None:
                continue
            start = h.height % len(self.relays)
            for off in range(len(self.relays)):
                relay = self.relays[(start + off) % len(self.relays)]
                try:
                    env = relay.prove(parent.header, [h])
                except (PermissionError, ValueError, KeyError):
                    continue
                if updater.header_update(env):
                    return env
            return None
        return None


ATTACKS = ("junk", "truncate", "splice", "identity", "forged", "orphan", "flip")


class AdversarialRelay:
    """
    A relay without signing material. It submits garbage, tampered copies of
    envelopes it has observed, and headers it made up.
    """

    def __init__(self, identity: bytes, seed: int = 0):
        self.identity = identity
        self.rng = random.Random(seed)

    def attack(self, kind: str, seen: Sequence[RelayEnvelope], headers: Sequence[BlockHeader]) -> bytes:
        rng = self.rng
        if kind == "junk" or not seen:
            return rng.randbytes(rng.randint(0, 400))
        env = rng.choice(list(seen))
        raw = env.to_bytes()
        if kind == "truncate":
            return raw[:rng.randrange(len(raw))]
        if kind == "flip":
            pos = rng.randrange(len(raw))
            return raw[:pos] + bytes([raw[pos] ^ (1 << rng.randrange(8))]) + raw[pos + 1:]
        if kind == "identity":
            return replace(env, identity=self.identity + rng.randbytes(2)).to_bytes()
        h = env.headers[0]
        if kind == "splice":
            # a proof for one header attached to a different header
            others = [o for o in headers if o.digest != h.digest and o.height == h.height]
            if others:
                other = rng.choice(others)
                return replace(env, parent=other.parent, headers=(other,) + env.headers[1:]).to_bytes()
            kind = "forged"
        if kind == "forged":
            field_name = rng.choice(["tx_root", "validator_commitment", "signatures"])
            if field_name == "signatures":
                sigs = tuple((i, (s + 1 + rng.randrange(1000)) % P) for i, s in h.signatures)
                fake = replace(h, signatures=sigs)
            else:
                fake = replace(h, **{field_name: rng.randbytes(32)})
            return replace(env, headers=(fake,) + env.headers[1:]).to_bytes()
        if kind == "orphan":
            return replace(env, parent=rng.randbytes(32)).to_bytes()
        raise ValueError(f"unknown attack {kind!r}")
