"""Shared builders for tests that need signed statements or small bridges."""

import hashlib

from lcbridge.bridge import BridgeParams, ChainParams, ChainSimulator, FullNode, Relay, Updater
from lcbridge.circuit import split_public
from lcbridge.field import P
from lcbridge.sigcircuit import build_light_client_circuit, keygen, sign, statement_inputs
from lcbridge.virgo import ProofParams

FAST = ProofParams(rho=4, queries=8)


def statement(n, rounds=2, seed=b"s", forge=()):
    """(circuit, inputs, public) for n keys signing one digest; copies in `forge` get a bad signature."""
    c = build_light_client_circuit(n, 1, rounds)
    keys = [keygen(seed + bytes([i]), rounds) for i in range(n)]
    d = hashlib.sha256(b"header/" + seed).digest()
    entries = []
    for i, (sk, pk) in enumerate(keys):
        s = sign(sk, d, 1, rounds)
        entries.append((d, pk, (s + 1) % P if i in forge else s))
    inputs = statement_inputs(entries, [sk for sk, _ in keys])
    public, _ = split_public(c, inputs)
    return c, inputs, public


def bridge(seed=1, rounds=2, confirmations=2, nodes=3, committee=4, rotate_every=4):
    params = BridgeParams(committee_size=committee, rounds=rounds, rho=4, queries=8, confirmations=confirmations)
    chain = ChainSimulator(seed, ChainParams(committee, params.quorum, rotate_every, rounds))
    g = chain.genesis.header
    updater = Updater(g, chain.directory[g.validator_commitment], params)
    full = [FullNode(chain, f"n{i}") for i in range(nodes)]
    relay = Relay(b"relay-under-test", chain.vault, chain.directory, params)
    return params, chain, updater, full, relay
