"""Applications on top of the updater: transaction inclusion and a lock/mint token transfer."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..merkle import MerklePath
from .chain import ChainParams, ChainSimulator, FullNode
from .relay import Relay
from .updater import BridgeParams, Updater


def lock_tx(user: str, amount: int, nonce: int) -> bytes:
    return f"lock|{user}|{amount}|{nonce}".encode()


def parse_lock_tx(tx: bytes) -> Optional[Tuple[str, int, int]]:
    try:
        kind, user, amount, nonce = tx.decode().split("|")
        if kind != "lock" or not user:
            return None
        return user, int(amount), int(nonce)
    except (UnicodeDecodeError, ValueError):
        return None


@dataclass
class MintRequest:
    block: bytes  # header digest on the sender chain
    tx: bytes
    path: MerklePath


class LockContract:
    """Sender-chain side: locking puts a lock transaction into the next block."""

    def __init__(self, chain: ChainSimulator):
        self.chain = chain
        self.locked: Dict[str, int] = {}
        self.nonce = 0

    def lock(self, user: str, amount: int) -> MintRequest:
        if amount <= 0:
            raise ValueError("amount must be positive")
        self.nonce += 1
        tx = lock_tx(user, amount, self.nonce)
        block = self.chain.produce_block([tx, b"filler:" + tx])
        self.locked[user] = self.locked.get(user, 0) + amount
        _, path = block.tx_path(0)
        return MintRequest(block.header.digest, tx, path)


class MintContract:
    """Receiver-chain side: mints once per lock transaction proven against the updater."""

    def __init__(self, updater: Updater):
        self.updater = updater
        self.balances: Dict[str, int] = {}
        self.minted: set = set()
        self.log: List[Tuple[str, str]] = []

    def mint(self, req: MintRequest) -> bool:
        txid = hashlib.sha256(req.tx).hexdigest()
        parsed = parse_lock_tx(req.tx)
        if parsed is None:
            self.log.append(("reject", "not a lock transaction"))
            return False
        if txid in self.minted:
            self.log.append(("reject", "already minted"))
            return False
        if self.updater.get_header(req.block) is None:
            self.log.append(("reject", "header not relayed yet"))
            return False
        if not self.updater.verify_tx_inclusion(req.block, req.tx, req.path):
            self.log.append(("reject", "inclusion not proven on the confirmed main chain"))
            return False
        user, amount, _ = parsed
        self.minted.add(txid)
        self.balances[user] = self.balances.get(user, 0) + amount
        self.log.append(("mint", f"{user}:{amount}"))
        return True


@dataclass
class Receipt:
    user: str
    locked: int
    credited: int
    premature_rejected: bool
    replay_rejected: bool
    envelopes: List[str] = field(default_factory=list)
    log: List[Tuple[str, str]] = field(default_factory=list)
    state_digest: str = ""

    @property
    def ok(self) -> bool:
        return self.credited == self.locked and self.premature_rejected and self.replay_rejected


class BridgeWorld:
    """Sender chain, full nodes, one honest relay, and the receiver chain's updater and mint contract."""

    def __init__(self, seed: int = 0, params: BridgeParams = BridgeParams(), full_nodes: int = 3):
        self.params = params
        chain_params = ChainParams(params.committee_size, params.quorum, rounds=params.rounds,
                                   message_length=params.message_length)
        self.chain = ChainSimulator(seed, chain_params)
        g = self.chain.genesis.header
        self.updater = Updater(g, self.chain.directory[g.validator_commitment], params)
        self.nodes = [FullNode(self.chain, f"node{i}") for i in range(full_nodes)]
        self.relay = Relay(b"relay/" + str(seed).encode(), self.chain.vault, self.chain.directory, params)
        self.lock = LockContract(self.chain)
        self.mint = MintContract(self.updater)

    def sync(self) -> int:
        return self.relay.sync(self.updater, self.nodes)


def lock_mint_demo(seed: int = 0, user: str = "alice", amount: int = 5,
                   params: BridgeParams = BridgeParams()) -> Receipt:
    world = BridgeWorld(seed, params)
    for _ in range(2):
        world.chain.produce_block()
    world.sync()
    req = world.lock.lock(user, amount)
    premature = not world.mint.mint(req)
    for _ in range(params.confirmations):
        world.chain.produce_block()
    world.sync()
    first = world.mint.mint(req)
    replay = not world.mint.mint(req)
    envs = sorted(hashlib.sha256(e.to_bytes()).hexdigest() for e in world.relay.cache.values())
    credited = world.mint.balances.get(user, 0) if first else 0
    state = hashlib.sha256(world.updater.snapshot() + repr(sorted(world.mint.balances.items())).encode()).hexdigest()
    return Receipt(user, amount, credited, premature, replay, envs, list(world.mint.log), state)
