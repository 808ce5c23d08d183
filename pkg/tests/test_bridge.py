import hashlib
import itertools
from dataclasses import replace

import pytest

from lcbridge.bridge import (
    AdversarialRelay,
    BlockHeader,
    ChainParams,
    ChainSimulator,
    ForgingFullNode,
    FullNode,
    HeaderDag,
    LightClientState,
    Relay,
    RelayEnvelope,
    RelayNetwork,
    RetrySignal,
    Updater,
    agreed_headers,
    batch_prove_and_update,
    committee_commitment,
    light_cc,
    lock_mint_demo,
    main_chain,
    quorum_size,
)
from lcbridge.bridge.app import BridgeWorld, MintRequest
from lcbridge.bridge.chain import ZERO_DIGEST
from lcbridge.bridge.relay import ATTACKS
from lcbridge.codec import DecodeError
from lcbridge.merkle import MerklePath
from support import bridge

# -- sender chain ---------------------------------------------------------------


def test_genesis():
    chain = ChainSimulator(0, ChainParams(rounds=2))
    g = chain.genesis.header
    assert g.height == 1 and g.parent == ZERO_DIGEST
    assert g.validator_commitment in chain.directory


def test_header_digest_excludes_signatures():
    chain = ChainSimulator(0, ChainParams(rounds=2))
    h = chain.produce_block().header
    assert replace(h, signatures=()).digest == h.digest
    assert replace(h, tx_root=bytes(32)).digest != h.digest
    assert BlockHeader.from_bytes(h.to_bytes()) == h
    with pytest.raises(DecodeError):
        BlockHeader.from_bytes(h.to_bytes()[:-1])


def test_tx_paths():
    chain = ChainSimulator(0, ChainParams(rounds=2))
    txs = [b"a", b"b", b"c", b"d"]
    block = chain.produce_block(txs)
    from lcbridge.merkle import MerkleRoot, mt_verify
    for i, tx in enumerate(txs):
        leaf, path = block.tx_path(i)
        assert leaf == tx
        assert mt_verify(path, tx, MerkleRoot(block.header.tx_root))


def test_fork_children_distinct():
    chain = ChainSimulator(0, ChainParams(rounds=2))
    chain.produce_block()
    side = chain.inject_fork(1, 1)[0]
    assert side.header.parent == chain.tip.header.parent
    assert side.header.digest != chain.tip.header.digest


def test_block_contents_independent_of_schedule():
    a = ChainSimulator(5, ChainParams(rounds=2))
    b = ChainSimulator(5, ChainParams(rounds=2))
    # a block is determined by the seed, its parent and its index among that parent's children
    a.produce_block()
    a.produce_block()
    a.inject_fork(1, 1)
    b.produce_block()
    b.produce_block()
    assert a.tip.header == b.tip.header
    side = b.inject_fork(1, 1)[0]
    assert a.all_blocks() == b.all_blocks()
    assert side.header != b.tip.header


def test_quorum_size():
    assert quorum_size(4) == 3
    assert quorum_size(3) == 2
    assert quorum_size(1) == 1


def test_committee_rotation_commitments():
    chain = ChainSimulator(0, ChainParams(rounds=2, rotate_every=2))
    for _ in range(6):
        chain.produce_block()
    commitments = [h.validator_commitment for h in chain.canonical_headers()]
    assert len(set(commitments)) > 1
    for h in chain.canonical_headers():
        assert h.validator_commitment == chain.committee_for_height(h.height + 1).commitment


# -- light client rule ----------------------------------------------------------

def lcs_for(chain, prev):
    com = chain.committee_for_height(prev.height + 1)
    return LightClientState(tuple(com.pks), prev.digest, prev.height)


def test_light_cc_honest():
    chain = ChainSimulator(2, ChainParams(rounds=2))
    prev = chain.tip.header
    nxt = chain.produce_block().header
    assert light_cc(lcs_for(chain, prev), prev, nxt, chain.vault, rounds=2)


def test_light_cc_wrong_parent():
    chain = ChainSimulator(2, ChainParams(rounds=2))
    prev = chain.tip.header
    nxt = chain.produce_block().header
    bad = replace(nxt, parent=bytes(32))
    assert not light_cc(lcs_for(chain, prev), prev, bad, chain.vault, rounds=2)


def test_light_cc_quorum_threshold_by_subset():
    chain = ChainSimulator(3, ChainParams(rounds=2))
    prev = chain.tip.header
    full = chain.produce_block(signers=[0, 1, 2, 3]).header
    lcs = lcs_for(chain, prev)
    for k in range(5):
        for subset in itertools.combinations(range(4), k):
            h = replace(full, signatures=tuple(s for s in full.signatures if s[0] in subset))
            assert light_cc(lcs, prev, h, chain.vault, rounds=2) == (k >= 3)


def test_light_cc_bad_signature_or_duplicate_index():
    chain = ChainSimulator(3, ChainParams(rounds=2))
    prev = chain.tip.header
    h = chain.produce_block(signers=[0, 1, 2]).header
    lcs = lcs_for(chain, prev)
    forged = replace(h, signatures=((0, h.signatures[0][1] + 1),) + h.signatures[1:])
    assert not light_cc(lcs, prev, forged, chain.vault, rounds=2)
    dup = replace(h, signatures=h.signatures[:2] + (h.signatures[0],))
    assert not light_cc(lcs, prev, dup, chain.vault, rounds=2)


# -- relay -----------------------------------------------------------------------

def test_relay_honest_nodes():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    assert up.header_update(env)
    assert up.tip == chain.tip.header


def test_majority_outvotes_forger():
    _, chain, up, _, relay = bridge()
    chain.produce_block()
    nodes = [FullNode(chain, "a"), FullNode(chain, "b"), ForgingFullNode(chain, "c")]
    env = relay.relay_next_header(up, nodes)
    assert env.header == chain.tip.header
    assert up.header_update(env)


def test_forger_majority_yields_nothing():
    _, chain, up, _, relay = bridge()
    chain.produce_block()
    nodes = [FullNode(chain, "a"), ForgingFullNode(chain, "b"), ForgingFullNode(chain, "c", mode="signatures")]
    assert [h.height for h in agreed_headers(nodes)] == [1]
    with pytest.raises(RetrySignal):
        relay.relay_next_header(up, nodes)


def test_nodes_behind_give_retry():
    _, chain, up, _, relay = bridge()
    chain.produce_block()
    nodes = [FullNode(chain, f"n{i}", lag=1) for i in range(3)]
    with pytest.raises(RetrySignal):
        relay.relay_next_header(up, nodes)


def test_relay_without_keys_cannot_prove():
    params, chain, up, nodes, _ = bridge()
    chain.produce_block()
    relay = Relay(b"keyless", None, chain.directory, params)
    with pytest.raises(PermissionError):
        relay.relay_next_header(up, nodes)


def test_proof_cache_reuse():
    params, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    again = relay.relay_next_header(up, nodes)
    assert again is env and relay.proofs_made == 1


# -- updater ---------------------------------------------------------------------

def test_valid_envelope_grows_dag():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    before = len(up.dag)
    assert up.header_update(relay.relay_next_header(up, nodes))
    assert len(up.dag) == before + 1


def test_unknown_parent_rejected_state_unchanged():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    chain.produce_block()
    h1, h2 = chain.canonical_headers()[1:3]
    env = relay.prove(h1, [h2])
    snap = up.snapshot()
    assert not up.header_update(env)
    assert up.last_reason == "parent not in the DAG"
    assert up.snapshot() == snap


@pytest.mark.parametrize("field_name", ["tx_root", "validator_commitment", "height"])
def test_tampered_header_rejected(field_name):
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    h = env.header
    value = h.height + 1 if field_name == "height" else hashlib.sha256(b"x").digest()
    bad = replace(env, headers=(replace(h, **{field_name: value}),))
    snap = up.snapshot()
    assert not up.header_update(bad)
    assert up.snapshot() == snap


def test_tampered_header_bytes_rejected():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    raw = bytearray(env.to_bytes())
    start = raw.find(env.header.tx_root)
    raw[start] ^= 1
    assert not up.header_update(bytes(raw))
    assert up.header_update(env)


def test_wrong_next_committee_rejected():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    com = list(env.next_committees[0])
    com[0] += 1
    assert not up.header_update(replace(env, next_committees=(tuple(com),)))
    assert "committee" in up.last_reason


def test_duplicate_envelope_is_noop():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    assert up.header_update(env)
    snap = up.snapshot()
    assert up.header_update(env)
    assert up.last_reason == "duplicate"
    assert up.snapshot() == snap


def test_per_update_work_is_constant():
    _, chain, up, nodes, relay = bridge()
    deltas = []
    for _ in range(6):
        chain.produce_block()
        env = relay.relay_next_header(up, nodes)
        before = dict(up.counters)
        assert up.header_update(env)
        deltas.append({k: up.counters[k] - before.get(k, 0) for k in up.counters})
    assert all(d == deltas[0] for d in deltas)
    assert deltas[0] == {"envelopes": 1, "lookups": 1, "verifications": 1, "inserts": 1, "lcs_updates": 1}


def test_rotation_across_epochs():
    _, chain, up, nodes, relay = bridge(rotate_every=2)
    for _ in range(7):
        chain.produce_block()
    assert relay.sync(up, nodes) == 7
    assert up.tip == chain.tip.header
    assert up.lcs.committee_commitment == chain.tip.header.validator_commitment


def test_get_header():
    _, chain, up, nodes, relay = bridge(confirmations=2)
    for _ in range(4):
        chain.produce_block()
    relay.sync(up, nodes)
    info = up.get_header(2)
    assert info.header == chain.block_at(2).header
    assert info.on_main_chain and info.confirmations == 3
    assert not up.get_header(5).on_main_chain  # too shallow
    assert up.get_header(6) is None
    assert up.get_header(bytes(32)) is None
    assert up.get_header(chain.block_at(3).header.digest).header.height == 3


def test_get_header_on_abandoned_fork():
    _, chain, up, nodes, relay = bridge(confirmations=1)
    for _ in range(3):
        chain.produce_block()
    side = chain.inject_fork(1, 1)[0]
    chain.produce_block()
    relay.sync(up, nodes)
    assert side.header.digest in up.dag
    info = up.get_header(side.header.digest)
    assert info.header == side.header
    assert not info.on_main_chain and info.confirmations == 0
    assert up.get_header(side.header.height).header == chain.block_at(side.header.height).header


def test_main_chain_linear():
    _, chain, up, nodes, relay = bridge(confirmations=2)
    for _ in range(9):
        chain.produce_block()
    relay.sync(up, nodes)
    assert up.main_chain() == chain.canonical_headers()[:8]
    assert up.main_chain(0) == chain.canonical_headers()


def test_main_chain_genesis_only():
    _, chain, up, _, _ = bridge()
    assert up.main_chain(0) == [chain.genesis.header]
    assert up.main_chain(2) == []


def heaviest_by_enumeration(dag):
    best = None
    for tip in dag.tips():
        path = dag.path_to(tip)
        key = (-len(path), tip.digest)
        if best is None or key < best[0]:
            best = (key, [n.header for n in path])
    return best[1]


def test_main_chain_picks_heavier_fork():
    chain = ChainSimulator(4, ChainParams(rounds=2))
    for _ in range(6):
        chain.produce_block()
    side = chain.inject_fork(6, 4)
    g = chain.genesis.header
    dag = HeaderDag(g, chain.directory[g.validator_commitment], chain.params.quorum)
    for b in chain.all_blocks()[1:]:
        dag.insert(b.header, chain.directory[b.header.validator_commitment])
    weights = sorted(len(dag.path_to(t)) for t in dag.tips())
    assert weights == [5, 7]
    assert main_chain(dag, 0) == heaviest_by_enumeration(dag) == chain.canonical_headers()
    assert side[-1].header not in main_chain(dag, 0)


def test_tie_breaks_to_smaller_digest():
    chain = ChainSimulator(4, ChainParams(rounds=2))
    chain.produce_block()
    chain.inject_fork(1, 1)
    g = chain.genesis.header
    dag = HeaderDag(g, chain.directory[g.validator_commitment], chain.params.quorum)
    for b in chain.all_blocks()[1:]:
        dag.insert(b.header, chain.directory[b.header.validator_commitment])
    assert main_chain(dag, 0) == heaviest_by_enumeration(dag)
    assert dag.best.digest == min(t.digest for t in dag.tips())


def test_verify_tx_inclusion():
    _, chain, up, nodes, relay = bridge(confirmations=1)
    a = chain.produce_block([b"t0", b"t1", b"t2"])
    b = chain.produce_block([b"u0", b"u1"])
    chain.produce_block()
    relay.sync(up, nodes)
    _, path = a.tx_path(1)
    assert up.verify_tx_inclusion(a.header.height, b"t1", path)
    assert up.verify_tx_inclusion(a.header.digest, b"t1", path)
    assert not up.verify_tx_inclusion(a.header.height, b"u1", b.tx_path(1)[1])
    assert not up.verify_tx_inclusion(99, b"t1", path)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_inclusion_shifted_index_exhaustive(n):
    _, chain, up, nodes, relay = bridge(confirmations=0)
    txs = [f"tx{i}".encode() for i in range(n)]
    block = chain.produce_block(txs)
    relay.sync(up, nodes)
    for i, tx in enumerate(txs):
        _, path = block.tx_path(i)
        assert up.verify_tx_inclusion(block.header.height, tx, path)
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                moved = MerklePath(j, path.siblings)
                assert not up.verify_tx_inclusion(block.header.height, tx, moved)


# -- batching ---------------------------------------------------------------------

def test_batch_of_four():
    _, chain, up, nodes, relay = bridge()
    for _ in range(4):
        chain.produce_block()
    headers = chain.canonical_headers()[1:5]
    from lcbridge.merkle import mt_commit
    assert batch_prove_and_update(relay, up, chain.genesis.header, headers)
    assert len(up.dag) == 5
    assert up.dag.batch_roots[0] == mt_commit([h.digest for h in headers]).digest
    assert relay.proofs_made == 1


def test_batch_broken_link_rejects_everything():
    _, chain, up, nodes, relay = bridge()
    for _ in range(4):
        chain.produce_block()
    headers = chain.canonical_headers()[1:5]
    env = relay.prove(chain.genesis.header, headers)
    broken = list(env.headers)
    broken[2] = replace(broken[2], parent=hashlib.sha256(b"elsewhere").digest())
    snap = up.snapshot()
    assert not up.header_update(replace(env, headers=tuple(broken)))
    assert up.snapshot() == snap and len(up.dag) == 1


def test_batch_size_must_be_power_of_two():
    _, chain, up, nodes, relay = bridge()
    for _ in range(3):
        chain.produce_block()
    with pytest.raises(ValueError):
        batch_prove_and_update(relay, up, chain.genesis.header, chain.canonical_headers()[1:4])


def test_batch_one_equals_header_update():
    _, chain, a, nodes, relay = bridge()
    _, _, b, _, _ = bridge()
    for _ in range(3):
        chain.produce_block()
    prev = chain.genesis.header
    for h in chain.canonical_headers()[1:]:
        assert a.header_update(relay.prove(prev, [h]))
        assert batch_prove_and_update(relay, b, prev, [h])
        prev = h
    assert a.snapshot() == b.snapshot()


# -- snapshots and replay ---------------------------------------------------------

def test_snapshot_roundtrip_and_replay():
    _, chain, up, nodes, relay = bridge()
    for _ in range(3):
        chain.produce_block()
    chain.inject_fork(1, 1)
    envs = []
    while True:
        try:
            env = relay.relay_next_header(up, nodes)
        except RetrySignal:
            break
        assert up.header_update(env)
        envs.append(env.to_bytes())
    snap = up.snapshot()
    assert Updater.load(snap).snapshot() == snap
    _, _, fresh, _, _ = bridge()
    for raw in envs:
        assert fresh.header_update(raw)
    assert fresh.snapshot() == snap
    with pytest.raises(DecodeError):
        Updater.load(snap[:-3])
    with pytest.raises(DecodeError):
        Updater.load(b"XXXX" + snap[4:])


def test_envelope_roundtrip():
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    env = relay.relay_next_header(up, nodes)
    assert RelayEnvelope.from_bytes(env.to_bytes()) == env
    with pytest.raises(DecodeError):
        RelayEnvelope.from_bytes(env.to_bytes()[:40])


# -- adversaries and coordination -----------------------------------------------

@pytest.mark.parametrize("kind", ATTACKS)
def test_attacks_rejected(kind):
    _, chain, up, nodes, relay = bridge()
    chain.produce_block()
    chain.inject_fork(0, 1)
    seen = [relay.prove(chain.genesis.header, [chain.tip.header])]
    adv = AdversarialRelay(b"mallory", 3)
    for _ in range(5):
        before = up.snapshot()
        assert not up.header_update(adv.attack(kind, seen, [b.header for b in chain.all_blocks()]))
        assert up.snapshot() == before


def test_round_robin_network():
    params, chain, up, nodes, _ = bridge()
    relays = [Relay(f"r{i}".encode(), chain.vault, chain.directory, params) for i in range(3)]
    net = RelayNetwork(relays)
    for _ in range(3):
        chain.produce_block()
    used = []
    while (env := net.step(up, nodes)) is not None:
        used.append((env.header.height, env.identity))
    assert used == [(h, f"r{h % 3}".encode()) for h in (2, 3, 4)]


def test_round_robin_falls_back_when_slot_cannot_prove():
    params, chain, up, nodes, _ = bridge()
    relays = [Relay(b"r0", chain.vault, chain.directory, params), Relay(b"r1", None, chain.directory, params)]
    for _ in range(2):
        chain.produce_block()
    net = RelayNetwork(relays)
    assert net.step(up, nodes).identity == b"r0"  # height 2 -> slot 0
    assert net.step(up, nodes).identity == b"r0"  # height 3 -> slot 1 has no keys


def test_genesis_committee_must_match():
    chain = ChainSimulator(0, ChainParams(rounds=2))
    with pytest.raises(ValueError):
        Updater(chain.genesis.header, (1, 2, 3, 4))
    assert committee_commitment((1, 2)) != committee_commitment((2, 1))


# -- lock and mint ---------------------------------------------------------------

def test_lock_mint_demo():
    r = lock_mint_demo(seed=3, amount=5)
    assert r.credited == 5 and r.premature_rejected and r.replay_rejected and r.ok


def test_mint_rejects_non_lock_and_unrelayed():
    world = BridgeWorld(1)
    req = world.lock.lock("carol", 2)
    assert not world.mint.mint(req)
    assert world.mint.log[-1] == ("reject", "header not relayed yet")
    bogus = MintRequest(req.block, b"transfer|x|1|1", req.path)
    assert not world.mint.mint(bogus)
    with pytest.raises(ValueError):
        world.lock.lock("carol", 0)
