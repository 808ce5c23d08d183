"""
Scenario files and their deterministic replay.

A scenario is plain text. Blank lines and `#` comments are ignored.
`key = value` lines set parameters and must come before the first
directive. Every other line is a directive:

    produce N            extend the sender chain by N blocks
    fork DEPTH LEN       side branch of LEN blocks off the block DEPTH below the tip
    relay [N]            honest relays submit up to N agreed headers (all if omitted)
    batch B              the first honest relay proves the next B headers in one envelope
    attack KIND [N]      every adversarial relay submits N forged envelopes of KIND
    lock USER AMOUNT     lock tokens on the sender chain
    mint USER            ask the receiver chain to mint USER's latest lock
    expect WHAT [ARGS]   checked at the end: honest_accepted, forged_rejected,
                         prefix, live, balance USER AMOUNT, main_chain N
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .app import LockContract, MintContract, MintRequest
from .chain import ChainParams, ChainSimulator, ForgingFullNode, FullNode
from .relay import ATTACKS, AdversarialRelay, Relay, RetrySignal
from .updater import BridgeParams, Updater

DEFAULTS = {
    "seed": "0",
    "committee": "4",
    "quorum": "2/3",
    "rounds": "8",
    "rho": "8",
    "queries": "16",
    "confirmations": "2",
    "message_length": "1",
    "rotate_every": "4",
    "full_nodes": "3",
    "forging_nodes": "0",
    "node_lag": "0",
    "relays": "1",
    "adversaries": "0",
}

DIRECTIVES = {"produce", "fork", "relay", "batch", "attack", "lock", "mint", "expect"}
EXPECTATIONS = {"honest_accepted", "forged_rejected", "prefix", "live", "balance", "main_chain"}


class ScenarioError(ValueError):
    """The scenario text does not parse."""


@dataclass
class Scenario:
    settings: Dict[str, str]
    steps: List[Tuple[str, List[str], int]]  # (directive, args, line number)

    def get_int(self, key: str) -> int:
        try:
            return int(self.settings[key])
        except ValueError:
            raise ScenarioError(f"{key} must be an integer") from None

    def params(self) -> BridgeParams:
        try:
            q = Fraction(self.settings["quorum"])
        except (ValueError, ZeroDivisionError):
            raise ScenarioError("quorum must be a fraction like 2/3") from None
        if not 0 < q <= 1:
            raise ScenarioError("quorum must lie in (0, 1]")
        return BridgeParams(self.get_int("committee"), q, self.get_int("message_length"), self.get_int("rounds"),
                            self.get_int("rho"), self.get_int("queries"), self.get_int("confirmations"))

    def to_text(self) -> str:
        lines = [f"{k} = {v}" for k, v in self.settings.items()]
        lines += [" ".join([d] + args) for d, args, _ in self.steps]
        return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> Scenario:
    settings = dict(DEFAULTS)
    steps: List[Tuple[str, List[str], int]] = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            if steps:
                raise ScenarioError(f"line {no}: settings must come before directives")
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in DEFAULTS:
                raise ScenarioError(f"line {no}: unknown setting {key!r}")
            settings[key] = value
            continue
        word, *args = line.split()
        if word not in DIRECTIVES:
            raise ScenarioError(f"line {no}: unknown directive {word!r}")
        _check_args(word, args, no)
        steps.append((word, args, no))
    return Scenario(settings, steps)


def _check_args(word: str, args: List[str], no: int):
    def ints(n_min, n_max, start=0):
        if not n_min <= len(args) - start <= n_max:
            raise ScenarioError(f"line {no}: wrong number of arguments for {word}")
        for a in args[start:]:
            if not a.isdigit():
                raise ScenarioError(f"line {no}: {a!r} is not a non-negative integer")

    if word == "produce":
        ints(1, 1)
    elif word == "fork":
        ints(2, 2)
    elif word == "relay":
        ints(0, 1)
    elif word == "batch":
        ints(1, 1)
        b = int(args[0])
        if b == 0 or b & (b - 1):
            raise ScenarioError(f"line {no}: batch size must be a power of two")
    elif word == "attack":
        if not args or args[0] not in ATTACKS:
            raise ScenarioError(f"line {no}: attack kind must be one of {', '.join(ATTACKS)}")
        ints(0, 1, 1)
    elif word == "lock":
        if len(args) != 2 or not args[1].isdigit():
            raise ScenarioError(f"line {no}: usage: lock USER AMOUNT")
    elif word == "mint":
        if len(args) != 1:
            raise ScenarioError(f"line {no}: usage: mint USER")
    elif word == "expect":
        if not args or args[0] not in EXPECTATIONS:
            raise ScenarioError(f"line {no}: unknown expectation")
        if args[0] == "balance" and (len(args) != 3 or not args[2].isdigit()):
            raise ScenarioError(f"line {no}: usage: expect balance USER AMOUNT")
        if args[0] == "main_chain" and (len(args) != 2 or not args[1].isdigit()):
            raise ScenarioError(f"line {no}: usage: expect main_chain LENGTH")


def load_scenario(path: Union[str, Path]) -> Scenario:
    return parse_scenario(Path(path).read_text())


@dataclass
class Submission:
    step: int
    relay: str
    honest: bool
    kind: str
    heights: str
    accepted: bool
    reason: str


@dataclass
class Report:
    submissions: List[Submission] = field(default_factory=list)
    retries: int = 0
    violations: List[str] = field(default_factory=list)
    main_chain: List[Tuple[int, str]] = field(default_factory=list)
    balances: Dict[str, int] = field(default_factory=dict)
    app_log: List[Tuple[str, str]] = field(default_factory=list)
    expectations: List[Tuple[str, bool]] = field(default_factory=list)
    snapshot_digest: str = ""

    @property
    def honest_accepted(self) -> bool:
        return all(s.accepted for s in self.submissions if s.honest)

    @property
    def forged_rejected(self) -> bool:
        return not any(s.accepted for s in self.submissions if not s.honest)

    @property
    def ok(self) -> bool:
        return not self.violations and all(ok for _, ok in self.expectations)

    def rows(self) -> List[List[str]]:
        head = [["step", "relay", "honest", "kind", "heights", "accepted", "reason"]]
        return head + [[str(s.step), s.relay, str(int(s.honest)), s.kind, s.heights, str(int(s.accepted)), s.reason]
                       for s in self.submissions]

    def to_text(self) -> str:
        acc = sum(s.accepted for s in self.submissions)
        lines = [
            f"envelopes: {len(self.submissions)} submitted, {acc} accepted, {len(self.submissions) - acc} rejected",
            f"honest envelopes all accepted: {self.honest_accepted}",
            f"forged envelopes all rejected: {self.forged_rejected}",
            f"relay retries: {self.retries}",
            "main chain: " + " ".join(f"{h}:{d}" for h, d in self.main_chain),
            "balances: " + (", ".join(f"{u}={v}" for u, v in sorted(self.balances.items())) or "none"),
        ]
        lines += [f"app: {a} {b}" for a, b in self.app_log]
        lines += [f"violation: {v}" for v in self.violations]
        lines += [f"expect {name}: {'pass' if ok else 'FAIL'}" for name, ok in self.expectations]
        lines.append(f"updater snapshot sha256: {self.snapshot_digest}")
        return "\n".join(lines)


class ScenarioRunner:
    def __init__(self, scenario: Scenario, proof_cache: Optional[Dict] = None):
        self.sc = scenario
        self.params = scenario.params()
        seed = scenario.get_int("seed")
        p = self.params
        self.chain = ChainSimulator(seed, ChainParams(p.committee_size, p.quorum, scenario.get_int("rotate_every"),
                                                      p.rounds, p.message_length))
        g = self.chain.genesis.header
        self.updater = Updater(g, self.chain.directory[g.validator_commitment], p)
        lag = scenario.get_int("node_lag")
        n_forge = scenario.get_int("forging_nodes")
        n_nodes = scenario.get_int("full_nodes")
        if n_nodes < 1 or n_forge > n_nodes:
            raise ScenarioError("need at least one full node and no more forgers than nodes")
        self.nodes: List[FullNode] = [FullNode(self.chain, f"node{i}", lag) for i in range(n_nodes - n_forge)]
        self.nodes += [ForgingFullNode(self.chain, f"forger{i}", lag) for i in range(n_forge)]
        n_relays = scenario.get_int("relays")
        if n_relays < 1:
            raise ScenarioError("at least one honest relay is required")
        self.relays = [Relay(f"relay{i}".encode(), self.chain.vault, self.chain.directory, p, cache=proof_cache)
                       for i in range(n_relays)]
        self.adversaries = [AdversarialRelay(f"adversary{i}".encode(), seed * 1000 + i)
                            for i in range(scenario.get_int("adversaries"))]
        self.lock = LockContract(self.chain)
        self.mint = MintContract(self.updater)
        self.pending_locks: Dict[str, MintRequest] = {}
        self.seen = []
        self.report = Report()
        self.step_no = 0

    # -- helpers --------------------------------------------------------------
    def _submit(self, who: str, honest: bool, kind: str, env) -> bool:
        ok = self.updater.header_update(env)
        heights = ""
        if honest:
            heights = ",".join(str(h.height) for h in env.headers)
            self.seen.append(env)
        self.report.submissions.append(Submission(self.step_no, who, honest, kind, heights, ok,
                                                  self.updater.last_reason))
        return ok

    def check_prefix(self):
        canon = [h.digest for h in self.chain.canonical_headers()]
        mc = [h.digest for h in self.updater.main_chain()]
        if mc != canon[:len(mc)]:
            self.report.violations.append(f"step {self.step_no}: main chain is not a prefix of the canonical chain")

    def relay_round(self, limit: Optional[int]) -> int:
        """Relays take turns by height; returns the number of accepted headers."""
        done = 0
        while limit is None or done < limit:
            relay = None
            try:
                cands = self.relays[0].candidates(self.updater, self.nodes)
                cands = [h for h in cands if h.parent in self.updater.dag]
                if not cands:
                    raise RetrySignal("nothing new")
                h = cands[0]
                relay = self.relays[h.height % len(self.relays)]
                env = relay.prove(self.updater.dag.get(h.parent).header, [h])
            except RetrySignal:
                self.report.retries += 1
                break
            if not self._submit(relay.identity.decode(), True, "header", env):
                break
            done += 1
        return done

    def final_sync(self):
        self.relay_round(None)

    def check_live(self) -> bool:
        missing = [h.height for h in self.chain.canonical_headers() if self.updater.get_header(h.digest) is None]
        if missing:
            self.report.violations.append(f"canonical heights never relayed: {missing}")
        return not missing

    # -- directives ---------------------------------------------------------------
    def run(self) -> Report:
        expects = []
        for word, args, no in self.sc.steps:
            self.step_no = no
            if word == "expect":
                expects.append(args)
                continue
            getattr(self, f"do_{word}")(args)
            self.check_prefix()
        r = self.report
        for args in expects:
            what = args[0]
            if what == "honest_accepted":
                ok = r.honest_accepted
            elif what == "forged_rejected":
                ok = r.forged_rejected
            elif what == "prefix":
                ok = not any("prefix" in v for v in r.violations)
            elif what == "live":
                self.final_sync()
                self.check_prefix()
                ok = self.check_live()
            elif what == "balance":
                ok = self.mint.balances.get(args[1], 0) == int(args[2])
            else:
                ok = len(self.updater.main_chain()) == int(args[1])
            r.expectations.append((" ".join(args), ok))
        r.main_chain = [(h.height, h.digest.hex()[:12]) for h in self.updater.main_chain()]
        r.balances = dict(self.mint.balances)
        r.app_log = list(self.mint.log)
        r.snapshot_digest = hashlib.sha256(self.updater.snapshot()).hexdigest()
        return r

    def do_produce(self, args):
        for _ in range(int(args[0])):
            self.chain.produce_block()

    def do_fork(self, args):
        depth, length = int(args[0]), int(args[1])
        if length > self.params.confirmations:
            raise ScenarioError("fork length must not exceed the confirmation depth")
        self.chain.inject_fork(min(depth, len(self.chain.canonical) - 1), length)

    def do_relay(self, args):
        self.relay_round(int(args[0]) if args else None)

    def do_batch(self, args):
        try:
            env = self.relays[0].relay_batch(self.updater, self.nodes, int(args[0]))
        except RetrySignal:
            self.report.retries += 1
            return
        self._submit(self.relays[0].identity.decode(), True, f"batch{args[0]}", env)

    def do_attack(self, args):
        count = int(args[1]) if len(args) > 1 else 1
        headers = [b.header for b in self.chain.all_blocks()]
        for adv in self.adversaries:
            for _ in range(count):
                raw = adv.attack(args[0], self.seen, headers)
                self._submit(adv.identity.decode(), False, args[0], raw)

    def do_lock(self, args):
        self.pending_locks[args[0]] = self.lock.lock(args[0], int(args[1]))

    def do_mint(self, args):
        req = self.pending_locks.get(args[0])
        if req is None:
            self.mint.log.append(("reject", f"no lock for {args[0]}"))
            return
        self.mint.mint(req)


def run_scenario(scenario: Union[Scenario, str], proof_cache: Optional[Dict] = None) -> Report:
    if isinstance(scenario, str):
        scenario = parse_scenario(scenario)
    return ScenarioRunner(scenario, proof_cache).run()


def random_schedule(seed: int, steps: int = 12, max_adversaries: int = 3, rounds: int = 2,
                    confirmations: int = 2, chain_seeds: int = 8) -> Scenario:
    """
    A randomized run: one honest relay, up to `max_adversaries` adversarial
    relays, forks no longer than the confirmation depth, lagging relays.
    The chain seed is drawn from a small pool so repeated block positions
    reuse proofs across runs when a proof cache is shared.
    """
    rng = random.Random(seed)
    settings = dict(DEFAULTS)
    settings.update({
        "seed": str(rng.randrange(chain_seeds)),
        "committee": "4",
        "quorum": "2/3",
        "rounds": str(rounds),
        "confirmations": str(confirmations),
        "adversaries": str(rng.randint(0, max_adversaries)),
        "forging_nodes": str(rng.randint(0, 1)),
    })
    out: List[Tuple[str, List[str], int]] = []
    for i in range(steps):
        x = rng.random()
        if x < 0.35:
            out.append(("produce", [str(rng.randint(1, 2))], i + 1))
        elif x < 0.5:
            out.append(("fork", [str(rng.randint(0, 2)), str(rng.randint(1, confirmations))], i + 1))
        elif x < 0.75:
            out.append(("relay", [str(rng.randint(1, 3))], i + 1))
        else:
            out.append(("attack", [rng.choice(ATTACKS), str(rng.randint(1, 3))], i + 1))
    out.append(("expect", ["forged_rejected"], steps + 1))
    out.append(("expect", ["prefix"], steps + 2))
    out.append(("expect", ["live"], steps + 3))
    return Scenario(settings, out)
