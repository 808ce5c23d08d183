"""Simulated sender chain, relays, the updater state machine and applications."""

from .app import BridgeWorld, LockContract, MintContract, MintRequest, Receipt, lock_mint_demo
from .chain import (
    Block,
    BlockHeader,
    ChainParams,
    ChainSimulator,
    ForgingFullNode,
    FullNode,
    KeyVault,
    committee_commitment,
    quorum_size,
)
from .envelope import RelayEnvelope
from .lightclient import LightClientState, light_cc
from .relay import AdversarialRelay, Relay, RelayNetwork, RetrySignal, agreed_headers, batch_prove_and_update
from .scenario import Report, Scenario, ScenarioError, load_scenario, parse_scenario, random_schedule, run_scenario
from .updater import BridgeParams, HeaderDag, HeaderInfo, Updater, main_chain

__all__ = [
    "AdversarialRelay",
    "Block",
    "BlockHeader",
    "BridgeParams",
    "BridgeWorld",
    "ChainParams",
    "ChainSimulator",
    "ForgingFullNode",
    "FullNode",
    "HeaderDag",
    "HeaderInfo",
    "KeyVault",
    "LightClientState",
    "LockContract",
    "MintContract",
    "MintRequest",
    "Receipt",
    "Relay",
    "RelayEnvelope",
    "RelayNetwork",
    "Report",
    "RetrySignal",
    "Scenario",
    "ScenarioError",
    "Updater",
    "agreed_headers",
    "batch_prove_and_update",
    "committee_commitment",
    "light_cc",
    "load_scenario",
    "lock_mint_demo",
    "main_chain",
    "parse_scenario",
    "quorum_size",
    "random_schedule",
    "run_scenario",
]
