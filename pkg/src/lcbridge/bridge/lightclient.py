"""Light-client state, the validation rule, and the statement a relay proves."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from ..sigcircuit import DEFAULT_ROUNDS, build_light_client_circuit, statement_inputs, statement_public, verify_signature
from .chain import DEFAULT_QUORUM, BlockHeader, KeyVault, committee_commitment, quorum_size


@dataclass(frozen=True)
class LightClientState:
    committee: Tuple[int, ...]
    latest: bytes
    height: int
    quorum: Fraction = DEFAULT_QUORUM

    @property
    def committee_commitment(self) -> bytes:
        return committee_commitment(self.committee)

    @property
    def quorum_count(self) -> int:
        return quorum_size(len(self.committee), self.quorum)

    def advance(self, header: BlockHeader, next_committee: Sequence[int]) -> "LightClientState":
        return LightClientState(tuple(next_committee), header.digest, header.height, self.quorum)


def structural_check(lcs: LightClientState, prev: BlockHeader, nxt: BlockHeader) -> Optional[str]:
    """Everything in the rule except the signature relation; returns a reason on failure."""
    if nxt.parent != prev.digest:
        return "parent digest mismatch"
    if nxt.height != prev.height + 1:
        return "height is not parent height + 1"
    if lcs.latest != prev.digest:
        return "state does not describe the parent"
    if prev.validator_commitment != lcs.committee_commitment:
        return "committee does not match the parent's commitment"
    idx = nxt.signers()
    if len(set(idx)) != len(idx):
        return "repeated signer index"
    if any(i < 0 or i >= len(lcs.committee) for i in idx):
        return "signer index outside the committee"
    if len(idx) < lcs.quorum_count:
        return "not enough signers for the quorum"
    return None


def light_cc(lcs: LightClientState, prev: BlockHeader, nxt: BlockHeader, vault: KeyVault,
             message_length: int = 1, rounds: int = DEFAULT_ROUNDS) -> bool:
    """
    The rule a relay proves. The toy signature relation takes the signer's
    key as witness, so checking it natively needs the vault.
    """
    if structural_check(lcs, prev, nxt) is not None:
        return False
    d = nxt.digest
    for i, sigma in nxt.signatures:
        pk = lcs.committee[i]
        sk = vault.get(pk)
        if sk is None or not verify_signature(pk, sk, d, sigma, message_length, rounds):
            return False
    return True


def copies_for(committee_size: int) -> int:
    n = 1
    while n < committee_size:
        n <<= 1
    return n


def signature_entries(header: BlockHeader, committee: Sequence[int], n_sig: int) -> List[Tuple[bytes, int, int]]:
    """Per-copy (digest, pk, sigma), padded to n_sig by repeating the first signature."""
    if not header.signatures or len(header.signatures) > n_sig:
        raise ValueError("signature count does not fit the statement")
    d = header.digest
    entries = [(d, committee[i], sigma) for i, sigma in header.signatures]
    while len(entries) < n_sig:
        entries.append(entries[0])
    return entries


def batch_public(headers: Sequence[BlockHeader], committees: Sequence[Sequence[int]], n_sig: int,
                 message_length: int = 1) -> List[int]:
    out: List[int] = []
    for h, com in zip(headers, committees):
        out.extend(statement_public(signature_entries(h, com, n_sig), message_length))
    return out


def batch_witness_inputs(headers: Sequence[BlockHeader], committees: Sequence[Sequence[int]], n_sig: int,
                         vault: KeyVault, message_length: int = 1) -> List[int]:
    entries, sks = [], []
    for h, com in zip(headers, committees):
        es = signature_entries(h, com, n_sig)
        for _, pk, _ in es:
            sk = vault.get(pk)
            if sk is None:
                raise KeyError("no signing key for a committee member")
            sks.append(sk)
        entries.extend(es)
    return statement_inputs(entries, sks, message_length)


def statement_circuit(batch: int, n_sig: int, message_length: int = 1, rounds: int = DEFAULT_ROUNDS):
    return build_light_client_circuit(batch * n_sig, message_length, rounds)
