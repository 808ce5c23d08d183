"""Distributed sumcheck, distributed commitment, and the full distributed argument."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..circuit import AnyCircuit, as_data_parallel, split_public
from ..codec import DecodeError, Reader, Writer
from ..field import P, eq_table, is_power_of_two, log2_exact
from ..merkle import MerkleRoot
from ..pc import COLUMN, PcCommitment, PcOpeningProof, PcParams, open_flow, verify_flow
from ..sumcheck import SumcheckProof, SumOfProducts, absorb_round, prove_rounds
from ..transcript import Transcript
from ..virgo import DeVirgoProof, ProofParams, circuit_digest, pc_params_for, prove_with_backend, virgo_verify
from . import transport as tp
from .cluster import Cluster, ClusterConfig, DistributedBackend


@dataclass
class ProveStats:
    workers: int
    copies: int
    wall_time: float
    proof_size: int
    per_worker_gates: List[int]
    per_worker_busy: List[float]
    frames: dict

    def as_dict(self) -> dict:
        return {
            "workers": self.workers,
            "copies": self.copies,
            "wall_time": self.wall_time,
            "proof_size": self.proof_size,
            "per_worker_gates": self.per_worker_gates,
            "per_worker_busy": self.per_worker_busy,
            "frames": self.frames,
        }


def devirgo_prove(cluster: Cluster, c: AnyCircuit, inputs: Sequence[int], identity: bytes,
                  params: ProofParams = ProofParams()) -> Tuple[DeVirgoProof, ProveStats]:
    dp = as_data_parallel(c)
    start = time.perf_counter()
    config_hash = ClusterConfig(cluster.size, identity=identity).digest(
        {"circuit": circuit_digest(dp).hex(), "rho": params.rho, "queries": params.queries})
    cluster.handshake(config_hash)
    cluster.reset_counters()
    backend = DistributedBackend(cluster, dp.copies, pc_params_for(dp, params), circuit=dp, inputs=inputs,
                                 config_hash=config_hash)
    public, _ = split_public(dp, inputs)
    proof = prove_with_backend(backend, dp, public, identity, params)
    wall = time.perf_counter() - start
    frames = cluster.frame_counts()
    ws = cluster.stats()
    stats = ProveStats(cluster.size, dp.copies, wall, len(proof.to_bytes()),
                       [w["gates"] for w in ws], [w["busy"] for w in ws], frames)
    return proof, stats


def devirgo_verify(c: AnyCircuit, public: Sequence[int], claimed_output: Sequence[int], proof,
                   identity: bytes, params: ProofParams = ProofParams()) -> bool:
    return virgo_verify(c, public, claimed_output, proof, identity, params)


def _session(cluster: Cluster, extra) -> str:
    """Fresh handshake so a cluster can move between proofs, sumchecks and commitments."""
    h = ClusterConfig(cluster.size).digest(extra)
    cluster.handshake(h)
    cluster.reset_counters()
    return h


# ---------------------------------------------------------------- sumcheck

def dist_sumcheck(cluster: Cluster, copy_terms: Sequence[Sequence[Tuple[int, Sequence[Sequence[int]]]]],
                  transcript: Transcript, degree: Optional[int] = None) -> SumcheckProof:
    """
    copy_terms[i] is copy i's instance f^(i); the global polynomial is
    f(x, i) = f^(i)(x) with the copy index in the high variables. The result
    is identical to sumcheck_prove on the concatenated global tables.
    """
    n_copies = len(copy_terms)
    if not is_power_of_two(n_copies):
        raise ValueError("number of copies must be a power of two")
    shape = [len(tabs) for _, tabs in copy_terms[0]]
    coeffs = [c % P for c, _ in copy_terms[0]]
    for terms in copy_terms:
        if [len(t) for _, t in terms] != shape or [c % P for c, _ in terms] != coeffs:
            raise ValueError("every copy must share the same term structure")
    degree = max(shape) if degree is None else degree
    backend = DistributedBackend(cluster, n_copies, None,
                                 config_hash=_session(cluster, {"sumcheck": n_copies, "degree": degree}))
    loads = [{"terms": [[[c, [list(t) for t in tabs]] for c, tabs in copy_terms[cid]] for cid in ids]}
             for ids in backend.assignment]
    cluster.broadcast(tp.SC_LOAD, per_worker=loads)
    replies = cluster.broadcast(tp.SC_BEGIN, {"degree": degree})
    claim = sum(r["total"] for r in replies) % P
    transcript.absorb_felt("sumcheck.claim", claim)
    rounds, point = [], []
    kind, msg = backend._merge(replies)
    while kind == "round":
        r = absorb_round(transcript, msg)
        rounds.append(msg)
        point.append(r)
        kind, msg = backend._merge(cluster.broadcast(tp.SC_BIND, {"r": r}))
    # msg[c] = (per-term factor values,) for copy c; rebuild each factor over the copy index
    terms = []
    for t, coeff in enumerate(coeffs):
        tables = [[msg[c][0][t][j] for c in range(n_copies)] for j in range(shape[t])]
        terms.append((coeff, tables))
    inst = SumOfProducts(terms, num_vars=log2_exact(n_copies))
    r3, p3 = prove_rounds(inst, degree, transcript)
    return SumcheckProof(claim, rounds + r3, inst.value(), point + p3)


# ---------------------------------------------------------- commitment

@dataclass
class DistOpening:
    evals: List[int]
    proof: PcOpeningProof

    def to_bytes(self) -> bytes:
        w = Writer()
        w.felts(self.evals)
        self.proof.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DistOpening":
        r = Reader(data)
        evals = r.felts()
        proof = PcOpeningProof.read(r)
        r.expect_done()
        return cls(evals, proof)


class DistributedPc:
    """Committed per-copy tables spread over a cluster."""

    def __init__(self, cluster: Cluster, tables: Sequence[Sequence[int]], params: PcParams):
        if not is_power_of_two(len(tables)):
            raise ValueError("number of copies must be a power of two")
        self.params = params
        self.copies = len(tables)
        h = _session(cluster, {"pc": [params.num_vars, params.rho, params.queries], "copies": self.copies})
        self.backend = DistributedBackend(cluster, self.copies, params, tables=tables, config_hash=h)
        self.commitment: Optional[PcCommitment] = None


def dist_pc_commit(cluster: Cluster, tables: Sequence[Sequence[int]], params: PcParams):
    state = DistributedPc(cluster, tables, params)
    state.commitment = PcCommitment(MerkleRoot(state.backend.pc_commit()))
    return state.commitment, state


def aggregate_evaluations(r_high: Sequence[int], evals: Sequence[int]) -> int:
    """f(r) = sum_i beta(r_high, i) * f^(i)(r_low)."""
    eq = eq_table(r_high)
    if len(eq) != len(evals):
        raise ValueError("copy-variable count does not match the number of evaluations")
    return sum(e * y for e, y in zip(eq, evals)) % P


def dist_pc_open(state: DistributedPc, r: Sequence[int], transcript: Transcript) -> Tuple[int, DistOpening]:
    ell = state.params.num_vars
    low, high = list(r[:ell]), list(r[ell:])
    if len(high) != log2_exact(state.copies):
        raise ValueError("point dimension does not match local plus copy variables")
    evals, proof = open_flow(state.backend, state.params, [low], transcript)
    ys = [e[0] for e in evals]
    return aggregate_evaluations(high, ys), DistOpening(ys, proof)


def dist_pc_verify(com: PcCommitment, r: Sequence[int], y: int, opening: DistOpening, params: PcParams,
                   copies: int, transcript: Transcript) -> bool:
    ell = params.num_vars
    low, high = list(r[:ell]), list(r[ell:])
    try:
        if len(opening.evals) != copies or aggregate_evaluations(high, opening.evals) != y % P:
            return False
        return verify_flow(com.root.digest, params, [low], [[e] for e in opening.evals], opening.proof,
                           transcript, copies, COLUMN)
    except (ValueError, IndexError, DecodeError):
        return False


# ----------------------------------------------------------- compression

@dataclass
class CompressedEnvelope:
    kind: str
    payload: bytes
    input_size: int

    @property
    def output_size(self) -> int:
        return len(self.payload)


class Compressor:
    """Hook for a recursive wrapper around a proof; records the sizes it sees."""

    kind = "abstract"

    def compress(self, proof_bytes: bytes) -> CompressedEnvelope:
        raise NotImplementedError

    def decompress(self, env: CompressedEnvelope) -> bytes:
        raise NotImplementedError


class IdentityCompressor(Compressor):
    kind = "identity"

    def __init__(self):
        self.history: List[Tuple[int, int]] = []

    def compress(self, proof_bytes: bytes) -> CompressedEnvelope:
        env = CompressedEnvelope(self.kind, bytes(proof_bytes), len(proof_bytes))
        self.history.append((env.input_size, env.output_size))
        return env

    def decompress(self, env: CompressedEnvelope) -> bytes:
        if env.kind != self.kind:
            raise ValueError(f"envelope kind {env.kind!r} is not {self.kind!r}")
        return env.payload
