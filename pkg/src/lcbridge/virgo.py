"""
The argument for data-parallel circuits: commit the witness part of the
input layer, run GKR layer by layer, then open the committed witness at the
two points the last layer leaves behind.

Each copy's input layer is split in two halves. The lower half is public and
the verifier evaluates its extension directly; the upper half is the witness
and is committed per copy. For an input-layer point z = (z_low, z_top, z_copy):

    V_d(z) = (1 - z_top) * X(z_low, z_copy) + z_top * W(z_low, z_copy)
    W(z_low, z_copy) = sum_i beta(z_copy, i) * W_i(z_low)

so the prover reports every copy's W_i(z_low) and a single batched opening
covers all of them. The prover logic is written against a backend; the local
backend holds every copy in this process, the distributed one in
``lcbridge.devirgo`` spreads copies over workers. Both produce the same bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Sequence

from .circuit import AnyCircuit, DataParallelCircuit, as_data_parallel, dump_circuit, split_public
from .codec import DecodeError, Reader, Writer
from .field import P, eq_table, mle_evaluate
from .gkr import LayerProof, LocalGkrBackend, evaluate_copies, prove_layers, verify_layers
from .pc import COLUMN, LocalPcBackend, PcOpeningProof, PcParams, open_flow, verify_flow
from .sumcheck import read_rounds, write_rounds
from .transcript import Transcript

PROOF_MAGIC = b"LCBP"
PROOF_VERSION = 1
TRANSCRIPT_LABEL = b"lcbridge/virgo/v1"


@dataclass(frozen=True)
class ProofParams:
    rho: int = 8
    queries: int = 16


def circuit_digest(c: AnyCircuit) -> bytes:
    return hashlib.sha256(dump_circuit(c).encode()).digest()


def witness_vars(c: AnyCircuit) -> int:
    dp = as_data_parallel(c)
    s_d = dp.sub.layer_vars(dp.depth)
    return s_d - 1 if dp.sub.num_public else s_d


def pc_params_for(c: AnyCircuit, params: ProofParams) -> PcParams:
    return PcParams(witness_vars(c), params.rho, params.queries)


def witness_tables(c: AnyCircuit, inputs: Sequence[int]) -> List[List[int]]:
    dp = as_data_parallel(c)
    _, wit = split_public(dp, inputs)
    size = len(wit) // dp.copies
    return [wit[i * size:(i + 1) * size] for i in range(dp.copies)]


@dataclass
class DeVirgoProof:
    copies: int
    witness_commitment: bytes
    output: List[int]
    layers: List[LayerProof]
    input_evals: List[List[int]]
    opening: PcOpeningProof

    def to_bytes(self) -> bytes:
        w = Writer()
        w.raw(PROOF_MAGIC).u8(PROOF_VERSION).u32(self.copies)
        w.blob(self.witness_commitment)
        w.felts(self.output)
        w.u32(len(self.layers))
        for i, lp in enumerate(self.layers):
            w.u32(i)
            write_rounds(w, lp.rounds)
            w.felt(lp.vx).felt(lp.vy)
        w.u32(len(self.input_evals))
        for ys in self.input_evals:
            w.felts(ys)
        self.opening.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DeVirgoProof":
        r = Reader(data)
        if r.raw(4) != PROOF_MAGIC:
            raise DecodeError("not a proof")
        if r.u8() != PROOF_VERSION:
            raise DecodeError("unsupported proof version")
        copies = r.u32()
        com = r.blob()
        output = r.felts()
        nl = r.u32()
        if nl > 4096:
            raise DecodeError("too many layers")
        layers = []
        for i in range(nl):
            if r.u32() != i:
                raise DecodeError("layer tag out of order")
            rounds = read_rounds(r)
            layers.append(LayerProof(rounds, r.felt(), r.felt()))
        ne = r.u32()
        if ne > 1 << 16:
            raise DecodeError("too many copies")
        evals = [r.felts(limit=2) for _ in range(ne)]
        opening = PcOpeningProof.read(r)
        r.expect_done()
        return cls(copies, com, output, layers, evals, opening)

    def size_breakdown(self) -> dict:
        gkr = sum(8 * (len(p) + 1) for lp in self.layers for p in lp.rounds) + 16 * len(self.layers)
        return {
            "total": len(self.to_bytes()),
            "gkr": gkr,
            "pc": len(self.opening.to_bytes()),
            "merkle_paths": self.opening.path_count(),
        }


class LocalBackend:
    """Single-machine prover state: every copy evaluated and committed here."""

    def __init__(self, c: AnyCircuit, inputs: Sequence[int], params: ProofParams):
        self.circuit = as_data_parallel(c)
        self.per_copy = evaluate_copies(self.circuit, inputs)
        self.gkr = LocalGkrBackend(self.circuit, self.per_copy)
        self.pc = LocalPcBackend(witness_tables(self.circuit, inputs), pc_params_for(c, params), COLUMN)

    @property
    def gate_evaluations(self) -> int:
        return sum(v.gate_evaluations for v in self.per_copy)

    def outputs(self) -> List[int]:
        return sum((v.values[0] for v in self.per_copy), [])

    def gkr_begin(self, *a):
        return self.gkr.gkr_begin(*a)

    def gkr_bind(self, r):
        return self.gkr.gkr_bind(r)

    def pc_commit(self):
        return self.pc.pc_commit()

    def pc_evaluate(self, points):
        return self.pc.pc_evaluate(points)

    def pc_commit_quotient(self, points, mu, evals):
        return self.pc.pc_commit_quotient(points, mu, evals)

    def pc_fold(self, j, beta, etas=None):
        return self.pc.pc_fold(j, beta, etas)

    def pc_open(self, requests):
        return self.pc.pc_open(requests)


def _start_transcript(c: AnyCircuit, public: Sequence[int], identity: bytes, output: Sequence[int]) -> Transcript:
    t = Transcript(TRANSCRIPT_LABEL, identity)
    t.absorb("statement.circuit", circuit_digest(c))
    t.absorb_felts("statement.public", public)
    t.absorb_felts("statement.output", output)
    return t


def _input_points(c: AnyCircuit, u, v):
    dp = as_data_parallel(c)
    s_d = dp.sub.layer_vars(dp.depth)
    cut = s_d - 1 if dp.sub.num_public else s_d
    return list(u[:cut]), list(v[:cut])


def prove_with_backend(backend, c: AnyCircuit, public: Sequence[int], identity: bytes,
                       params: ProofParams = ProofParams()) -> DeVirgoProof:
    dp = as_data_parallel(c)
    output = backend.outputs()
    t = _start_transcript(dp, public, identity, output)
    com = backend.pc_commit()
    t.absorb("virgo.witness", com)
    layers, _, (u, v) = prove_layers(backend, dp, t)
    pu, pv = _input_points(dp, u, v)
    evals, opening = open_flow(backend, pc_params_for(dp, params), [pu, pv], t)
    return DeVirgoProof(dp.copies, com, output, layers, evals, opening)


def virgo_prove(c: AnyCircuit, inputs: Sequence[int], identity: bytes,
                params: ProofParams = ProofParams()) -> DeVirgoProof:
    public, _ = split_public(c, inputs)
    return prove_with_backend(LocalBackend(c, inputs, params), c, public, identity, params)


def virgo_verify(c: AnyCircuit, public: Sequence[int], claimed_output: Sequence[int], proof,
                 identity: bytes, params: ProofParams = ProofParams()) -> bool:
    """Accepts a DeVirgoProof or its bytes; never raises on malformed input."""
    try:
        if isinstance(proof, (bytes, bytearray)):
            proof = DeVirgoProof.from_bytes(bytes(proof))
        return _verify(as_data_parallel(c), list(public), list(claimed_output), proof, identity, params)
    except (DecodeError, ValueError, IndexError, ZeroDivisionError):
        return False


def _verify(dp: DataParallelCircuit, public, claimed_output, proof: DeVirgoProof, identity, params) -> bool:
    if proof.copies != dp.copies or len(proof.input_evals) != dp.copies:
        return False
    if [x % P for x in claimed_output] != proof.output:
        return False
    half = dp.sub.input_size // 2
    if len(public) != (half * dp.copies if dp.sub.num_public else 0):
        return False
    t = _start_transcript(dp, public, identity, proof.output)
    t.absorb("virgo.witness", proof.witness_commitment)
    res = verify_layers(dp, proof.output, proof.layers, t)
    if res is None:
        return False
    u, v, vx, vy = res
    s_d = dp.sub.layer_vars(dp.depth)
    if any(len(ys) != 2 for ys in proof.input_evals):
        return False
    for point, claimed, k in ((u, vx, 0), (v, vy, 1)):
        ul, uc = point[:s_d], point[s_d:]
        eq_c = eq_table(uc)
        wit = sum(e * ys[k] for e, ys in zip(eq_c, proof.input_evals)) % P
        if dp.sub.num_public:
            top = ul[-1]
            pub = mle_evaluate(public, list(ul[:-1]) + list(uc))
            expect = ((1 - top) * pub + top * wit) % P
        else:
            expect = wit
        if expect != claimed:
            return False
    pu, pv = _input_points(dp, u, v)
    return verify_flow(proof.witness_commitment, pc_params_for(dp, params), [pu, pv],
                       proof.input_evals, proof.opening, t, dp.copies, COLUMN)
