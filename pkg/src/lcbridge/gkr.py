"""
GKR for data-parallel layered circuits.

Layer i's claim is reduced by one sumcheck over (x_local, y_local, copy):

    claim = sum_{x,y,c}  Wadd(x,y,c) * (V(x,c) + V(y,c)) + Wmul(x,y,c) * V(x,c) * V(y,c)

where the weights combine the two incoming claims with transcript scalars
(a1, a2). Local variables are bound first, two rounds of degree 2 per
variable, using per-copy bookkeeping tables; the copy variables come last
and are bound by whoever aggregates the per-copy results (degree 3). A plain
circuit is the one-copy case, where the copy phase is empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple, Union

from .circuit import ADD, AnyCircuit, LayerValues, LayeredCircuit, as_data_parallel, evaluate_sub, wiring_mle
from .codec import DecodeError, Reader, Writer
from .field import P, beta_evaluate, eq_table, mle_evaluate
from .sumcheck import SumOfProducts, absorb_round, prove_rounds, read_rounds, verify_rounds, write_rounds
from .transcript import Transcript

LOCAL_DEGREE = 2
COPY_DEGREE = 3


@dataclass
class LayerProof:
    rounds: List[List[int]]
    vx: int
    vy: int


@dataclass
class GkrProof:
    output: List[int]
    layers: List[LayerProof]
    # (u, v) handed to the next layer; prover-side convenience, not serialized
    points: List[Tuple[List[int], List[int]]] = field(default_factory=list, compare=False)

    def write(self, w: Writer):
        w.felts(self.output)
        w.u32(len(self.layers))
        for i, lp in enumerate(self.layers):
            w.u32(i)
            write_rounds(w, lp.rounds)
            w.felt(lp.vx).felt(lp.vy)

    @classmethod
    def read(cls, r: Reader) -> "GkrProof":
        output = r.felts()
        n = r.u32()
        if n > 4096:
            raise DecodeError("too many layers")
        layers = []
        for i in range(n):
            if r.u32() != i:
                raise DecodeError("layer tag out of order")
            rounds = read_rounds(r)
            layers.append(LayerProof(rounds, r.felt(), r.felt()))
        return cls(output, layers)

    def to_bytes(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GkrProof":
        r = Reader(data)
        out = cls.read(r)
        r.expect_done()
        return out


def layer_degrees(c: AnyCircuit, i: int) -> List[int]:
    dp = as_data_parallel(c)
    s = dp.sub.layer_vars(i + 1)
    return [LOCAL_DEGREE] * (2 * s) + [COPY_DEGREE] * dp.copy_bits


class CopySetProver:
    """
    Per-copy bookkeeping for the local-variable rounds of every layer.

    One instance may hold any subset of the copies; the messages it returns
    are summed over the copies it owns, so a coordinator adding the replies
    of disjoint holders gets exactly the single-machine message.
    """

    def __init__(self, sub: LayeredCircuit, copy_ids: Sequence[int], values: Sequence[LayerValues], copy_bits: int):
        self.sub = sub
        self.copy_ids = list(copy_ids)
        self.values = list(values)
        self.copy_bits = copy_bits
        self._insts: List[SumOfProducts] = []
        self._weights: List[List[int]] = []
        self._layer = None
        self._phase = 0
        self._left = 0
        self._rx: List[int] = []
        self._vx: List[int] = []

    @property
    def gate_evaluations(self) -> int:
        return sum(v.gate_evaluations for v in self.values)

    def _poly(self) -> List[int]:
        acc = [0] * (LOCAL_DEGREE + 1)
        for inst in self._insts:
            for k, c in enumerate(inst.round_poly(LOCAL_DEGREE)):
                acc[k] = (acc[k] + c) % P
        return acc

    def _next(self):
        while self._left == 0:
            if self._phase == 1:
                self._start_phase2()
            else:
                finals = [(vx, inst.factor_values()[0][0]) for vx, inst in zip(self._vx, self._insts)]
                self._phase = 0
                self._insts = []
                return "finals", finals
        return "round", self._poly()

    def begin(self, i: int, a1: int, a2: int, u: Sequence[int], v: Sequence[int]):
        sub = self.sub
        s_i = sub.layer_vars(i)
        ul, uc = list(u[:s_i]), list(u[s_i:])
        vl, vc = list(v[:s_i]), list(v[s_i:])
        eq_ul, eq_vl = eq_table(ul), eq_table(vl)
        eq_uc, eq_vc = eq_table(uc), eq_table(vc)
        size_next = sub.layers[i + 1].size
        gates = sub.layers[i].gates
        self._layer = i
        self._insts, self._weights = [], []
        for cid, vals in zip(self.copy_ids, self.values):
            bu = a1 * eq_uc[cid] % P
            bv = a2 * eq_vc[cid] % P
            w = [0] * sub.layers[i].size
            for out, _ in gates:
                w[out] = (bu * eq_ul[out] + bv * eq_vl[out]) % P
            below = vals.values[i + 1]
            t1 = [0] * size_next
            t2 = [0] * size_next
            for out, g in gates:
                wz = w[out]
                if g.kind == ADD:
                    t1[g.left] += wz
                    t2[g.left] += wz * below[g.right]
                else:
                    t1[g.left] += wz * below[g.right]
            self._weights.append(w)
            self._insts.append(SumOfProducts([(1, [below, t1]), (1, [t2])]))
        self._phase = 1
        self._left = sub.layer_vars(i + 1)
        self._rx = []
        return self._next()

    def _start_phase2(self):
        i = self._layer
        sub = self.sub
        eq_x = eq_table(self._rx)
        size_next = sub.layers[i + 1].size
        gates = sub.layers[i].gates
        insts, vxs = [], []
        for w, inst, vals in zip(self._weights, self._insts, self.values):
            vx = inst.factor_values()[0][0]
            s1 = [0] * size_next
            s2 = [0] * size_next
            for out, g in gates:
                c = w[out] * eq_x[g.left] % P
                if g.kind == ADD:
                    s1[g.right] += c
                    s2[g.right] += c * vx
                else:
                    s1[g.right] += c * vx
            vxs.append(vx)
            insts.append(SumOfProducts([(1, [vals.values[i + 1], s1]), (1, [s2])]))
        self._insts, self._vx = insts, vxs
        self._phase = 2
        self._left = sub.layer_vars(i + 1)

    def bind(self, r: int):
        if self._phase == 0 or self._left == 0:
            raise RuntimeError("bind outside an active sumcheck phase")
        for inst in self._insts:
            inst.bind(r)
        if self._phase == 1:
            self._rx.append(r)
        self._left -= 1
        return self._next()


def copy_phase_tables(sub: LayeredCircuit, i: int, a1: int, a2: int, u, v, rx, ry, copy_bits: int):
    """Per-copy multipliers of (X+Y) and X*Y once the local variables are fixed."""
    s_i = sub.layer_vars(i)
    add_u, mul_u = wiring_mle(sub, i, u[:s_i], rx, ry)
    add_v, mul_v = wiring_mle(sub, i, v[:s_i], rx, ry)
    eq_uc, eq_vc = eq_table(u[s_i:]), eq_table(v[s_i:])
    n = 1 << copy_bits
    ptab = [(a1 * add_u * eq_uc[c] + a2 * add_v * eq_vc[c]) % P for c in range(n)]
    qtab = [(a1 * mul_u * eq_uc[c] + a2 * mul_v * eq_vc[c]) % P for c in range(n)]
    return ptab, qtab


def prove_layers(backend, c: AnyCircuit, transcript: Transcript):
    """
    Coordinator side. `backend` exposes gkr_begin(i, a1, a2, u, v) and
    gkr_bind(r), each answering ("round", summed poly) or ("finals", [(X_c, Y_c)]).
    Returns (layer proofs, per-layer points, final (u, v)).
    """
    dp = as_data_parallel(c)
    sub, n = dp.sub, dp.copy_bits
    g = transcript.challenges("gkr.g", sub.layer_vars(0) + n)
    a1, a2, u, v = 1, 0, g, g
    layers, points = [], []
    for i in range(dp.depth):
        s_next = sub.layer_vars(i + 1)
        rounds, rs = [], []
        kind, msg = backend.gkr_begin(i, a1, a2, u, v)
        while kind == "round":
            r = absorb_round(transcript, msg)
            rounds.append(msg)
            rs.append(r)
            kind, msg = backend.gkr_bind(r)
        if len(rs) != 2 * s_next or len(msg) != dp.copies:
            raise RuntimeError(f"layer {i}: backend returned an inconsistent number of rounds or copies")
        rx, ry = rs[:s_next], rs[s_next:]
        ptab, qtab = copy_phase_tables(sub, i, a1, a2, u, v, rx, ry, n)
        xs = [m[0] for m in msg]
        ys = [m[1] for m in msg]
        inst = SumOfProducts([(1, [ptab, xs]), (1, [ptab, ys]), (1, [qtab, xs, ys])])
        r3, rc = prove_rounds(inst, COPY_DEGREE, transcript)
        rounds.extend(r3)
        fv = inst.factor_values()
        vx, vy = fv[0][1], fv[1][1]
        transcript.absorb_felts("gkr.claims", [vx, vy])
        u, v = rx + rc, ry + rc
        layers.append(LayerProof(rounds, vx, vy))
        points.append((u, v))
        if i + 1 < dp.depth:
            a1, a2 = transcript.challenges("gkr.alpha", 2)
    return layers, points, (u, v)


def verify_layers(c: AnyCircuit, output: Sequence[int], layers: Sequence[LayerProof], transcript: Transcript):
    """Returns (u, v, vx, vy) for the input layer, or None."""
    dp = as_data_parallel(c)
    sub, n = dp.sub, dp.copy_bits
    if len(layers) != dp.depth or len(output) != dp.output_size:
        return None
    g = transcript.challenges("gkr.g", sub.layer_vars(0) + n)
    a1, a2, u, v = 1, 0, g, g
    claim = mle_evaluate(list(output), g)
    for i, lp in enumerate(layers):
        s_i = sub.layer_vars(i)
        s_next = sub.layer_vars(i + 1)
        res = verify_rounds(claim, lp.rounds, layer_degrees(dp, i), transcript)
        if res is None:
            return None
        point, reduced = res
        rx, ry, rc = point[:s_next], point[s_next:2 * s_next], point[2 * s_next:]
        add_u, mul_u = wiring_mle(sub, i, u[:s_i], rx, ry)
        add_v, mul_v = wiring_mle(sub, i, v[:s_i], rx, ry)
        bu, bv = beta_evaluate(u[s_i:], rc), beta_evaluate(v[s_i:], rc)
        pv = (a1 * add_u * bu + a2 * add_v * bv) % P
        qv = (a1 * mul_u * bu + a2 * mul_v * bv) % P
        if (pv * (lp.vx + lp.vy) + qv * lp.vx % P * lp.vy) % P != reduced:
            return None
        transcript.absorb_felts("gkr.claims", [lp.vx, lp.vy])
        u, v = rx + rc, ry + rc
        if i + 1 < dp.depth:
            a1, a2 = transcript.challenges("gkr.alpha", 2)
            claim = (a1 * lp.vx + a2 * lp.vy) % P
    last = layers[-1]
    return u, v, last.vx, last.vy


def evaluate_copies(c: AnyCircuit, inputs: Sequence[int]) -> List[LayerValues]:
    dp = as_data_parallel(c)
    m = dp.sub.input_size
    if len(inputs) != dp.input_size:
        raise ValueError(f"expected {dp.input_size} inputs, got {len(inputs)}")
    return [evaluate_sub(dp.sub, inputs[k * m:(k + 1) * m]) for k in range(dp.copies)]


class LocalGkrBackend:
    """Every copy held in this process."""

    def __init__(self, c: AnyCircuit, per_copy: Sequence[LayerValues]):
        dp = as_data_parallel(c)
        self.prover = CopySetProver(dp.sub, range(dp.copies), per_copy, dp.copy_bits)

    def gkr_begin(self, i, a1, a2, u, v):
        return self.prover.begin(i, a1, a2, u, v)

    def gkr_bind(self, r):
        return self.prover.bind(r)


def gkr_prove(c: AnyCircuit, inputs: Sequence[int], transcript: Transcript) -> GkrProof:
    per_copy = evaluate_copies(c, inputs)
    output = sum((pc.values[0] for pc in per_copy), [])
    transcript.absorb_felts("gkr.output", output)
    layers, points, _ = prove_layers(LocalGkrBackend(c, per_copy), c, transcript)
    return GkrProof(output, layers, points)


InputOracle = Union[Sequence[int], Callable[[List[int], List[int], int, int], bool]]


def gkr_verify(c: AnyCircuit, claimed_output: Sequence[int], proof: GkrProof,
               input_oracle: InputOracle, transcript: Transcript) -> bool:
    if [x % P for x in claimed_output] != list(proof.output):
        return False
    transcript.absorb_felts("gkr.output", proof.output)
    res = verify_layers(c, proof.output, proof.layers, transcript)
    if res is None:
        return False
    u, v, vx, vy = res
    if callable(input_oracle):
        return bool(input_oracle(u, v, vx, vy))
    table = list(input_oracle)
    if len(table) != as_data_parallel(c).input_size:
        return False
    return mle_evaluate(table, u) == vx and mle_evaluate(table, v) == vy
