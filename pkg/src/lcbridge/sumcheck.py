"""
The sumcheck protocol for sums of products of multilinear tables.

A claim has the shape  H = sum over b in {0,1}^l of  sum_t c_t * prod_j T_{t,j}(b).
Variables are bound lowest index first, matching the little-endian table
layout, so binding variable 1 to r folds entries (2k, 2k+1) into one.
Round messages are coefficient vectors whose length is the per-round degree
bound plus one; the verifier rejects any other length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .codec import Reader, Writer
from .field import P, inv, log2_exact, poly_eval
from .transcript import Transcript


def _interp_matrix(deg: int) -> List[List[int]]:
    """Rows map evaluations at 0..deg to monomial coefficients."""
    n = deg + 1
    rows = [[0] * n for _ in range(n)]
    for t in range(n):
        # Lagrange basis polynomial for node t
        basis = [1]
        denom = 1
        for s in range(n):
            if s == t:
                continue
            basis = [((basis[i - 1] if i > 0 else 0) - s * (basis[i] if i < len(basis) else 0)) % P
                     for i in range(len(basis) + 1)]
            denom = denom * (t - s) % P
        scale = inv(denom)
        for j in range(n):
            rows[j][t] = basis[j] * scale % P
    return rows


_INTERP = {d: _interp_matrix(d) for d in range(0, 6)}


def coeffs_from_evals(evals: Sequence[int]) -> List[int]:
    deg = len(evals) - 1
    m = _INTERP.get(deg) or _INTERP.setdefault(deg, _interp_matrix(deg))
    return [sum(row[t] * evals[t] for t in range(deg + 1)) % P for row in m]


class SumOfProducts:
    """Mutable prover state; every table is folded in place as variables get bound."""

    def __init__(self, terms: Sequence[Tuple[int, Sequence[Sequence[int]]]], num_vars: Optional[int] = None):
        self.terms = []
        size = None
        for coeff, tables in terms:
            tabs = [[v % P for v in t] for t in tables]
            for t in tabs:
                if size is None:
                    size = len(t)
                elif len(t) != size:
                    raise ValueError("all tables in a sum-of-products instance must have the same size")
            self.terms.append((coeff % P, tabs))
        if size is None:
            if num_vars is None:
                raise ValueError("empty instance needs an explicit variable count")
            size = 1 << num_vars
        self.num_vars = log2_exact(size)
        if num_vars is not None and num_vars != self.num_vars:
            raise ValueError("table size does not match num_vars")
        self.size = size

    @classmethod
    def single(cls, table: Sequence[int]) -> "SumOfProducts":
        return cls([(1, [table])])

    @property
    def max_degree(self) -> int:
        return max((len(t) for _, t in self.terms), default=0)

    def total(self) -> int:
        acc = 0
        for coeff, tabs in self.terms:
            s = 0
            for b in range(self.size):
                prod = coeff
                for t in tabs:
                    prod = prod * t[b] % P
                s += prod
            acc += s
        return acc % P

    def round_poly(self, degree: int) -> List[int]:
        if self.size < 2:
            raise ValueError("no variables left to bind")
        half = self.size // 2
        evals = [0] * (degree + 1)
        pts = range(degree + 1)
        for coeff, tabs in self.terms:
            acc = [0] * (degree + 1)
            if not tabs:
                # constant term: one copy of coeff per remaining boolean point
                for t in pts:
                    acc[t] = half
            else:
                for k in range(half):
                    prod = None
                    for tab in tabs:
                        a0 = tab[2 * k]
                        d = tab[2 * k + 1] - a0
                        vals = [a0 + t * d for t in pts]
                        prod = vals if prod is None else [x * y % P for x, y in zip(prod, vals)]
                    for t in pts:
                        acc[t] += prod[t]
            for t in pts:
                evals[t] = (evals[t] + coeff * acc[t]) % P
        return coeffs_from_evals(evals)

    def bind(self, r: int):
        half = self.size // 2
        for _, tabs in self.terms:
            for i, tab in enumerate(tabs):
                tabs[i] = [(tab[2 * k] + r * (tab[2 * k + 1] - tab[2 * k])) % P for k in range(half)]
        self.size = half

    def factor_values(self) -> List[List[int]]:
        """Per term, the value of each factor at the bound point (only once fully bound)."""
        if self.size != 1:
            raise ValueError("instance is not fully bound")
        return [[t[0] for t in tabs] for _, tabs in self.terms]

    def value(self) -> int:
        return self.total()


@dataclass
class SumcheckProof:
    claim: int
    rounds: List[List[int]]
    final_value: int
    point: List[int] = field(default_factory=list, compare=False)

    @property
    def num_rounds(self) -> int:
        return len(self.rounds)

    def write(self, w: Writer):
        w.felt(self.claim)
        write_rounds(w, self.rounds)
        w.felt(self.final_value)

    def to_bytes(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> "SumcheckProof":
        claim = r.felt()
        rounds = read_rounds(r)
        return cls(claim, rounds, r.felt())

    @classmethod
    def from_bytes(cls, data: bytes) -> "SumcheckProof":
        r = Reader(data)
        out = cls.read(r)
        r.expect_done()
        return out


def write_rounds(w: Writer, rounds: Sequence[Sequence[int]]):
    w.u32(len(rounds))
    for poly in rounds:
        w.felts(poly)


def read_rounds(r: Reader) -> List[List[int]]:
    n = r.u32()
    if n > 4096:
        from .codec import DecodeError
        raise DecodeError("too many sumcheck rounds")
    return [r.felts(limit=64) for _ in range(n)]


def _degrees(degrees: Union[int, Sequence[int]], n: int) -> List[int]:
    if isinstance(degrees, int):
        return [degrees] * n
    if len(degrees) != n:
        raise ValueError("degree list does not match the number of rounds")
    return list(degrees)


def absorb_round(transcript: Transcript, poly: Sequence[int]) -> int:
    transcript.absorb_felts("sumcheck.round", poly)
    return transcript.challenge("sumcheck.r")


def prove_rounds(inst: SumOfProducts, degrees, transcript: Transcript, count: Optional[int] = None):
    count = inst.num_vars if count is None else count
    degs = _degrees(degrees, count)
    rounds, point = [], []
    for deg in degs:
        poly = inst.round_poly(deg)
        r = absorb_round(transcript, poly)
        inst.bind(r)
        rounds.append(poly)
        point.append(r)
    return rounds, point


def verify_rounds(claim: int, rounds: Sequence[Sequence[int]], degrees, transcript: Transcript):
    """Replay the round equations; returns (point, reduced claim) or None."""
    try:
        degs = _degrees(degrees, len(rounds))
    except ValueError:
        return None
    cur = claim % P
    point = []
    for poly, deg in zip(rounds, degs):
        if len(poly) != deg + 1:
            return None
        if (poly_eval(poly, 0) + poly_eval(poly, 1)) % P != cur:
            return None
        r = absorb_round(transcript, poly)
        cur = poly_eval(poly, r)
        point.append(r)
    return point, cur


def _as_instance(f) -> SumOfProducts:
    if isinstance(f, SumOfProducts):
        return f
    return SumOfProducts.single(list(f))


def sumcheck_prove(f, transcript: Transcript, degrees=None) -> SumcheckProof:
    inst = _as_instance(f)
    degrees = inst.max_degree if degrees is None else degrees
    claim = inst.total()
    transcript.absorb_felt("sumcheck.claim", claim)
    rounds, point = prove_rounds(inst, degrees, transcript)
    return SumcheckProof(claim, rounds, inst.value(), point)


def sumcheck_verify(claim: int, proof: SumcheckProof, oracle: Callable[[List[int]], int],
                    transcript: Transcript, degrees, num_vars: Optional[int] = None) -> bool:
    if proof.claim != claim % P:
        return False
    if num_vars is not None and len(proof.rounds) != num_vars:
        return False
    transcript.absorb_felt("sumcheck.claim", proof.claim)
    res = verify_rounds(proof.claim, proof.rounds, degrees, transcript)
    if res is None:
        return False
    point, reduced = res
    if reduced != proof.final_value:
        return False
    return oracle(point) % P == reduced
