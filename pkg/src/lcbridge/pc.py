"""
Polynomial commitment for multilinear tables, FRI style.

A table of 2^l entries is read as the evaluations of a univariate f over a
subgroup H; the prover commits f on a larger coset L (|L| = rho * |H|).
An evaluation claim f~(r) = y becomes a univariate sumcheck: with w the
polynomial interpolating beta(b, r) over H,

    f(x) * w(x) = h(x) * Z_H(x) + x * g(x) + y / |H|

The prover commits h on L and runs FRI on a random combination of f, h, x*h,
g, x*g, which all have degree < |H| exactly when the decomposition is honest.
The verifier never sees g: at each queried x it solves the identity for g(x).

Several polynomials over the same domains ("copies") can be opened together
at shared points with shared challenges. Their oracles are committed either
by column (one Merkle tree per L index over the copies' values, then one tree
over the column roots) or naively (one tree per copy). The column layout
opens all copies at an index with a single top-level path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .codec import DecodeError, Reader, Writer
from .field import (
    P,
    EvaluationDomain,
    batch_inverse,
    eq_table,
    felt_to_bytes,
    fft_evaluate,
    ifft_interpolate,
    inv,
    is_power_of_two,
    mle_evaluate,
    poly_mul,
)
from .merkle import MerklePath, MerkleRoot, MerkleTree, mt_commit, mt_verify
from .transcript import Transcript

COLUMN = "column"
NAIVE = "naive"
_INV2 = inv(2)


@dataclass(frozen=True)
class PcParams:
    num_vars: int
    rho: int = 8
    queries: int = 16

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("the commitment needs at least one variable per polynomial")
        if not is_power_of_two(self.rho) or self.rho < 2:
            raise ValueError("rho must be a power of two >= 2")
        if self.queries < 1:
            raise ValueError("at least one query is required")
        if self.rho << self.num_vars > 1 << 32:
            raise ValueError("evaluation domain too large for the field")

    @property
    def n(self) -> int:
        return 1 << self.num_vars

    @property
    def m(self) -> int:
        return self.rho << self.num_vars

    @property
    def H(self) -> EvaluationDomain:
        return EvaluationDomain.subgroup(self.n, "H")

    @property
    def L(self) -> EvaluationDomain:
        return EvaluationDomain.coset(self.m)

    def fold_domain(self, j: int) -> EvaluationDomain:
        d = self.L
        for _ in range(j):
            d = d.squared()
        return d

    def layer_names(self) -> List[str]:
        return ["f", "h"] + [f"fold{j}" for j in range(1, self.num_vars)]

    def paths_per_query(self, copies: int, scheme: str = COLUMN) -> int:
        # f and h are opened at both points of the pair, each fold layer once
        per = 4 + (self.num_vars - 1)
        return per if scheme == COLUMN else per * copies


@dataclass(frozen=True)
class PcCommitment:
    root: MerkleRoot


@dataclass
class ColumnOpening:
    values: List[int]
    paths: List[MerklePath]

    def write(self, w: Writer):
        w.felts(self.values)
        w.u16(len(self.paths))
        for p in self.paths:
            w.blob(p.to_bytes())

    @classmethod
    def read(cls, r: Reader) -> "ColumnOpening":
        values = r.felts(limit=1 << 16)
        n = r.u16()
        paths = []
        for _ in range(n):
            try:
                paths.append(MerklePath.from_bytes(r.blob()))
            except ValueError as exc:
                raise DecodeError(str(exc)) from exc
        return cls(values, paths)


@dataclass
class QueryOpening:
    f_lo: ColumnOpening
    f_hi: ColumnOpening
    h_lo: ColumnOpening
    h_hi: ColumnOpening
    folds: List[ColumnOpening]

    def all(self) -> List[ColumnOpening]:
        return [self.f_lo, self.f_hi, self.h_lo, self.h_hi] + list(self.folds)


@dataclass
class PcOpeningProof:
    h_commit: bytes
    fold_commits: List[bytes]
    final: List[List[int]]
    queries: List[QueryOpening]

    def write(self, w: Writer):
        w.blob(self.h_commit)
        w.u32(len(self.fold_commits))
        for c in self.fold_commits:
            w.blob(c)
        w.u32(len(self.final))
        for vals in self.final:
            w.felts(vals)
        w.u32(len(self.queries))
        for q in self.queries:
            q.f_lo.write(w)
            q.f_hi.write(w)
            q.h_lo.write(w)
            q.h_hi.write(w)
            w.u32(len(q.folds))
            for o in q.folds:
                o.write(w)

    @classmethod
    def read(cls, r: Reader) -> "PcOpeningProof":
        h_commit = r.blob()
        nf = r.u32()
        if nf > 64:
            raise DecodeError("too many fold layers")
        fold_commits = [r.blob() for _ in range(nf)]
        nc = r.u32()
        if nc > 1 << 16:
            raise DecodeError("too many copies")
        final = [r.felts(limit=1 << 16) for _ in range(nc)]
        nq = r.u32()
        if nq > 1 << 12:
            raise DecodeError("too many queries")
        queries = []
        for _ in range(nq):
            f_lo, f_hi = ColumnOpening.read(r), ColumnOpening.read(r)
            h_lo, h_hi = ColumnOpening.read(r), ColumnOpening.read(r)
            k = r.u32()
            if k > 64:
                raise DecodeError("too many fold openings")
            queries.append(QueryOpening(f_lo, f_hi, h_lo, h_hi, [ColumnOpening.read(r) for _ in range(k)]))
        return cls(h_commit, fold_commits, final, queries)

    def to_bytes(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "PcOpeningProof":
        r = Reader(data)
        out = cls.read(r)
        r.expect_done()
        return out

    def path_count(self) -> int:
        return sum(len(o.paths) for q in self.queries for o in q.all())

    def opened_positions(self) -> int:
        return sum(len(q.all()) for q in self.queries)


# ------------------------------------------------------------ per-copy math

def weight_values(points: Sequence[Sequence[int]], mu: int) -> List[int]:
    """sum_k mu^k * beta(b, points[k]) for every boolean b."""
    acc = None
    scale = 1
    for pt in points:
        t = eq_table(pt)
        acc = [x * scale % P for x in t] if acc is None else [(a + scale * x) % P for a, x in zip(acc, t)]
        scale = scale * mu % P
    return acc


def combined_claim(evals: Sequence[int], mu: int) -> int:
    acc, scale = 0, 1
    for y in evals:
        acc += scale * y
        scale = scale * mu % P
    return acc % P


def divide_by_vanishing(q: Sequence[int], n: int) -> Tuple[List[int], List[int]]:
    """q = h * (x^n - 1) + rem with deg rem < n."""
    q = [c % P for c in q]
    h = [0] * max(len(q) - n, 0)
    for j in range(len(q) - 1, n - 1, -1):
        c = q[j]
        if c:
            h[j - n] = (h[j - n] + c) % P
            q[j - n] = (q[j - n] + c) % P
            q[j] = 0
    rem = q[:n] + [0] * max(n - len(q), 0)
    return h, rem


def _pad(coeffs: Sequence[int], size: int) -> List[int]:
    if len(coeffs) > size:
        raise ValueError("polynomial does not fit the domain")
    return list(coeffs) + [0] * (size - len(coeffs))


def fold_values(values: Sequence[int], domain: EvaluationDomain, beta: int) -> List[int]:
    half = len(values) // 2
    xs = []
    x = domain.offset
    for _ in range(half):
        xs.append(2 * x % P)
        x = x * domain.generator % P
    inv2x = batch_inverse(xs)
    out = [0] * half
    for k in range(half):
        a, b = values[k], values[k + half]
        out[k] = ((a + b) * _INV2 + beta * (a - b) % P * inv2x[k]) % P
    return out


def fold_point(a: int, b: int, x: int, beta: int) -> int:
    return ((a + b) * _INV2 + beta * (a - b) % P * inv(2 * x)) % P


class CopyPolynomial:
    """Prover-side data for one committed table."""

    def __init__(self, table: Sequence[int], params: PcParams, coeffs: Optional[Sequence[int]] = None):
        self.params = params
        self.table = [v % P for v in table]
        if len(self.table) != params.n:
            raise ValueError(f"table has {len(self.table)} entries, parameters expect {params.n}")
        self.f_coeffs = list(coeffs) if coeffs is not None else ifft_interpolate(self.table, params.H)
        self.f_L = fft_evaluate(_pad(self.f_coeffs, _pow2(len(self.f_coeffs))), params.L)
        self.h_L: List[int] = []
        self.g_L: List[int] = []
        self.layer: List[int] = []

    def evaluate(self, point: Sequence[int]) -> int:
        return mle_evaluate(self.table, point)

    def quotient(self, w_coeffs: Sequence[int], claim: int):
        n, L = self.params.n, self.params.L
        h, rem = divide_by_vanishing(poly_mul(self.f_coeffs, w_coeffs), n)
        # rem(0) equals claim/n for an honest claim; g absorbs everything else
        g = rem[1:]
        self.h_L = fft_evaluate(_pad(h, _pow2(max(len(h), 1), n)), L) if h else [0] * L.order
        self.g_L = fft_evaluate(_pad(g, n), L)

    def start_fold(self, etas: Sequence[int]):
        e1, e2, e3, e4 = etas
        xs = self.params.L.elements()
        self.layer = [
            (f + e1 * hh + e2 * x % P * hh + e3 * gg + e4 * x % P * gg) % P
            for f, hh, gg, x in zip(self.f_L, self.h_L, self.g_L, xs)
        ]

    def fold(self, j: int, beta: int) -> List[int]:
        self.layer = fold_values(self.layer, self.params.fold_domain(j), beta)
        return self.layer


def _pow2(k: int, at_least: int = 1) -> int:
    size = 1
    while size < max(k, at_least):
        size <<= 1
    return size


def weight_coeffs(points, mu, params: PcParams) -> List[int]:
    return ifft_interpolate(weight_values(points, mu), params.H)


def weight_at(x: int, wvals: Sequence[int], params: PcParams) -> int:
    """Evaluate the interpolant of wvals over H at x (x outside H), O(|H|)."""
    H = params.H
    n = H.order
    hs = H.elements()
    dinv = batch_inverse([(x - a) % P for a in hs])
    zh = H.vanishing_at(x)
    acc = 0
    for wv, a, d in zip(wvals, hs, dinv):
        acc += wv * a % P * d
    return acc % P * zh % P * inv(n) % P


# ----------------------------------------------------- commitment layouts

def leaf_bytes(values: Sequence[int], k: int, pair: bool) -> bytes:
    if pair:
        return felt_to_bytes(values[k]) + felt_to_bytes(values[k + len(values) // 2])
    return felt_to_bytes(values[k])


def positions(size: int, pair: bool) -> int:
    return size // 2 if pair else size


def column_root(bundle: Sequence[bytes]) -> bytes:
    return mt_commit(list(bundle)).digest


def bundle_from_values(values: Sequence[int], pair: bool) -> List[bytes]:
    if pair:
        return [felt_to_bytes(values[2 * c]) + felt_to_bytes(values[2 * c + 1]) for c in range(len(values) // 2)]
    return [felt_to_bytes(v) for v in values]


class LayerStore:
    """Commitment data for one oracle layer held by a single process."""

    def __init__(self, vectors: Sequence[Sequence[int]], pair: bool, scheme: str):
        self.vectors = vectors
        self.pair = pair
        self.scheme = scheme
        npos = positions(len(vectors[0]), pair)
        if scheme == COLUMN:
            roots = [column_root([leaf_bytes(v, k, pair) for v in vectors]) for k in range(npos)]
            self.trees = [MerkleTree(roots)]
            self.commitment = self.trees[0].root.digest
        elif scheme == NAIVE:
            self.trees = [MerkleTree([leaf_bytes(v, k, pair) for k in range(npos)]) for v in vectors]
            self.commitment = b"".join(t.root.digest for t in self.trees)
        else:
            raise ValueError(f"unknown commitment scheme {scheme!r}")

    def values_at(self, k: int) -> List[int]:
        out = []
        half = len(self.vectors[0]) // 2
        for v in self.vectors:
            out.append(v[k])
            if self.pair:
                out.append(v[k + half])
        return out

    def open(self, k: int) -> ColumnOpening:
        return ColumnOpening(self.values_at(k), [t.path(k) for t in self.trees])


def verify_column(commitment: bytes, k: int, opening: ColumnOpening, copies: int, pair: bool, scheme: str) -> bool:
    width = 2 * copies if pair else copies
    if len(opening.values) != width:
        return False
    bundle = bundle_from_values(opening.values, pair)
    if scheme == COLUMN:
        if len(opening.paths) != 1 or len(commitment) != 32:
            return False
        p = opening.paths[0]
        return p.leaf_index == k and mt_verify(p, column_root(bundle), MerkleRoot(commitment))
    if len(opening.paths) != copies or len(commitment) != 32 * copies:
        return False
    for c, (p, leaf) in enumerate(zip(opening.paths, bundle)):
        if p.leaf_index != k or not mt_verify(p, leaf, MerkleRoot(commitment[32 * c:32 * (c + 1)])):
            return False
    return True


class LocalPcBackend:
    """All copies in one process; supports both commitment layouts."""

    def __init__(self, tables: Sequence[Sequence[int]], params: PcParams, scheme: str = COLUMN, polys=None):
        self.params = params
        self.scheme = scheme
        self.polys = list(polys) if polys is not None else [CopyPolynomial(t, params) for t in tables]
        self.stores: Dict[str, LayerStore] = {}

    @property
    def copies(self) -> int:
        return len(self.polys)

    def pc_commit(self) -> bytes:
        self.stores["f"] = LayerStore([p.f_L for p in self.polys], False, self.scheme)
        return self.stores["f"].commitment

    def pc_evaluate(self, points) -> List[List[int]]:
        return [[p.evaluate(pt) for pt in points] for p in self.polys]

    def pc_commit_quotient(self, points, mu: int, evals) -> bytes:
        wc = weight_coeffs(points, mu, self.params)
        for p, ys in zip(self.polys, evals):
            p.quotient(wc, combined_claim(ys, mu))
        self.stores["h"] = LayerStore([p.h_L for p in self.polys], False, self.scheme)
        return self.stores["h"].commitment

    def pc_fold(self, j: int, beta: int, etas=None):
        if j == 0:
            for p in self.polys:
                p.start_fold(etas)
        layers = [p.fold(j, beta) for p in self.polys]
        if j + 1 == self.params.num_vars:
            return "final", layers
        name = f"fold{j + 1}"
        self.stores[name] = LayerStore(layers, True, self.scheme)
        return "commit", self.stores[name].commitment

    def pc_open(self, requests: Sequence[Tuple[str, int]]) -> List[ColumnOpening]:
        return [self.stores[name].open(k) for name, k in requests]


def query_requests(params: PcParams, k: int) -> List[Tuple[str, int]]:
    half = params.m // 2
    reqs = [("f", k), ("f", k + half), ("h", k), ("h", k + half)]
    for j in range(1, params.num_vars):
        reqs.append((f"fold{j}", k % (params.m >> (j + 1))))
    return reqs


def open_flow(backend, params: PcParams, points: Sequence[Sequence[int]], transcript: Transcript):
    """Coordinator side of a (batched) opening; returns (per-copy evaluations, proof)."""
    for pt in points:
        if len(pt) != params.num_vars:
            raise ValueError("opening point has the wrong dimension")
        transcript.absorb_felts("pc.point", pt)
    evals = backend.pc_evaluate(points)
    transcript.absorb_felts("pc.evals", [y for ys in evals for y in ys])
    mu = transcript.challenge("pc.mu")
    h_commit = backend.pc_commit_quotient(points, mu, evals)
    transcript.absorb("pc.h", h_commit)
    etas = transcript.challenges("pc.eta", 4)
    fold_commits: List[bytes] = []
    final = None
    for j in range(params.num_vars):
        beta = transcript.challenge("pc.beta")
        kind, out = backend.pc_fold(j, beta, etas)
        if kind == "commit":
            transcript.absorb("pc.fold", out)
            fold_commits.append(out)
        else:
            final = out
            transcript.absorb_felts("pc.final", [v for vals in final for v in vals])
    ks = [transcript.challenge_index("pc.query", params.m // 2) for _ in range(params.queries)]
    requests = [r for k in ks for r in query_requests(params, k)]
    openings = backend.pc_open(requests)
    per = len(query_requests(params, 0))
    queries = []
    for qi in range(len(ks)):
        chunk = openings[qi * per:(qi + 1) * per]
        queries.append(QueryOpening(chunk[0], chunk[1], chunk[2], chunk[3], list(chunk[4:])))
    return evals, PcOpeningProof(h_commit, fold_commits, final, queries)


def verify_flow(f_commit: bytes, params: PcParams, points, evals: Sequence[Sequence[int]],
                proof: PcOpeningProof, transcript: Transcript, copies: int, scheme: str = COLUMN) -> bool:
    """Replays the opening; evals[c][k] is copy c's claimed value at points[k]."""
    ell = params.num_vars
    if len(evals) != copies or any(len(ys) != len(points) for ys in evals):
        return False
    if len(proof.fold_commits) != ell - 1 or len(proof.final) != copies or len(proof.queries) != params.queries:
        return False
    for pt in points:
        if len(pt) != ell:
            return False
        transcript.absorb_felts("pc.point", pt)
    transcript.absorb_felts("pc.evals", [y % P for ys in evals for y in ys])
    mu = transcript.challenge("pc.mu")
    transcript.absorb("pc.h", proof.h_commit)
    etas = transcript.challenges("pc.eta", 4)
    betas = []
    for j in range(ell):
        betas.append(transcript.challenge("pc.beta"))
        if j + 1 < ell:
            transcript.absorb("pc.fold", proof.fold_commits[j])
    for vals in proof.final:
        if len(vals) != params.rho or any(v != vals[0] for v in vals):
            return False
    transcript.absorb_felts("pc.final", [v for vals in proof.final for v in vals])
    ks = [transcript.challenge_index("pc.query", params.m // 2) for _ in range(params.queries)]

    claims = [combined_claim(ys, mu) for ys in evals]
    n_inv = inv(params.n)
    wvals = weight_values(points, mu)
    L = params.L
    half = params.m // 2
    H = params.H
    e1, e2, e3, e4 = etas
    commits = {"f": f_commit, "h": proof.h_commit}
    for j in range(1, ell):
        commits[f"fold{j}"] = proof.fold_commits[j - 1]

    for k, q in zip(ks, proof.queries):
        if len(q.folds) != ell - 1:
            return False
        reqs = query_requests(params, k)
        for (name, pos), op in zip(reqs, q.all()):
            if not verify_column(commits[name], pos, op, copies, name.startswith("fold"), scheme):
                return False
        x0 = L.element(k)
        x1 = L.element(k + half)
        w0, w1 = weight_at(x0, wvals, params), weight_at(x1, wvals, params)
        z0, z1 = H.vanishing_at(x0), H.vanishing_at(x1)
        x0i, x1i = inv(x0), inv(x1)
        for c in range(copies):
            s_n = claims[c] * n_inv % P
            vals = []
            for x, xi, w, z, fv, hv in ((x0, x0i, w0, z0, q.f_lo.values[c], q.h_lo.values[c]),
                                        (x1, x1i, w1, z1, q.f_hi.values[c], q.h_hi.values[c])):
                g = (fv * w - hv * z - s_n) % P * xi % P
                vals.append((fv + e1 * hv + e2 * x % P * hv + e3 * g + e4 * x % P * g) % P)
            cur = fold_point(vals[0], vals[1], x0, betas[0])
            idx = k
            for j in range(1, ell):
                size = params.m >> j
                sub_half = size // 2
                kk = idx % sub_half
                a, b = q.folds[j - 1].values[2 * c], q.folds[j - 1].values[2 * c + 1]
                idx = idx % size
                if cur != (a if idx < sub_half else b):
                    return False
                cur = fold_point(a, b, params.fold_domain(j).element(kk), betas[j])
                idx = kk
            if cur != proof.final[c][idx % params.rho]:
                return False
    return True


# ------------------------------------------------------- single-table API

def pc_commit(table, params: PcParams) -> Tuple[PcCommitment, LocalPcBackend]:
    evals = table.evals if hasattr(table, "evals") else table
    if len(evals) != params.n:
        raise ValueError(f"table has {len(evals)} entries, parameters expect {params.n}")
    state = LocalPcBackend([list(evals)], params, NAIVE)
    return PcCommitment(MerkleRoot(state.pc_commit())), state


def _fresh(state: LocalPcBackend) -> LocalPcBackend:
    # openings mutate fold state; keep the committed f layer and restart the rest
    fresh = LocalPcBackend([], state.params, state.scheme, polys=[
        CopyPolynomial(p.table, state.params, p.f_coeffs) for p in state.polys])
    fresh.stores["f"] = state.stores["f"]
    return fresh


def pc_open(state: LocalPcBackend, r: Sequence[int], transcript: Transcript):
    evals, proof = open_flow(_fresh(state), state.params, [list(r)], transcript)
    return evals[0][0], proof


def pc_verify(com: PcCommitment, r, y: int, proof: PcOpeningProof, params: PcParams, transcript: Transcript) -> bool:
    return verify_flow(com.root.digest, params, [list(r)], [[y]], proof, transcript, 1, NAIVE)


def pc_batch_open(state: LocalPcBackend, points, transcript: Transcript):
    u, v = points
    evals, proof = open_flow(_fresh(state), state.params, [list(u), list(v)], transcript)
    return evals[0][0], evals[0][1], proof


def pc_batch_verify(com: PcCommitment, points, ys, proof: PcOpeningProof, params: PcParams,
                    transcript: Transcript) -> bool:
    u, v = points
    return verify_flow(com.root.digest, params, [list(u), list(v)], [list(ys)], proof, transcript, 1, NAIVE)
