import random

import pytest
from hypothesis import given, settings, strategies as st

from lcbridge.field import P, EvaluationDomain, felt_to_bytes, mle_evaluate
from lcbridge.merkle import mt_commit
from lcbridge.pc import (
    COLUMN,
    NAIVE,
    CopyPolynomial,
    LocalPcBackend,
    PcOpeningProof,
    PcParams,
    open_flow,
    pc_batch_open,
    pc_batch_verify,
    pc_commit,
    pc_open,
    pc_verify,
    verify_flow,
)
from lcbridge.transcript import Transcript
from oracles import horner, lagrange_coeffs, naive_mle

felts = st.integers(0, P - 1)


def T():
    return Transcript(b"pc", b"tester")


def rand_table(rng, ell):
    return [rng.randrange(P) for _ in range(1 << ell)]


def test_params_validation():
    with pytest.raises(ValueError):
        PcParams(2, rho=3)
    with pytest.raises(ValueError):
        PcParams(0)
    with pytest.raises(ValueError):
        PcParams(2, queries=0)
    pp = PcParams(3, 4, 8)
    assert (pp.n, pp.m) == (8, 32)
    assert not set(pp.H.elements()) & set(pp.L.elements())


def test_zero_table_commitment():
    pp = PcParams(2, 4, 4)
    com, st_ = pc_commit([0] * 4, pp)
    assert st_.polys[0].f_L == [0] * 16
    assert com.root == mt_commit([felt_to_bytes(0)] * 16)


def test_constant_table():
    pp = PcParams(3, 2, 4)
    _, st_ = pc_commit([7] * 8, pp)
    assert st_.polys[0].f_L == [7] * 16


def test_f_L_matches_naive_evaluation():
    rng = random.Random(21)
    pp = PcParams(3, 4, 4)
    table = rand_table(rng, 3)
    _, st_ = pc_commit(table, pp)
    coeffs = lagrange_coeffs(pp.H.elements(), table)
    assert st_.polys[0].f_L == [horner(coeffs, x) for x in pp.L.elements()]
    assert len(st_.polys[0].f_L) == 32


def test_boolean_point_opening():
    rng = random.Random(1)
    pp = PcParams(2, 4, 8)
    table = rand_table(rng, 2)
    com, st_ = pc_commit(table, pp)
    y, proof = pc_open(st_, [1, 0], T())
    assert y == table[1]
    assert pc_verify(com, [1, 0], y, proof, pp, T())


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_random_point_opening(ell):
    rng = random.Random(ell)
    pp = PcParams(ell, 4, 8)
    table = rand_table(rng, ell)
    com, st_ = pc_commit(table, pp)
    r = [rng.randrange(P) for _ in range(ell)]
    y, proof = pc_open(st_, r, T())
    assert y == naive_mle(table, r)
    assert pc_verify(com, r, y, proof, pp, T())
    assert not pc_verify(com, r, (y + 1) % P, proof, pp, T())
    back = PcOpeningProof.from_bytes(proof.to_bytes())
    assert pc_verify(com, r, y, back, pp, T())


def test_state_reusable_for_several_openings():
    rng = random.Random(5)
    pp = PcParams(3, 4, 4)
    table = rand_table(rng, 3)
    com, st_ = pc_commit(table, pp)
    for _ in range(3):
        r = [rng.randrange(P) for _ in range(3)]
        y, proof = pc_open(st_, r, T())
        assert pc_verify(com, r, y, proof, pp, T())


def test_corrupted_query_opening_rejected():
    rng = random.Random(2)
    pp = PcParams(3, 4, 8)
    table = rand_table(rng, 3)
    com, st_ = pc_commit(table, pp)
    r = [rng.randrange(P) for _ in range(3)]
    y, proof = pc_open(st_, r, T())
    proof.queries[3].f_lo.values[0] = (proof.queries[3].f_lo.values[0] + 1) % P
    assert not pc_verify(com, r, y, proof, pp, T())


def test_transcript_binding():
    rng = random.Random(3)
    pp = PcParams(2, 4, 8)
    table = rand_table(rng, 2)
    com, st_ = pc_commit(table, pp)
    r = [rng.randrange(P) for _ in range(2)]
    y, proof = pc_open(st_, r, T())
    assert not pc_verify(com, r, y, proof, pp, Transcript(b"pc", b"someone else"))


def test_batch_open_equal_points():
    rng = random.Random(4)
    pp = PcParams(3, 4, 8)
    table = rand_table(rng, 3)
    com, st_ = pc_commit(table, pp)
    u = [rng.randrange(P) for _ in range(3)]
    yu, yv, proof = pc_batch_open(st_, [u, u], T())
    y, _ = pc_open(st_, u, T())
    assert yu == yv == y
    assert pc_batch_verify(com, [u, u], [yu, yv], proof, pp, T())


def test_batch_open_two_points():
    rng = random.Random(6)
    pp = PcParams(3, 4, 8)
    table = rand_table(rng, 3)
    com, st_ = pc_commit(table, pp)
    u = [rng.randrange(P) for _ in range(3)]
    v = [rng.randrange(P) for _ in range(3)]
    yu, yv, proof = pc_batch_open(st_, [u, v], T())
    assert (yu, yv) == (naive_mle(table, u), naive_mle(table, v))
    assert pc_batch_verify(com, [u, v], [yu, yv], proof, pp, T())
    assert not pc_batch_verify(com, [u, v], [yu, (yv + 1) % P], proof, pp, T())


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3).flatmap(lambda ell: st.tuples(
    st.lists(felts, min_size=1 << ell, max_size=1 << ell), st.lists(felts, min_size=ell, max_size=ell))))
def test_opening_property(case):
    table, r = case
    pp = PcParams(len(r), 2, 4)
    com, st_ = pc_commit(table, pp)
    y, proof = pc_open(st_, r, T())
    assert y == mle_evaluate(table, r)
    assert pc_verify(com, r, y, proof, pp, T())


def cheating_proof(rng, pp, forge_final):
    """Commit to f + c*Z_H: same values on H, but degree |H|."""
    table = rand_table(rng, pp.num_vars)
    good = CopyPolynomial(table, pp)
    c = rng.randrange(1, P)
    coeffs = list(good.f_coeffs) + [c]
    coeffs[0] = (coeffs[0] - c) % P
    poly = CopyPolynomial(table, pp, coeffs)
    be = LocalPcBackend([], pp, NAIVE, polys=[poly])
    root = be.pc_commit()
    r = [rng.randrange(P) for _ in range(pp.num_vars)]
    ident = rng.randbytes(4)
    evals, proof = open_flow(be, pp, [r], Transcript(b"pc", ident))
    if forge_final:
        proof.final = [[vals[0]] * pp.rho for vals in proof.final]
    return root, r, evals, proof, ident


def test_cheating_degree_rejected():
    rng = random.Random(99)
    pp = PcParams(2, 4, 4)
    # the cheating polynomial agrees with the table on H
    table = rand_table(rng, 2)
    good = CopyPolynomial(table, pp)
    coeffs = list(good.f_coeffs) + [5]
    coeffs[0] = (coeffs[0] - 5) % P
    assert [horner(coeffs, x) for x in EvaluationDomain.subgroup(4).elements()] == table
    accepted = 0
    trials = 1000
    for t in range(trials):
        root, r, evals, proof, ident = cheating_proof(rng, pp, forge_final=(t % 2 == 0))
        accepted += verify_flow(root, pp, [r], evals, proof, Transcript(b"pc", ident), 1, NAIVE)
    # bound (1/rho + small)^queries is far below 1/trials here
    assert accepted == 0


def test_cheating_single_query_rate():
    # one query: a cheater may slip through, but no more often than about 1/rho
    rng = random.Random(7)
    pp = PcParams(2, 4, 1)
    trials = 1000
    accepted = 0
    for _ in range(trials):
        root, r, evals, proof, ident = cheating_proof(rng, pp, forge_final=True)
        accepted += verify_flow(root, pp, [r], evals, proof, Transcript(b"pc", ident), 1, NAIVE)
    assert accepted / trials <= 1 / pp.rho + 0.05


@pytest.mark.parametrize("copies", [4, 8])
def test_paths_per_query_column_vs_naive(copies):
    rng = random.Random(copies)
    pp = PcParams(3, 4, 4)
    tables = [rand_table(rng, 3) for _ in range(copies)]
    r = [rng.randrange(P) for _ in range(3)]
    per = {}
    for scheme in (COLUMN, NAIVE):
        be = LocalPcBackend(tables, pp, scheme)
        root = be.pc_commit()
        evals, proof = open_flow(be, pp, [r], T())
        assert verify_flow(root, pp, [r], evals, proof, T(), copies, scheme)
        openings = [op for q in proof.queries for op in q.all()]
        counts = {len(op.paths) for op in openings}
        assert len(counts) == 1
        per[scheme] = counts.pop()
        assert proof.path_count() == per[scheme] * proof.opened_positions()
        assert proof.path_count() == pp.queries * pp.paths_per_query(copies, scheme)
    assert per == {COLUMN: 1, NAIVE: copies}
