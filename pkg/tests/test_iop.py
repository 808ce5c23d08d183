import random

import pytest
from hypothesis import given, settings, strategies as st

from lcbridge.circuit import build_circuit, circuit_evaluate, replicate
from lcbridge.field import P, mle_evaluate
from lcbridge.gkr import GkrProof, gkr_prove, gkr_verify
from lcbridge.sumcheck import SumcheckProof, SumOfProducts, sumcheck_prove, sumcheck_verify
from lcbridge.transcript import Transcript
from oracles import naive_mle

felts = st.integers(0, P - 1)


# transcript

def test_transcript_deterministic():
    a, b = Transcript(b"lbl", b"id"), Transcript(b"lbl", b"id")
    for t in (a, b):
        t.absorb("m", b"hello")
        t.absorb_felts("v", [1, 2, 3])
    assert a.challenges("c", 4) == b.challenges("c", 4)


@pytest.mark.parametrize("other", [(b"lbl2", b"id"), (b"lbl", b"id2")])
def test_transcript_label_and_identity_matter(other):
    a, b = Transcript(b"lbl", b"id"), Transcript(*other)
    assert a.challenge() != b.challenge()


def test_transcript_depends_on_messages():
    a, b = Transcript(b"x"), Transcript(b"x")
    a.absorb("m", b"1")
    b.absorb("m", b"2")
    assert a.challenge() != b.challenge()
    c, d = Transcript(b"x"), Transcript(b"x")
    c.absorb("m", b"ab")
    d.absorb("m", b"a")
    d.absorb("m", b"b")
    assert c.challenge() != d.challenge()


def test_transcript_copy_is_independent():
    a = Transcript(b"x")
    a.absorb("m", b"1")
    b = a.copy()
    assert a.challenge() == b.challenge()
    a.absorb("m", b"2")
    assert a.challenge() != b.challenge()


def test_challenge_index_bound():
    t = Transcript(b"x")
    assert all(0 <= t.challenge_index("q", 5) < 5 for _ in range(50))
    with pytest.raises(ValueError):
        t.challenge_index("q", 0)


# sumcheck

def check(table, proof, degree=1, label=b"s"):
    return sumcheck_verify(proof.claim, proof, lambda r: mle_evaluate(table, r), Transcript(label), degree)


def test_sumcheck_small_table():
    table = [1, 2, 3, 4]
    proof = sumcheck_prove(table, Transcript(b"s"))
    assert proof.claim == 10
    assert check(table, proof)


def test_sumcheck_zero_table():
    proof = sumcheck_prove([0] * 8, Transcript(b"s"))
    assert proof.claim == 0
    assert all(c == 0 for r in proof.rounds for c in r)
    assert check([0] * 8, proof)


def test_sumcheck_wrong_claim():
    table = [1, 2, 3, 4]
    proof = sumcheck_prove(table, Transcript(b"s"))
    assert not sumcheck_verify(11, proof, lambda r: mle_evaluate(table, r), Transcript(b"s"), 1)


def test_sumcheck_product_of_two():
    rng = random.Random(2)
    f = [rng.randrange(P) for _ in range(8)]
    g = [rng.randrange(P) for _ in range(8)]
    brute = sum(f[i] * g[i] for i in range(8)) % P
    proof = sumcheck_prove(SumOfProducts([(1, [f, g])]), Transcript(b"s"))
    assert proof.claim == brute
    r = proof.point
    assert proof.final_value == naive_mle(f, r) * naive_mle(g, r) % P
    ok = sumcheck_verify(brute, proof, lambda r: mle_evaluate(f, r) * mle_evaluate(g, r), Transcript(b"s"), 2)
    assert ok


def test_sumcheck_bytes_roundtrip():
    proof = sumcheck_prove([5, 6, 7, 8, 9, 10, 11, 12], Transcript(b"s"))
    assert SumcheckProof.from_bytes(proof.to_bytes()) == proof


def test_sumcheck_mixed_terms_total():
    rng = random.Random(9)
    a, b, c = ([rng.randrange(P) for _ in range(4)] for _ in range(3))
    inst = SumOfProducts([(3, [a, b]), (5, [c])])
    want = sum(3 * a[i] * b[i] + 5 * c[i] for i in range(4)) % P
    assert inst.total() == want


def test_sumcheck_rejects_mismatched_tables():
    with pytest.raises(ValueError):
        SumOfProducts([(1, [[1, 2], [1, 2, 3, 4]])])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.lists(felts, min_size=1 << n, max_size=1 << n)), st.data())
def test_sumcheck_single_coefficient_tamper(table, data):
    ident = data.draw(st.binary(min_size=1, max_size=8))
    proof = sumcheck_prove(table, Transcript(b"s", ident))
    i = data.draw(st.integers(0, len(proof.rounds) - 1))
    j = data.draw(st.integers(0, len(proof.rounds[i]) - 1))
    delta = data.draw(st.integers(1, P - 1))
    rounds = [list(r) for r in proof.rounds]
    rounds[i][j] = (rounds[i][j] + delta) % P
    bad = SumcheckProof(proof.claim, rounds, proof.final_value, proof.point)
    assert not sumcheck_verify(proof.claim, bad, lambda r: mle_evaluate(table, r), Transcript(b"s", ident), 1)


# GKR

def toy():
    return build_circuit(3, [[("add", 0, 1)], [("mul", 0, 1), ("add", 2, 3)]])


def test_gkr_toy_accepts():
    x = [2, 3, 4, 0]
    proof = gkr_prove(toy(), x, Transcript(b"g"))
    assert proof.output == [10]
    assert gkr_verify(toy(), [10], proof, x, Transcript(b"g"))


def test_gkr_wrong_output_rejected():
    x = [2, 3, 4, 0]
    proof = gkr_prove(toy(), x, Transcript(b"g"))
    assert not gkr_verify(toy(), [11], proof, x, Transcript(b"g"))
    forged = GkrProof([11], proof.layers, proof.points)
    assert not gkr_verify(toy(), [11], forged, x, Transcript(b"g"))


def test_gkr_wrong_input_rejected():
    proof = gkr_prove(toy(), [2, 3, 4, 0], Transcript(b"g"))
    assert not gkr_verify(toy(), [10], proof, [2, 3, 4, 1], Transcript(b"g"))


def test_gkr_random_circuit_hundred_inputs():
    rng = random.Random(17)
    gates1 = [(rng.choice(["add", "mul"]), rng.randrange(4), rng.randrange(4)) for _ in range(4)]
    gates0 = [(rng.choice(["add", "mul"]), rng.randrange(4), rng.randrange(4)) for _ in range(4)]
    c = build_circuit(4, [gates0, gates1])
    for _ in range(100):
        x = [rng.randrange(P) for _ in range(4)]
        out = circuit_evaluate(c, x).output
        proof = gkr_prove(c, x, Transcript(b"g"))
        assert gkr_verify(c, out, proof, x, Transcript(b"g"))


@pytest.mark.parametrize("copies", [1, 2, 4, 8])
def test_gkr_data_parallel(copies):
    rng = random.Random(copies)
    layers = [[(rng.choice(["add", "mul"]), rng.randrange(4), rng.randrange(4)) for _ in range(2)],
              [(rng.choice(["add", "mul"]), rng.randrange(8), rng.randrange(8)) for _ in range(4)]]
    dp = replicate(build_circuit(8, layers), copies)
    x = [rng.randrange(P) for _ in range(dp.input_size)]
    proof = gkr_prove(dp, x, Transcript(b"g", b"r"))
    assert proof.output == circuit_evaluate(dp, x).output
    assert gkr_verify(dp, proof.output, proof, x, Transcript(b"g", b"r"))
    assert not gkr_verify(dp, proof.output, proof, x, Transcript(b"g", b"other"))
    assert GkrProof.from_bytes(proof.to_bytes()).to_bytes() == proof.to_bytes()


def test_gkr_layer_claims_match_mle():
    rng = random.Random(1)
    layers = [[("mul", 0, 1), ("add", 2, 3)], [(rng.choice(["add", "mul"]), rng.randrange(4), rng.randrange(4))
                                               for _ in range(4)]]
    dp = replicate(build_circuit(4, layers), 2)
    x = [rng.randrange(P) for _ in range(dp.input_size)]
    vals = circuit_evaluate(dp, x).values
    proof = gkr_prove(dp, x, Transcript(b"g"))
    for i, (u, v) in enumerate(proof.points):
        assert proof.layers[i].vx == mle_evaluate(vals[i + 1], u)
        assert proof.layers[i].vy == mle_evaluate(vals[i + 1], v)


