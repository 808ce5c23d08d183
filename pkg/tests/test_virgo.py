import pytest

from lcbridge.circuit import circuit_evaluate
from lcbridge.codec import DecodeError
from lcbridge.sigcircuit import expected_output
from lcbridge.virgo import DeVirgoProof, ProofParams, virgo_prove, virgo_verify
from support import FAST, statement


@pytest.mark.parametrize("n", [1, 2, 4])
def test_honest_statement_verifies(n):
    c, inputs, public = statement(n)
    proof = virgo_prove(c, inputs, b"relay", FAST)
    assert proof.output == expected_output(n)
    assert virgo_verify(c, public, expected_output(n), proof, b"relay", FAST)
    assert virgo_verify(c, public, expected_output(n), proof.to_bytes(), b"relay", FAST)


def test_bytes_roundtrip_and_determinism():
    c, inputs, _ = statement(2)
    a = virgo_prove(c, inputs, b"relay", FAST).to_bytes()
    b = virgo_prove(c, inputs, b"relay", FAST).to_bytes()
    assert a == b
    assert DeVirgoProof.from_bytes(a).to_bytes() == a


def test_forged_signature_cannot_claim_all_ones():
    c, inputs, public = statement(4, forge={1})
    proof = virgo_prove(c, inputs, b"relay", FAST)
    assert proof.output == circuit_evaluate(c, inputs).output
    assert proof.output != expected_output(4)
    assert virgo_verify(c, public, proof.output, proof, b"relay", FAST)
    assert not virgo_verify(c, public, expected_output(4), proof, b"relay", FAST)


def test_identity_binding():
    c, inputs, public = statement(2)
    proof = virgo_prove(c, inputs, b"relay-a", FAST)
    assert not virgo_verify(c, public, expected_output(2), proof, b"relay-b", FAST)


def test_public_input_binding():
    c, inputs, public = statement(2)
    proof = virgo_prove(c, inputs, b"relay", FAST)
    bad = list(public)
    bad[0] += 1
    assert not virgo_verify(c, bad, expected_output(2), proof, b"relay", FAST)
    assert not virgo_verify(c, public[:-1], expected_output(2), proof, b"relay", FAST)


def test_param_mismatch_rejected():
    c, inputs, public = statement(2)
    proof = virgo_prove(c, inputs, b"relay", FAST)
    assert not virgo_verify(c, public, expected_output(2), proof, b"relay", ProofParams(4, 16))


def test_wrong_circuit_rejected():
    c, inputs, public = statement(2)
    other, _, _ = statement(4)
    proof = virgo_prove(c, inputs, b"relay", FAST)
    assert not virgo_verify(other, public, expected_output(4), proof, b"relay", FAST)


def test_malformed_bytes_never_raise():
    c, inputs, public = statement(1)
    raw = virgo_prove(c, inputs, b"relay", FAST).to_bytes()
    for cut in (0, 3, 10, len(raw) // 2, len(raw) - 1):
        assert not virgo_verify(c, public, expected_output(1), raw[:cut], b"relay", FAST)
    assert not virgo_verify(c, public, expected_output(1), raw + b"\x00", b"relay", FAST)
    with pytest.raises(DecodeError):
        DeVirgoProof.from_bytes(b"nope")


def test_size_breakdown():
    c, inputs, _ = statement(2)
    proof = virgo_prove(c, inputs, b"relay", FAST)
    sb = proof.size_breakdown()
    assert sb["total"] == len(proof.to_bytes())
    assert sb["pc"] < sb["total"]
    assert sb["merkle_paths"] == proof.opening.path_count()
