import hashlib
import random

import pytest
from hypothesis import given, settings, strategies as st

from lcbridge.circuit import (
    DataParallelCircuit,
    build_circuit,
    circuit_evaluate,
    dump_circuit,
    join_public,
    parse_circuit,
    read_vector,
    replicate,
    split_public,
    wiring_mle,
    write_vector,
)
from lcbridge.field import P
from lcbridge.sigcircuit import (
    build_light_client_circuit,
    build_signature_subcircuit,
    expected_output,
    keygen,
    sign,
    statement_inputs,
    verify_signature,
)
from oracles import brute_wiring, evaluate_layers


def toy():
    # x1*x2 + x3
    return build_circuit(3, [[("add", 0, 1)], [("mul", 0, 1), ("add", 2, 3)]])


def random_sub(rng, widths=(2, 4, 4), inputs=8):
    sizes = list(widths) + [inputs]
    layers = []
    for i in range(len(widths)):
        layers.append([(rng.choice(["add", "mul"]), rng.randrange(sizes[i + 1]), rng.randrange(sizes[i + 1]))
                       for _ in range(sizes[i])])
    return build_circuit(inputs, layers), layers


def test_toy_output():
    assert circuit_evaluate(toy(), [2, 3, 4, 0]).output == [10]


def test_all_add_on_zeros():
    c = build_circuit(4, [[("add", 0, 1), ("add", 2, 3)], [("add", i, i) for i in range(4)]])
    assert circuit_evaluate(c, [0] * 4).output == [0, 0]


def test_padding_to_power_of_two():
    c = build_circuit(3, [[("add", 0, 1)] * 3, [("mul", 0, 1)] * 3])
    assert [layer.size for layer in c.layers] == [4, 4, 4]


def test_rejects_bad_wire():
    with pytest.raises(ValueError):
        build_circuit(2, [[("add", 0, 5)]])
    with pytest.raises(ValueError):
        build_circuit(2, [[("xor", 0, 1)]])


def test_evaluation_matches_plain_oracle():
    rng = random.Random(11)
    for _ in range(20):
        c, layers = random_sub(rng)
        x = [rng.randrange(P) for _ in range(8)]
        assert circuit_evaluate(c, x).output == evaluate_layers(x, reversed(layers))


def test_data_parallel_is_concat_of_copies():
    rng = random.Random(4)
    sub, _ = random_sub(rng)
    for n in (1, 2, 4):
        dp = replicate(sub, n)
        x = [rng.randrange(P) for _ in range(dp.input_size)]
        got = circuit_evaluate(dp, x)
        want = sum((circuit_evaluate(sub, x[8 * i:8 * i + 8]).output for i in range(n)), [])
        assert got.output == want
        assert got.gate_evaluations == n * sub.gate_count()


def test_replicate_one_is_sub():
    sub = toy()
    dp = replicate(sub, 1)
    assert dp.sub is sub and dp.copies == 1
    x = [2, 3, 4, 0]
    assert circuit_evaluate(dp, x).values == circuit_evaluate(sub, x).values


def test_replicate_needs_power_of_two():
    with pytest.raises(ValueError):
        DataParallelCircuit(toy(), 3)


def test_wiring_boolean_points():
    c = toy()
    # layer 1 gate 0 is mul(0, 1)
    assert wiring_mle(c, 1, [0], [0, 0], [1, 0]) == (0, 1)
    assert wiring_mle(c, 1, [1], [0, 1], [1, 1]) == (1, 0)
    assert wiring_mle(c, 1, [0], [1, 1], [1, 1]) == (0, 0)


def test_wiring_random_point_matches_brute_force():
    rng = random.Random(5)
    gates = [(rng.choice(["add", "mul"]), rng.randrange(4), rng.randrange(4)) for _ in range(4)]
    c = build_circuit(4, [gates[:2], gates])
    layer1 = gates
    for _ in range(10):
        z = [rng.randrange(P) for _ in range(2)]
        x = [rng.randrange(P) for _ in range(2)]
        y = [rng.randrange(P) for _ in range(2)]
        assert wiring_mle(c, 1, z, x, y) == brute_wiring(layer1, 2, 2, z, x, y)


def test_global_wiring_has_no_cross_copy_terms():
    rng = random.Random(8)
    sub, _ = random_sub(rng, widths=(2, 4), inputs=4)
    dp = replicate(sub, 4)
    nz, nx = sub.layer_vars(1), sub.layer_vars(2)
    for g in range(1 << nz):
        for a in range(1 << nx):
            for b in range(1 << nx):
                local = wiring_mle(sub, 1, bits(g, nz), bits(a, nx), bits(b, nx))
                for cz in range(4):
                    for cx in (cz, (cz + 1) % 4):
                        got = wiring_mle(dp, 1, bits(g, nz) + bits(cz, 2), bits(a, nx) + bits(cx, 2),
                                         bits(b, nx) + bits(cz, 2))
                        assert got == (local if cx == cz else (0, 0))


def bits(v, n):
    return [(v >> j) & 1 for j in range(n)]


def test_circuit_text_roundtrip(tmp_path):
    dp = replicate(toy(), 4)
    text = dump_circuit(dp)
    back = parse_circuit(text)
    assert back == dp
    assert dump_circuit(back) == text
    with pytest.raises(ValueError):
        parse_circuit(text.replace("add", "xor", 1))


def test_vector_files(tmp_path):
    f = tmp_path / "v.txt"
    write_vector(f, [1, 2, P - 1])
    assert read_vector(f) == [1, 2, P - 1]


@given(st.lists(st.integers(0, P - 1), min_size=8, max_size=8))
def test_public_split_roundtrip(values):
    sub = build_circuit(4, [[("add", 0, 1)], [("mul", 0, 2), ("mul", 1, 3)]], num_public=2)
    dp = replicate(sub, 2)
    pub, wit = split_public(dp, values)
    assert pub == values[0:2] + values[4:6]
    assert join_public(dp, pub, wit) == values


# signature sub-circuit

def signed(n, digest=b"header", rounds=8, L=1):
    keys = [keygen(f"k{i}".encode(), rounds) for i in range(n)]
    d = hashlib.sha256(digest).digest()
    entries = [(d, pk, sign(sk, d, L, rounds)) for sk, pk in keys]
    return keys, d, entries


@pytest.mark.parametrize("L", [1, 2, 4])
def test_light_client_circuit_all_ones(L):
    keys, _, entries = signed(4, L=L)
    c = build_light_client_circuit(4, L)
    out = circuit_evaluate(c, statement_inputs(entries, [k[0] for k in keys], L)).output
    assert out == expected_output(4)


def test_forged_signature_breaks_its_copy():
    keys, d, entries = signed(4)
    entries[2] = (d, keys[2][1], (entries[2][2] + 1) % P)
    c = build_light_client_circuit(4)
    out = circuit_evaluate(c, statement_inputs(entries, [k[0] for k in keys])).output
    per = len(out) // 4
    assert out[2 * per:3 * per] != expected_output(1)
    assert out[:2 * per] == expected_output(2)


def test_single_copy_degenerates_to_sub():
    c = build_light_client_circuit(1)
    assert c.copies == 1
    assert c.sub == build_signature_subcircuit()


@settings(max_examples=25, deadline=None)
@given(st.binary(min_size=1, max_size=16), st.binary(min_size=1, max_size=8))
def test_native_signature(seed, msg):
    sk, pk = keygen(seed, 4)
    d = hashlib.sha256(msg).digest()
    s = sign(sk, d, 1, 4)
    assert verify_signature(pk, sk, d, s, 1, 4)
    assert not verify_signature(pk, sk, d, (s + 1) % P, 1, 4)
