"""
Toy signatures and the light-client statement circuit.

The permutation is x -> (x + k_j)^7 over a fixed number of rounds with round
keys k_j = k0 + j*c. The exponent is 7 because 3 divides p - 1 here, so
cubing is not a bijection. Keys and signatures add a feed-forward so the
secret cannot be recovered by running the permutation backwards:

    pk    = perm(sk) + sk
    sigma = perm(... perm(perm(sk + d_1) + d_2) ... + d_L) + sk

for the L limbs d_i of a header digest. Each copy of the circuit checks one
(pk, sigma) pair for one digest and outputs two wires that both equal 1 iff
the pair is valid. Inputs per copy: the lower half is public (digest limbs,
1 - pk, 1 - sigma, k0, c and a constant zero), the upper half is the secret
key. Pass-through wires are `add(w, zero)`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from .circuit import ADD, MUL, DataParallelCircuit, Gate, Layer, LayeredCircuit, replicate
from .field import P, is_power_of_two

DEFAULT_ROUNDS = 8


def _const(tag: bytes) -> int:
    return int.from_bytes(hashlib.sha256(b"lcbridge/perm/" + tag).digest()[:16], "little") % P


KEY_BASE = _const(b"k0")
KEY_STEP = _const(b"c")


def perm(x: int, rounds: int = DEFAULT_ROUNDS) -> int:
    k = KEY_BASE
    for _ in range(rounds):
        x = pow((x + k) % P, 7, P)
        k = (k + KEY_STEP) % P
    return x


def public_key(sk: int, rounds: int = DEFAULT_ROUNDS) -> int:
    return (perm(sk, rounds) + sk) % P


def digest_limbs(digest: bytes, message_length: int = 1) -> List[int]:
    if message_length < 1 or 32 % message_length:
        raise ValueError("message length must divide 32 (1, 2, 4, 8, 16 or 32 limbs)")
    width = 32 // message_length
    return [int.from_bytes(digest[i * width:(i + 1) * width], "little") % P for i in range(message_length)]


def sign(sk: int, digest: bytes, message_length: int = 1, rounds: int = DEFAULT_ROUNDS) -> int:
    h = sk
    for limb in digest_limbs(digest, message_length):
        h = perm((h + limb) % P, rounds)
    return (h + sk) % P


def verify_signature(pk: int, sk: int, digest: bytes, sigma: int, message_length: int = 1,
                     rounds: int = DEFAULT_ROUNDS) -> bool:
    """Native version of the per-copy relation (it needs the witness, like the circuit)."""
    return public_key(sk, rounds) == pk % P and sign(sk, digest, message_length, rounds) == sigma % P


def keygen(seed: bytes, rounds: int = DEFAULT_ROUNDS) -> Tuple[int, int]:
    sk = int.from_bytes(hashlib.sha256(b"lcbridge/sk/" + seed).digest()[:16], "little") % P
    return sk, public_key(sk, rounds)


@dataclass(frozen=True)
class InputLayout:
    message_length: int
    half: int

    @property
    def size(self) -> int:
        return 2 * self.half

    def public_names(self) -> List[str]:
        return [f"d{i}" for i in range(self.message_length)] + ["omp", "oms", "k0", "c", "zero"]


def layout_for(message_length: int) -> InputLayout:
    need = message_length + 5
    half = 1
    while half < need:
        half <<= 1
    return InputLayout(message_length, half)


class _Builder:
    """Assembles layers from the input upwards using named wires."""

    def __init__(self, names: Dict[str, int], size: int):
        self.cur = dict(names)
        self.layers: List[Layer] = [Layer(size)]

    def step(self, defs: Sequence[Tuple[str, str, str, str]]):
        gates = []
        for out, (name, kind, a, b) in enumerate(defs):
            gates.append((out, Gate(kind, self.cur[a], self.cur[b])))
        size = 1
        while size < len(defs):
            size <<= 1
        self.layers.append(Layer(size, tuple(gates)))
        self.cur = {d[0]: i for i, d in enumerate(defs)}

    def carry(self, *names: str):
        return [(n, ADD, n, "zero") for n in names]

    def circuit(self, num_public: int) -> LayeredCircuit:
        return LayeredCircuit(tuple(reversed(self.layers)), num_public)


@lru_cache(maxsize=32)
def build_signature_subcircuit(message_length: int = 1, rounds: int = DEFAULT_ROUNDS) -> LayeredCircuit:
    if rounds < 1:
        raise ValueError("at least one permutation round is required")
    lay = layout_for(message_length)
    names = {n: i for i, n in enumerate(lay.public_names())}
    names["sk"] = lay.half
    b = _Builder(names, lay.size)
    pending = [f"d{i}" for i in range(1, message_length)]
    b.step([
        ("xp", ADD, "sk", "zero"),
        ("xs", ADD, "sk", "d0"),
        ("skp", ADD, "sk", "omp"),
        ("sks", ADD, "sk", "oms"),
        ("k", ADD, "k0", "zero"),
    ] + b.carry("k0", "c", "zero", *pending))
    common = ["k0", "c", "zero", "skp", "sks"]
    for a in range(message_length):
        keyed = a == 0  # the public-key branch runs alongside the first absorption only
        if a > 0:
            limb = pending.pop(0)
            b.step([("xs", ADD, "xs", limb), ("k", ADD, "k0", "zero"), ]
                   + b.carry("xp", *common, *pending))
        for _ in range(rounds):
            p_first = [("tp", ADD, "xp", "k")] if keyed else b.carry("xp")
            b.step(p_first + [("ts", ADD, "xs", "k"), ("k", ADD, "k", "c")] + b.carry(*common, *pending))
            p_sq = [("tp2", MUL, "tp", "tp"), ("tp", ADD, "tp", "zero")] if keyed else b.carry("xp")
            b.step(p_sq + [("ts2", MUL, "ts", "ts"), ("ts", ADD, "ts", "zero")] + b.carry("k", *common, *pending))
            p_cube = [("tp4", MUL, "tp2", "tp2"), ("tp3", MUL, "tp2", "tp")] if keyed else b.carry("xp")
            b.step(p_cube + [("ts4", MUL, "ts2", "ts2"), ("ts3", MUL, "ts2", "ts")] + b.carry("k", *common, *pending))
            p_seven = [("xp", MUL, "tp4", "tp3")] if keyed else b.carry("xp")
            b.step(p_seven + [("xs", MUL, "ts4", "ts3")] + b.carry("k", *common, *pending))
    b.step([("out_pk", ADD, "xp", "skp"), ("out_sig", ADD, "xs", "sks")])
    return b.circuit(lay.half)


def build_light_client_circuit(n_sig: int, message_length: int = 1, rounds: int = DEFAULT_ROUNDS) -> DataParallelCircuit:
    if not is_power_of_two(n_sig):
        raise ValueError("quorum size must be a power of two")
    return replicate(build_signature_subcircuit(message_length, rounds), n_sig)


def copy_public(digest: bytes, pk: int, sigma: int, message_length: int = 1) -> List[int]:
    lay = layout_for(message_length)
    vals = digest_limbs(digest, message_length) + [(1 - pk) % P, (1 - sigma) % P, KEY_BASE, KEY_STEP, 0]
    return vals + [0] * (lay.half - len(vals))


def copy_witness(sk: int, message_length: int = 1) -> List[int]:
    lay = layout_for(message_length)
    return [sk % P] + [0] * (lay.half - 1)


def statement_public(entries: Sequence[Tuple[bytes, int, int]], message_length: int = 1) -> List[int]:
    """Concatenated public halves for (digest, pk, sigma) per copy."""
    out: List[int] = []
    for digest, pk, sigma in entries:
        out.extend(copy_public(digest, pk, sigma, message_length))
    return out


def statement_witness(sks: Sequence[int], message_length: int = 1) -> List[int]:
    out: List[int] = []
    for sk in sks:
        out.extend(copy_witness(sk, message_length))
    return out


def statement_inputs(entries: Sequence[Tuple[bytes, int, int]], sks: Sequence[int], message_length: int = 1) -> List[int]:
    out: List[int] = []
    for (digest, pk, sigma), sk in zip(entries, sks):
        out.extend(copy_public(digest, pk, sigma, message_length))
        out.extend(copy_witness(sk, message_length))
    return out


def expected_output(copies: int) -> List[int]:
    return [1, 1] * copies
