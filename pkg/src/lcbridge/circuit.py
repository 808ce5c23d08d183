"""
Layered arithmetic circuits.

Layer 0 is the output layer and layer ``depth`` the input layer. A gate in
layer i reads two wires of layer i+1. Every layer has a power-of-two size;
slots that are not driven by an add/mul gate are constant-0 padding and do
not appear in the wiring predicates.

Data-parallel circuits place the copy index in the high-order bits of every
global gate label: global label = local label + copy * layer_size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

from .field import P, eq_table, is_power_of_two, log2_exact

ADD = "add"
MUL = "mul"


@dataclass(frozen=True)
class Gate:
    kind: str
    left: int
    right: int


@dataclass(frozen=True)
class Layer:
    size: int
    # output slot -> gate; unlisted slots are constant-0 padding
    gates: Tuple[Tuple[int, Gate], ...] = ()

    @property
    def num_vars(self) -> int:
        return log2_exact(self.size)


@dataclass(frozen=True)
class LayeredCircuit:
    layers: Tuple[Layer, ...]
    num_public: int = 0

    def __post_init__(self):
        if len(self.layers) < 2:
            raise ValueError("a circuit needs at least an output and an input layer")
        for i, layer in enumerate(self.layers):
            if not is_power_of_two(layer.size):
                raise ValueError(f"layer {i} size {layer.size} is not a power of two")
        for i, layer in enumerate(self.layers[:-1]):
            below = self.layers[i + 1].size
            seen = set()
            for out, g in layer.gates:
                if g.kind not in (ADD, MUL):
                    raise ValueError(f"unknown gate kind {g.kind!r}")
                if not 0 <= out < layer.size or out in seen:
                    raise ValueError(f"layer {i}: bad or duplicate output slot {out}")
                if not (0 <= g.left < below and 0 <= g.right < below):
                    raise ValueError(f"layer {i}: wire index out of range")
                seen.add(out)
        if self.layers[-1].gates:
            raise ValueError("the input layer has no gates")
        if self.num_public not in (0, self.input_size // 2):
            raise ValueError("public inputs must be absent or fill exactly the lower half of the input layer")

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def input_size(self) -> int:
        return self.layers[-1].size

    @property
    def output_size(self) -> int:
        return self.layers[0].size

    @property
    def copies(self) -> int:
        return 1

    @property
    def sub(self) -> "LayeredCircuit":
        return self

    def layer_vars(self, i: int) -> int:
        return self.layers[i].num_vars

    def gate_count(self) -> int:
        return sum(len(layer.gates) for layer in self.layers[:-1])


@dataclass(frozen=True)
class DataParallelCircuit:
    sub: LayeredCircuit
    copies: int

    def __post_init__(self):
        if not is_power_of_two(self.copies):
            raise ValueError("number of copies must be a power of two")

    @property
    def copy_bits(self) -> int:
        return log2_exact(self.copies)

    @property
    def depth(self) -> int:
        return self.sub.depth

    @property
    def input_size(self) -> int:
        return self.sub.input_size * self.copies

    @property
    def output_size(self) -> int:
        return self.sub.output_size * self.copies

    @property
    def num_public(self) -> int:
        return self.sub.num_public * self.copies

    def layer_vars(self, i: int) -> int:
        return self.sub.layer_vars(i) + self.copy_bits

    def gate_count(self) -> int:
        return self.sub.gate_count() * self.copies


AnyCircuit = Union[LayeredCircuit, DataParallelCircuit]


def as_data_parallel(c: AnyCircuit) -> DataParallelCircuit:
    return c if isinstance(c, DataParallelCircuit) else DataParallelCircuit(c, 1)


@dataclass
class LayerValues:
    """values[i] is the vector V_i; values[0] is the circuit output."""

    values: List[List[int]]
    gate_evaluations: int = 0

    @property
    def output(self) -> List[int]:
        return self.values[0]

    @property
    def inputs(self) -> List[int]:
        return self.values[-1]


def evaluate_sub(sub: LayeredCircuit, inputs: Sequence[int]) -> LayerValues:
    if len(inputs) != sub.input_size:
        raise ValueError(f"expected {sub.input_size} inputs, got {len(inputs)}")
    vals: List[List[int]] = [None] * (sub.depth + 1)  # type: ignore[list-item]
    vals[sub.depth] = [x % P for x in inputs]
    count = 0
    for i in range(sub.depth - 1, -1, -1):
        below = vals[i + 1]
        layer = sub.layers[i]
        cur = [0] * layer.size
        for out, g in layer.gates:
            if g.kind == ADD:
                cur[out] = (below[g.left] + below[g.right]) % P
            else:
                cur[out] = below[g.left] * below[g.right] % P
        count += len(layer.gates)
        vals[i] = cur
    return LayerValues(vals, count)


def circuit_evaluate(c: AnyCircuit, inputs: Sequence[int]) -> LayerValues:
    dp = as_data_parallel(c)
    if len(inputs) != dp.input_size:
        raise ValueError(f"expected {dp.input_size} inputs, got {len(inputs)}")
    m = dp.sub.input_size
    per_copy = [evaluate_sub(dp.sub, inputs[i * m:(i + 1) * m]) for i in range(dp.copies)]
    merged = [sum((pc.values[i] for pc in per_copy), []) for i in range(dp.depth + 1)]
    return LayerValues(merged, sum(pc.gate_evaluations for pc in per_copy))


def _global_gates(c: AnyCircuit, i: int):
    dp = as_data_parallel(c)
    out_size = dp.sub.layers[i].size
    in_size = dp.sub.layers[i + 1].size
    for copy in range(dp.copies):
        for out, g in dp.sub.layers[i].gates:
            yield g.kind, out + copy * out_size, g.left + copy * in_size, g.right + copy * in_size


def wiring_mle(c: AnyCircuit, i: int, z: Sequence[int], x: Sequence[int], y: Sequence[int]) -> Tuple[int, int]:
    """(add~_{i+1}(z,x,y), mult~_{i+1}(z,x,y)) for the gates of layer i, in O(S_i + S_{i+1})."""
    dp = as_data_parallel(c)
    if not 0 <= i < dp.depth:
        raise ValueError(f"layer {i} has no wiring predicate")
    if len(z) != dp.layer_vars(i) or len(x) != dp.layer_vars(i + 1) or len(y) != dp.layer_vars(i + 1):
        raise ValueError("wiring_mle: point dimensions do not match the layer sizes")
    ez, ex, ey = eq_table(z), eq_table(x), eq_table(y)
    add_val = mul_val = 0
    for kind, g, l, r in _global_gates(dp, i):
        term = ez[g] * ex[l] % P * ey[r]
        if kind == ADD:
            add_val += term
        else:
            mul_val += term
    return add_val % P, mul_val % P


def sub_wiring_mle(sub: LayeredCircuit, i: int, z: Sequence[int], x: Sequence[int], y: Sequence[int]):
    return wiring_mle(sub, i, z, x, y)


def replicate(sub: LayeredCircuit, copies: int) -> DataParallelCircuit:
    if isinstance(sub, DataParallelCircuit):
        raise TypeError("replicate expects a plain layered circuit")
    return DataParallelCircuit(sub, copies)


def build_circuit(input_size: int, layers: Sequence[Sequence[Tuple[str, int, int]]], num_public: int = 0) -> LayeredCircuit:
    """Build from dense gate lists, output layer first; each layer is padded to a power of two."""
    built = []
    for gates in layers:
        size = 1
        while size < max(len(gates), 1):
            size <<= 1
        built.append(Layer(size, tuple((o, Gate(k, l, r)) for o, (k, l, r) in enumerate(gates))))
    size = 1
    while size < input_size:
        size <<= 1
    built.append(Layer(size))
    return LayeredCircuit(tuple(built), num_public)


# ---------------------------------------------------------------- text format

CIRCUIT_FORMAT_VERSION = 1


def dump_circuit(c: AnyCircuit) -> str:
    dp = as_data_parallel(c)
    sub = dp.sub
    lines = [f"circuit {CIRCUIT_FORMAT_VERSION}", f"copies {dp.copies}"]
    lines.append(f"input {sub.input_size} public {sub.num_public}")
    for layer in sub.layers[:-1]:
        lines.append(f"layer {layer.size}")
        for out, g in layer.gates:
            lines.append(f"{g.kind} {out} {g.left} {g.right}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> AnyCircuit:
    copies = 1
    input_size = None
    num_public = 0
    layers: List[Layer] = []
    cur_size = None
    cur_gates: List[Tuple[int, Gate]] = []
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "circuit":
                if int(parts[1]) != CIRCUIT_FORMAT_VERSION:
                    raise ValueError(f"unsupported circuit format version {parts[1]}")
                seen_header = True
            elif parts[0] == "copies":
                copies = int(parts[1])
            elif parts[0] == "input":
                input_size = int(parts[1])
                if len(parts) >= 4 and parts[2] == "public":
                    num_public = int(parts[3])
            elif parts[0] == "layer":
                if cur_size is not None:
                    layers.append(Layer(cur_size, tuple(cur_gates)))
                cur_size, cur_gates = int(parts[1]), []
            elif parts[0] in (ADD, MUL, "mult"):
                if cur_size is None:
                    raise ValueError("gate outside a layer block")
                kind = MUL if parts[0] == "mult" else parts[0]
                cur_gates.append((int(parts[1]), Gate(kind, int(parts[2]), int(parts[3]))))
            elif parts[0] == "end":
                break
            else:
                raise ValueError(f"unknown directive {parts[0]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"circuit line {lineno}: {exc}") from None
    if not seen_header or input_size is None or cur_size is None:
        raise ValueError("circuit text is missing the header, input declaration or layers")
    layers.append(Layer(cur_size, tuple(cur_gates)))
    layers.append(Layer(input_size))
    sub = LayeredCircuit(tuple(layers), num_public)
    return sub if copies == 1 else DataParallelCircuit(sub, copies)


def write_vector(path: Union[str, Path], values: Sequence[int]):
    data = struct.pack("<I", len(values)) + b"".join((v % P).to_bytes(8, "little") for v in values)
    Path(path).write_bytes(data)


def read_vector(path: Union[str, Path]) -> List[int]:
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise ValueError("truncated vector file")
    (n,) = struct.unpack_from("<I", data)
    if len(data) != 4 + 8 * n:
        raise ValueError("vector file length does not match its prefix")
    out = []
    for i in range(n):
        v = int.from_bytes(data[4 + 8 * i: 12 + 8 * i], "little")
        if v >= P:
            raise ValueError("non-canonical field element in vector file")
        out.append(v)
    return out


def split_public(c: AnyCircuit, inputs: Sequence[int]) -> Tuple[List[int], List[int]]:
    """Per-copy (public half, witness half), concatenated copy-major; public empty when not split."""
    dp = as_data_parallel(c)
    m = dp.sub.input_size
    if dp.sub.num_public == 0:
        return [], list(inputs)
    half = m // 2
    pub, wit = [], []
    for i in range(dp.copies):
        chunk = inputs[i * m:(i + 1) * m]
        pub.extend(chunk[:half])
        wit.extend(chunk[half:])
    return pub, wit


def join_public(c: AnyCircuit, public: Sequence[int], witness: Sequence[int]) -> List[int]:
    dp = as_data_parallel(c)
    if dp.sub.num_public == 0:
        return list(witness)
    half = dp.sub.input_size // 2
    out = []
    for i in range(dp.copies):
        out.extend(public[i * half:(i + 1) * half])
        out.extend(witness[i * half:(i + 1) * half])
    return out
