"""
Prime-field arithmetic over the 64-bit Goldilocks prime p = 2^64 - 2^32 + 1.

Internally every routine works on plain Python ints in [0, p); the
:class:`FieldElement` wrapper is there for callers that want operator
overloading and canonical serialization. The multiplicative group has a
subgroup of order 2^32, so power-of-two evaluation domains are cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

P = (1 << 64) - (1 << 32) + 1
GENERATOR = 7
TWO_ADICITY = 32
FIELD_BYTES = 8

_ROOT_2_32 = pow(GENERATOR, (P - 1) >> TWO_ADICITY, P)


class FieldElement:
    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value % P

    def __add__(self, other):
        return FieldElement(self.value + _v(other))

    __radd__ = __add__

    def __sub__(self, other):
        return FieldElement(self.value - _v(other))

    def __rsub__(self, other):
        return FieldElement(_v(other) - self.value)

    def __mul__(self, other):
        return FieldElement(self.value * _v(other))

    __rmul__ = __mul__

    def __neg__(self):
        return FieldElement(-self.value)

    def __truediv__(self, other):
        return FieldElement(self.value * inv(_v(other)))

    def __pow__(self, exp: int):
        return FieldElement(pow(self.value, exp, P))

    def inverse(self) -> "FieldElement":
        return FieldElement(inv(self.value))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.value == other.value
        if isinstance(other, int):
            return self.value == other % P
        return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"FieldElement({self.value})"

    def to_bytes(self) -> bytes:
        return felt_to_bytes(self.value)

    @classmethod
    def from_bytes(cls, data: bytes) -> "FieldElement":
        return cls(felt_from_bytes(data))


def _v(x) -> int:
    return x.value if isinstance(x, FieldElement) else x % P


def inv(a: int) -> int:
    a %= P
    if a == 0:
        raise ZeroDivisionError("inverse of zero in the prime field")
    return pow(a, P - 2, P)


def batch_inverse(values: Sequence[int]) -> List[int]:
    """Montgomery's trick: one exponentiation for the whole batch."""
    n = len(values)
    if n == 0:
        return []
    prefix = [1] * n
    acc = 1
    for i, v in enumerate(values):
        if v % P == 0:
            raise ZeroDivisionError("inverse of zero in the prime field")
        prefix[i] = acc
        acc = acc * v % P
    acc_inv = inv(acc)
    out = [0] * n
    for i in range(n - 1, -1, -1):
        out[i] = prefix[i] * acc_inv % P
        acc_inv = acc_inv * values[i] % P
    return out


def felt_to_bytes(a: int) -> bytes:
    return (a % P).to_bytes(FIELD_BYTES, "little")


def felt_from_bytes(data: bytes) -> int:
    if len(data) != FIELD_BYTES:
        raise ValueError(f"field element must be {FIELD_BYTES} bytes, got {len(data)}")
    value = int.from_bytes(data, "little")
    if value >= P:
        raise ValueError("non-canonical field element encoding")
    return value


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def log2_exact(n: int) -> int:
    if not is_power_of_two(n):
        raise ValueError(f"{n} is not a power of two")
    return n.bit_length() - 1


def root_of_unity(order: int) -> int:
    """Generator of the unique multiplicative subgroup of the given power-of-two order."""
    k = log2_exact(order)
    if k > TWO_ADICITY:
        raise ValueError(f"no subgroup of order 2^{k}")
    return pow(_ROOT_2_32, 1 << (TWO_ADICITY - k), P)


@dataclass(frozen=True)
class EvaluationDomain:
    """offset * <generator>, a multiplicative subgroup (offset 1) or one of its cosets."""

    order: int
    generator: int
    offset: int = 1
    kind: str = "H"

    def __post_init__(self):
        if not is_power_of_two(self.order):
            raise ValueError("domain order must be a power of two")
        if pow(self.generator, self.order, P) != 1:
            raise ValueError("generator order does not divide the domain order")
        if self.order > 1 and pow(self.generator, self.order // 2, P) == 1:
            raise ValueError("generator order is smaller than the domain order")

    @classmethod
    def subgroup(cls, order: int, kind: str = "H") -> "EvaluationDomain":
        return cls(order, root_of_unity(order), 1, kind)

    @classmethod
    def coset(cls, order: int, offset: int = GENERATOR, kind: str = "L") -> "EvaluationDomain":
        # GENERATOR has full order p-1 so it never lies inside a power-of-two subgroup
        return cls(order, root_of_unity(order), offset % P, kind)

    def element(self, k: int) -> int:
        return self.offset * pow(self.generator, k % self.order, P) % P

    def elements(self) -> List[int]:
        out = [0] * self.order
        x = self.offset
        for k in range(self.order):
            out[k] = x
            x = x * self.generator % P
        return out

    def vanishing_at(self, x: int) -> int:
        """Z(x) = x^order - offset^order, zero exactly on the domain."""
        return (pow(x, self.order, P) - pow(self.offset, self.order, P)) % P

    def squared(self) -> "EvaluationDomain":
        """The image of the domain under x -> x^2 (half the size)."""
        return EvaluationDomain(
            self.order // 2, self.generator * self.generator % P, self.offset * self.offset % P, self.kind
        )


def _ntt(values: List[int], omega: int) -> List[int]:
    n = len(values)
    a = list(values)
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            a[i], a[j] = a[j], a[i]
    length = 2
    while length <= n:
        w_len = pow(omega, n // length, P)
        half = length >> 1
        twiddles = [1] * half
        for k in range(1, half):
            twiddles[k] = twiddles[k - 1] * w_len % P
        for start in range(0, n, length):
            for k in range(half):
                u = a[start + k]
                v = a[start + k + half] * twiddles[k] % P
                a[start + k] = (u + v) % P
                a[start + k + half] = (u - v) % P
        length <<= 1
    return a


def fft_evaluate(coeffs: Sequence[int], domain: EvaluationDomain) -> List[int]:
    """Evaluate sum_j coeffs[j] x^j at every point of the domain (domain order >= len(coeffs))."""
    n, m = len(coeffs), domain.order
    if not is_power_of_two(n):
        raise ValueError("coefficient count must be a power of two")
    if n > m:
        raise ValueError("domain smaller than the coefficient vector")
    scaled = [0] * m
    s = 1
    for j in range(n):
        scaled[j] = coeffs[j] * s % P
        s = s * domain.offset % P
    return _ntt(scaled, domain.generator)


def ifft_interpolate(evals: Sequence[int], domain: EvaluationDomain) -> List[int]:
    """Coefficients of the unique degree < m polynomial taking evals[k] at domain.element(k)."""
    m = len(evals)
    if m != domain.order:
        raise ValueError(f"expected {domain.order} evaluations, got {m}")
    coeffs = _ntt([e % P for e in evals], inv(domain.generator))
    m_inv = inv(m)
    off_inv = inv(domain.offset)
    s = m_inv
    for j in range(m):
        coeffs[j] = coeffs[j] * s % P
        s = s * off_inv % P
    return coeffs


def poly_eval(coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % P
    return acc


def poly_mul(a: Sequence[int], b: Sequence[int]) -> List[int]:
    if not a or not b:
        return []
    size = 1
    while size < len(a) + len(b) - 1:
        size <<= 1
    if size <= 64:
        out = [0] * (len(a) + len(b) - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    out[i + j] = (out[i + j] + x * y) % P
        return out
    dom = EvaluationDomain.subgroup(size)
    pa = fft_evaluate(list(a) + [0] * (size - len(a)), dom)
    pb = fft_evaluate(list(b) + [0] * (size - len(b)), dom)
    prod = ifft_interpolate([x * y % P for x, y in zip(pa, pb)], dom)
    return prod[: len(a) + len(b) - 1]


@dataclass(frozen=True)
class MultilinearTable:
    """Evaluations of V on {0,1}^num_vars; index i packs the point little-endian."""

    num_vars: int
    evals: tuple

    def __post_init__(self):
        if len(self.evals) != 1 << self.num_vars:
            raise ValueError(f"table for {self.num_vars} variables needs {1 << self.num_vars} entries")

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "MultilinearTable":
        vals = tuple(int(v) % P for v in values)
        return cls(log2_exact(len(vals)), vals)


def mle_evaluate(table, point: Sequence[int]) -> int:
    """Evaluate the multilinear extension by folding one variable at a time (lowest bit first)."""
    evals = table.evals if isinstance(table, MultilinearTable) else table
    if len(evals) != 1 << len(point):
        raise ValueError(f"table of size {len(evals)} does not match a {len(point)}-variable point")
    cur = [e % P for e in evals]
    for x in point:
        x = _v(x)
        cur = [(cur[2 * k] + x * (cur[2 * k + 1] - cur[2 * k])) % P for k in range(len(cur) // 2)]
    return cur[0]


def beta_evaluate(x: Sequence[int], y: Sequence[int]) -> int:
    if len(x) != len(y):
        raise ValueError("beta_evaluate: vectors differ in length")
    acc = 1
    for a, b in zip(x, y):
        a, b = _v(a), _v(b)
        acc = acc * ((1 - a) * (1 - b) + a * b) % P
    return acc


def eq_table(point: Sequence[int]) -> List[int]:
    """[beta(b, point) for every boolean b], little-endian index order, in O(2^len) time."""
    table = [1]
    for x in point:
        x = _v(x)
        one_minus = (1 - x) % P
        nxt = [0] * (2 * len(table))
        for i, t in enumerate(table):
            nxt[i] = t * one_minus % P
            nxt[i + len(table)] = t * x % P
        table = nxt
    return table


def bits_of(index: int, num_bits: int) -> List[int]:
    return [(index >> j) & 1 for j in range(num_bits)]
