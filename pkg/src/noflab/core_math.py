"""Prime-field arithmetic, prime generation, additive characters, bit utilities.

Shared foundation for every other module: exact integer arithmetic mod a
prime, a deterministic primality test, the additive characters
z -> exp(2*pi*i*alpha*z/q), and the small bit-string helpers used by the
protocol and rectangle machinery.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass

import numpy as np

# Witness set making Miller-Rabin deterministic for all n < 3.3e24 > 2^64.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

TWO_PI = 2.0 * math.pi


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin primality test, valid for all n < 2^64."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d = n - 1
    s = (d & -d).bit_length() - 1
    d >>= s
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class PrimeModulus:
    """A checked prime field order q with 2 <= q < 2^64."""

    q: int

    def __post_init__(self):
        if not isinstance(self.q, int):
            raise TypeError(f"field order must be an int, got {type(self.q).__name__}")
        if self.q < 2 or self.q >= 1 << 64:
            raise ValueError(f"field order {self.q} outside supported range [2, 2^64)")
        if not is_prime(self.q):
            raise ValueError(f"field order {self.q} is not prime")

    def __int__(self) -> int:
        return self.q

    def element(self, value: int) -> "FieldElem":
        return FieldElem(value % self.q, self)


def as_modulus(q) -> PrimeModulus:
    """Coerce an int or PrimeModulus to a checked PrimeModulus."""
    return q if isinstance(q, PrimeModulus) else PrimeModulus(int(q))


@dataclass(frozen=True)
class FieldElem:
    """An element of F_q, stored as an integer in [0, q)."""

    value: int
    modulus: PrimeModulus

    def __post_init__(self):
        if not 0 <= self.value < self.modulus.q:
            raise ValueError(f"value {self.value} outside [0, {self.modulus.q})")

    def _check(self, other: "FieldElem"):
        if not isinstance(other, FieldElem):
            raise TypeError("expected a FieldElem operand")
        if other.modulus.q != self.modulus.q:
            raise ValueError(
                f"modulus mismatch: {self.modulus.q} vs {other.modulus.q}"
            )

    def __add__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return FieldElem((self.value + other.value) % self.modulus.q, self.modulus)

    def __sub__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return FieldElem((self.value - other.value) % self.modulus.q, self.modulus)

    def __mul__(self, other: "FieldElem") -> "FieldElem":
        self._check(other)
        return FieldElem((self.value * other.value) % self.modulus.q, self.modulus)

    def __neg__(self) -> "FieldElem":
        return FieldElem(-self.value % self.modulus.q, self.modulus)

    def inv(self) -> "FieldElem":
        if self.value == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return FieldElem(pow(self.value, self.modulus.q - 2, self.modulus.q), self.modulus)

    def __int__(self) -> int:
        return self.value


def field_arith(op: str, a: FieldElem, b: FieldElem | None = None) -> FieldElem:
    """Dispatch one field operation: add, mul, inv or neg.

    Binary ops require b over the same modulus; inv raises on zero.
    """
    if op in ("add", "mul"):
        if b is None:
            raise ValueError(f"{op} needs two operands")
        return a + b if op == "add" else a * b
    if op == "neg":
        return -a
    if op == "inv":
        return a.inv()
    raise ValueError(f"unknown field operation {op!r}")


def gen_prime(bits: int, seed: int) -> PrimeModulus:
    """Deterministically pick a prime with exactly `bits` binary digits.

    Scans upward by 2 from a seeded random odd start inside
    [2^(bits-1), 2^bits), wrapping around once.
    """
    if not 2 <= bits <= 61:
        raise ValueError(f"bits must be in [2, 61], got {bits}")
    lo, hi = 1 << (bits - 1), 1 << bits
    rng = random.Random(seed)
    start = lo + rng.randrange(hi - lo)
    start |= 1
    if start >= hi:
        start = lo | 1
    n = start
    wrapped = False
    while True:
        if is_prime(n):
            return PrimeModulus(n)
        n += 2
        if n >= hi:
            if wrapped:
                break
            n = lo | 1
            wrapped = True
        if wrapped and n >= start:
            break
    # Unreachable for bits >= 2 (there is always an odd prime in the range),
    # reported defensively.
    raise RuntimeError(f"no {bits}-bit prime found")


def char_value(q, alpha: int, z: int) -> complex:
    """Additive character value exp(2*pi*i*alpha*z/q)."""
    qq = int(q.q if isinstance(q, PrimeModulus) else q)
    if not 0 <= alpha < qq:
        raise ValueError(f"character index {alpha} outside [0, {qq})")
    if not 0 <= z < qq:
        raise ValueError(f"field value {z} outside [0, {qq})")
    return cmath.exp(1j * TWO_PI * ((alpha * z) % qq) / qq)


def char_table(q: int) -> np.ndarray:
    """All q unit roots exp(2*pi*i*j/q), j = 0..q-1, as a complex array."""
    return np.exp(1j * TWO_PI * np.arange(q) / q)


def hamming_distance(a: str, b: str) -> int:
    """Number of differing positions between two equal-length bit strings."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    for s in (a, b):
        if s.strip("01"):
            raise ValueError(f"not a bit string: {s!r}")
    if not a:
        return 0
    return (int(a, 2) ^ int(b, 2)).bit_count()


def int_to_bits(v: int, width: int) -> str:
    """Big-endian bit string of v with exactly `width` digits."""
    if v < 0 or (width == 0 and v != 0) or v >> width:
        raise ValueError(f"{v} does not fit in {width} bits")
    return format(v, f"0{width}b") if width else ""


def bits_to_int(s: str) -> int:
    """Integer value of a big-endian bit string; empty string is 0."""
    if s.strip("01"):
        raise ValueError(f"not a bit string: {s!r}")
    return int(s, 2) if s else 0


# --- seeded hashing ------------------------------------------------------
#
# splitmix64 is the mixer behind the seeded pseudorandom predicates used for
# large-domain cylinder membership: cheap, vectorizable, and stable across
# platforms.

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over a uint64 array."""
    x = x.astype(np.uint64, copy=True)
    x += _SM_GAMMA
    x = (x ^ (x >> np.uint64(30))) * _SM_M1
    x = (x ^ (x >> np.uint64(27))) * _SM_M2
    return x ^ (x >> np.uint64(31))


def splitmix64_scalar(x: int) -> int:
    mask = (1 << 64) - 1
    x = (x + 0x9E3779B97F4A7C15) & mask
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & mask
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & mask
    return x ^ (x >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Stable 64-bit child seed for (seed, path...) shard trees."""
    h = splitmix64_scalar(seed & ((1 << 64) - 1))
    for p in path:
        h = splitmix64_scalar(h ^ (p & ((1 << 64) - 1)))
    return h
