"""Concrete target functions: the inner-product gadget, lifted compositions,
equality / index / disjointness matrices, and exact value-distribution oracles.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .core_math import PrimeModulus, as_modulus, gen_prime

ENUM_LIMIT = 1 << 24  # hard cap for exhaustive-enumeration paths
COUNT_LIMIT = 1 << 128  # exact counting width


@dataclass(frozen=True)
class Params:
    """Gadget parameters: field order q, vector length r, number of x-players k.

    Each x-player holds a vector in F_q^r, so the per-player domain size is
    N = q^r; the last player's domain is [q].
    """

    q: int
    r: int
    k: int

    def __post_init__(self):
        as_modulus(self.q)  # raises if not prime
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.q**self.r >= 1 << 63:
            raise ValueError(f"per-player domain q^r = {self.q}^{self.r} exceeds 63 bits")

    @property
    def n_per_player(self) -> int:
        """N = q^r, the size of one x-player's domain."""
        return self.q**self.r

    @property
    def theorem_regime(self) -> bool:
        """True when k >= 2 and r >= 2^(k+1)."""
        return self.k >= 2 and self.r >= 1 << (self.k + 1)

    @property
    def modulus(self) -> PrimeModulus:
        return PrimeModulus(self.q)

    def encode_input(self, coords) -> int:
        """Pack an r-vector over [0, q) into an integer in [0, N)."""
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.r:
            raise ValueError(f"expected {self.r} coordinates, got {len(coords)}")
        v = 0
        for c in reversed(coords):
            if not 0 <= c < self.q:
                raise ValueError(f"coordinate {c} outside [0, {self.q})")
            v = v * self.q + c
        return v

    def decode_input(self, v: int) -> tuple[int, ...]:
        """Inverse of encode_input: integer in [0, N) -> r-vector."""
        if not 0 <= v < self.n_per_player:
            raise ValueError(f"encoded input {v} outside [0, {self.n_per_player})")
        out = []
        for _ in range(self.r):
            v, c = divmod(v, self.q)
            out.append(c)
        return tuple(out)

    def digit_table(self) -> np.ndarray:
        """(N, r) array of base-q digits for all encoded player inputs."""
        return _digit_table(self.q, self.r)


@lru_cache(maxsize=32)
def _digit_table(q: int, r: int) -> np.ndarray:
    n = q**r
    if n > ENUM_LIMIT:
        raise ValueError(f"digit table for N = {n} exceeds enumeration limit")
    v = np.arange(n, dtype=np.int64)
    cols = []
    for _ in range(r):
        cols.append((v % q).astype(np.int64))
        v //= q
    out = np.stack(cols, axis=1)
    out.setflags(write=False)
    return out


def _check_player_inputs(params: Params, xs) -> list[tuple[int, ...]]:
    xs = list(xs)
    if len(xs) != params.k:
        raise ValueError(f"expected {params.k} player inputs, got {len(xs)}")
    vecs = []
    for x in xs:
        vec = tuple(int(c) for c in x)
        if len(vec) != params.r:
            raise ValueError(f"player input length {len(vec)} != r = {params.r}")
        if any(not 0 <= c < params.q for c in vec):
            raise ValueError(f"player input {vec} has coordinates outside [0, {params.q})")
        vecs.append(vec)
    return vecs


def gip_eval(params: Params, xs) -> int:
    """Sum over coordinates of the product across players, mod q.

    xs is a sequence of k vectors, each of r entries in [0, q).
    """
    vecs = _check_player_inputs(params, xs)
    total = 0
    for j in range(params.r):
        prod = 1
        for vec in vecs:
            prod = prod * vec[j] % params.q
        total += prod
    return total % params.q


def gip_eval_encoded(params: Params, xs_ints) -> int:
    """gip_eval on integer-encoded player inputs."""
    return gip_eval(params, [params.decode_input(int(v)) for v in xs_ints])


def gip_batch(params: Params, digit_cols) -> np.ndarray:
    """Vectorized gadget evaluation.

    digit_cols is a sequence of k arrays, each of shape (m, r) with base-q
    digits; returns the m gadget values in [0, q).
    """
    q = params.q
    prod = np.ones_like(digit_cols[0], dtype=np.int64)
    for d in digit_cols:
        prod = prod * d % q
    return prod.sum(axis=1) % q


def gip_batch_encoded(params: Params, xs_ints) -> np.ndarray:
    """Vectorized gadget evaluation on k arrays of integer-encoded inputs.

    Digits are peeled off arithmetically, so this works for any N that fits
    an int64, not just enumerable domains.
    """
    q = params.q
    rems = [np.asarray(v).astype(np.int64, copy=True) for v in xs_ints]
    if len(rems) != params.k:
        raise ValueError(f"expected {params.k} input columns")
    total = np.zeros(rems[0].shape, dtype=np.int64)
    for _ in range(params.r):
        prod = np.ones(rems[0].shape, dtype=np.int64)
        for t in range(params.k):
            prod = prod * (rems[t] % q) % q
            rems[t] //= q
        total += prod
    return total % q


def gip_value_distribution(params: Params) -> list[int]:
    """Exact preimage counts of the gadget: count[v] = #inputs with value v.

    Computed as the r-fold additive convolution over Z_q of the single
    coordinate product counts (q^k - (q-1)^k tuples multiply to zero,
    (q-1)^(k-1) to each nonzero value). Exact integers throughout.
    """
    q, r, k = params.q, params.r, params.k
    if q ** (r * k) >= COUNT_LIMIT:
        raise ValueError("input space exceeds the 128-bit counting width")
    one = [(q - 1) ** (k - 1)] * q
    one[0] = q**k - (q - 1) ** k
    counts = [1] + [0] * (q - 1)
    for _ in range(r):
        nxt = [0] * q
        for a, ca in enumerate(counts):
            if ca == 0:
                continue
            for b, cb in enumerate(one):
                nxt[(a + b) % q] += ca * cb
        counts = nxt
    return counts


@dataclass(frozen=True)
class TwoPartyFn:
    """A 0/1 matrix M indexed by (row z, column v)."""

    matrix: np.ndarray
    name: str = "fn"

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.uint8)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ValueError("matrix must be 2-D and nonempty")
        if not np.isin(m, (0, 1)).all():
            raise ValueError("matrix entries must be 0 or 1")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def is_square(self) -> bool:
        return self.rows == self.cols

    def entry(self, z: int, v: int) -> int:
        if not (0 <= z < self.rows and 0 <= v < self.cols):
            raise ValueError(f"entry ({z}, {v}) outside {self.rows}x{self.cols} matrix")
        return int(self.matrix[z, v])


def ind_index(q: int, y: int) -> int:
    """Bit position selected by y under the index convention.

    With B = ceil(log2 q) and b = ceil(log2 B), the position is the value of
    the first b bits of y's B-bit big-endian representation, reduced mod B.
    Accepts any B-bit y (0 <= y < 2^B).
    """
    if q < 2:
        raise ValueError("q must be >= 2")
    B = max(1, (q - 1).bit_length())
    b = max(1, (B - 1).bit_length()) if B > 1 else 0
    if not 0 <= y < 1 << B:
        raise ValueError(f"y = {y} outside [0, 2^{B})")
    if b == 0:
        return 0
    return (y >> (B - b)) % B


def _bit_of(x: int, pos: int, width: int) -> int:
    """Bit `pos` of x's big-endian width-bit representation (pos 0 = MSB)."""
    return (x >> (width - 1 - pos)) & 1


def make_two_party(kind: str, size: int | None = None, path=None) -> TwoPartyFn:
    """Build one of the standard two-party matrices.

    eq: identity (z equals v).  ind: entry(x, y) = selected bit of x.
    disj2: rows/cols are subsets of [n] with size = 2^n, entry 1 iff disjoint.
    file: CSV of 0/1 entries, one row per line.
    """
    kind = kind.lower()
    if kind == "file":
        if path is None:
            raise ValueError("file kind needs a path")
        return two_party_from_csv(path)
    if size is None or size < 2:
        raise ValueError(f"size must be >= 2, got {size}")
    if kind == "eq":
        return TwoPartyFn(np.eye(size, dtype=np.uint8), name=f"eq_{size}")
    if kind == "ind":
        B = max(1, (size - 1).bit_length())
        m = np.zeros((size, size), dtype=np.uint8)
        for y in range(size):
            i = ind_index(size, y)
            for x in range(size):
                m[x, y] = _bit_of(x, i, B)
        return TwoPartyFn(m, name=f"ind_{size}")
    if kind == "disj2":
        n = size.bit_length() - 1
        if 1 << n != size:
            raise ValueError(f"disj2 size must be a power of two, got {size}")
        masks = np.arange(size, dtype=np.int64)
        m = ((masks[:, None] & masks[None, :]) == 0).astype(np.uint8)
        return TwoPartyFn(m, name=f"disj2_{size}")
    raise ValueError(f"unknown two-party function kind {kind!r}")


def two_party_from_csv(path) -> TwoPartyFn:
    """Parse a headerless CSV of comma-separated 0/1 entries."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                vals = [int(c) for c in row]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer entry") from exc
            if any(v not in (0, 1) for v in vals):
                raise ValueError(f"{path}:{lineno}: entries must be 0 or 1")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: empty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: rows have unequal lengths")
    return TwoPartyFn(np.array(rows, dtype=np.uint8), name=Path(path).stem)


@dataclass(frozen=True)
class LiftedFn:
    """Composition of a q x q two-party matrix with the k-player gadget.

    Value on (x_1..x_k, z) is base.entry(z, gadget(x_1..x_k)).
    """

    base: TwoPartyFn
    params: Params
    gadget: str = "gip"

    def __post_init__(self):
        if self.gadget != "gip":
            raise ValueError(f"unknown gadget {self.gadget!r}")
        q = self.params.q
        if self.base.rows != q or self.base.cols != q:
            raise ValueError(
                f"base matrix must be {q}x{q} for lifting, got "
                f"{self.base.rows}x{self.base.cols}"
            )

    @property
    def name(self) -> str:
        return f"{self.base.name}.{self.gadget}(q={self.params.q},r={self.params.r},k={self.params.k})"

    def eval(self, xs, z: int) -> int:
        """Value on k player vectors and a row index z."""
        if not 0 <= int(z) < self.params.q:
            raise ValueError(f"z = {z} outside [0, {self.params.q})")
        return self.base.entry(int(z), gip_eval(self.params, xs))

    def eval_encoded(self, xs_ints, z: int) -> int:
        return self.eval([self.params.decode_input(int(v)) for v in xs_ints], z)

    def eval_batch(self, xs_ints, z_arr) -> np.ndarray:
        """Vectorized values for k arrays of encoded inputs and a z array."""
        v = gip_batch_encoded(self.params, xs_ints)
        z = np.asarray(z_arr, dtype=np.int64)
        return self.base.matrix[z, v]


def lifted_eval(lf: LiftedFn, xs, z: int) -> int:
    """f(z, gadget(x_1..x_k)) for a lifted function."""
    return lf.eval(xs, z)


def g_mod2_eval(params: Params, xs) -> int:
    """Parity of the gadget value, taken as an integer in [0, q)."""
    return gip_eval(params, xs) % 2


def disj3_eval(x: str, y: str, z: str) -> int:
    """Three-party disjointness on equal-length bit strings.

    Equals 1 iff no coordinate is 1 in all of x, y, z; identical to the
    two-party disjointness of z against x AND y.
    """
    if len(x) != len(y) or len(x) != len(z):
        raise ValueError("length mismatch")
    for s in (x, y, z):
        if s.strip("01"):
            raise ValueError(f"not a bit string: {s!r}")
    if not x:
        return 1
    return int(int(x, 2) & int(y, 2) & int(z, 2) == 0)


def disj3_eval_masks(xm: int, ym: int, zm: int) -> int:
    """disj3_eval on integer bit masks."""
    return int(xm & ym & zm == 0)


def cor35_regime_ok(n: int, k: int) -> bool:
    """Whether (n, k) satisfies k <= log2 n - 5 log2 log2 n."""
    if n < 3:
        return False
    return k <= math.log2(n) - 5 * math.log2(math.log2(n))


def cor35_params(n: int, k: int, seed: int) -> Params:
    """Parameter accounting for the parity-of-gadget hard function.

    Sets r = 2^(k+1) and picks a prime with exactly n / 2^(k+1) bits, so the
    per-player input length is r * bits = n. If n is not a multiple of
    2^(k+1) it is rounded down to the nearest multiple (reported by warning);
    the asymptotic regime inequality is likewise reported, not enforced.
    """
    r = 1 << (k + 1)
    if r > n:
        raise ValueError(f"2^(k+1) = {r} exceeds n = {n}")
    bits = n // r
    if bits * r != n:
        warnings.warn(
            f"n = {n} is not a multiple of 2^(k+1) = {r}; rounded down to {bits * r}",
            stacklevel=2,
        )
    if bits < 2:
        raise ValueError(f"prime bit length n/2^(k+1) = {bits} is below 2")
    if bits > 61:
        raise ValueError(f"prime bit length {bits} exceeds desk-scale cap 61")
    if not cor35_regime_ok(n, k):
        warnings.warn(
            f"(n={n}, k={k}) violates k <= log2 n - 5 log2 log2 n; "
            "proceeding at desk scale",
            stacklevel=2,
        )
    q = gen_prime(bits, seed)
    return Params(q=q.q, r=r, k=k)


def exactly_n_eval(x: int, y: int, z: int, target: int, size: int) -> int:
    """Demo composition: does x + y + z equal the target?

    Realized as equality of z against the integer gadget target - x - y,
    with out-of-range gadget values routed to a reserved column on which
    equality never holds.
    """
    for name, v in (("x", x), ("y", y), ("z", z)):
        if not 0 <= v < size:
            raise ValueError(f"{name} = {v} outside [0, {size})")
    g = target - x - y
    if not 0 <= g < size:
        return 0  # reserved column
    return int(z == g)
