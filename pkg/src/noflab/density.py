"""Density-increment machinery over rectangles of set pairs.

A rectangle X x Y lives over an ordered coordinate set I; its potential is
the log-fraction of the disjoint pairs (x AND y = 0) it captures. Dropping
a coordinate whose single-intersection slice the rectangle misses raises
the potential by at least log2(3/2), which bounds how many coordinates can
be lost and yields the support-extraction routine driving the disjointness
attack.

Internally coordinate labels are 1-based; label coords[t] maps to bit t of
the membership masks, so strings are written least-significant coordinate
first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_math import derive_seed
from .combinatorics import hd_witness, BipartiteGraph
from .nof import Protocol, Disj3Target, SeparationWitness, check_witness

LOG2_3_2 = math.log2(1.5)


def _parse_members(vals, m: int) -> np.ndarray:
    """Membership array from an iterable of masks or bit strings."""
    out = np.zeros(1 << m, dtype=bool)
    for v in vals:
        if isinstance(v, str):
            if len(v) != m or v.strip("01"):
                raise ValueError(f"bad member string {v!r} for {m} coordinates")
            v = int(v[::-1], 2) if v else 0
        v = int(v)
        if not 0 <= v < 1 << m:
            raise ValueError(f"member {v} outside {m}-bit range")
        out[v] = True
    return out


def mask_to_string(mask: int, m: int) -> str:
    """Member string, least-significant coordinate first."""
    return format(mask, f"0{m}b")[::-1] if m else ""


@dataclass(frozen=True)
class Rectangle:
    """X x Y over an ascending tuple of coordinate labels."""

    coords: tuple
    x_members: np.ndarray
    y_members: np.ndarray

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if list(coords) != sorted(set(coords)):
            raise ValueError("coords must be strictly ascending")
        object.__setattr__(self, "coords", coords)
        for name in ("x_members", "y_members"):
            arr = np.asarray(getattr(self, name), dtype=bool)
            if arr.shape != (1 << len(coords),):
                raise ValueError(f"{name} must have 2^{len(coords)} entries")
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return len(self.coords)

    def pos_of(self, coord: int) -> int:
        try:
            return self.coords.index(int(coord))
        except ValueError:
            raise ValueError(f"coordinate {coord} not in {self.coords}") from None

    @classmethod
    def from_members(cls, coords, x_vals, y_vals) -> "Rectangle":
        coords = tuple(coords)
        m = len(coords)
        return cls(coords, _parse_members(x_vals, m), _parse_members(y_vals, m))

    @classmethod
    def full(cls, n: int) -> "Rectangle":
        return cls(tuple(range(1, n + 1)),
                   np.ones(1 << n, dtype=bool), np.ones(1 << n, dtype=bool))

    def x_list(self):
        return [int(v) for v in np.nonzero(self.x_members)[0]]

    def y_list(self):
        return [int(v) for v in np.nonzero(self.y_members)[0]]


def _superset_zeta(v: np.ndarray) -> np.ndarray:
    """f[m] -> sum of f over supersets of m."""
    v = v.astype(np.int64, copy=True)
    n = v.size
    b = 1
    while b < n:
        idx = (np.arange(n) & b) == 0
        v[idx] += v[np.arange(n)[idx] | b]
        b <<= 1
    return v


def _superset_moebius(v: np.ndarray) -> np.ndarray:
    """Inverse of the superset zeta transform."""
    v = v.astype(np.int64, copy=True)
    n = v.size
    b = 1
    while b < n:
        idx = (np.arange(n) & b) == 0
        v[idx] -= v[np.arange(n)[idx] | b]
        b <<= 1
    return v


def and_pair_counts(R: Rectangle) -> np.ndarray:
    """counts[mask] = number of pairs (x, y) in R with x AND y == mask."""
    zx = _superset_zeta(R.x_members.astype(np.int64))
    zy = _superset_zeta(R.y_members.astype(np.int64))
    return _superset_moebius(zx * zy)


def disjoint_count(R: Rectangle) -> int:
    return int(and_pair_counts(R)[0])


def density_value(R: Rectangle) -> float:
    """log2 of the captured fraction of disjoint pairs; -inf when none."""
    cnt = disjoint_count(R)
    if cnt == 0:
        return float("-inf")
    return math.log2(cnt) - R.m * math.log2(3.0)


def _drop_bit(members: np.ndarray, pos: int, require: int | None) -> np.ndarray:
    """Restrictions of the members to the other coordinates, optionally
    keeping only members whose bit at pos has the required value."""
    idx = np.nonzero(members)[0]
    if require is not None:
        idx = idx[(idx >> pos) & 1 == require]
    low = idx & ((1 << pos) - 1)
    high = (idx >> (pos + 1)) << pos
    out = np.zeros(members.size >> 1, dtype=bool)
    out[high | low] = True
    return out


def projection(R: Rectangle, coord: int, side: str) -> Rectangle:
    """Drop a coordinate, restricting the chosen side to members that are
    zero there; the other side is restricted (dropped) unconditionally."""
    pos = R.pos_of(coord)
    if side not in ("X", "Y"):
        raise ValueError(f"side must be 'X' or 'Y', got {side!r}")
    new_coords = tuple(c for c in R.coords if c != int(coord))
    if side == "X":
        nx = _drop_bit(R.x_members, pos, require=0)
        ny = _drop_bit(R.y_members, pos, require=None)
    else:
        nx = _drop_bit(R.x_members, pos, require=None)
        ny = _drop_bit(R.y_members, pos, require=0)
    return Rectangle(new_coords, nx, ny)


def ext_size(R: Rectangle, coord: int, x_prime, y_prime) -> int:
    """Number of extensions of a reduced disjoint pair inside R.

    x_prime, y_prime are masks or strings over the coordinates without
    `coord`; counts which of the three disjoint extensions (0,0), (1,0),
    (0,1) at `coord` land in R.
    """
    pos = R.pos_of(coord)
    m1 = R.m - 1
    xp = _parse_members([x_prime], m1)
    yp = _parse_members([y_prime], m1)
    xv = int(np.nonzero(xp)[0][0])
    yv = int(np.nonzero(yp)[0][0])
    if xv & yv:
        return 0  # the reduced pair is not disjoint
    low = (1 << pos) - 1

    def lift(v, bit):
        return ((v & ~low) << 1) | (bit << pos) | (v & low)

    x0, x1 = lift(xv, 0), lift(xv, 1)
    y0, y1 = lift(yv, 0), lift(yv, 1)
    count = 0
    count += int(R.x_members[x0] and R.y_members[y0])
    count += int(R.x_members[x1] and R.y_members[y0])
    count += int(R.x_members[x0] and R.y_members[y1])
    return count


def _assert_ext_bound(R: Rectangle, pos: int):
    """No reduced disjoint pair may have all three extensions when the
    single-intersection slice at pos is empty.

    A size-3 extension set needs both bit values of the dropped coordinate
    present on both sides, so it suffices to check that the sides'
    both-values restrictions share no disjoint pair.
    """
    xp = _drop_bit(R.x_members, pos, require=0) & _drop_bit(R.x_members, pos, require=1)
    yp = _drop_bit(R.y_members, pos, require=0) & _drop_bit(R.y_members, pos, require=1)
    sub = Rectangle(tuple(range(1, R.m)), xp, yp)
    if disjoint_count(sub) != 0:
        raise AssertionError(
            "extension-set bound violated: a disjoint reduced pair has all "
            "three extensions despite an empty single-intersection slice"
        )


def project_best_side(R: Rectangle, coord: int):
    """Project away a coordinate whose single-intersection slice R misses,
    keeping the side with the larger resulting potential (ties pick X).

    Returns (rectangle, side, increment); the increment is certified to be
    at least log2(3/2).
    """
    pos = R.pos_of(coord)
    counts = and_pair_counts(R)
    if counts[1 << pos] != 0:
        raise ValueError(
            f"rectangle meets the single-intersection slice at {coord}"
        )
    before = int(counts[0])
    if before == 0:
        raise ValueError("rectangle captures no disjoint pair")
    _assert_ext_bound(R, pos)
    rx = projection(R, coord, "X")
    ry = projection(R, coord, "Y")
    cx, cy = disjoint_count(rx), disjoint_count(ry)
    result, side, after = (rx, "X", cx) if cx >= cy else (ry, "Y", cy)
    # potential gain of log2(3 * after / before) >= log2(3/2) <=> 2*after >= before
    if 2 * after < before:
        raise AssertionError("projection increment fell below log2(3/2)")
    increment = math.log2(3.0 * after / before)
    return result, side, increment


@dataclass
class DensityState:
    """Trace of one support-extraction run."""

    initial: Rectangle
    current: Rectangle
    projected_coords: list = field(default_factory=list)
    density_trace: list = field(default_factory=list)
    support_pairs: dict = field(default_factory=dict)


def _find_pair_with_and(R: Rectangle, mask: int):
    """Lexicographically first (x, y) in R with x AND y == mask, or None."""
    ys = np.nonzero(R.y_members)[0]
    if ys.size == 0:
        return None
    for x in np.nonzero(R.x_members)[0]:
        x = int(x)
        if x & mask != mask:
            continue
        hits = ys[(ys & x) == mask]
        if hits.size:
            return x, int(hits[0])
    return None


def extract_support(R: Rectangle, c_budget: float):
    """Coordinates whose single-intersection slices the rectangle provably
    meets.

    Repeatedly projects away the smallest coordinate whose slice the current
    rectangle misses; every step raises the potential by at least 1/2, so at
    most 2c coordinates are lost. The surviving set S is re-verified against
    the ORIGINAL rectangle, recording a witness pair per coordinate.
    Returns (S, DensityState).
    """
    if not math.isfinite(c_budget):
        raise ValueError("c_budget must be finite")
    e0 = density_value(R)
    if e0 == float("-inf") or e0 < -c_budget - 1e-9:
        raise ValueError(
            f"rectangle density {e0} below the budgeted floor -{c_budget}"
        )
    state = DensityState(initial=R, current=R, density_trace=[e0])
    while True:
        cur = state.current
        counts = and_pair_counts(cur)
        victim = None
        for t, coord in enumerate(cur.coords):
            if counts[1 << t] == 0:
                victim = coord
                break
        if victim is None:
            break
        nxt, side, inc = project_best_side(cur, victim)
        if inc < 0.5 or inc < LOG2_3_2 - 1e-9:
            raise AssertionError(f"projection increment {inc} below bound")
        state.current = nxt
        state.projected_coords.append((victim, side))
        state.density_trace.append(state.density_trace[-1] + inc)
    support = state.current.coords
    c_measured = -e0
    if len(support) < len(R.coords) - 2 * c_measured - 1e-9:
        raise AssertionError("support smaller than the density bound allows")
    for coord in support:
        pos = R.pos_of(coord)
        pair = _find_pair_with_and(R, 1 << pos)
        if pair is None:
            raise AssertionError(
                f"original rectangle misses the slice at coordinate {coord}"
            )
        state.support_pairs[coord] = pair
    return support, state


# --- the disjointness attack pipeline ---------------------------------------

ATTACK_POINT_LIMIT = 1 << 27


def _transcript_blocks(p: Protocol, bits: str):
    pos = 0
    prior, block = {}, {}
    for t in p.turns:
        prior[t.speaker] = bits[:pos]
        block[t.speaker] = bits[pos:pos + t.msg_bits]
        pos += t.msg_bits
    return prior, block


def _side_mask(p: Protocol, speaker: int, z_values, prior_bits: str,
               want_block: str, n: int) -> np.ndarray:
    """Members of one rectangle side: strings on which the speaker emits the
    wanted block for every z in z_values."""
    size = 1 << n
    turn = next((t for t in p.turns if t.speaker == speaker), None)
    if turn is None:
        return np.ones(size, dtype=bool)
    want = int(want_block, 2) if want_block else 0
    prior_int = int(prior_bits, 2) if prior_bits else 0
    vals = np.arange(size, dtype=np.int64)
    zeros = np.zeros(size, dtype=np.int64)
    mask = np.ones(size, dtype=bool)
    # speaker 1 sees (x_2, z): vary x_2; speaker 2 sees (x_1, z): vary x_1
    for z in z_values:
        z_col = np.full(size, int(z), dtype=np.int64)
        prior_col = np.full(size, prior_int, dtype=np.int64)
        cols = [zeros, vals] if speaker == 1 else [vals, zeros]
        if getattr(turn.rule, "supports_batch", False):
            msg = np.asarray(turn.rule.emit_batch(cols, z_col, prior_col, None))
        else:
            msg = np.empty(size, dtype=np.int64)
            for j in range(size):
                xs = [int(cols[0][j]), int(cols[1][j])]
                vis = p.visible(speaker, xs, int(z))
                msg[j] = turn.rule.emit(vis, prior_bits, None)
        mask &= msg == want
    return mask


@dataclass
class AttackReport:
    transcript: str
    class_size: int
    z_pair: tuple | None = None
    deficiency: float | None = None
    support: tuple | None = None
    witness: SeparationWitness | None = None
    failure: str | None = None


def disj3_attack(p: Protocol, n: int, delta: float = 0.05) -> AttackReport:
    """Hunt for a fooling pair of a one-way three-party disjointness
    protocol.

    Pipeline: pick the transcript whose consistent class over disjoint
    (x, y) pairs is largest; find two far z's sharing a large common
    neighborhood; intersect their consistent rectangles; extract supported
    coordinates by density increments; and exhibit a pair witnessing a
    value flip. Correct protocols make some stage fail, reported as
    `failure` with a None witness.
    """
    target = Disj3Target(n)
    if p.domain != target.domain:
        raise ValueError("protocol domain is not the n-bit disjointness domain")
    if p.randomized or not p.is_one_way:
        raise ValueError("the attack needs a deterministic one-way protocol")
    size = 1 << n
    d0 = [(x, y) for x in range(size) for y in range(size) if x & y == 0]
    if size * len(d0) > ATTACK_POINT_LIMIT:
        raise ValueError(f"n = {n} exceeds the dense pipeline limit")
    xs0 = np.array([x for x, _ in d0], dtype=np.int64)
    ys0 = np.array([y for _, y in d0], dtype=np.int64)

    def row_transcripts(z):
        z_col = np.full(len(d0), int(z), dtype=np.int64)
        if p.supports_batch:
            tr, _ = p.run_batch([xs0, ys0], z_col)
            return tr
        tr = np.empty(len(d0), dtype=np.int64)
        for j in range(len(d0)):
            t, _ = p.simulate([int(xs0[j]), int(ys0[j])], int(z))
            tr[j] = int(t.bits, 2) if t.bits else 0
        return tr

    counts = np.zeros(1 << p.cost, dtype=np.int64)
    for z in range(size):
        counts += np.bincount(row_transcripts(z), minlength=1 << p.cost)
    star = int(np.argmax(counts))
    bits = format(star, f"0{p.cost}b") if p.cost else ""
    report = AttackReport(transcript=bits, class_size=int(counts[star]))

    adj = np.zeros((size, len(d0)), dtype=bool)
    for z in range(size):
        adj[z] = row_transcripts(z) == star
    graph = BipartiteGraph(list(range(size)), d0, adj)
    found = hd_witness(graph, delta)
    if found is None:
        report.failure = "no far z-pair with a large common neighborhood"
        return report
    z0, z1, _common = found
    report.z_pair = (z0, z1)

    prior, block = _transcript_blocks(p, bits)
    y_mask = _side_mask(p, 1, (z0, z1), prior.get(1, ""), block.get(1, ""), n)
    x_mask = _side_mask(p, 2, (z0, z1), prior.get(2, ""), block.get(2, ""), n)
    rect = Rectangle(tuple(range(1, n + 1)), x_mask, y_mask)

    c = -density_value(rect)
    report.deficiency = c
    if not math.isfinite(c):
        report.failure = "consistent rectangle misses every disjoint pair"
        return report
    if n - 2 * c < 1:
        report.failure = f"deficiency {c:.3f} leaves no guaranteed support"
        return report
    support, state = extract_support(rect, c)
    report.support = support

    diff = z0 ^ z1
    pick = None
    for coord in support:
        if (diff >> (coord - 1)) & 1:
            pick = coord
            break
    if pick is None:
        report.failure = "support misses every differing coordinate"
        return report
    x_star, y_star = state.support_pairs[pick]
    w = SeparationWitness(
        x_star=(int(x_star), int(y_star)),
        z0_star=int(z0), z1_star=int(z1), transcript=bits,
        value0=target.eval((x_star, y_star), z0),
        value1=target.eval((x_star, y_star), z1),
    )
    if not check_witness(p, target, w):
        raise AssertionError("pipeline produced an invalid witness")
    report.witness = w
    return report


# --- built-in disjointness protocols for the attack experiments -------------


def _z_bits_rule(mask: int, bits: int):
    from .nof import CallableRule

    def fn(vis, prior, rand):
        return vis.z & mask

    def batch(xs_cols, z_col, prior, rand):
        return z_col & mask

    return CallableRule(fn, batch, name=f"z-bits(mask={mask:#x},{bits}b)")


def _guess_output_rule(n: int):
    """Best-effort output: call disjoint unless a broadcast z-bit overlaps
    x AND y. Correct only when all of z was broadcast."""
    from .nof import CallableRule

    def fn(vis, transcript, rand):
        known = int(transcript, 2) if transcript else 0
        return int(known & vis.xs[0] & vis.xs[1] == 0)

    def batch(xs_cols, z_col, prior, rand):
        return (prior & xs_cols[0] & xs_cols[1] == 0).astype(np.int64)

    return CallableRule(fn, batch, name="disjoint-vs-known-bits")


def disj3_broadcast_protocol(n: int, num_bits: int) -> Protocol:
    """Player 1 broadcasts the num_bits lowest coordinates of z; the last
    player answers as if those were all of z. Correct iff num_bits == n."""
    from .nof import CallableRule, NofDomain, Turn

    if not 1 <= num_bits <= n:
        raise ValueError("num_bits must be in [1, n]")
    size = 1 << n
    mask = (1 << num_bits) - 1
    dom = NofDomain((size, size), size)
    return Protocol(dom, [Turn(1, num_bits, _z_bits_rule(mask, num_bits))],
                    _guess_output_rule(n),
                    name=f"disj3-bcast[{num_bits}/{n} bits]")


def disj3_protocol_suite(n: int) -> list:
    """Five hand-built low-cost protocols (at most 3 bits each)."""
    from .nof import CallableRule, NofDomain, Turn

    size = 1 << n
    dom = NofDomain((size, size), size)
    suite = [
        disj3_broadcast_protocol(n, 2),
        disj3_broadcast_protocol(n, 1),
        disj3_broadcast_protocol(n, 3),
    ]

    parity = CallableRule(
        lambda vis, prior, rand: vis.z.bit_count() & 1,
        lambda xs_cols, z_col, prior, rand: np.array(
            [int(v).bit_count() & 1 for v in z_col], dtype=np.int64),
        name="parity(z)",
    )
    suite.append(Protocol(dom, [Turn(1, 1, parity)], _guess_output_rule(n),
                          name="disj3-parity"))

    z_bit = _z_bits_rule(1, 1)
    x_and_z = CallableRule(
        lambda vis, prior, rand: vis.xs[0] & vis.z & 1,
        lambda xs_cols, z_col, prior, rand: xs_cols[0] & z_col & 1,
        name="x1-and-z1",
    )
    suite.append(Protocol(dom, [Turn(1, 1, z_bit), Turn(2, 1, x_and_z)],
                          _guess_output_rule(n), name="disj3-mixed"))
    return suite


# --- seeded rectangle generator for the property suites ---------------------


def random_rectangle(n: int, seed: int, c_max: float = 3.0,
                     max_retries: int = 64) -> Rectangle:
    """Seeded rectangle with finite deficiency at most c_max.

    Rotates through three shapes: plain random thinning, one side with
    forced-zero coordinates (guaranteeing empty single-intersection
    slices), and both sides forced on one coordinate each.
    """
    size = 1 << n
    for attempt in range(max_retries):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0xC7, attempt)))
        mode = int(rng.integers(0, 3))
        keep_x = 0.82 + 0.15 * rng.random()
        keep_y = 0.82 + 0.15 * rng.random()
        x = rng.random(size) < keep_x
        y = rng.random(size) < keep_y
        if mode >= 1:
            forced = rng.choice(n, size=min(n, int(rng.integers(1, 3))),
                                replace=False)
            for f in forced:
                x &= (np.arange(size) >> int(f)) & 1 == 0
        if mode == 2:
            f = int(rng.integers(0, n))
            y &= (np.arange(size) >> f) & 1 == 0
        rect = Rectangle(tuple(range(1, n + 1)), x, y)
        e = density_value(rect)
        if math.isfinite(e) and -e <= c_max:
            return rect
    raise RuntimeError(f"no rectangle with deficiency <= {c_max} in {max_retries} tries")
