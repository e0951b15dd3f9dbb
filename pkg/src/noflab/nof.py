"""One-way number-on-forehead protocol model.

Players 1..k hold x_1..x_k on their foreheads, player k+1 holds z; every
player sees all inputs except its own forehead. Messages are broadcast in
turn order onto a shared blackboard; the configured output player announces
the result after the last turn. Includes exhaustive verification, the
distinct-row one-way two-party complexity, message-consistent input sets,
built-in upper-bound protocols and exact brute-force search for the optimal
one-way cost at tiny scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core_math import bits_to_int, derive_seed, int_to_bits
from .fourier import CylinderIntersection, TableCylinder
from .functions import (
    ENUM_LIMIT,
    LiftedFn,
    Params,
    TwoPartyFn,
    disj3_eval_masks,
    gip_batch_encoded,
    gip_eval_encoded,
    ind_index,
)

SEARCH_DOMAIN_LIMIT = 1 << 12
SEARCH_BUDGET_LIMIT = 4


@dataclass(frozen=True)
class NofDomain:
    """Input domain: per-player sizes for x_1..x_k plus the z domain."""

    x_sizes: tuple
    z_size: int

    def __post_init__(self):
        object.__setattr__(self, "x_sizes", tuple(int(s) for s in self.x_sizes))
        if not self.x_sizes or any(s < 1 for s in self.x_sizes):
            raise ValueError("x_sizes must be nonempty positive ints")
        if self.z_size < 1:
            raise ValueError("z_size must be positive")

    @property
    def k(self) -> int:
        return len(self.x_sizes)

    @property
    def points(self) -> int:
        return math.prod(self.x_sizes) * self.z_size

    def check_input(self, xs, z: int):
        if len(xs) != self.k:
            raise ValueError(f"expected {self.k} player inputs, got {len(xs)}")
        for i, (x, s) in enumerate(zip(xs, self.x_sizes), start=1):
            if not 0 <= int(x) < s:
                raise ValueError(f"x_{i} = {x} outside [0, {s})")
        if not 0 <= int(z) < self.z_size:
            raise ValueError(f"z = {z} outside [0, {self.z_size})")


@dataclass(frozen=True)
class Visible:
    """What one speaker sees: the x-tuple with its own forehead masked to
    None, and z (None for the last player)."""

    xs: tuple
    z: int | None


@dataclass(frozen=True)
class Transcript:
    bits: str
    boundaries: tuple = ()

    def __post_init__(self):
        if self.bits.strip("01"):
            raise ValueError(f"not a bit string: {self.bits!r}")

    def __len__(self) -> int:
        return len(self.bits)

    def block(self, index: int) -> str:
        lo = self.boundaries[index - 1] if index > 0 else 0
        return self.bits[lo:self.boundaries[index]]


# --- message rules --------------------------------------------------------


class CallableRule:
    """Message rule backed by a scalar function (visible, prior, rand) -> int.

    An optional vectorized twin (xs_cols, z_col, prior_ints, rand) -> int
    array enables the fast enumeration paths.
    """

    def __init__(self, fn, batch_fn=None, name="rule"):
        self.fn = fn
        self.batch_fn = batch_fn
        self.name = name

    def emit(self, visible: Visible, prior: str, rand: str | None) -> int:
        return int(self.fn(visible, prior, rand))

    def emit_batch(self, xs_cols, z_col, prior_ints, rand):
        if self.batch_fn is None:
            raise NotImplementedError
        return self.batch_fn(xs_cols, z_col, prior_ints, rand)

    @property
    def supports_batch(self) -> bool:
        return self.batch_fn is not None

    def spec(self):
        return {"type": "named", "name": self.name}


class TableRule:
    """Explicit message table for speaker i <= k.

    Entry index is (visible x-tuple flattened in ascending player order
    skipping the speaker) * z_size * 2^prior_bits + z * 2^prior_bits + prior.
    """

    def __init__(self, domain: NofDomain, speaker: int, msg_bits: int,
                 prior_bits: int, table):
        if not 1 <= speaker <= domain.k:
            raise ValueError("table rules are for the x-players")
        self.domain = domain
        self.speaker = speaker
        self.msg_bits = msg_bits
        self.prior_bits = prior_bits
        self.vis_sizes = tuple(s for i, s in enumerate(domain.x_sizes, start=1)
                               if i != speaker)
        table = np.asarray(table, dtype=np.int64).reshape(-1)
        expected = math.prod(self.vis_sizes) * domain.z_size * (1 << prior_bits)
        if table.size != expected:
            raise ValueError(f"table size {table.size}, expected {expected}")
        if table.size and (table.min() < 0 or table.max() >= 1 << msg_bits):
            raise ValueError("table entries outside message range")
        self.table = table
        self.name = f"table(player {speaker})"

    def _vis_flat(self, xs):
        flat = 0
        vis = [x for i, x in enumerate(xs, start=1) if i != self.speaker]
        for x, s in zip(vis, self.vis_sizes):
            flat = flat * s + int(x)
        return flat

    def emit(self, visible: Visible, prior: str, rand) -> int:
        xs = list(visible.xs)
        xs[self.speaker - 1] = 0  # masked forehead, never indexed
        idx = ((self._vis_flat(xs) * self.domain.z_size + visible.z)
               << self.prior_bits) + bits_to_int(prior)
        return int(self.table[idx])

    def emit_batch(self, xs_cols, z_col, prior_ints, rand):
        flat = np.zeros(len(z_col), dtype=np.int64)
        vis = [c for i, c in enumerate(xs_cols, start=1) if i != self.speaker]
        for c, s in zip(vis, self.vis_sizes):
            flat = flat * s + c
        idx = ((flat * self.domain.z_size + z_col) << self.prior_bits) + prior_ints
        return self.table[idx]

    @property
    def supports_batch(self) -> bool:
        return True

    def spec(self):
        return {"type": "table", "speaker": self.speaker,
                "prior_bits": self.prior_bits,
                "entries": [int(v) for v in self.table]}


@dataclass(frozen=True)
class Turn:
    speaker: int
    msg_bits: int
    rule: object

    def __post_init__(self):
        if self.msg_bits < 1:
            raise ValueError("turns carry at least one bit; drop silent turns")


@dataclass
class Protocol:
    """An ordered list of broadcast turns plus an output rule."""

    domain: NofDomain
    turns: tuple
    output_rule: object
    output_player: int | None = None
    randomized: bool = False
    public_random_bits: int = 0
    name: str = "protocol"

    def __post_init__(self):
        self.turns = tuple(self.turns)
        if self.output_player is None:
            self.output_player = self.domain.k + 1
        if not 1 <= self.output_player <= self.domain.k + 1:
            raise ValueError(f"output player {self.output_player} out of range")
        for t in self.turns:
            if not 1 <= t.speaker <= self.domain.k + 1:
                raise ValueError(f"speaker {t.speaker} out of range")
        if self.randomized and self.public_random_bits < 1:
            raise ValueError("randomized protocols need public random bits")
        if not self.randomized and self.public_random_bits:
            raise ValueError("deterministic protocols cannot declare random bits")

    @property
    def cost(self) -> int:
        return sum(t.msg_bits for t in self.turns)

    @property
    def num_rounds(self) -> int:
        return len(self.turns)

    @property
    def is_one_way(self) -> bool:
        speakers = [t.speaker for t in self.turns]
        return (all(s <= self.domain.k for s in speakers)
                and sorted(set(speakers)) == speakers
                and self.output_player == self.domain.k + 1)

    @property
    def supports_batch(self) -> bool:
        rules = [t.rule for t in self.turns] + [self.output_rule]
        return all(getattr(r, "supports_batch", False) for r in rules)

    def visible(self, player: int, xs, z: int) -> Visible:
        if player <= self.domain.k:
            masked = tuple(None if i == player else x
                           for i, x in enumerate(xs, start=1))
            return Visible(xs=masked, z=int(z))
        return Visible(xs=tuple(int(x) for x in xs), z=None)

    def simulate(self, xs, z: int, randomness: str | None = None):
        """Run the protocol on one input; returns (Transcript, output bit)."""
        self.domain.check_input(xs, z)
        if self.randomized:
            if randomness is None:
                raise ValueError("randomized protocol needs a randomness string")
            if len(randomness) != self.public_random_bits or randomness.strip("01"):
                raise ValueError(
                    f"randomness must be {self.public_random_bits} bits"
                )
        elif randomness is not None:
            raise ValueError("deterministic protocol takes no randomness")
        bits = ""
        bounds = []
        for t in self.turns:
            v = t.rule.emit(self.visible(t.speaker, xs, z), bits, randomness)
            if not 0 <= v < 1 << t.msg_bits:
                raise ValueError(f"rule emitted {v}, over {t.msg_bits} bits")
            bits += int_to_bits(v, t.msg_bits)
            bounds.append(len(bits))
        out = self.output_rule.emit(
            self.visible(self.output_player, xs, z), bits, randomness
        )
        return Transcript(bits, tuple(bounds)), int(out)

    def run_batch(self, xs_cols, z_col):
        """Vectorized deterministic run: (transcript ints, output bits)."""
        if self.randomized:
            raise ValueError("batch runs are for deterministic protocols")
        if not self.supports_batch:
            raise NotImplementedError("a rule lacks a vectorized form")
        prior = np.zeros(len(z_col), dtype=np.int64)
        for t in self.turns:
            msg = np.asarray(t.rule.emit_batch(xs_cols, z_col, prior, None),
                             dtype=np.int64)
            prior = (prior << t.msg_bits) + msg
        outs = np.asarray(self.output_rule.emit_batch(xs_cols, z_col, prior, None),
                          dtype=np.int64)
        return prior, outs

    def transcript_int(self, xs, z, randomness=None) -> int:
        tr, _ = self.simulate(xs, z, randomness)
        return bits_to_int(tr.bits)

    def to_json_dict(self):
        return {
            "name": self.name,
            "x_sizes": list(self.domain.x_sizes),
            "z_size": self.domain.z_size,
            "cost": self.cost,
            "rounds": self.num_rounds,
            "one_way": self.is_one_way,
            "randomized": self.randomized,
            "public_random_bits": self.public_random_bits,
            "output_player": self.output_player,
            "turns": [{"speaker": t.speaker, "msg_bits": t.msg_bits,
                       "rule": t.rule.spec()} for t in self.turns],
            "output_rule": self.output_rule.spec(),
        }


def simulate(p: Protocol, input_tuple, randomness: str | None = None):
    """Module-level convenience: input_tuple is (x_1, .., x_k, z)."""
    *xs, z = input_tuple
    return p.simulate(xs, z, randomness)


# --- targets --------------------------------------------------------------


class NofTarget:
    """A function the protocol is supposed to compute."""

    domain: NofDomain
    name: str = "target"

    def eval(self, xs, z: int) -> int:
        raise NotImplementedError

    def eval_batch(self, xs_cols, z_col) -> np.ndarray:
        out = np.empty(len(z_col), dtype=np.int64)
        for i in range(len(z_col)):
            out[i] = self.eval([int(c[i]) for c in xs_cols], int(z_col[i]))
        return out


class LiftedTarget(NofTarget):
    def __init__(self, lf: LiftedFn):
        self.lf = lf
        n = lf.params.n_per_player
        self.domain = NofDomain((n,) * lf.params.k, lf.params.q)
        self.name = lf.name

    def eval(self, xs, z):
        return self.lf.eval_encoded(xs, z)

    def eval_batch(self, xs_cols, z_col):
        return self.lf.eval_batch(xs_cols, z_col)


class Disj3Target(NofTarget):
    """Three-party disjointness on n-bit sets, z on the last forehead."""

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.n = n
        size = 1 << n
        self.domain = NofDomain((size, size), size)
        self.name = f"disj3_{n}"

    def eval(self, xs, z):
        return disj3_eval_masks(int(xs[0]), int(xs[1]), int(z))

    def eval_batch(self, xs_cols, z_col):
        x = np.asarray(xs_cols[0], dtype=np.int64)
        y = np.asarray(xs_cols[1], dtype=np.int64)
        z = np.asarray(z_col, dtype=np.int64)
        return ((x & y & z) == 0).astype(np.int64)


class CallableTarget(NofTarget):
    def __init__(self, domain: NofDomain, fn, name="target", batch_fn=None):
        self.domain = domain
        self.fn = fn
        self.name = name
        self.batch_fn = batch_fn

    def eval(self, xs, z):
        return int(self.fn(xs, z))

    def eval_batch(self, xs_cols, z_col):
        if self.batch_fn is not None:
            return self.batch_fn(xs_cols, z_col)
        return super().eval_batch(xs_cols, z_col)


def as_target(obj) -> NofTarget:
    if isinstance(obj, NofTarget):
        return obj
    if isinstance(obj, LiftedFn):
        return LiftedTarget(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a protocol target")


# --- exhaustive evaluation ------------------------------------------------


def _domain_columns(domain: NofDomain, lo: int, hi: int):
    """Decode flat indices [lo, hi) into k x-columns and a z-column.

    Flat order is lexicographic in (x_1, .., x_k, z), z fastest.
    """
    flat = np.arange(lo, hi, dtype=np.int64)
    z = flat % domain.z_size
    rest = flat // domain.z_size
    xs = [None] * domain.k
    for i in range(domain.k - 1, -1, -1):
        xs[i] = rest % domain.x_sizes[i]
        rest = rest // domain.x_sizes[i]
    return xs, z


def _decode_point(domain: NofDomain, flat: int):
    z = flat % domain.z_size
    rest = flat // domain.z_size
    xs = [0] * domain.k
    for i in range(domain.k - 1, -1, -1):
        rest, xs[i] = divmod(rest, domain.x_sizes[i])
    return tuple(xs), int(z)


@dataclass(frozen=True)
class VerifyResult:
    correct: bool
    max_cost: int
    counterexample: tuple | None


def verify_protocol(p: Protocol, target) -> VerifyResult:
    """Exhaustively compare protocol output with the target on every input.

    Deterministic protocols only; the first failing input (in (x.., z)
    lexicographic order) is reported.
    """
    target = as_target(target)
    if p.randomized:
        raise ValueError("verify_protocol handles deterministic protocols only")
    if p.domain != target.domain:
        raise ValueError("protocol and target domains differ")
    total = p.domain.points
    if total > ENUM_LIMIT:
        raise ValueError(f"domain of {total} points exceeds enumeration limit")
    use_batch = p.supports_batch
    for lo in range(0, total, 1 << 20):
        hi = min(lo + (1 << 20), total)
        xs_cols, z_col = _domain_columns(p.domain, lo, hi)
        want = np.asarray(target.eval_batch(xs_cols, z_col), dtype=np.int64)
        if use_batch:
            _, got = p.run_batch(xs_cols, z_col)
        else:
            got = np.empty(hi - lo, dtype=np.int64)
            for j in range(hi - lo):
                _, got[j] = p.simulate([int(c[j]) for c in xs_cols], int(z_col[j]))
        bad = np.nonzero(got != want)[0]
        if bad.size:
            xs, z = _decode_point(p.domain, lo + int(bad[0]))
            return VerifyResult(False, p.cost, xs + (z,))
    return VerifyResult(True, p.cost, None)


def consistent_set(p: Protocol, transcript) -> set:
    """All inputs (x_1, .., x_k, z) on which the run produces the transcript."""
    if p.randomized:
        raise ValueError("consistent sets are for deterministic protocols")
    bits = transcript.bits if isinstance(transcript, Transcript) else str(transcript)
    if len(bits) != p.cost or bits.strip("01"):
        raise ValueError(f"transcript must be {p.cost} bits")
    total = p.domain.points
    if total > ENUM_LIMIT:
        raise ValueError(f"domain of {total} points exceeds enumeration limit")
    want = bits_to_int(bits)
    out = set()
    for lo in range(0, total, 1 << 20):
        hi = min(lo + (1 << 20), total)
        xs_cols, z_col = _domain_columns(p.domain, lo, hi)
        if p.supports_batch:
            tr, _ = p.run_batch(xs_cols, z_col)
        else:
            tr = np.empty(hi - lo, dtype=np.int64)
            for j in range(hi - lo):
                t, _ = p.simulate([int(c[j]) for c in xs_cols], int(z_col[j]))
                tr[j] = bits_to_int(t.bits)
        for j in np.nonzero(tr == want)[0]:
            xs, z = _decode_point(p.domain, lo + int(j))
            out.add(xs + (z,))
    return out


def slice_cylinders(p: Protocol, lf, transcript, z: int):
    """Decompose a fixed-z transcript slice into one cylinder per player.

    Player i's cylinder contains the x-tuples on which it would emit its
    transcript block given z and the prior blocks. Verifies that membership
    ignores x_i under exhaustive coordinate flips and that the intersection
    equals the z-slice of the consistent set.
    """
    if not isinstance(lf, LiftedFn):
        raise TypeError("cylinder slicing is defined for lifted functions")
    if not p.is_one_way:
        raise ValueError("cylinder slicing needs a one-way protocol")
    if p.randomized:
        raise ValueError("cylinder slicing needs a deterministic protocol")
    dom = p.domain
    if len(set(dom.x_sizes)) != 1:
        raise ValueError("cylinder slicing needs a uniform per-player domain")
    n_per = dom.x_sizes[0]
    k = dom.k
    bits = transcript.bits if isinstance(transcript, Transcript) else str(transcript)
    if len(bits) != p.cost:
        raise ValueError(f"transcript must be {p.cost} bits")
    if not 0 <= int(z) < dom.z_size:
        raise ValueError(f"z = {z} outside [0, {dom.z_size})")
    if n_per ** k > ENUM_LIMIT:
        raise ValueError("x-domain exceeds enumeration limit")

    turn_of = {t.speaker: t for t in p.turns}
    pos = 0
    block_of, prior_of = {}, {}
    for t in p.turns:
        prior_of[t.speaker] = bits[:pos]
        block_of[t.speaker] = bits[pos:pos + t.msg_bits]
        pos += t.msg_bits

    cylinders = []
    proj_total = n_per ** (k - 1)
    for i in range(1, k + 1):
        if i not in turn_of:
            table = np.ones(proj_total, dtype=bool)
        else:
            t = turn_of[i]
            want = bits_to_int(block_of[i])
            prior = prior_of[i]
            table = np.empty(proj_total, dtype=bool)
            for flat in range(proj_total):
                rem = flat
                proj = []
                for _ in range(k - 1):
                    rem, c = divmod(rem, n_per)
                    proj.append(c)
                xs = proj[:i - 1] + [0] + proj[i - 1:]
                vis = p.visible(i, xs, z)
                table[flat] = t.rule.emit(vis, prior, None) == want
        cylinders.append(TableCylinder(k, n_per, i, table))

    ci = CylinderIntersection(lf.params, cylinders)

    # exhaustive flip check plus slice comparison
    verified = True
    members = set()
    for flat in range(n_per ** k):
        rem = flat
        xs = []
        for _ in range(k):
            rem, c = divmod(rem, n_per)
            xs.append(c)
        in_all = all(c.member(xs) for c in cylinders)
        if in_all:
            members.add(tuple(xs))
        for i in range(1, k + 1):
            base = cylinders[i - 1].member(xs)
            for alt in range(n_per):
                flipped = list(xs)
                flipped[i - 1] = alt
                if cylinders[i - 1].member(flipped) != base:
                    verified = False
    slice_set = {inp[:-1] for inp in consistent_set(p, bits) if inp[-1] == int(z)}
    verified = verified and members == slice_set
    return ci, verified


# --- one-way two-party complexity ----------------------------------------


def row_classes(f: TwoPartyFn):
    """First-occurrence class ids of identical matrix rows.

    Returns (class ids per row, representative row index per class).
    """
    seen = {}
    ids = np.empty(f.rows, dtype=np.int64)
    reps = []
    for z in range(f.rows):
        key = f.matrix[z].tobytes()
        if key not in seen:
            seen[key] = len(reps)
            reps.append(z)
        ids[z] = seen[key]
    return ids, np.array(reps, dtype=np.int64)


def occ_two_party(f: TwoPartyFn) -> int:
    """One-way deterministic cost: ceil(log2 of the distinct-row count)."""
    _, reps = row_classes(f)
    return (len(reps) - 1).bit_length()


# --- built-in protocols ----------------------------------------------------


def build_lift_upper(f: TwoPartyFn, params: Params) -> Protocol:
    """One-way protocol matching the two-party one-way cost of f.

    Player 1 broadcasts the first-occurrence class of z's matrix row; the
    last player evaluates the gadget and reads the matrix entry at a class
    representative.
    """
    if f.rows != params.q or f.cols != params.q:
        raise ValueError(
            f"need a {params.q}x{params.q} matrix, got {f.rows}x{f.cols}"
        )
    ids, reps = row_classes(f)
    cost = occ_two_party(f)
    matrix = f.matrix

    def out_fn(visible, transcript, rand):
        cls = bits_to_int(transcript)
        v = gip_eval_encoded(params, visible.xs)
        return int(matrix[reps[cls], v])

    def out_batch(xs_cols, z_col, prior_ints, rand):
        v = gip_batch_encoded(params, xs_cols)
        return matrix[reps[prior_ints], v].astype(np.int64)

    turns = []
    if cost > 0:
        turns.append(Turn(
            speaker=1, msg_bits=cost,
            rule=CallableRule(
                lambda vis, prior, rand: int(ids[vis.z]),
                batch_fn=lambda xs_cols, z_col, prior, rand: ids[z_col],
                name="row-class(z)",
            ),
        ))
    domain = NofDomain((params.n_per_player,) * params.k, params.q)
    return Protocol(domain, turns,
                    CallableRule(out_fn, batch_fn=out_batch, name="entry(rep, gadget)"),
                    name=f"lift-upper[{f.name}]")


def build_eq_rand(params: Params, t: int) -> Protocol:
    """Public-coin one-way equality test against the gadget value.

    Player 1 sends t parity bits of z under shared random masks; the last
    player accepts iff the gadget value produces the same parities. Never
    errs when z equals the gadget value; otherwise errs with probability
    exactly 2^-t.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    B = (params.q - 1).bit_length()

    def masks_from(rand):
        return [bits_to_int(rand[j * B:(j + 1) * B]) for j in range(t)]

    def parities(value, masks):
        out = 0
        for w in masks:
            out = (out << 1) | ((value & w).bit_count() & 1)
        return out

    def msg_fn(vis, prior, rand):
        return parities(vis.z, masks_from(rand))

    def out_fn(vis, transcript, rand):
        s = gip_eval_encoded(params, vis.xs)
        return int(parities(s, masks_from(rand)) == bits_to_int(transcript))

    domain = NofDomain((params.n_per_player,) * params.k, params.q)
    return Protocol(
        domain,
        [Turn(1, t, CallableRule(msg_fn, name=f"mask-parities(z, t={t})"))],
        CallableRule(out_fn, name="parities-match(gadget)"),
        randomized=True, public_random_bits=t * B,
        name=f"eq-rand[q={params.q},t={t}]",
    )


def build_ind_two_round(params: Params) -> Protocol:
    """Two-round protocol for the lifted index function.

    Round 1: the last player announces the bit position selected by the
    gadget value. Round 2: player 1 broadcasts that bit of z, which is the
    answer.
    """
    if params.q < 3:
        raise ValueError("need q >= 3")
    q = params.q
    B = (q - 1).bit_length()
    b = max(1, (B - 1).bit_length())
    idx_of = np.array([ind_index(q, s) for s in range(q)], dtype=np.int64)

    def round1(vis, prior, rand):
        return int(idx_of[gip_eval_encoded(params, vis.xs)])

    def round1_batch(xs_cols, z_col, prior, rand):
        return idx_of[gip_batch_encoded(params, xs_cols)]

    def round2(vis, prior, rand):
        i = bits_to_int(prior) % B
        return (vis.z >> (B - 1 - i)) & 1

    def round2_batch(xs_cols, z_col, prior, rand):
        i = prior % B
        return (z_col >> (B - 1 - i)) & 1

    def out_fn(vis, transcript, rand):
        return bits_to_int(transcript) & 1

    def out_batch(xs_cols, z_col, prior, rand):
        return prior & 1

    domain = NofDomain((params.n_per_player,) * params.k, q)
    return Protocol(
        domain,
        [Turn(params.k + 1, b, CallableRule(round1, round1_batch, "bit-position(gadget)")),
         Turn(1, 1, CallableRule(round2, round2_batch, "selected-bit(z)"))],
        CallableRule(out_fn, out_batch, "last-bit(transcript)"),
        name=f"ind-two-round[q={q}]",
    )


def estimate_rand_error(p: Protocol, target, samples: int, seed: int,
                        instance_filter: str = "all"):
    """Monte Carlo error rate of a randomized protocol.

    Samples uniform inputs passing the filter (yes: target value 1, no:
    value 0, all: everything) with fresh public coins per sample; returns
    (error rate, standard error). Deterministic given the seed.
    """
    target = as_target(target)
    if not p.randomized:
        raise ValueError("estimate_rand_error needs a randomized protocol")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if instance_filter not in ("yes", "no", "all"):
        raise ValueError(f"unknown filter {instance_filter!r}")
    dom = p.domain
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0xE5)))
    raw_cap = max(10_000_000, 2000 * samples)
    raw = 0
    kept_xs, kept_z, kept_want = [], [], []
    kept = 0
    while kept < samples:
        if raw >= raw_cap:
            raise RuntimeError(
                f"filter {instance_filter!r} matched only {kept} inputs "
                f"in {raw} draws"
            )
        m = min(1 << 16, max(1024, 4 * (samples - kept)))
        xs_cols = [rng.integers(0, s, size=m) for s in dom.x_sizes]
        z_col = rng.integers(0, dom.z_size, size=m)
        vals = np.asarray(target.eval_batch(xs_cols, z_col), dtype=np.int64)
        if instance_filter == "yes":
            mask = vals == 1
        elif instance_filter == "no":
            mask = vals == 0
        else:
            mask = np.ones(m, dtype=bool)
        raw += m
        if not mask.any():
            continue
        take = min(int(mask.sum()), samples - kept)
        sel = np.nonzero(mask)[0][:take]
        kept_xs.append([c[sel] for c in xs_cols])
        kept_z.append(z_col[sel])
        kept_want.append(vals[sel])
        kept += take
    errors = 0
    for xs_cols, z_col, want in zip(kept_xs, kept_z, kept_want):
        for j in range(len(z_col)):
            coins = rng.integers(0, 2, size=p.public_random_bits)
            rand = "".join("1" if c else "0" for c in coins)
            _, out = p.simulate([int(c[j]) for c in xs_cols], int(z_col[j]), rand)
            errors += int(out != int(want[j]))
    rate = errors / samples
    return rate, math.sqrt(max(rate * (1 - rate), 0.0) / samples)


# --- exact search -----------------------------------------------------------


def _canonical_tables(length: int, alphabet: int):
    """All tables of the given length whose symbols first appear in sorted
    order; every table is some relabeling of exactly one of these."""
    if length == 0:
        yield np.zeros(0, dtype=np.int64)
        return
    vals = np.zeros(length, dtype=np.int64)
    pmax = np.zeros(length, dtype=np.int64)
    while True:
        yield vals.copy()
        t = length - 1
        while t >= 0:
            cap = min(alphabet - 1, (pmax[t - 1] + 1) if t > 0 else 0)
            if vals[t] < cap:
                vals[t] += 1
                pmax[t] = max(pmax[t - 1] if t > 0 else 0, vals[t])
                vals[t + 1:] = 0
                for u in range(t + 1, length):
                    pmax[u] = pmax[u - 1]
                break
            t -= 1
        else:
            return


@dataclass
class _SearchSpace:
    target: NofTarget
    nx: int
    zs: int
    truth: np.ndarray          # (nx, zs) target values
    vis_flat: list             # per player: (nx,) projected flat index
    x_keys: np.ndarray         # (nx, zs) row ids broadcast for separability


def _prepare_search(target: NofTarget) -> _SearchSpace:
    dom = target.domain
    nx = math.prod(dom.x_sizes)
    zs = dom.z_size
    xs_cols, z_col = _domain_columns(dom, 0, dom.points)
    truth = np.asarray(target.eval_batch(xs_cols, z_col), dtype=np.int64)
    truth = truth.reshape(nx, zs)
    vis_flat = []
    x_grid = [c.reshape(nx, zs)[:, 0] for c in xs_cols]
    for i in range(dom.k):
        flat = np.zeros(nx, dtype=np.int64)
        for j in range(dom.k):
            if j == i:
                continue
            flat = flat * dom.x_sizes[j] + x_grid[j]
        vis_flat.append(flat)
    x_keys = np.repeat(np.arange(nx, dtype=np.int64), zs).reshape(nx, zs)
    return _SearchSpace(target, nx, zs, truth, vis_flat, x_keys)


def _transcripts_for(space: _SearchSpace, budgets, tables) -> np.ndarray:
    zs = space.zs
    z_row = np.arange(zs, dtype=np.int64)
    tr = np.zeros((space.nx, zs), dtype=np.int64)
    for i, (c, tab) in enumerate(zip(budgets, tables)):
        if c == 0:
            continue
        pb = sum(budgets[:i])
        idx = ((space.vis_flat[i][:, None] * zs + z_row[None, :]) << pb) + tr
        tr = (tr << c) + tab[idx]
    return tr


def _separable(space: _SearchSpace, tr: np.ndarray) -> bool:
    """True iff every (x, transcript) class has a constant target value."""
    shift = space.zs.bit_length() + int(tr.max()).bit_length() + 1
    base = (space.x_keys << shift) | tr
    coarse = np.unique(base).size
    fine = np.unique((base << 1) | space.truth).size
    return coarse == fine


def _search_budgets(space: _SearchSpace, budgets):
    """DFS over canonical message tables; returns tables on success."""
    k = len(budgets)
    zs = space.zs
    sizes = []
    for i, c in enumerate(budgets):
        if c == 0:
            sizes.append(0)
            continue
        pb = sum(budgets[:i])
        n_vis = space.nx // space.target.domain.x_sizes[i]
        sizes.append(n_vis * zs * (1 << pb))

    chosen = [np.zeros(0, dtype=np.int64)] * k

    def rec(i):
        if i == k:
            tr = _transcripts_for(space, budgets, chosen)
            return _separable(space, tr)
        if budgets[i] == 0:
            return rec(i + 1)
        for tab in _canonical_tables(sizes[i], 1 << budgets[i]):
            chosen[i] = tab
            if rec(i + 1):
                return True
        return False

    return [t.copy() for t in chosen] if rec(0) else None


def _protocol_from_tables(target: NofTarget, budgets, tables) -> Protocol:
    dom = target.domain
    space = _prepare_search(target)
    tr = _transcripts_for(space, budgets, tables)
    total_bits = sum(budgets)
    out_table = np.zeros((space.nx, 1 << total_bits), dtype=np.int64)
    out_table[space.x_keys, tr] = space.truth

    def out_fn(vis, transcript, rand):
        flat = 0
        for x, s in zip(vis.xs, dom.x_sizes):
            flat = flat * s + int(x)
        return int(out_table[flat, bits_to_int(transcript)])

    def out_batch(xs_cols, z_col, prior, rand):
        flat = np.zeros(len(z_col), dtype=np.int64)
        for c, s in zip(xs_cols, dom.x_sizes):
            flat = flat * s + c
        return out_table[flat, prior]

    turns = []
    for i, (c, tab) in enumerate(zip(budgets, tables), start=1):
        if c == 0:
            continue
        pb = sum(budgets[:i - 1])
        turns.append(Turn(i, c, TableRule(dom, i, c, pb, tab)))
    return Protocol(dom, turns,
                    CallableRule(out_fn, out_batch, "optimal-table"),
                    name=f"searched[{target.name},budgets={tuple(budgets)}]")


def search_one_way_protocol(target, max_budget: int):
    """Exhaustive search for the cheapest correct one-way protocol.

    Bit budgets (c_1..c_k) are scanned in lexicographic order per total
    cost; message rules are full tables with message-relabeling symmetry
    pruned; the output rule is chosen optimally per (x, transcript) class.
    Returns (cost, Protocol) or None when max_budget is insufficient.
    """
    target = as_target(target)
    if target.domain.points > SEARCH_DOMAIN_LIMIT:
        raise ValueError(
            f"domain of {target.domain.points} points exceeds the search limit "
            f"of {SEARCH_DOMAIN_LIMIT}"
        )
    if max_budget > SEARCH_BUDGET_LIMIT:
        raise ValueError(f"max_budget capped at {SEARCH_BUDGET_LIMIT}")
    space = _prepare_search(target)
    k = target.domain.k
    for total in range(max_budget + 1):
        for budgets in itertools.product(range(total + 1), repeat=k):
            if sum(budgets) != total:
                continue
            tables = _search_budgets(space, budgets)
            if tables is not None:
                return total, _protocol_from_tables(target, budgets, tables)
    return None


def min_occ_nof_exact(target, max_budget: int):
    """Smallest total one-way cost within the budget, or None if exceeded."""
    found = search_one_way_protocol(target, max_budget)
    return None if found is None else found[0]


# --- separation witnesses ---------------------------------------------------


@dataclass(frozen=True)
class SeparationWitness:
    """Two inputs a protocol cannot tell apart despite differing values."""

    x_star: tuple
    z0_star: int
    z1_star: int
    transcript: str
    value0: int
    value1: int

    def to_json_dict(self, width: int | None = None):
        def fmt(v):
            return int_to_bits(v, width) if width else int(v)
        return {
            "x_star": [fmt(x) for x in self.x_star],
            "z0_star": fmt(self.z0_star),
            "z1_star": fmt(self.z1_star),
            "transcript": self.transcript,
            "value0": self.value0,
            "value1": self.value1,
        }


def check_witness(p: Protocol, target, w: SeparationWitness) -> bool:
    """Replay a witness: equal transcripts and outputs, differing values."""
    target = as_target(target)
    t0, o0 = p.simulate(w.x_star, w.z0_star)
    t1, o1 = p.simulate(w.x_star, w.z1_star)
    v0 = target.eval(w.x_star, w.z0_star)
    v1 = target.eval(w.x_star, w.z1_star)
    return (t0.bits == t1.bits == w.transcript and o0 == o1
            and v0 != v1 and (v0, v1) == (w.value0, w.value1))
