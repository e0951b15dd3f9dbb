"""Cylinder intersections over the gadget domain, character-sum analysis,
and the dispersion checks for the gadget's conditional value distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_math import char_table, derive_seed, splitmix64
from .functions import ENUM_LIMIT, Params, gip_batch, gip_value_distribution

_U64_MAX = (1 << 64) - 1


class Cylinder:
    """A subset of the k-player input space that ignores one player.

    Membership is a predicate over the other k-1 encoded player inputs,
    backed either by a dense table (enumerable scale) or a seeded hash coin
    (large scale).
    """

    def __init__(self, k: int, n_per: int, ignored_player: int):
        if not 1 <= ignored_player <= k:
            raise ValueError(f"ignored player {ignored_player} outside [1, {k}]")
        self.k = k
        self.n_per = n_per
        self.ignored_player = ignored_player

    def _proj_cols(self, xs_cols):
        if len(xs_cols) != self.k:
            raise ValueError(f"expected {self.k} input columns")
        return [np.asarray(c, dtype=np.int64) for i, c in enumerate(xs_cols, start=1)
                if i != self.ignored_player]

    def member_batch(self, xs_cols) -> np.ndarray:
        raise NotImplementedError

    def member(self, xs) -> bool:
        return bool(self.member_batch([np.array([int(v)]) for v in xs])[0])


class TableCylinder(Cylinder):
    """Dense membership table over the k-1 visible players."""

    def __init__(self, k, n_per, ignored_player, table: np.ndarray):
        super().__init__(k, n_per, ignored_player)
        table = np.asarray(table, dtype=bool).reshape(-1)
        if table.size != n_per ** (k - 1):
            raise ValueError("membership table size mismatch")
        table.setflags(write=False)
        self.table = table

    def member_batch(self, xs_cols) -> np.ndarray:
        cols = self._proj_cols(xs_cols)
        flat = np.zeros(cols[0].shape if cols else (1,), dtype=np.int64)
        for c in reversed(cols):
            flat = flat * self.n_per + c
        return self.table[flat]


class HashCylinder(Cylinder):
    """Seeded pseudorandom membership coin of a fixed bias.

    The coin for a projected point is a chained splitmix64 hash of its
    coordinates against the cylinder seed, compared to bias * 2^64; this
    gives O(1) membership without storing the projected domain.
    """

    def __init__(self, k, n_per, ignored_player, seed: int, bias: float):
        super().__init__(k, n_per, ignored_player)
        if not 0.0 <= bias <= 1.0:
            raise ValueError(f"bias {bias} outside [0, 1]")
        self.seed = seed & _U64_MAX
        self.bias = bias
        t = int(round(bias * 2.0**64))
        self.threshold = None if t > _U64_MAX else np.uint64(t)

    def member_batch(self, xs_cols) -> np.ndarray:
        cols = self._proj_cols(xs_cols)
        shape = cols[0].shape if cols else (1,)
        if self.threshold is None:
            return np.ones(shape, dtype=bool)
        acc = np.full(shape, self.seed, dtype=np.uint64)
        for c in cols:
            acc = splitmix64(acc ^ c.astype(np.uint64))
        return acc < self.threshold


@dataclass
class CylinderIntersection:
    """Intersection of k cylinders, one ignoring each player."""

    params: Params
    cylinders: tuple
    measured_density: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.cylinders = tuple(self.cylinders)
        if len(self.cylinders) != self.params.k:
            raise ValueError(f"need exactly k = {self.params.k} cylinders")
        ignored = sorted(c.ignored_player for c in self.cylinders)
        if ignored != list(range(1, self.params.k + 1)):
            raise ValueError(f"ignored players must be 1..k, got {ignored}")
        n = self.params.n_per_player
        if any(c.n_per != n or c.k != self.params.k for c in self.cylinders):
            raise ValueError("cylinder domain mismatch")

    @property
    def domain_size(self) -> int:
        return self.params.n_per_player ** self.params.k

    def member_batch(self, xs_cols) -> np.ndarray:
        out = None
        for c in self.cylinders:
            m = c.member_batch(xs_cols)
            out = m if out is None else (out & m)
        return out

    def member(self, xs) -> bool:
        return bool(self.member_batch([np.array([int(v)]) for v in xs])[0])


def full_ci(params: Params) -> CylinderIntersection:
    """The whole input space as a trivial cylinder intersection."""
    cyls = [HashCylinder(params.k, params.n_per_player, i, seed=0, bias=1.0)
            for i in range(1, params.k + 1)]
    return CylinderIntersection(params, cyls, measured_density=1.0)


def _enum_chunks(total: int, chunk: int = 1 << 20):
    lo = 0
    while lo < total:
        hi = min(lo + chunk, total)
        yield lo, hi
        lo = hi


def _decode_cols(flat: np.ndarray, n_per: int, k: int):
    cols = []
    rem = flat
    for _ in range(k):
        cols.append(rem % n_per)
        rem = rem // n_per
    return cols


def gadget_histogram_on_ci(S: CylinderIntersection) -> tuple[int, np.ndarray]:
    """Exact (member count, per-value gadget histogram) by full enumeration."""
    p = S.params
    total = S.domain_size
    if total > ENUM_LIMIT:
        raise ValueError(f"domain of {total} points exceeds enumeration limit")
    dig = p.digit_table()
    hist = np.zeros(p.q, dtype=np.int64)
    count = 0
    for lo, hi in _enum_chunks(total):
        flat = np.arange(lo, hi, dtype=np.int64)
        cols = _decode_cols(flat, p.n_per_player, p.k)
        mask = S.member_batch(cols)
        if not mask.any():
            continue
        vals = gip_batch(p, [dig[c[mask]] for c in cols])
        hist += np.bincount(vals, minlength=p.q)
        count += int(mask.sum())
    return count, hist


def ci_size(S: CylinderIntersection, mode: str = "exact",
            samples: int = 0, seed: int = 0):
    """Exact member count, or a Monte Carlo density estimate with stderr.

    Returns (count, 0.0) in exact mode and (density, stderr) in mc mode.
    """
    if mode == "exact":
        count, _ = gadget_histogram_on_ci(S)
        return count, 0.0
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 1:
        raise ValueError("mc mode needs samples >= 1")
    hits = 0
    done = 0
    shard = 0
    while done < samples:
        m = min(1 << 20, samples - done)
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0x51, shard)))
        digs = rng.integers(0, S.params.q, size=(m, S.params.k, S.params.r))
        cols = _encode_digits(S.params, digs)
        hits += int(S.member_batch(cols).sum())
        done += m
        shard += 1
    p_hat = hits / samples
    return p_hat, math.sqrt(max(p_hat * (1 - p_hat), 0.0) / samples)


def _encode_digits(params: Params, digs: np.ndarray):
    """(m, k, r) digit block -> k columns of encoded ints."""
    pows = params.q ** np.arange(params.r, dtype=np.int64)
    return [digs[:, i, :].astype(np.int64) @ pows for i in range(params.k)]


def sample_ci_random(params: Params, density: float, seed: int,
                     min_density: float = 0.0,
                     max_retries: int = 64) -> CylinderIntersection:
    """Seeded random cylinder intersection of roughly the requested density.

    Each cylinder is an independent coin of bias density^(1/k) per projected
    point; regenerates with derived seeds until the measured density reaches
    min_density. Deterministic given all arguments.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density {density} outside (0, 1]")
    bias = density ** (1.0 / params.k)
    n = params.n_per_player
    table_scale = n ** (params.k - 1) <= ENUM_LIMIT and n**params.k <= ENUM_LIMIT
    for attempt in range(max_retries):
        cyls = []
        for i in range(1, params.k + 1):
            cseed = derive_seed(seed, attempt, i)
            if density == 1.0:
                cyls.append(HashCylinder(params.k, n, i, seed=cseed, bias=1.0))
            elif table_scale:
                rng = np.random.Generator(np.random.PCG64(cseed))
                table = rng.random(n ** (params.k - 1)) < bias
                cyls.append(TableCylinder(params.k, n, i, table))
            else:
                cyls.append(HashCylinder(params.k, n, i, seed=cseed, bias=bias))
        ci = CylinderIntersection(params, cyls,
                                 meta={"seed": seed, "attempt": attempt,
                                       "requested_density": density})
        if table_scale:
            count, _ = gadget_histogram_on_ci(ci)
            measured = count / ci.domain_size
        else:
            measured, _ = ci_size(ci, "mc", samples=200_000,
                                  seed=derive_seed(seed, attempt, 0xD))
        ci.measured_density = measured
        if measured >= min_density:
            return ci
    raise RuntimeError(
        f"no intersection of density >= {min_density} found in {max_retries} tries"
    )


def _mc_gadget_histogram(S: CylinderIntersection, samples: int, seed: int,
                         raw_cap_factor: int = 2000):
    """Rejection-sample members until `samples` acceptances; gadget histogram."""
    p = S.params
    hist = np.zeros(p.q, dtype=np.int64)
    accepted = 0
    raw = 0
    raw_cap = raw_cap_factor * max(samples, 1)
    shard = 0
    batch = 1 << 18
    while accepted < samples:
        if raw >= raw_cap:
            raise RuntimeError(
                f"rejection budget exceeded: {accepted} acceptances in {raw} draws"
            )
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0xA2, shard)))
        digs = rng.integers(0, p.q, size=(batch, p.k, p.r))
        cols = _encode_digits(p, digs)
        mask = S.member_batch(cols)
        if mask.any():
            vals = gip_batch(p, [digs[:, i, :][mask] for i in range(p.k)])
            hist += np.bincount(vals, minlength=p.q)
            accepted += int(mask.sum())
        raw += batch
        shard += 1
    return accepted, hist


def prob_gip_on_ci(S: CylinderIntersection, v: int, mode: str = "exact",
                   samples: int = 0, seed: int = 0):
    """Conditional probability that the gadget hits v on a uniform member.

    Exact enumeration, or rejection-sampled Monte Carlo with stderr.
    """
    if not 0 <= v < S.params.q:
        raise ValueError(f"value {v} outside [0, {S.params.q})")
    if mode == "exact":
        count, hist = gadget_histogram_on_ci(S)
        if count == 0:
            raise ValueError("empty cylinder intersection")
        return hist[v] / count, 0.0
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if samples < 1:
        raise ValueError("mc mode needs samples >= 1")
    accepted, hist = _mc_gadget_histogram(S, samples, seed)
    p_hat = hist[v] / accepted
    return p_hat, math.sqrt(max(p_hat * (1 - p_hat), 0.0) / accepted)


def char_sum_gamma(S: CylinderIntersection, alpha: int):
    """Absolute character sum over the members and its normalized form.

    D = |sum over members of chi_alpha(gadget value)|, gamma = D / domain.
    """
    q = S.params.q
    if not 0 <= alpha < q:
        raise ValueError(f"character index {alpha} outside [0, {q})")
    _, hist = gadget_histogram_on_ci(S)
    roots = char_table(q)
    d_val = abs(np.dot(hist, roots ** alpha))
    return float(d_val), float(d_val / S.domain_size)


@dataclass(frozen=True)
class VanishProb:
    exact: float
    paper_bound: float
    bound_valid: bool


def vanish_prob(q: int, k: int, r: int) -> VanishProb:
    """Probability that every coordinate's cross-player product vanishes.

    For 2(k-1) independent uniform factors per coordinate and r independent
    coordinates: exact = (1 - ((q-1)/q)^(2(k-1)))^r. The comparison bound is
    (2k/q)^r, asserted to dominate whenever the per-coordinate inequality
    holds (checked numerically; it always does for k >= 1).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    per_coord = 1.0 - ((q - 1) / q) ** (2 * (k - 1))
    exact = per_coord**r
    paper = (2 * k / q) ** r
    valid = per_coord <= 2 * k / q + 1e-15
    if valid and exact > paper + 1e-12:
        raise AssertionError("closed form exceeded its dominating bound")
    return VanishProb(exact=exact, paper_bound=paper, bound_valid=valid)


@dataclass
class ChainAlphaRow:
    alpha: int
    d_value: float
    gamma: float
    gamma_power: float
    gamma_ok: bool
    d_bound: float
    d_ok: bool | None


@dataclass
class ChainReport:
    size: int
    density: float
    vanish: VanishProb
    rows: list
    passed: bool


def cs_chain_check(S: CylinderIntersection) -> ChainReport:
    """Verify the squaring-chain bound for every nontrivial character.

    For each alpha != 0: gamma^(2^(k-1)) must not exceed the exact vanishing
    probability; the derived absolute-sum bound q^(rk) * (2k/q)^(r/2^(k-1))
    is asserted only when it dominates the exact form, else reported.
    """
    p = S.params
    count, hist = gadget_histogram_on_ci(S)
    q = p.q
    roots = char_table(q)
    vp = vanish_prob(q, p.k, p.r)
    expo = 1 << (p.k - 1)
    d_bound = p.n_per_player**p.k * (2 * p.k / q) ** (p.r / expo)
    rows = []
    passed = True
    for alpha in range(1, q):
        d_val = float(abs(np.dot(hist, roots**alpha)))
        gamma = d_val / S.domain_size
        gpow = gamma**expo
        g_ok = gpow <= vp.exact + 1e-9
        d_ok = (d_val <= d_bound + 1e-6) if vp.paper_bound >= vp.exact else None
        passed = passed and g_ok and (d_ok is not False)
        rows.append(ChainAlphaRow(alpha, d_val, gamma, gpow, g_ok, d_bound, d_ok))
    return ChainReport(size=count, density=count / S.domain_size,
                       vanish=vp, rows=rows, passed=passed)


@dataclass
class DisperserReport:
    bound: float
    alt_bound: float
    tighter: str
    vacuous: bool
    premise_regime: bool
    density: float
    accepted: int
    probs: list
    stderrs: list
    passed: bool | None


def disperser_check(params: Params, S: CylinderIntersection,
                    mode: str = "exact", samples: int = 0,
                    seed: int = 0) -> DisperserReport:
    """Check that a dense intersection hits every gadget value often enough.

    The asserted floor is 1/q - q*(2k/q)^4; the sharper pre-simplification
    floor 1/q - (2k/q)^(r/2^(k-1)) / density is reported alongside with a
    note on which is tighter. Exact mode compares probabilities directly;
    mc mode allows a 3-sigma slack per value.
    """
    q, k, r = params.q, params.k, params.r
    if mode == "exact":
        count, hist = gadget_histogram_on_ci(S)
        if count == 0:
            raise ValueError("empty cylinder intersection")
        density = count / S.domain_size
        probs = (hist / count).tolist()
        stderrs = [0.0] * q
        accepted = count
    elif mode == "mc":
        if samples < 1:
            raise ValueError("mc mode needs samples >= 1")
        density = S.measured_density
        if density is None:
            density, _ = ci_size(S, "mc", samples=200_000,
                                 seed=derive_seed(seed, 0xDE))
        accepted, hist = _mc_gadget_histogram(S, samples, seed)
        probs = (hist / accepted).tolist()
        stderrs = [math.sqrt(max(ph * (1 - ph), 0.0) / accepted) for ph in probs]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if density < 1.0 / q:
        raise ValueError(f"measured density {density:.6g} below 1/q = {1/q:.6g}")

    bound = 1.0 / q - q * (2.0 * k / q) ** 4
    alt = 1.0 / q - (2.0 * k / q) ** (r / (1 << (k - 1))) / density
    tighter = "simplified" if bound >= alt else "pre-simplified"
    regime = k >= 2 and r >= 1 << (k + 1)
    if bound <= 0:
        return DisperserReport(bound, alt, tighter, True, regime, density,
                               accepted, probs, stderrs, None)
    ok = all(probs[v] >= bound - 3.0 * stderrs[v] - 1e-12 for v in range(q))
    return DisperserReport(bound, alt, tighter, False, regime, density,
                           accepted, probs, stderrs, ok)
