"""Bipartite-graph largeness machinery: exact mean common-neighborhood
counts, the edge-density largeness check, the Hamming-distance witness scan
over hypercube left sides, and a builder that turns protocol transcripts
into (z, x-tuple) graphs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core_math import derive_seed
from .nof import NofDomain, Protocol, as_target, _domain_columns


@dataclass
class BipartiteGraph:
    """Dense bipartite adjacency between labelled left and right vertices."""

    left_labels: list
    right_labels: list
    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (len(self.left_labels), len(self.right_labels)):
            raise ValueError(
                f"adjacency shape {adj.shape} does not match "
                f"{len(self.left_labels)}x{len(self.right_labels)} labels"
            )
        self.adjacency = adj

    @property
    def num_left(self) -> int:
        return len(self.left_labels)

    @property
    def num_right(self) -> int:
        return len(self.right_labels)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum())

    def right_degrees(self) -> np.ndarray:
        degs = self.adjacency.sum(axis=0).astype(np.int64)
        assert int(degs.sum()) == self.num_edges
        return degs

    def common_neighbors(self, i: int, j: int) -> int:
        return int((self.adjacency[i] & self.adjacency[j]).sum())

    def to_edge_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for i, j in zip(*np.nonzero(self.adjacency)):
                w.writerow([int(i), int(j)])

    @classmethod
    def from_edge_csv(cls, path, num_left: int, num_right: int,
                      left_labels=None, right_labels=None):
        adj = np.zeros((num_left, num_right), dtype=bool)
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if len(row) != 2:
                    raise ValueError(f"{path}:{lineno}: expected two columns")
                i, j = int(row[0]), int(row[1])
                if not (0 <= i < num_left and 0 <= j < num_right):
                    raise ValueError(f"{path}:{lineno}: edge ({i},{j}) out of range")
                adj[i, j] = True
        return cls(left_labels or list(range(num_left)),
                   right_labels or list(range(num_right)), adj)


def mean_common_neighbors(G: BipartiteGraph) -> float:
    """Expected common-neighborhood size of two uniform distinct left
    vertices, computed exactly from right-vertex degrees."""
    L = G.num_left
    if L < 2:
        raise ValueError("need at least two left vertices")
    degs = G.right_degrees()
    pair_sum = int((degs * (degs - 1) // 2).sum())
    return 2.0 * pair_sum / (L * (L - 1))


@dataclass(frozen=True)
class LargenessResult:
    premise_met: bool
    conclusion_met: bool
    num_edges: int
    mean_common: float
    edge_threshold: float
    mean_threshold: float


def largeness_check(G: BipartiteGraph) -> LargenessResult:
    """Edge-density largeness: enough edges force a large mean common
    neighborhood.

    Premise: |E| >= 2 sqrt(|L|) |R|; conclusion: mean >= |R|/|L|. Both
    sides are decided in exact integer arithmetic.
    """
    L, R, E = G.num_left, G.num_right, G.num_edges
    premise = E * E >= 4 * L * R * R
    degs = G.right_degrees()
    pair_sum = int((degs * (degs - 1) // 2).sum())
    # mean >= R/L  <=>  2 * pair_sum * L >= R * L * (L - 1)
    conclusion = 2 * pair_sum * L >= R * L * (L - 1)
    return LargenessResult(
        premise_met=bool(premise),
        conclusion_met=bool(conclusion),
        num_edges=E,
        mean_common=mean_common_neighbors(G) if L >= 2 else 0.0,
        edge_threshold=2.0 * math.sqrt(L) * R,
        mean_threshold=R / L,
    )


def hd_witness(G: BipartiteGraph, delta: float):
    """First far pair of left vertices with a large common neighborhood.

    The left side must be the full n-cube (labels are all n-bit values).
    Scans pairs in lexicographic order and returns (label, label', common)
    for the first pair at Hamming distance >= 0.1 n whose common
    neighborhood reaches |R| * 2^(-2 delta n - 2), or None.
    """
    if delta >= 0.1:
        raise ValueError(f"delta must be < 0.1, got {delta}")
    L = G.num_left
    n = (L - 1).bit_length()
    labels = [int(v) for v in G.left_labels]
    if L != 1 << n or sorted(labels) != list(range(L)):
        raise ValueError("left side must be the full hypercube 0..2^n-1")
    threshold = G.num_right * 2.0 ** (-2.0 * delta * n - 2.0)
    dist_floor = 0.1 * n
    adj_int = G.adjacency.astype(np.int64)
    order = np.argsort(np.asarray(labels, dtype=np.int64), kind="stable")
    lab_arr = np.asarray(labels, dtype=np.int64)[order]
    for a in range(L - 1):
        row = adj_int[order[a]]
        if int(row.sum()) < threshold:
            continue  # common neighborhoods are capped by the degree
        commons = adj_int[order[a + 1:]] @ row
        xor = lab_arr[a + 1:] ^ lab_arr[a]
        dists = np.array([int(v).bit_count() for v in xor], dtype=np.int64)
        hits = np.nonzero((dists >= dist_floor) & (commons >= threshold))[0]
        if hits.size:
            b = a + 1 + int(hits[0])
            return int(lab_arr[a]), int(lab_arr[b]), int(commons[hits[0]])
    return None


def graph_from_protocol(p: Protocol, target, transcript,
                        right_filter=None, left_subset=None) -> BipartiteGraph:
    """Transcript-consistency graph: left = last-player forehead values,
    right = x-tuples (optionally filtered), edge iff the run on (x, z)
    yields the transcript."""
    target = as_target(target)
    if p.randomized:
        raise ValueError("transcript graphs need a deterministic protocol")
    dom = p.domain
    bits = transcript.bits if hasattr(transcript, "bits") else str(transcript)
    if len(bits) != p.cost or bits.strip("01"):
        raise ValueError(f"transcript must be {p.cost} bits")
    want = int(bits, 2) if bits else 0

    nx = math.prod(dom.x_sizes)
    if nx * dom.z_size > 1 << 24:
        raise ValueError("domain exceeds enumeration limit")
    flat = np.arange(nx, dtype=np.int64)
    xs_cols = []
    rest = flat
    for i in range(dom.k - 1, -1, -1):
        xs_cols.append(rest % dom.x_sizes[i])
        rest = rest // dom.x_sizes[i]
    xs_cols.reverse()

    if right_filter is not None:
        keep = np.array(
            [bool(right_filter(tuple(int(c[j]) for c in xs_cols)))
             for j in range(nx)],
            dtype=bool,
        )
        xs_cols = [c[keep] for c in xs_cols]
    nr = len(xs_cols[0])
    right_labels = [tuple(int(c[j]) for c in xs_cols) for j in range(nr)]

    lefts = list(left_subset) if left_subset is not None else list(range(dom.z_size))
    adj = np.zeros((len(lefts), nr), dtype=bool)
    for li, z in enumerate(lefts):
        z_col = np.full(nr, int(z), dtype=np.int64)
        if p.supports_batch:
            tr, _ = p.run_batch(xs_cols, z_col)
        else:
            tr = np.empty(nr, dtype=np.int64)
            for j in range(nr):
                t, _ = p.simulate([int(c[j]) for c in xs_cols], int(z))
                tr[j] = int(t.bits, 2) if t.bits else 0
        adj[li] = tr == want
    return BipartiteGraph(lefts, right_labels, adj)


# --- seeded generators for the property suites -----------------------------


def random_premise_graph(num_left: int, num_right: int, seed: int,
                         max_retries: int = 64) -> BipartiteGraph:
    """Seeded random graph satisfying the largeness edge premise."""
    target = 2.0 * math.sqrt(num_left) * num_right
    p_edge = min(1.0, 1.25 * target / (num_left * num_right))
    for attempt in range(max_retries):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0x9A, attempt)))
        adj = rng.random((num_left, num_right)) < p_edge
        g = BipartiteGraph(list(range(num_left)), list(range(num_right)), adj)
        if g.num_edges * g.num_edges >= 4 * num_left * num_right * num_right:
            return g
    raise RuntimeError("no premise-satisfying graph found")


def random_hypercube_graph(n: int, num_right: int, delta: float, seed: int,
                           max_retries: int = 64) -> BipartiteGraph:
    """Seeded random hypercube-left graph meeting the Hamming-distance
    lemma's edge premise |E| >= 2^n * |R| * 2^(-delta n)."""
    L = 1 << n
    floor_edges = L * num_right * 2.0 ** (-delta * n)
    p_edge = min(1.0, 1.3 * floor_edges / (L * num_right))
    for attempt in range(max_retries):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0x9B, attempt)))
        adj = rng.random((L, num_right)) < p_edge
        g = BipartiteGraph(list(range(L)), list(range(num_right)), adj)
        if g.num_edges >= floor_edges:
            return g
    raise RuntimeError("no premise-satisfying hypercube graph found")
