"""Space-bounded graph algorithms over an implicit center decomposition.

Vertices are sampled as centers with probability 1/k (k = m^epsilon); only
per-center state is stored, and queries run local searches instead of
reading stored labels.  Connectivity labels come from truncated
breadth-first searches between neighboring centers plus hook-and-contract
rounds over the tiny center graph; the minimum spanning forest runs
Boruvka rounds over the decomposition's clusters and stores only the
committed inter-center forest edges.  Effective edge weights are the pairs
(weight, edge id), so ties are impossible and the MSF is unique.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .runtime import (
    NIL,
    WORD,
    Rng,
    alloc,
    alloc_bool,
    as_words,
    release,
)

__all__ = [
    "GraphEdges", "ImplicitDecomposition", "ConnectivityOracle", "MsfOracle",
    "build_connectivity", "query_connectivity", "build_msf", "query_msf_edge",
]

SEARCH_CAP_FACTOR = 8  # searches visit up to 8k vertices before falling back


# ---------------------------------------------------------------------------
# Graph representation

class GraphEdges:
    """Weighted undirected edge list with ingestion-time adjacency offsets.

    The adjacency index (CSR over both edge directions) is built once when
    the graph is ingested, as caller-provided scratch; the metered builds
    only read it.
    """

    def __init__(self, n: int, u: np.ndarray, v: np.ndarray, w: np.ndarray):
        as_words(u), as_words(v), as_words(w)
        if not len(u) == len(v) == len(w):
            raise ValueError("edge arrays must have equal length")
        if len(u) and (int(u.max()) >= n or int(v.max()) >= n):
            raise ValueError("edge endpoint out of range")
        self.n = n
        self.m = len(u)
        self.u = u
        self.v = v
        self.w = w
        ends = np.concatenate([u, v]).astype(np.int64)
        eids = np.concatenate([np.arange(self.m), np.arange(self.m)])
        order = np.argsort(ends, kind="stable")
        self.adj_off = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.adj_off, ends + 1, 1)
        np.cumsum(self.adj_off, out=self.adj_off)
        self.adj_eid = eids[order]
        other = np.concatenate([v, u]).astype(np.int64)
        self.adj_nbr = other[order]

    def neighbors(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        s, t = self.adj_off[x], self.adj_off[x + 1]
        return self.adj_nbr[s:t], self.adj_eid[s:t]


@dataclass
class ImplicitDecomposition:
    """Centers sampled with probability 1/k; membership is recomputed from
    (seed, vertex), never stored per vertex."""

    k: int
    seed: int
    center_ids: np.ndarray = field(repr=False)

    @classmethod
    def sample(cls, g: GraphEdges, epsilon: float, seed: int) -> "ImplicitDecomposition":
        k = max(2, int(round(max(g.m, 2) ** epsilon)))
        rng = Rng(seed)
        ids = np.flatnonzero(rng.words(0, g.n) % WORD(k) == 0).astype(WORD)
        return cls(k=k, seed=seed, center_ids=ids)

    def is_center(self, vs: np.ndarray) -> np.ndarray:
        return Rng(self.seed).words_at(vs) % WORD(self.k) == 0

    def is_center_one(self, x: int) -> bool:
        return Rng(self.seed).word(x) % self.k == 0


# ---------------------------------------------------------------------------
# Connectivity

@dataclass
class ConnectivityOracle:
    decomposition: ImplicitDecomposition
    center_label: dict[int, int]
    graph: GraphEdges


def _bfs_to_centers(g: GraphEdges, dec: ImplicitDecomposition, start: int,
                    visited: np.ndarray, cap: int):
    """BFS from a center through non-center vertices; returns (neighbor
    centers, touched vertices).  Past the cap it keeps going (the
    whole-component fallback), which desk-scale graphs tolerate."""
    touched = [start]
    visited[start] = True
    frontier = np.array([start], dtype=np.int64)
    found: list[int] = []
    while len(frontier):
        nxt: list[np.ndarray] = []
        for x in frontier.tolist():
            nbr, _ = g.neighbors(x)
            nxt.append(nbr)
        cand = np.unique(np.concatenate(nxt)) if nxt else np.empty(0, np.int64)
        cand = cand[~visited[cand]]
        if not len(cand):
            break
        visited[cand] = True
        touched.extend(cand.tolist())
        centers = dec.is_center(cand.astype(WORD))
        found.extend(cand[centers].tolist())
        frontier = cand[~centers]
    return found, touched


def build_connectivity(g: GraphEdges, epsilon: float, seed: int) -> ConnectivityOracle:
    """Center graph by truncated searches, then hook-and-contract labels."""
    dec = ImplicitDecomposition.sample(g, epsilon, seed)
    centers = dec.center_ids
    cidx = {int(c): i for i, c in enumerate(centers.tolist())}
    cap = SEARCH_CAP_FACTOR * dec.k

    visited = alloc_bool(g.n)
    visited[:] = False
    ea: list[int] = []
    eb: list[int] = []
    try:
        for c in centers.tolist():
            found, touched = _bfs_to_centers(g, dec, int(c), visited, cap)
            for other in found:
                ea.append(cidx[int(c)])
                eb.append(cidx[other])
            visited[np.array(touched, dtype=np.int64)] = False
    finally:
        release(visited)

    # hook-and-contract on the center graph: every class repeatedly hooks to
    # its minimum neighboring class, then shortcuts, until stable
    nc = len(centers)
    lab = alloc(nc)
    lab[:] = np.arange(nc, dtype=WORD)
    if ea:
        ca = np.array(ea, dtype=np.int64)
        cb = np.array(eb, dtype=np.int64)
        while True:
            la = lab[ca]
            lb = lab[cb]
            m = la != lb
            if not bool(m.any()):
                break
            np.minimum.at(lab, ca[m], lb[m])
            np.minimum.at(lab, cb[m], la[m])
            while True:
                nxt = lab[lab.astype(np.int64)]
                if bool(np.array_equal(nxt, lab)):
                    break
                lab[:] = nxt
    # labels are the minimum center vertex id of each center component
    label_map = {int(c): int(centers[int(lab[i])])
                 for i, c in enumerate(centers.tolist())}
    release(lab)
    return ConnectivityOracle(decomposition=dec, center_label=label_map, graph=g)


def query_connectivity(oracle: ConnectivityOracle, x: int) -> int:
    """Component label of x: BFS to the first center (minimum id at the
    minimum depth); a centerless component labels as its minimum vertex id."""
    g = oracle.graph
    if not 0 <= x < g.n:
        raise IndexError("vertex out of range")
    dec = oracle.decomposition
    if dec.is_center_one(x):
        return oracle.center_label[x]
    seen = {x}
    frontier = [x]
    best = x
    while frontier:
        cand = sorted({int(y) for f in frontier for y in g.neighbors(f)[0].tolist()}
                      - seen)
        if not cand:
            break
        hits = [y for y in cand if dec.is_center_one(y)]
        if hits:
            return oracle.center_label[hits[0]]
        seen.update(cand)
        best = min(best, cand[0])
        frontier = cand
    return best


# ---------------------------------------------------------------------------
# Minimum spanning forest

@dataclass
class MsfOracle:
    decomposition: ImplicitDecomposition
    cluster_anchor: np.ndarray      # vertex -> center id, or component min id
    committed_eids: np.ndarray      # inter-center MSF edges, sorted
    graph: GraphEdges

    def release(self) -> None:
        release(self.cluster_anchor)


def _prim_to_anchor(g: GraphEdges, dec: ImplicitDecomposition, v: int,
                    anchor_of: np.ndarray, collect: list | None = None) -> int:
    """Grow a minimum-edge tree from v until it touches a center or an
    already-anchored vertex; every edge taken is an MSF edge (cut property).
    Exhaustion without a hit anchors the component at its minimum id."""
    tree = {v}
    heap: list[tuple[int, int, int]] = []
    w = g.w
    nbr, eid = g.neighbors(v)
    for y, e in zip(nbr.tolist(), eid.tolist()):
        heapq.heappush(heap, (int(w[e]), int(e), y))
    anchor = -1
    while heap:
        _, e, y = heapq.heappop(heap)
        if y in tree:
            continue
        if collect is not None:
            collect.append(e)
        if anchor_of[y] != WORD(NIL):
            anchor = int(anchor_of[y])
            break
        if dec.is_center_one(y):
            anchor = y
            anchor_of[y] = WORD(y)
            break
        tree.add(y)
        nbr, eid = g.neighbors(y)
        for z, e2 in zip(nbr.tolist(), eid.tolist()):
            if z not in tree:
                heapq.heappush(heap, (int(w[e2]), int(e2), z))
    if anchor < 0:
        anchor = min(tree)
    ids = np.array(sorted(tree), dtype=np.int64)
    anchor_of[ids] = WORD(anchor)
    return anchor


def build_msf(g: GraphEdges, epsilon: float, seed: int) -> MsfOracle:
    """Boruvka over the decomposition clusters; commits each live cluster's
    minimum outgoing edge by (weight, edge id) per round."""
    dec = ImplicitDecomposition.sample(g, epsilon, seed)
    anchor_of = alloc(g.n, fill=NIL)
    for v in range(g.n):
        if anchor_of[v] == WORD(NIL):
            _prim_to_anchor(g, dec, v, anchor_of)

    anchors = np.unique(anchor_of)
    rank_of = {int(a): i for i, a in enumerate(anchors.tolist())}
    parent = list(range(len(anchors)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    eu = np.searchsorted(anchors, anchor_of[g.u])
    ev = np.searchsorted(anchors, anchor_of[g.v])
    committed: list[int] = []
    while True:
        roots = np.array([find(i) for i in range(len(anchors))], dtype=np.int64)
        ru = roots[eu]
        rv = roots[ev]
        live = ru != rv
        if not bool(live.any()):
            break
        idx = np.flatnonzero(live)
        cl = np.concatenate([ru[idx], rv[idx]])
        ee = np.concatenate([idx, idx])
        order = np.lexsort((ee, g.w[ee], cl))
        scl = cl[order]
        first = np.empty(len(scl), dtype=bool)
        first[0] = True
        first[1:] = scl[1:] != scl[:-1]
        for e in ee[order[first]].tolist():
            a, b = find(int(ru[e])), find(int(rv[e]))
            if a != b:
                parent[max(a, b)] = min(a, b)
                committed.append(int(e))

    # the anchor map stays in the oracle: it is the budgeted cluster memo
    # that query-time searches consult
    return MsfOracle(decomposition=dec,
                     cluster_anchor=anchor_of,
                     committed_eids=np.array(sorted(committed), dtype=np.int64),
                     graph=g)


def msf_full_edge_set(oracle: MsfOracle) -> list[int]:
    """Materialize the whole forest: cluster-internal minimum-tree edges
    plus the committed inter-center edges (verification helper)."""
    g = oracle.graph
    dec = oracle.decomposition
    anchor_of = np.full(g.n, NIL, dtype=WORD)
    edges: list[int] = []
    for v in range(g.n):
        if anchor_of[v] == WORD(NIL):
            _prim_to_anchor(g, dec, v, anchor_of, collect=edges)
    eids = set(edges)
    eids.update(oracle.committed_eids.tolist())
    return sorted(eids)


def msf_total_weight(oracle: MsfOracle) -> int:
    eids = np.array(msf_full_edge_set(oracle), dtype=np.int64)
    return int(np.sum(oracle.graph.w[eids], dtype=np.uint64)) if len(eids) else 0


def query_msf_edge(oracle: MsfOracle, e: int) -> bool:
    """Membership by the cycle property: e = (x, y) is in the unique MSF iff
    no path of strictly lighter effective weight connects x and y."""
    g = oracle.graph
    if not 0 <= e < g.m:
        raise IndexError("edge id out of range")
    we = int(g.w[e])
    lighter = (g.w < WORD(we)) | ((g.w == WORD(we)) &
                                  (np.arange(g.m) < e))
    x, y = int(g.u[e]), int(g.v[e])
    if x == y:
        return False
    visited = alloc_bool(g.n)
    frontier = alloc_bool(g.n)
    try:
        visited[:] = False
        frontier[:] = False
        visited[x] = frontier[x] = True
        while True:
            act = lighter & (frontier[g.u] | frontier[g.v])
            ends = np.concatenate([g.v[act], g.u[act]]).astype(np.int64)
            ends = ends[~visited[ends]]
            if not len(ends):
                return True
            visited[ends] = True
            if visited[y]:
                return False
            frontier[:] = False
            frontier[ends] = True
    finally:
        release(frontier)
        release(visited)
