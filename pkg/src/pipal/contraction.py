"""List and tree contraction on the deterministic-reservations engine.

Per round, active-prefix elements whose priority is a strict local minimum
among their live neighbors splice out.  A spliced list element's own two
pointer slots are overwritten with its splice-time context, so the
contraction forest needs no storage beyond the input links.

List ranking runs a weighted variant: each live element's ``prev`` slot
packs (predecessor pointer, incoming edge weight) as two 32-bit halves,
which caps ranking inputs at 2^32 - 2 elements; a spliced element keeps
(parent, distance) and ranks are distributed along the forest afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detres import RoundStats, run_rounds
from .runtime import (
    NIL,
    WORD,
    EpsilonConfig,
    alloc,
    alloc_bool,
    as_words,
    release,
)

__all__ = [
    "LinkedList", "BinaryTree", "make_priorities",
    "validate_linked_list", "validate_binary_tree",
    "list_contract", "list_rank", "tree_contract",
]

DEFAULT_BUDGET = EpsilonConfig(epsilon=0.5)

NIL32 = (1 << 32) - 1
_NILW = WORD(NIL)
_DONE = WORD(NIL - 1)  # ranking: "rank finalized" marker, never a node id


@dataclass
class LinkedList:
    """Doubly-linked chains over index arrays; NIL terminates both ends."""

    next: np.ndarray
    prev: np.ndarray

    def __post_init__(self) -> None:
        as_words(self.next)
        as_words(self.prev)
        if len(self.next) != len(self.prev):
            raise ValueError("next/prev length mismatch")

    def __len__(self) -> int:
        return len(self.next)


@dataclass
class BinaryTree:
    """Rooted forest of binary trees; internal nodes have exactly two children."""

    parent: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.parent, self.left, self.right):
            as_words(arr)
        if not len(self.parent) == len(self.left) == len(self.right):
            raise ValueError("parent/left/right length mismatch")

    def __len__(self) -> int:
        return len(self.parent)


def make_priorities(n: int, rng) -> np.ndarray:
    """Distinct random priorities: a random permutation of 0..n-1.

    Generated with the package's own permutation machinery at a fixed
    derived seed, so ties are impossible by construction.
    """
    from .relaxed import make_swap_sequence, random_permutation

    p = np.arange(n, dtype=WORD)
    if n > 1:
        random_permutation(p, make_swap_sequence(n, rng.derive(0x707269)))
    return p


# ---------------------------------------------------------------------------
# Validation

def validate_linked_list(lst: LinkedList, deep: bool = True) -> None:
    """Reject malformed lists: dangling or non-inverse links, or cycles."""
    n = len(lst)
    nxt, prv = lst.next, lst.prev
    for arr, name in ((nxt, "next"), (prv, "prev")):
        live = arr != _NILW
        if bool(np.any(arr[live] >= WORD(n))):
            raise ValueError(f"{name} pointer out of range")
    live = nxt != _NILW
    ids = np.flatnonzero(live)
    if bool(np.any(prv[nxt[ids]] != ids.astype(WORD))):
        raise ValueError("prev/next are not mutually inverse")
    live = prv != _NILW
    ids = np.flatnonzero(live)
    if bool(np.any(nxt[prv[ids]] != ids.astype(WORD))):
        raise ValueError("prev/next are not mutually inverse")
    if not deep:
        return
    # chains only: every node must be reachable by walking from the heads
    heads = np.flatnonzero(prv == _NILW).astype(WORD)
    seen = 0
    cur = heads
    steps = 0
    while len(cur):
        seen += len(cur)
        cur = nxt[cur]
        cur = cur[cur != _NILW]
        steps += 1
        if steps > n + 1:
            break
    if seen != n:
        raise ValueError("list contains a cycle")


def validate_binary_tree(tree: BinaryTree, deep: bool = True) -> None:
    n = len(tree)
    pa, lf, rt = tree.parent, tree.left, tree.right
    for arr, name in ((pa, "parent"), (lf, "left"), (rt, "right")):
        live = arr != _NILW
        if bool(np.any(arr[live] >= WORD(n))):
            raise ValueError(f"{name} pointer out of range")
    if bool(np.any((lf == _NILW) != (rt == _NILW))):
        raise ValueError("internal nodes must have exactly two children")
    for child in (lf, rt):
        ids = np.flatnonzero(child != _NILW)
        if bool(np.any(pa[child[ids]] != ids.astype(WORD))):
            raise ValueError("child/parent links inconsistent")
    ids = np.flatnonzero(pa != _NILW).astype(WORD)
    if len(ids):
        up = pa[ids]
        if bool(np.any((lf[up] != ids) & (rt[up] != ids))):
            raise ValueError("child/parent links inconsistent")
    if not deep:
        return
    # acyclicity: breadth-first waves from the roots must reach every node
    frontier = np.flatnonzero(pa == _NILW).astype(WORD)
    seen = 0
    steps = 0
    while len(frontier):
        seen += len(frontier)
        kids = np.concatenate([lf[frontier], rt[frontier]])
        frontier = kids[kids != _NILW]
        steps += 1
        if steps > n + 1:
            break
    if seen != n:
        raise ValueError("tree contains a cycle or unreachable nodes")


# ---------------------------------------------------------------------------
# List contraction

def _active(ids: np.ndarray, nbr: np.ndarray) -> np.ndarray:
    """Membership of neighbors in the (ascending) active prefix.

    An element only defers to neighbors that are active in the same round;
    pending-but-inactive and boundary neighbors count as priority infinity.
    With a full prefix this is exactly the all-live local-minimum rule, and
    with a partial prefix it keeps the round's priority-minimum committable,
    so rounds always progress.
    """
    pos = np.minimum(np.searchsorted(ids, nbr), len(ids) - 1)
    return ids[pos] == nbr


class _ListClient:
    """Plain contraction: live links stay mutually inverse pointers."""

    def __init__(self, lst: LinkedList, p: np.ndarray, prefix: int, on_splice):
        self.nxt = lst.next
        self.prv = lst.prev
        self.p = p
        self.on_splice = on_splice
        self.elig = alloc_bool(prefix)

    def release(self) -> None:
        release(self.elig)

    def reserve(self, view) -> None:
        ids = view.ids
        pv = self.p[ids]
        ok = np.ones(len(ids), dtype=bool)
        for nbr in (self.nxt[ids], self.prv[ids]):
            m = _active(ids, nbr)
            ok[m] &= pv[m] < self.p[nbr[m]]
        self.elig[:len(ids)] = ok

    def commit(self, view) -> None:
        c = self.elig[:len(view.ids)]
        view.committed[:] = c
        v = view.ids[c]
        u = self.prv[v]
        x = self.nxt[v]
        um = u != _NILW
        xm = x != _NILW
        self.nxt[u[um]] = x[um]
        self.prv[x[xm]] = u[xm]
        if self.on_splice is not None:
            self.on_splice(v, u, x)
        # v's own slots keep (u, x): the forest context costs nothing extra

    def clean(self, view) -> None:
        pass


class _RankClient:
    """Weighted contraction: prev packs (pointer, incoming distance)."""

    def __init__(self, lst: LinkedList, p: np.ndarray, prefix: int):
        self.nxt = lst.next
        self.prv = lst.prev
        self.p = p
        self.elig = alloc_bool(prefix)

    def release(self) -> None:
        release(self.elig)

    def reserve(self, view) -> None:
        ids = view.ids
        pv = self.p[ids]
        ok = np.ones(len(ids), dtype=bool)
        for nbr in (self.nxt[ids], self.prv[ids] >> WORD(32)):
            m = _active(ids, nbr)
            ok[m] &= pv[m] < self.p[nbr[m]]
        self.elig[:len(ids)] = ok

    def commit(self, view) -> None:
        c = self.elig[:len(view.ids)]
        view.committed[:] = c
        v = view.ids[c]
        packed = self.prv[v]
        u = packed >> WORD(32)
        w_uv = packed & WORD(NIL32)
        x = self.nxt[v]
        um = u != WORD(NIL32)
        xm = x != _NILW
        xs = x[xm]
        w_vx = self.prv[xs] & WORD(NIL32)
        self.prv[xs] = (u[xm] << WORD(32)) | (w_uv[xm] + w_vx)
        self.nxt[u[um]] = x[um]
        # dead slots: (parent, distance to parent)
        self.nxt[v] = np.where(um, u, _NILW)
        self.prv[v] = w_uv

    def clean(self, view) -> None:
        pass


def list_contract(lst: LinkedList, p: np.ndarray,
                  on_splice=None,
                  budget: EpsilonConfig = DEFAULT_BUDGET,
                  trace: list | None = None,
                  validate: bool = False) -> RoundStats:
    """Splice out every element; per round the active-prefix local minima go.

    After the run each element's own (prev, next) slots hold the neighbor
    pair it saw when spliced; ``on_splice(ids, prevs, nexts)`` observes each
    batch as it commits.
    """
    as_words(p)
    n = len(lst)
    if len(p) != n:
        raise ValueError("priorities length mismatch")
    if validate:
        validate_linked_list(lst)
    if n == 0:
        return RoundStats()
    prefix = budget.prefix_words(n)
    client = _ListClient(lst, p, prefix, on_splice)
    try:
        return run_rounds(n, prefix, client.reserve, client.commit,
                          client.clean, trace=trace)
    finally:
        client.release()


def _distribute_ranks(parent: np.ndarray, dist: np.ndarray) -> np.ndarray:
    """Resolve rank(v) = rank(parent) + dist along the contraction forest.

    Processes the forest in dependence waves (a node is ready once its
    parent is final); wave count is the forest height, O(log n) with random
    priorities.  ``dist`` is overwritten with the ranks.
    """
    n = len(parent)
    pending = parent != _DONE
    while True:
        ids = np.flatnonzero(pending)
        if not len(ids):
            break
        par = parent[ids]
        rooted = par == _NILW
        pm = ~rooted
        ready = rooted.copy()
        ready[pm] = parent[par[pm]] == _DONE
        if not ready.any():
            raise RuntimeError("ranking forest contains a dependence cycle")
        take = ids[ready]
        ptake = par[ready]
        base = np.zeros(len(take), dtype=WORD)
        m = ptake != _NILW
        base[m] = dist[ptake[m]]
        dist[take] = dist[take] + base
        parent[take] = _DONE
        pending[take] = False
    return dist


def list_rank(lst: LinkedList, p: np.ndarray,
              budget: EpsilonConfig = DEFAULT_BUDGET,
              trace: list | None = None,
              validate: bool = False,
              stats_sink: list | None = None) -> np.ndarray:
    """Rank every element within its chain, in place over the list storage.

    Consumes ``lst``: afterwards ``lst.prev`` holds the 0-based ranks (and
    is also the returned array) and ``lst.next`` holds bookkeeping marks.
    """
    as_words(p)
    n = len(lst)
    if len(p) != n:
        raise ValueError("priorities length mismatch")
    if n >= NIL32:
        raise ValueError("list ranking supports fewer than 2^32 - 1 elements")
    if validate:
        validate_linked_list(lst)
    if n == 0:
        return lst.prev

    nxt, prv = lst.next, lst.prev
    # pack (prev pointer, incoming weight); heads carry weight 0
    heads = prv == _NILW
    prv[:] = np.where(heads, WORD(NIL32), prv) << WORD(32)
    prv[~heads] |= WORD(1)

    prefix = budget.prefix_words(n)
    client = _RankClient(lst, p, prefix)
    try:
        stats = run_rounds(n, prefix, client.reserve, client.commit,
                           client.clean, trace=trace)
    finally:
        client.release()
    if stats_sink is not None:
        stats_sink.append(stats)
    return _distribute_ranks(nxt, prv)


# ---------------------------------------------------------------------------
# Tree contraction

_SCAN_BLOCK = 4096


class _TreeClient:
    """Rake leaves into parents, compress unary nodes into their child.

    A node with two children cannot contract no matter its priority, so a
    fixed id-order prefix could wedge on a window of internal nodes.  The
    iterate source is therefore a bounded frontier: a cursor sweeps the ids
    once, queueing nodes that are contractible when it passes, and a rake
    that drops an already-swept parent to one child queues that parent.
    Every pending contractible node is discovered exactly once, and the
    queue plus in-flight failures never exceed twice the prefix.
    """

    def __init__(self, tree: BinaryTree, p: np.ndarray, values: np.ndarray,
                 prefix: int, combine, debug: bool):
        self.pa = tree.parent
        self.lf = tree.left
        self.rt = tree.right
        self.n = len(tree)
        self.p = p
        self.values = values
        self.combine = combine
        self.debug = debug
        self.violations = 0
        self.roots: dict[int, int] = {}
        self.prefix = prefix
        self.elig = alloc_bool(prefix)
        self.qcap = 2 * prefix + 8
        self.queue = alloc(self.qcap)
        self.qhead = 0
        self.qsize = 0
        self.cursor = 0

    def release(self) -> None:
        release(self.queue)
        release(self.elig)

    # -- frontier queue
    def _push(self, ids: np.ndarray) -> None:
        cnt = len(ids)
        if cnt == 0:
            return
        if self.qsize + cnt > self.qcap:
            raise RuntimeError("tree contraction frontier overflow")
        tail = (self.qhead + self.qsize) % self.qcap
        first = min(cnt, self.qcap - tail)
        self.queue[tail:tail + first] = ids[:first]
        if first < cnt:
            self.queue[:cnt - first] = ids[first:]
        self.qsize += cnt

    def _scan_fill(self) -> None:
        while self.qsize < self.prefix and self.cursor < self.n:
            hi = min(self.cursor + _SCAN_BLOCK, self.n)
            blk = slice(self.cursor, hi)
            zero = (self.lf[blk] == _NILW) & (self.rt[blk] == _NILW)
            unary = (self.lf[blk] == _NILW) | (self.rt[blk] == _NILW)
            # a root keeps collecting rakes until bare, so only parented
            # nodes are contractible while they still have a child
            ready = zero | (unary & (self.pa[blk] != _NILW))
            ids = np.flatnonzero(ready).astype(WORD) + WORD(self.cursor)
            need = self.prefix - self.qsize
            if len(ids) > need:
                # leave the surplus ahead of the cursor for later sweeps
                ids = ids[:need]
                self.cursor = int(ids[-1]) + 1
            else:
                self.cursor = hi
            self._push(ids)

    def next_ids(self, count: int) -> np.ndarray:
        self._scan_fill()
        cnt = min(count, self.qsize)
        if cnt <= 0:
            return np.empty(0, dtype=WORD)
        first = min(cnt, self.qcap - self.qhead)
        out = np.empty(cnt, dtype=WORD)
        out[:first] = self.queue[self.qhead:self.qhead + first]
        if first < cnt:
            out[first:] = self.queue[:cnt - first]
        self.qhead = (self.qhead + cnt) % self.qcap
        self.qsize -= cnt
        return out

    # -- phases
    def reserve(self, view) -> None:
        ids = view.ids
        order = np.sort(ids)
        pv = self.p[ids]
        pa = self.pa[ids]
        lf = self.lf[ids]
        rt = self.rt[ids]
        zero = (lf == _NILW) & (rt == _NILW)
        ok = zero | (pa != _NILW)
        for nbr in (pa, lf, rt):
            m = _active(order, nbr)
            ok[m] &= pv[m] < self.p[nbr[m]]
        self.elig[:len(ids)] = ok

    def commit(self, view) -> None:
        c = self.elig[:len(view.ids)]
        view.committed[:] = c
        v = view.ids[c]
        if not len(v):
            return
        pa = self.pa[v]
        lf = self.lf[v]
        rt = self.rt[v]
        child = np.where(lf != _NILW, lf, rt)
        has_child = child != _NILW
        has_parent = pa != _NILW

        if self.debug and len(v) > 1:
            vs = np.sort(v)
            hits = np.searchsorted(vs, pa[has_parent])
            hits = np.minimum(hits, len(vs) - 1)
            self.violations += int(np.count_nonzero(
                vs[hits] == pa[has_parent]))

        # pre-round state of rake parents, read before any surgery: a parent
        # becoming contractible is discovered here (unless the cursor will
        # still sweep past it)
        rake = ~has_child & has_parent
        rp = pa[rake]
        uniq_p, rake_cnt = (np.unique(rp, return_counts=True)
                            if len(rp) else (rp, rp))
        pre_cnt = ((self.lf[uniq_p] != _NILW).astype(np.int8)
                   + (self.rt[uniq_p] != _NILW).astype(np.int8))

        # value folding: rakes into the parent, compresses into the child
        targets = np.concatenate([rp, child[has_child]])
        amounts = np.concatenate([self.values[v[rake]], self.values[v[has_child]]])
        self.combine.at(self.values, targets.astype(np.int64), amounts)

        # pointer surgery (reads gathered above, writes disjoint per commit)
        pw = has_parent
        pslot = pa[pw]
        repl = np.where(has_child[pw], child[pw], _NILW)
        is_left = self.lf[pslot] == v[pw]
        self.lf[pslot[is_left]] = repl[is_left]
        self.rt[pslot[~is_left]] = repl[~is_left]
        cm = has_child
        self.pa[child[cm]] = pa[cm]

        if len(uniq_p):
            # non-root parents: first drop below two children; roots: only
            # once bare (they are not contractible while a child remains)
            p_is_root = self.pa[uniq_p] == _NILW
            post_cnt = pre_cnt - rake_cnt.astype(np.int8)
            want = np.where(p_is_root, post_cnt == 0, pre_cnt == 2)
            fresh = uniq_p[want & (uniq_p < WORD(self.cursor))]
            self._push(fresh)

        done = ~has_child & ~has_parent
        for node in v[done].tolist():
            self.roots[int(node)] = int(self.values[node])

    def clean(self, view) -> None:
        pass


def tree_contract(tree: BinaryTree, p: np.ndarray, values: np.ndarray,
                  budget: EpsilonConfig = DEFAULT_BUDGET,
                  combine=np.add,
                  trace: list | None = None,
                  validate: bool = False,
                  debug: bool = False) -> tuple[dict[int, int], RoundStats]:
    """Contract the forest; returns ({root id: folded value}, stats).

    ``values`` is caller storage and is folded in place; ``combine`` must be
    a commutative, associative ufunc (default: sum mod 2^64).  In debug mode
    every round asserts that no parent-child pair contracts together.
    """
    as_words(p)
    as_words(values)
    n = len(tree)
    if len(p) != n or len(values) != n:
        raise ValueError("priorities/values length mismatch")
    if validate:
        validate_binary_tree(tree)
    if n == 0:
        return {}, RoundStats()
    prefix = budget.prefix_words(n)
    client = _TreeClient(tree, p, values, prefix, combine, debug)
    try:
        stats = run_rounds(n, prefix, client.reserve, client.commit,
                           client.clean, id_source=client.next_ids, trace=trace)
    finally:
        client.release()
    if debug and client.violations:
        raise AssertionError(
            f"{client.violations} parent-child pairs contracted together")
    return client.roots, stats
