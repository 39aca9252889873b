"""Contour trees, persistence simplification and 0-dimensional persistence diagrams.

Ties are broken by symbolic perturbation: vertex ``u`` is below ``v`` iff
``(f(u), u) < (f(v), v)``. The contour tree is built on the Freudenthal
triangulation by merging the join and split trees.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .field import ScalarField, neighbor_table

MINIMUM, MAXIMUM, SADDLE = 0, 1, 2
KIND_NAMES = ("minimum", "maximum", "saddle")
_KIND_CODES = {name: code for code, name in enumerate(KIND_NAMES)}


def vertex_order(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending vertex order under the tie-break, and its inverse (rank)."""
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    order = np.lexsort((np.arange(flat.size), flat)).astype(np.int64)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return order, rank


@dataclass(frozen=True, eq=False)
class ContourTree:
    """Contour tree with its per-vertex segmentation.

    Arcs are ``(arc_upper[a], arc_lower[a])`` as node indices. Regular vertices
    carry ``vertex_arc >= 0``; critical vertices carry ``vertex_node >= 0``.
    """

    dims: tuple
    node_vertex: np.ndarray
    node_scalar: np.ndarray
    node_kind: np.ndarray
    arc_upper: np.ndarray
    arc_lower: np.ndarray
    vertex_arc: np.ndarray
    vertex_node: np.ndarray
    epsilon: float = 0.0

    @property
    def n_nodes(self) -> int:
        return int(self.node_vertex.size)

    @property
    def n_arcs(self) -> int:
        return int(self.arc_upper.size)

    def degrees(self) -> tuple[np.ndarray, np.ndarray]:
        """(up-degree, down-degree) per node."""
        up = np.bincount(self.arc_lower, minlength=self.n_nodes)
        down = np.bincount(self.arc_upper, minlength=self.n_nodes)
        return up, down

    def critical_vertices(self) -> np.ndarray:
        return self.node_vertex.copy()

    def node_set(self) -> set[tuple[int, str]]:
        return {(int(v), KIND_NAMES[k]) for v, k in zip(self.node_vertex, self.node_kind)}

    def arc_set(self) -> set[tuple[int, int]]:
        nv = self.node_vertex
        return {(int(nv[u]), int(nv[l])) for u, l in zip(self.arc_upper, self.arc_lower)}

    def arc_vertices(self, a: int) -> tuple[int, int]:
        return int(self.node_vertex[self.arc_upper[a]]), int(self.node_vertex[self.arc_lower[a]])

    def to_text(self) -> str:
        lines = [
            f"node {int(v)} {float(s)!r} {KIND_NAMES[k]}"
            for v, s, k in zip(self.node_vertex, self.node_scalar, self.node_kind)
        ]
        lines += [f"arc {int(u)} {int(l)}" for u, l in zip(self.arc_upper, self.arc_lower)]
        return "\n".join(lines) + "\n"


def parse_tree_text(text: str) -> tuple[list[tuple[int, float, str]], list[tuple[int, int]]]:
    """Read the ``node``/``arc`` debug format back as plain lists."""
    nodes, arcs = [], []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "node":
            if parts[3] not in _KIND_CODES:
                raise ValueError(f"unknown node kind {parts[3]!r}")
            nodes.append((int(parts[1]), float(parts[2]), parts[3]))
        elif parts[0] == "arc":
            arcs.append((int(parts[1]), int(parts[2])))
        else:
            raise ValueError(f"unrecognized line: {line!r}")
    return nodes, arcs


def build_contour_tree(field: ScalarField) -> ContourTree:
    values = field.flat
    n = values.size
    order, rank = vertex_order(values)
    nbr = neighbor_table(field.dims)
    st_up, st_cnt, st_sum = _kernels.augmented_sweep(order, rank, nbr)
    rev_rank = (n - 1) - rank
    jt_down, jt_cnt, jt_sum = _kernels.augmented_sweep(order[::-1].copy(), rev_rank, nbr)
    arc_hi, arc_lo = _kernels.merge_trees(jt_down, jt_cnt, jt_sum, st_up, st_cnt, st_sum)
    if arc_hi.size != n - 1:
        raise RuntimeError("contour tree merge did not consume every vertex")
    updeg, dndeg, carc_hi, carc_lo, vertex_arc = _kernels.contract_regular(n, arc_hi, arc_lo)

    critical = np.flatnonzero(~((updeg == 1) & (dndeg == 1)))
    kinds = np.full(critical.size, SADDLE, dtype=np.int8)
    kinds[updeg[critical] == 0] = MAXIMUM
    kinds[dndeg[critical] == 0] = MINIMUM
    vertex_node = np.full(n, -1, dtype=np.int64)
    vertex_node[critical] = np.arange(critical.size)

    # canonical arc order: by (upper vertex, lower vertex)
    perm = np.lexsort((carc_lo, carc_hi))
    relabel = np.empty_like(perm)
    relabel[perm] = np.arange(perm.size)
    vertex_arc = np.where(vertex_arc >= 0, relabel[np.maximum(vertex_arc, 0)], -1)

    return ContourTree(
        dims=field.dims,
        node_vertex=critical.astype(np.int64),
        node_scalar=values[critical].copy(),
        node_kind=kinds,
        arc_upper=vertex_node[carc_hi[perm]],
        arc_lower=vertex_node[carc_lo[perm]],
        vertex_arc=vertex_arc,
        vertex_node=vertex_node,
        epsilon=0.0,
    )


# -- simplification --------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    extremum: int
    saddle: int
    persistence: float
    kind: int
    parent: int = -1  # extremum vertex of the branch the saddle lies on; -1 = root


class _Pruner:
    """Leaf pruning in persistence order, tracking segmentation and branch nesting."""

    def __init__(self, tree: ContourTree):
        self.tree = tree
        nn = tree.n_nodes
        self.key = [(float(s), int(v)) for s, v in zip(tree.node_scalar, tree.node_vertex)]
        self.alive = [True] * nn
        self.up = [set() for _ in range(nn)]
        self.down = [set() for _ in range(nn)]
        self.hi = [int(u) for u in tree.arc_upper]
        self.lo = [int(l) for l in tree.arc_lower]
        for a, (u, l) in enumerate(zip(self.hi, self.lo)):
            self.down[u].add(a)
            self.up[l].add(a)
        self.arc_alive = [True] * len(self.hi)
        self.seg = list(range(len(self.hi)))
        self.node_arc = [-1] * nn
        self.saddles_on = [[] for _ in self.hi]
        self.owner = {}
        self.branches = {}
        self.n_alive_arcs = len(self.hi)
        self.heap = []
        for n in range(nn):
            self._push(n)

    def _find(self, a):
        root = a
        while self.seg[root] != root:
            root = self.seg[root]
        while self.seg[a] != root:
            self.seg[a], a = root, self.seg[a]
        return root

    def _new_arc(self, hi, lo):
        a = len(self.hi)
        self.hi.append(hi)
        self.lo.append(lo)
        self.arc_alive.append(True)
        self.seg.append(a)
        self.saddles_on.append([])
        self.down[hi].add(a)
        self.up[lo].add(a)
        self.n_alive_arcs += 1
        return a

    def _kill_arc(self, a):
        self.arc_alive[a] = False
        self.down[self.hi[a]].discard(a)
        self.up[self.lo[a]].discard(a)
        self.n_alive_arcs -= 1

    def _leaf(self, n):
        """(arc, saddle, persistence, kind) if ``n`` is a prunable leaf."""
        if not self.alive[n]:
            return None
        up, down = self.up[n], self.down[n]
        if not up and len(down) == 1:
            (a,) = down
            s = self.lo[a]
            if len(self.up[s]) < 2:
                return None
            return a, s, self.key[n][0] - self.key[s][0], MAXIMUM
        if not down and len(up) == 1:
            (a,) = up
            s = self.hi[a]
            if len(self.down[s]) < 2:
                return None
            return a, s, self.key[s][0] - self.key[n][0], MINIMUM
        return None

    def _push(self, n):
        info = self._leaf(n)
        if info is not None:
            a, s, p, kind = info
            # equal persistence: the less extreme leaf (under the tie-break
            # order) goes first, so a plateau keeps its lowest-id minimum
            # and its highest-id maximum
            sign = 1 if kind == MAXIMUM else -1
            f, v = self.key[n]
            heapq.heappush(self.heap, (p, sign * f, sign * v, n, a))

    def run(self, eps: float):
        while self.heap:
            p, _, _, n, a = self.heap[0]
            if p > eps:
                break
            heapq.heappop(self.heap)
            info = self._leaf(n)
            if info is None or info[0] != a:
                continue
            self._prune(n, *info)

    def _prune(self, n, a, s, p, kind):
        for x in self.saddles_on[a]:
            self.owner[x] = n
        self.branches[n] = (s, p, kind)
        self.alive[n] = False
        self.node_arc[n] = a
        self._kill_arc(a)
        if kind == MAXIMUM:
            side = self.up[s]
            target = max(side, key=lambda b: self.key[self.hi[b]])
        else:
            side = self.down[s]
            target = min(side, key=lambda b: self.key[self.lo[b]])
        self.seg[self._find(a)] = self._find(target)
        if len(self.up[s]) == 1 and len(self.down[s]) == 1:
            self._contract(s)

    def _contract(self, s):
        (a_up,) = self.up[s]
        (a_dn,) = self.down[s]
        top, bottom = self.hi[a_up], self.lo[a_dn]
        self._kill_arc(a_up)
        self._kill_arc(a_dn)
        c = self._new_arc(top, bottom)
        self.seg[self._find(a_up)] = c
        self.seg[self._find(a_dn)] = c
        self.saddles_on[c] = self.saddles_on[a_up] + self.saddles_on[a_dn] + [s]
        self.alive[s] = False
        self.node_arc[s] = c
        self._push(top)
        self._push(bottom)

    def result(self, eps: float) -> ContourTree:
        tree = self.tree
        live_nodes = [n for n in range(tree.n_nodes) if self.alive[n]]
        node_map = np.full(tree.n_nodes, -1, dtype=np.int64)
        node_map[live_nodes] = np.arange(len(live_nodes))
        live_arcs = [a for a in range(len(self.hi)) if self.arc_alive[a]]
        live_arcs.sort(key=lambda a: (int(tree.node_vertex[self.hi[a]]), int(tree.node_vertex[self.lo[a]])))
        arc_map = np.full(len(self.hi), -1, dtype=np.int64)
        arc_map[live_arcs] = np.arange(len(live_arcs))
        root_of = np.array([arc_map[self._find(a)] for a in range(len(self.hi))], dtype=np.int64)

        vertex_arc = np.where(tree.vertex_arc >= 0, root_of[np.maximum(tree.vertex_arc, 0)], -1)
        vertex_node = np.full_like(tree.vertex_node, -1)
        for n in range(tree.n_nodes):
            v = int(tree.node_vertex[n])
            if self.alive[n]:
                vertex_node[v] = node_map[n]
            else:
                vertex_arc[v] = root_of[self.node_arc[n]]
        keep = np.array(live_nodes, dtype=np.int64)
        return ContourTree(
            dims=tree.dims,
            node_vertex=tree.node_vertex[keep],
            node_scalar=tree.node_scalar[keep],
            node_kind=tree.node_kind[keep],
            arc_upper=node_map[np.array([self.hi[a] for a in live_arcs], dtype=np.int64)],
            arc_lower=node_map[np.array([self.lo[a] for a in live_arcs], dtype=np.int64)],
            vertex_arc=vertex_arc,
            vertex_node=vertex_node,
            epsilon=float(eps),
        )


def simplify(tree: ContourTree, eps: float) -> ContourTree:
    """Remove leaf branches of persistence <= ``eps``, smallest first.

    A leaf is removable only when its saddle keeps another arc on the leaf's
    side, so the global min-max arc always survives. ``eps == 0`` is a no-op
    because symbolic perturbation makes every persistence strictly positive.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if eps == 0 or tree.n_arcs <= 1:
        return replace(tree, epsilon=max(float(eps), tree.epsilon))
    pruner = _Pruner(tree)
    pruner.run(float(eps))
    return pruner.result(max(float(eps), tree.epsilon))


def branch_decomposition(tree: ContourTree) -> dict[int, Branch]:
    """One :class:`Branch` per leaf of ``tree``, keyed by extremum vertex.

    Leaves are pruned in persistence order until a single arc remains; both
    ends of that last arc form the root branch (``parent == -1``).
    """
    nv = tree.node_vertex
    if tree.n_arcs == 0:
        out = {}
        for n in range(tree.n_nodes):
            out[int(nv[n])] = Branch(int(nv[n]), int(nv[n]), 0.0, int(tree.node_kind[n]), -1)
        return out
    pruner = _Pruner(tree)
    pruner.run(float("inf"))
    (root_arc,) = [a for a in range(len(pruner.hi)) if pruner.arc_alive[a]]
    for x in pruner.saddles_on[root_arc]:
        pruner.owner[x] = -1
    out = {}
    for n, (s, p, kind) in pruner.branches.items():
        owner = pruner.owner.get(s, -1)
        parent = -1 if owner == -1 else int(nv[owner])
        out[int(nv[n])] = Branch(int(nv[n]), int(nv[s]), float(p), kind, parent)
    top, bottom = pruner.hi[root_arc], pruner.lo[root_arc]
    height = float(tree.node_scalar[top] - tree.node_scalar[bottom])
    out[int(nv[top])] = Branch(int(nv[top]), int(nv[bottom]), height, MAXIMUM, -1)
    out[int(nv[bottom])] = Branch(int(nv[bottom]), int(nv[top]), height, MINIMUM, -1)
    return out


def leaf_arcs(tree: ContourTree) -> dict[int, tuple[int, int]]:
    """Map each leaf's vertex to ``(arc index, adjacent node index)``."""
    out = {}
    for a, (u, l) in enumerate(zip(tree.arc_upper, tree.arc_lower)):
        for me, other in ((u, l), (l, u)):
            out.setdefault(int(me), []).append((a, int(other)))
    leaves = {}
    for n, incident in out.items():
        if len(incident) == 1:
            leaves[int(tree.node_vertex[n])] = incident[0]
    return leaves


def segmentation_regions(tree: ContourTree) -> dict[int, np.ndarray]:
    """Vertices of each arc's pre-image (regular vertices only)."""
    va = tree.vertex_arc
    idx = np.flatnonzero(va >= 0)
    labels = va[idx]
    order = np.argsort(labels, kind="stable")
    idx, labels = idx[order], labels[order]
    bounds = np.searchsorted(labels, np.arange(tree.n_arcs + 1))
    return {a: idx[bounds[a]:bounds[a + 1]] for a in range(tree.n_arcs)}


# -- persistence diagrams --------------------------------------------------

@dataclass(frozen=True, eq=False)
class PersistenceDiagram:
    pairs: np.ndarray  # (k, 2) rows of (birth, death)

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.float64).reshape(-1, 2)
        if np.any(pairs[:, 1] < pairs[:, 0]):
            raise ValueError("death must not precede birth")
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return int(self.pairs.shape[0])

    def sorted_pairs(self) -> list[tuple[float, float]]:
        return sorted((float(b), float(d)) for b, d in self.pairs)


def persistence_diagram_0d(field: ScalarField, superlevel: bool = True) -> PersistenceDiagram:
    """Sublevel 0-dimensional pairs plus the essential (min, max) class.

    With ``superlevel`` the pairs of ``-f`` are appended, so maxima-type
    features appear as ``(-f(max), -f(saddle))``. Zero-length pairs are dropped.
    """
    values = field.flat
    n = values.size
    order, rank = vertex_order(values)
    nbr = neighbor_table(field.dims)
    rows = []
    pairs = _kernels.elder_pairs(order, rank, nbr)
    rows.append(np.column_stack([values[pairs[:, 0]], values[pairs[:, 1]]]))
    rows.append(np.array([[values[order[0]], values[order[-1]]]]))
    if superlevel:
        neg = -values
        order_d = order[::-1].copy()
        rank_d = (n - 1) - rank
        pairs_d = _kernels.elder_pairs(order_d, rank_d, nbr)
        rows.append(np.column_stack([neg[pairs_d[:, 0]], neg[pairs_d[:, 1]]]))
    out = np.concatenate(rows, axis=0) if n else np.zeros((0, 2))
    keep = out[:, 1] > out[:, 0]
    keep[len(pairs)] = True  # essential class, even for constant fields
    return PersistenceDiagram(out[keep])
