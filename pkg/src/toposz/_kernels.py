"""Compiled inner loops for the topology sweeps.

Every kernel takes a vertex ``order`` (ascending under the tie-broken order),
the matching ``rank`` array and a Freudenthal neighbor table with -1 holes.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def augmented_sweep(order, rank, nbr):
    """Augmented merge tree of the sublevel sets swept along ``order``.

    Returns ``(up, child_count, child_sum)``: ``up[v]`` is the vertex at which
    the component whose highest vertex is ``v`` next grows (-1 for the last
    vertex); ``child_count``/``child_sum`` describe the reverse links.
    """
    n = order.size
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    top = np.arange(n)
    up = np.full(n, -1, dtype=np.int64)
    child_count = np.zeros(n, dtype=np.int64)
    child_sum = np.zeros(n, dtype=np.int64)
    for idx in range(n):
        v = order[idx]
        for k in range(nbr.shape[1]):
            w = nbr[v, k]
            if w < 0 or rank[w] > rank[v]:
                continue
            rw = _find(parent, w)
            rv = _find(parent, v)
            if rw == rv:
                continue
            t = top[rw]
            up[t] = v
            child_count[v] += 1
            child_sum[v] += t
            if size[rw] > size[rv]:
                rw, rv = rv, rw
            parent[rw] = rv
            size[rv] += size[rw]
        top[_find(parent, v)] = v
    return up, child_count, child_sum


@njit(cache=True)
def merge_trees(jt_down, jt_upcnt, jt_upsum, st_up, st_dncnt, st_dnsum):
    """Carr-Snoeyink-Axen merge of augmented join and split trees.

    The join tree links each vertex to the next lower vertex (``jt_down``),
    the split tree to the next higher one (``st_up``). Inputs are consumed.
    Returns the augmented contour tree as ``(arc_hi, arc_lo)`` vertex arrays.
    """
    n = jt_down.size
    arc_hi = np.empty(max(n - 1, 0), dtype=np.int64)
    arc_lo = np.empty(max(n - 1, 0), dtype=np.int64)
    removed = np.zeros(n, dtype=np.bool_)
    stack = np.empty(n + n, dtype=np.int64)
    sp = 0
    for v in range(n):
        if (jt_upcnt[v] == 0 and st_dncnt[v] == 1) or (st_dncnt[v] == 0 and jt_upcnt[v] == 1):
            stack[sp] = v
            sp += 1
    remaining = n
    n_arcs = 0
    while sp > 0 and remaining > 1:
        sp -= 1
        v = stack[sp]
        if removed[v]:
            continue
        if jt_upcnt[v] == 0 and st_dncnt[v] == 1:
            w = jt_down[v]
            arc_hi[n_arcs] = v
            arc_lo[n_arcs] = w
            jt_upcnt[w] -= 1
            jt_upsum[w] -= v
            c = st_dnsum[v]
            p = st_up[v]
            st_up[c] = p
            if p != -1:
                st_dnsum[p] += c - v
        elif st_dncnt[v] == 0 and jt_upcnt[v] == 1:
            w = st_up[v]
            arc_hi[n_arcs] = w
            arc_lo[n_arcs] = v
            st_dncnt[w] -= 1
            st_dnsum[w] -= v
            c = jt_upsum[v]
            p = jt_down[v]
            jt_down[c] = p
            if p != -1:
                jt_upsum[p] += c - v
        else:
            continue
        n_arcs += 1
        removed[v] = True
        remaining -= 1
        if not removed[w] and (
            (jt_upcnt[w] == 0 and st_dncnt[w] == 1) or (st_dncnt[w] == 0 and jt_upcnt[w] == 1)
        ):
            stack[sp] = w
            sp += 1
    return arc_hi[:n_arcs], arc_lo[:n_arcs]


@njit(cache=True)
def contract_regular(n, arc_hi, arc_lo):
    """Collapse vertices with one up- and one down-arc into contour-tree arcs.

    Returns ``(up_degree, down_degree, carc_hi, carc_lo, vertex_arc)`` where
    ``vertex_arc`` is -1 on critical vertices.
    """
    updeg = np.zeros(n, dtype=np.int64)
    dndeg = np.zeros(n, dtype=np.int64)
    up1 = np.full(n, -1, dtype=np.int64)
    for a in range(arc_hi.size):
        hi = arc_hi[a]
        lo = arc_lo[a]
        updeg[lo] += 1
        dndeg[hi] += 1
        up1[lo] = hi
    vertex_arc = np.full(n, -1, dtype=np.int64)
    carc_hi = np.empty(arc_hi.size, dtype=np.int64)
    carc_lo = np.empty(arc_hi.size, dtype=np.int64)
    m = 0
    for a in range(arc_hi.size):
        lo = arc_lo[a]
        if updeg[lo] == 1 and dndeg[lo] == 1:
            continue
        x = arc_hi[a]
        while updeg[x] == 1 and dndeg[x] == 1:
            vertex_arc[x] = m
            x = up1[x]
        carc_hi[m] = x
        carc_lo[m] = lo
        m += 1
    return updeg, dndeg, carc_hi[:m], carc_lo[:m], vertex_arc


@njit(cache=True)
def elder_pairs(order, rank, nbr):
    """0-dimensional persistence pairs of the sublevel filtration.

    Returns an ``(k, 2)`` array of ``(birth_vertex, death_vertex)``; the
    component born last dies at each merge.
    """
    n = order.size
    parent = np.arange(n)
    birth = np.arange(n)
    seen = np.zeros(n, dtype=np.bool_)
    out = np.empty((n, 2), dtype=np.int64)
    k = 0
    for idx in range(n):
        v = order[idx]
        seen[v] = True
        for j in range(nbr.shape[1]):
            w = nbr[v, j]
            if w < 0 or not seen[w] or w == v:
                continue
            rw = _find(parent, w)
            rv = _find(parent, v)
            if rw == rv:
                continue
            if rank[birth[rw]] < rank[birth[rv]]:
                young, old = rv, rw
            else:
                young, old = rw, rv
            if birth[young] != v:
                out[k, 0] = birth[young]
                out[k, 1] = v
                k += 1
            parent[young] = old
    return out[:k]
