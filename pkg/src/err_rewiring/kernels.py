"""Hot inner loops: LU panels, BFS, Tarjan SCC, bridges, random walks, transport.

Each public function dispatches to a numba-compiled loop kernel or to a
numpy implementation, chosen by ``ERR_NUMBA`` (see :mod:`._backend`). Pass
``use_numba=True/False`` to force one path; the tests and
``benchmarks/bench_kernels.py`` do this to compare the two.

Graphs reach these kernels in CSR form: ``indptr`` (n+1,) and ``indices``
(nnz,), both int64, neighbors of each row sorted ascending.
"""
from __future__ import annotations

import numpy as np

from ._backend import HAVE_NUMBA, USE_NUMBA, njit

LU_BLOCK = 64
UNREACHED = -1


class SingularMatrixError(ArithmeticError):
    """Pivot below ``1e-12 * max|a|`` during elimination."""

    def __init__(self, column: int, pivot: float, scale: float):
        super().__init__(
            f"matrix singular to working precision: |pivot| = {pivot:.3e} at column "
            f"{column} (threshold {1e-12 * scale:.3e})"
        )
        self.column = column


def _pick(use_numba):
    if use_numba is None:
        return USE_NUMBA
    return bool(use_numba) and HAVE_NUMBA


# ---------------------------------------------------------------------------
# LU with partial pivoting (right-looking, blocked)
#
# The blocked driver is shared; only the panel factorization and the
# in-block triangular solves differ between backends. Trailing updates go
# through numpy matmul in both cases.


def _lu_panel_loops(a, piv, k0, k1, tol):
    n = a.shape[0]
    for k in range(k0, k1):
        p = k
        best = abs(a[k, k])
        for i in range(k + 1, n):
            v = abs(a[i, k])
            if v > best:
                best = v
                p = i
        if best < tol:
            return k
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
            t = piv[k]
            piv[k] = piv[p]
            piv[p] = t
        inv = 1.0 / a[k, k]
        for i in range(k + 1, n):
            a[i, k] *= inv
            lik = a[i, k]
            if lik != 0.0:
                for j in range(k + 1, k1):
                    a[i, j] -= lik * a[k, j]
    # U12 = L11^{-1} A12
    for k in range(k0, k1):
        for i in range(k + 1, k1):
            lik = a[i, k]
            if lik != 0.0:
                for j in range(k1, n):
                    a[i, j] -= lik * a[k, j]
    return -1


def _lu_panel_numpy(a, piv, k0, k1, tol):
    for k in range(k0, k1):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) < tol:
            return k
        if p != k:
            a[[k, p]] = a[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        a[k + 1 :, k] /= a[k, k]
        a[k + 1 :, k + 1 : k1] -= np.outer(a[k + 1 :, k], a[k, k + 1 : k1])
    for k in range(k0, k1):
        a[k + 1 : k1, k1:] -= np.outer(a[k + 1 : k1, k], a[k, k1:])
    return -1


def _trsm_lower_loops(lu, x, k0, k1):
    m = x.shape[1]
    for i in range(k0, k1):
        for k in range(k0, i):
            lik = lu[i, k]
            if lik != 0.0:
                for j in range(m):
                    x[i, j] -= lik * x[k, j]


def _trsm_upper_loops(lu, x, k0, k1):
    m = x.shape[1]
    for i in range(k1 - 1, k0 - 1, -1):
        for k in range(i + 1, k1):
            uik = lu[i, k]
            if uik != 0.0:
                for j in range(m):
                    x[i, j] -= uik * x[k, j]
        inv = 1.0 / lu[i, i]
        for j in range(m):
            x[i, j] *= inv


def _trsm_lower_numpy(lu, x, k0, k1):
    for i in range(k0 + 1, k1):
        x[i] -= lu[i, k0:i] @ x[k0:i]


def _trsm_upper_numpy(lu, x, k0, k1):
    for i in range(k1 - 1, k0 - 1, -1):
        if i + 1 < k1:
            x[i] -= lu[i, i + 1 : k1] @ x[i + 1 : k1]
        x[i] /= lu[i, i]


_lu_panel_nb = njit(_lu_panel_loops)
_trsm_lower_nb = njit(_trsm_lower_loops)
_trsm_upper_nb = njit(_trsm_upper_loops)


def lu_factor(a, *, use_numba=None):
    """Return ``(lu, piv)`` with ``a[piv] = L @ U``; L unit lower, U upper.

    Raises :class:`SingularMatrixError` when a pivot falls below
    ``1e-12 * max|a|``.
    """
    lu = np.array(a, dtype=np.float64, order="C", copy=True)
    n = lu.shape[0]
    if lu.ndim != 2 or lu.shape[1] != n:
        raise ValueError(f"lu_factor needs a square matrix, got shape {lu.shape}")
    piv = np.arange(n, dtype=np.int64)
    scale = float(np.max(np.abs(lu))) if n else 0.0
    tol = 1e-12 * scale
    if n and scale == 0.0:
        raise SingularMatrixError(0, 0.0, 0.0)
    panel = _lu_panel_nb if _pick(use_numba) else _lu_panel_numpy
    for k0 in range(0, n, LU_BLOCK):
        k1 = min(k0 + LU_BLOCK, n)
        bad = panel(lu, piv, k0, k1, tol)
        if bad >= 0:
            raise SingularMatrixError(int(bad), float(np.max(np.abs(lu[bad:, bad]))), scale)
        if k1 < n:
            lu[k1:, k1:] -= lu[k1:, k0:k1] @ lu[k0:k1, k1:]
    return lu, piv


def lu_solve(lu, piv, b, *, use_numba=None):
    """Solve ``a x = b`` from the factors of :func:`lu_factor`."""
    b = np.asarray(b, dtype=np.float64)
    vector = b.ndim == 1
    x = np.array(b[piv].reshape(b.shape[0], -1), order="C", copy=True)
    n = lu.shape[0]
    if _pick(use_numba):
        lower, upper = _trsm_lower_nb, _trsm_upper_nb
    else:
        lower, upper = _trsm_lower_numpy, _trsm_upper_numpy
    for k0 in range(0, n, LU_BLOCK):
        k1 = min(k0 + LU_BLOCK, n)
        if k0:
            x[k0:k1] -= lu[k0:k1, :k0] @ x[:k0]
        lower(lu, x, k0, k1)
    for k0 in reversed(range(0, n, LU_BLOCK)):
        k1 = min(k0 + LU_BLOCK, n)
        if k1 < n:
            x[k0:k1] -= lu[k0:k1, k1:] @ x[k1:]
        upper(lu, x, k0, k1)
    return x[:, 0] if vector else x


# ---------------------------------------------------------------------------
# Breadth-first search


def _bfs_loops(indptr, indices, src, dist, queue):
    head = 0
    tail = 1
    dist[src] = 0
    queue[0] = src
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if dist[v] < 0:
                dist[v] = du
                queue[tail] = v
                tail += 1


def _all_pairs_bfs_loops(indptr, indices, out):
    n = out.shape[0]
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        _bfs_nb(indptr, indices, s, out[s], queue)


_bfs_nb = njit(_bfs_loops)
_all_pairs_bfs_nb = njit(_all_pairs_bfs_loops)


def _bfs_numpy(indptr, indices, src, dist):
    dist[src] = 0
    frontier = np.array([src], dtype=np.int64)
    level = 0
    while frontier.size:
        level += 1
        starts = indptr[frontier]
        lens = indptr[frontier + 1] - starts
        total = int(lens.sum())
        if total == 0:
            break
        offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens) + np.arange(total)
        nbrs = indices[offsets]
        nbrs = np.unique(nbrs[dist[nbrs] < 0])
        dist[nbrs] = level
        frontier = nbrs


def bfs_distances(indptr, indices, src, *, use_numba=None):
    """Hop distances from ``src``; ``-1`` marks unreachable nodes."""
    n = len(indptr) - 1
    dist = np.full(n, UNREACHED, dtype=np.int64)
    if _pick(use_numba):
        _bfs_nb(indptr, indices, src, dist, np.empty(n, dtype=np.int64))
    else:
        _bfs_numpy(indptr, indices, src, dist)
    return dist


def all_pairs_bfs(indptr, indices, *, use_numba=None):
    """(n, n) int32 hop-distance matrix, row = source; ``-1`` if unreachable."""
    n = len(indptr) - 1
    out = np.full((n, n), UNREACHED, dtype=np.int32)
    if _pick(use_numba):
        _all_pairs_bfs_nb(indptr, indices, out)
    else:
        row = np.empty(n, dtype=np.int64)
        for s in range(n):
            row.fill(UNREACHED)
            _bfs_numpy(indptr, indices, s, row)
            out[s] = row
    return out


def _reach_skip_loops(indptr, indices, src, dst, skip_u, skip_v):
    n = indptr.shape[0] - 1
    seen = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n, dtype=np.int64)
    seen[src] = True
    queue[0] = src
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        if u == dst:
            return True
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if u == skip_u and v == skip_v:
                continue
            if not seen[v]:
                seen[v] = True
                queue[tail] = v
                tail += 1
    return False


_reach_skip_nb = njit(_reach_skip_loops)


def reachable_without_arc(indptr, indices, src, dst, skip_u, skip_v, *, use_numba=None):
    """True if ``dst`` is reachable from ``src`` when arc ``skip_u -> skip_v`` is ignored."""
    fn = _reach_skip_nb if _pick(use_numba) else _reach_skip_loops
    return bool(fn(indptr, indices, src, dst, skip_u, skip_v))


# ---------------------------------------------------------------------------
# Tarjan SCC and bridge finding (iterative; both share the loop source, the
# numpy path runs it interpreted)


def _tarjan_loops(indptr, indices):
    n = indptr.shape[0] - 1
    index = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    onstack = np.zeros(n, dtype=np.bool_)
    comp = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    call_node = np.empty(n, dtype=np.int64)
    call_edge = np.empty(n, dtype=np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for s in range(n):
        if index[s] >= 0:
            continue
        index[s] = counter
        low[s] = counter
        counter += 1
        stack[sp] = s
        sp += 1
        onstack[s] = True
        call_node[0] = s
        call_edge[0] = indptr[s]
        csp = 1
        while csp > 0:
            u = call_node[csp - 1]
            p = call_edge[csp - 1]
            if p < indptr[u + 1]:
                call_edge[csp - 1] = p + 1
                v = indices[p]
                if index[v] < 0:
                    index[v] = counter
                    low[v] = counter
                    counter += 1
                    stack[sp] = v
                    sp += 1
                    onstack[v] = True
                    call_node[csp] = v
                    call_edge[csp] = indptr[v]
                    csp += 1
                elif onstack[v] and index[v] < low[u]:
                    low[u] = index[v]
            else:
                csp -= 1
                if low[u] == index[u]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        onstack[w] = False
                        comp[w] = ncomp
                        if w == u:
                            break
                    ncomp += 1
                if csp > 0:
                    parent = call_node[csp - 1]
                    if low[u] < low[parent]:
                        low[parent] = low[u]
    return comp, ncomp


def _bridges_loops(indptr, indices):
    n = indptr.shape[0] - 1
    disc = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    call_node = np.empty(n, dtype=np.int64)
    call_edge = np.empty(n, dtype=np.int64)
    out = np.empty((max(n - 1, 0), 2), dtype=np.int64)
    nb = 0
    t = 0
    for s in range(n):
        if disc[s] >= 0:
            continue
        disc[s] = t
        low[s] = t
        t += 1
        call_node[0] = s
        call_edge[0] = indptr[s]
        csp = 1
        while csp > 0:
            u = call_node[csp - 1]
            p = call_edge[csp - 1]
            if p < indptr[u + 1]:
                call_edge[csp - 1] = p + 1
                v = indices[p]
                if disc[v] < 0:
                    parent[v] = u
                    disc[v] = t
                    low[v] = t
                    t += 1
                    call_node[csp] = v
                    call_edge[csp] = indptr[v]
                    csp += 1
                elif v != parent[u] and disc[v] < low[u]:
                    low[u] = disc[v]
            else:
                csp -= 1
                if csp > 0:
                    pu = call_node[csp - 1]
                    if low[u] < low[pu]:
                        low[pu] = low[u]
                    if low[u] > disc[pu]:
                        out[nb, 0] = min(u, pu)
                        out[nb, 1] = max(u, pu)
                        nb += 1
    return out[:nb]


_tarjan_nb = njit(_tarjan_loops)
_bridges_nb = njit(_bridges_loops)


def tarjan_scc(indptr, indices, *, use_numba=None):
    """Raw Tarjan labels ``(comp, n_components)`` (reverse topological order)."""
    fn = _tarjan_nb if _pick(use_numba) else _tarjan_loops
    comp, ncomp = fn(indptr, indices)
    return comp, int(ncomp)


def find_bridges(indptr, indices, *, use_numba=None):
    """Bridges of a symmetric CSR graph as an (k, 2) array of ``(min, max)`` pairs."""
    fn = _bridges_nb if _pick(use_numba) else _bridges_loops
    return fn(indptr, indices)


# ---------------------------------------------------------------------------
# Random-walk commute times


def _commute_loops(indptr, indices, i, j, n_walks, seed):
    np.random.seed(seed)
    out = np.empty(n_walks, dtype=np.float64)
    for w in range(n_walks):
        pos = i
        target = j
        back = False
        steps = 0
        while True:
            start = indptr[pos]
            pos = indices[start + np.random.randint(0, indptr[pos + 1] - start)]
            steps += 1
            if pos == target:
                if back:
                    break
                back = True
                target = i
        out[w] = steps
    return out


_commute_nb = njit(_commute_loops)


def _commute_numpy(indptr, indices, i, j, n_walks, seed):
    rng = np.random.default_rng(seed)
    pos = np.full(n_walks, i, dtype=np.int64)
    back = np.zeros(n_walks, dtype=np.bool_)
    steps = np.zeros(n_walks, dtype=np.float64)
    active = np.arange(n_walks)
    while active.size:
        p = pos[active]
        start = indptr[p]
        deg = indptr[p + 1] - start
        nxt = indices[start + (rng.random(active.size) * deg).astype(np.int64)]
        pos[active] = nxt
        steps[active] += 1
        b = back[active]
        b |= nxt == j
        back[active] = b
        active = active[~(b & (nxt == i))]
    return steps


def commute_times(indptr, indices, i, j, n_walks, seed, *, use_numba=None):
    """Sampled round-trip times i -> j -> i of simple random walks.

    The two backends draw from different generators, so samples agree only
    in distribution.
    """
    if i == j:
        raise ValueError("commute time needs distinct endpoints")
    fn = _commute_nb if _pick(use_numba) else _commute_numpy
    return fn(indptr, indices, int(i), int(j), int(n_walks), int(seed))


# ---------------------------------------------------------------------------
# Transportation problem via successive shortest augmenting paths


def _transport_loops(supply, demand, cost, eps):
    k = supply.shape[0]
    m = demand.shape[0]
    sup = supply.copy()
    dem = demand.copy()
    flow = np.zeros((k, m), dtype=np.float64)
    dist_s = np.empty(k, dtype=np.float64)
    dist_t = np.empty(m, dtype=np.float64)
    pred_s = np.empty(k, dtype=np.int64)
    pred_t = np.empty(m, dtype=np.int64)
    remaining = sup.sum()
    while remaining > eps:
        for a in range(k):
            dist_s[a] = 0.0 if sup[a] > eps else np.inf
            pred_s[a] = -1
        for b in range(m):
            dist_t[b] = np.inf
            pred_t[b] = -1
        changed = True
        rounds = 0
        while changed and rounds <= k + m + 1:
            changed = False
            rounds += 1
            for a in range(k):
                da = dist_s[a]
                if da == np.inf:
                    continue
                for b in range(m):
                    nd = da + cost[a, b]
                    if nd < dist_t[b]:
                        dist_t[b] = nd
                        pred_t[b] = a
                        changed = True
            for b in range(m):
                db = dist_t[b]
                if db == np.inf:
                    continue
                for a in range(k):
                    if flow[a, b] > eps:
                        nd = db - cost[a, b]
                        if nd < dist_s[a]:
                            dist_s[a] = nd
                            pred_s[a] = b
                            changed = True
        best = -1
        bd = np.inf
        for b in range(m):
            if dem[b] > eps and dist_t[b] < bd:
                bd = dist_t[b]
                best = b
        if best < 0:
            break
        delta = dem[best]
        b = best
        while True:
            a = pred_t[b]
            pb = pred_s[a]
            if pb < 0:
                if sup[a] < delta:
                    delta = sup[a]
                break
            if flow[a, pb] < delta:
                delta = flow[a, pb]
            b = pb
        dem[best] -= delta
        b = best
        while True:
            a = pred_t[b]
            flow[a, b] += delta
            pb = pred_s[a]
            if pb < 0:
                sup[a] -= delta
                break
            flow[a, pb] -= delta
            b = pb
        remaining -= delta
    return flow, remaining


_transport_nb = njit(_transport_loops)


def transport_plan(supply, demand, cost, eps=0.0, *, use_numba=None):
    """Min-cost transport plan from ``supply`` (k,) to ``demand`` (m,).

    ``cost`` is (k, m) and nonnegative. Totals must match. With integer
    supplies and costs every intermediate value is an exact integer.
    Returns ``(flow, unrouted)``; ``unrouted > eps`` means infeasible.
    """
    supply = np.ascontiguousarray(supply, dtype=np.float64)
    demand = np.ascontiguousarray(demand, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    fn = _transport_nb if _pick(use_numba) else _transport_loops
    flow, unrouted = fn(supply, demand, cost, float(eps))
    return flow, float(unrouted)
