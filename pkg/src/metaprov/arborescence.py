"""Exhaustive enumeration of rooted labeled spanning trees.

Labeled trees on n nodes are enumerated through their Prufer sequences
(n^(n-2) of them); each undirected tree is then oriented from each of the
n possible roots, covering all n^(n-1) rooted trees. The enumeration is
vectorized across all sequences at once and the per-n structure tables are
cached, so scoring a new weight matrix costs one fancy-indexed gather per
tree edge column.

Enumeration order is deterministic: ascending root id, then lexicographic
parent vector. The first minimum of the weight totals therefore realizes
the documented tie-breaking.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "prufer_decode",
    "prufer_encode",
    "rooted_parents_from_edges",
    "min_weight_arborescence",
    "enumeration_size",
]

# Per-n structure tables: (parents_stack, children_stack, roots, flat_index).
_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}


def prufer_decode(seq: list[int], n: int) -> list[tuple[int, int]]:
    """Reference scalar decode: Prufer sequence -> undirected edge list."""
    if n == 1:
        return []
    if len(seq) != n - 2:
        raise ValueError(f"sequence length must be n-2, got {len(seq)} for n={n}")
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges: list[tuple[int, int]] = []
    for x in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((leaf, x))
        degree[leaf] = 0
        degree[x] -= 1
    u, v = (i for i in range(n) if degree[i] == 1)
    edges.append((u, v))
    return edges


def prufer_encode(edges: list[tuple[int, int]], n: int) -> list[int]:
    """Inverse of prufer_decode, used to fingerprint sampled tree shapes."""
    if n <= 2:
        return []
    adjacency: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        adjacency[u].add(v)
        adjacency[v].add(u)
    seq = []
    for _ in range(n - 2):
        leaf = min(i for i in range(n) if len(adjacency[i]) == 1)
        neighbor = next(iter(adjacency[leaf]))
        seq.append(neighbor)
        adjacency[neighbor].discard(leaf)
        adjacency[leaf].clear()
    return seq


def rooted_parents_from_edges(edges: list[tuple[int, int]], root: int, n: int) -> dict[int, int]:
    """Orient an undirected tree away from the root: child -> parent map."""
    adjacency: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    parents: dict[int, int] = {}
    stack = [root]
    seen = {root}
    while stack:
        node = stack.pop()
        for neighbor in adjacency[node]:
            if neighbor not in seen:
                seen.add(neighbor)
                parents[neighbor] = node
                stack.append(neighbor)
    if len(seen) != n:
        raise ValueError("edge list does not form a spanning tree")
    return parents


def enumeration_size(n: int) -> int:
    """Number of rooted labeled trees scored for n nodes: n^(n-1)."""
    return n ** (n - 1) if n > 1 else 1


def _all_sequences(n: int) -> np.ndarray:
    """All n^(n-2) Prufer sequences, lexicographic, shape (S, n-2)."""
    length = n - 2
    count = n**length
    idx = np.arange(count, dtype=np.int64)
    seqs = np.empty((count, length), dtype=np.int8)
    for j in range(length):
        seqs[:, j] = (idx // (n ** (length - 1 - j))) % n
    return seqs


def _decode_batch(seqs: np.ndarray, n: int) -> np.ndarray:
    """Vectorized Prufer decode: (S, n-2) sequences -> (S, n-1, 2) edges."""
    count = seqs.shape[0]
    rows = np.arange(count)
    degree = np.ones((count, n), dtype=np.int16)
    for j in range(seqs.shape[1]):
        np.add.at(degree, (rows, seqs[:, j].astype(np.int64)), 1)
    edges = np.empty((count, n - 1, 2), dtype=np.int8)
    for t in range(seqs.shape[1]):
        leaf = np.argmax(degree == 1, axis=1)
        x = seqs[:, t].astype(np.int64)
        edges[:, t, 0] = leaf
        edges[:, t, 1] = x
        degree[rows, leaf] = 0
        degree[rows, x] -= 1
    remaining = degree == 1
    first = np.argmax(remaining, axis=1)
    remaining[rows, first] = False
    second = np.argmax(remaining, axis=1)
    edges[:, n - 2, 0] = first.astype(np.int8)
    edges[:, n - 2, 1] = second.astype(np.int8)
    return edges


def _orient_batch(edges: np.ndarray, root: int, n: int) -> np.ndarray:
    """Parent vector (root entry -1) for every tree, oriented from root."""
    count = edges.shape[0]
    rows = np.arange(count)
    parent = np.full((count, n), -1, dtype=np.int8)
    visited = np.zeros((count, n), dtype=bool)
    visited[:, root] = True
    for _ in range(n - 1):
        for e in range(n - 1):
            u = edges[:, e, 0].astype(np.int64)
            v = edges[:, e, 1].astype(np.int64)
            vu = visited[rows, u]
            vv = visited[rows, v]
            grow_v = vu & ~vv
            if grow_v.any():
                parent[rows[grow_v], v[grow_v]] = u[grow_v]
                visited[rows[grow_v], v[grow_v]] = True
            grow_u = vv & ~vu
            if grow_u.any():
                parent[rows[grow_u], u[grow_u]] = v[grow_u]
                visited[rows[grow_u], u[grow_u]] = True
        if visited.all():
            break
    return parent


def _structure_tables(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Cached (parents, children, roots, flat) stacks covering all rooted trees.

    parents/children have shape (n^(n-1), n-1): column c holds the c-th
    directed edge of each tree. roots has shape (n^(n-1),). flat holds
    parent * n + child for gathering from a raveled weight matrix.
    """
    if n in _CACHE:
        return _CACHE[n]
    edges = _decode_batch(_all_sequences(n), n)
    parent_blocks = []
    child_blocks = []
    root_blocks = []
    for root in range(n):
        oriented = _orient_batch(edges, root, n)
        children = np.array([j for j in range(n) if j != root], dtype=np.int8)
        block = oriented[:, children.astype(np.int64)]
        order = np.lexsort(tuple(block[:, j] for j in reversed(range(n - 1))))
        parent_blocks.append(block[order])
        child_blocks.append(np.broadcast_to(children, block.shape))
        root_blocks.append(np.full(block.shape[0], root, dtype=np.int8))
    parents = np.concatenate(parent_blocks)
    children = np.ascontiguousarray(np.concatenate(child_blocks))
    flat = parents.astype(np.int16) * n + children
    tables = (parents, children, np.concatenate(root_blocks), flat)
    _CACHE[n] = tables
    return tables


def min_weight_arborescence(weights: np.ndarray) -> tuple[int, dict[int, int]]:
    """Minimum-total-weight rooted spanning tree of the complete digraph.

    weights[i, j] is the cost of the directed edge i -> j. Ties resolve to
    the smallest root id, then the lexicographically smallest parent vector.
    Returns (root, child -> parent map).
    """
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError("weights must be a square matrix")
    if n == 1:
        return 0, {}
    parents, children, roots, flat = _structure_tables(n)
    w_flat = np.ascontiguousarray(w).ravel()
    totals = np.zeros(parents.shape[0])
    for c in range(n - 1):
        totals += w_flat[flat[:, c]]
    best = int(np.argmin(totals))
    root = int(roots[best])
    parent_map = {
        int(children[best, c]): int(parents[best, c]) for c in range(n - 1)
    }
    return root, parent_map
