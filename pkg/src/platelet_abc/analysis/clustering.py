"""Average-linkage agglomerative clustering and the rand index."""

from __future__ import annotations

import numpy as np


def rand_index(a, b) -> float:
    """Fraction of item pairs on which two partitions agree (same/different cluster)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("partitions must label the same items")
    n = a.size
    if n < 2:
        raise ValueError("need at least two items")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(c):
        c = np.asarray(c, dtype=np.int64)
        return int((c * (c - 1) // 2).sum())

    total = n * (n - 1) // 2
    both = pairs(table)
    agree = total + 2 * both - pairs(table.sum(axis=1)) - pairs(table.sum(axis=0))
    return agree / total


def linkage_merges(points) -> list:
    """Full average-linkage merge sequence.

    Returns ``[(members_a, members_b, distance), ...]`` where members are sorted
    tuples of item indices. At each step the closest pair of clusters merges; equal
    distances go to the pair whose smallest item indices are lexicographically
    smallest.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    D = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1))
    clusters = {i: (i,) for i in range(n)}
    dist = {(i, j): D[i, j] for i in range(n) for j in range(i + 1, n)}
    merges = []
    while len(clusters) > 1:
        # keys are the minimum member of each cluster, so key order is the tie-break
        (i, j), dmin = min(dist.items(), key=lambda kv: (kv[1], kv[0]))
        a, b = clusters.pop(i), clusters.pop(j)
        merges.append((a, b, float(dmin)))
        new = tuple(sorted(a + b))
        for key in [k for k in dist if i in k or j in k]:
            del dist[key]
        new_key = new[0]
        for k, members in clusters.items():
            # average linkage from member distances, no incremental update error
            d = float(D[np.ix_(new, members)].mean())
            dist[(min(new_key, k), max(new_key, k))] = d
        clusters[new_key] = new
    return merges


def hierarchical_cluster(points, n_clusters: int) -> np.ndarray:
    """Cut the average-linkage tree at ``n_clusters``.

    Labels are 0-based, numbered by first appearance in item order.
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if n_clusters < 1:
        raise ValueError("n_clusters must be at least 1")
    if n_clusters > n:
        raise ValueError("more clusters requested than points")
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b, _ in linkage_merges(X)[: n - n_clusters]:
        ra, rb = find(a[0]), find(b[0])
        parent[max(ra, rb)] = min(ra, rb)
    roots = [find(i) for i in range(n)]
    relabel = {}
    return np.array([relabel.setdefault(r, len(relabel)) for r in roots], dtype=np.int64)
