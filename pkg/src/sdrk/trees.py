"""Rooted trees up to order 6 and their Runge-Kutta elementary weights.

A tree is a sorted tuple of its root's subtrees; the single vertex is ``()``.
"""

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

MAX_ORDER = 6


def order(tree):
    return 1 + sum(order(t) for t in tree)


def density(tree):
    """Butcher's density gamma(t)."""
    g = order(tree)
    for t in tree:
        g *= density(t)
    return g


def _partitions(n, largest=None):
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


@lru_cache(maxsize=None)
def trees_of_order(n):
    if n == 1:
        return ((),)
    found = set()
    for parts in _partitions(n - 1):
        groups = {}
        for k in parts:
            groups[k] = groups.get(k, 0) + 1
        choices = [list(combinations_with_replacement(trees_of_order(k), m))
                   for k, m in sorted(groups.items())]
        stack = [()]
        for options in choices:
            stack = [acc + opt for acc in stack for opt in options]
        for children in stack:
            found.add(tuple(sorted(children)))
    return tuple(sorted(found, key=repr))


# frozen table (tree, density) per order, built once at import
TREE_TABLE = {n: tuple((t, density(t)) for t in trees_of_order(n))
              for n in range(1, MAX_ORDER + 1)}


def stage_weights(tree, A):
    """Vector g(t) with g(leaf) = e and g([t1..tk]) = prod_i A g(t_i)."""
    g = np.ones(A.shape[0])
    for child in tree:
        g = g * (A @ stage_weights(child, A))
    return g


def elementary_weight(tree, A, b):
    return float(b @ stage_weights(tree, A))
