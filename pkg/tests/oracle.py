"""Independent brute-force oracles. Nothing here imports the optimizer."""

import itertools
import math

import numpy as np


def enumerate_optimum(matrix, weights):
    """Try every one-choice-per-group combination.

    Returns (best objective, list of optimal combinations), each combination
    a tuple of choice names in group order.
    """
    best, argbest = None, []
    for combo in itertools.product(*(g.choices for g in matrix.groups)):
        total = 0
        for code in set(matrix.qas) | set(weights.weights):
            score_j = sum(c.impacts.get(code, 0) for c in combo)
            total += score_j * weights.weights.get(code, 0)
        names = tuple(c.name for c in combo)
        if best is None or total > best:
            best, argbest = total, [names]
        elif total == best:
            argbest.append(names)
    return best, argbest


def enumerate_optimum_np(matrix, weights):
    """Same enumeration as :func:`enumerate_optimum`, vectorised.

    Builds each QA's satisfaction score over the full grid of combinations
    by outer sums, weights them, and scans the whole grid. Returns (best
    objective, optimal combinations as choice-index tuples).
    """
    codes = sorted(set(matrix.qas) | set(weights.weights))
    shape = tuple(len(g.choices) for g in matrix.groups)
    total = np.zeros(shape, dtype=np.int64)
    for code in codes:
        w = weights.weights.get(code, 0)
        if not w:
            continue
        col = np.zeros((), dtype=np.int64)
        for g in matrix.groups:
            col = np.add.outer(col, np.array([c.impacts.get(code, 0) for c in g.choices]))
        total += w * col
    best = int(total.max())
    return best, [tuple(int(i) for i in ix) for ix in np.argwhere(total == best)]


def group_values(group, weights):
    return {
        c.name: sum(v * weights.weights.get(q, 0) for q, v in c.impacts.items())
        for c in group.choices
    }


def count_weights(asr_ids, qas_by_id):
    counts = {}
    for rid in asr_ids:
        for qa in set(qas_by_id[rid]):
            counts[qa] = counts.get(qa, 0) + 1
    return counts


def cosine_distance(u, v):
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return 1.0 - dot / (nu * nv)
