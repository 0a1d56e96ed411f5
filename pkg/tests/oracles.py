"""Slow, independent reference computations used as test oracles.

Nothing here imports the package: each function recomputes its quantity
from the definition with plain Python loops or mpmath.
"""
import itertools
import math

import mpmath

mpmath.mp.dps = 50


def energy_mp(v, memories, beta, weights=None):
    """-(1/beta) log sum_mu w_mu exp(-beta ||rho_mu - v||^2) at 50 digits."""
    beta = mpmath.mpf(beta)
    total = mpmath.mpf(0)
    for j, mem in enumerate(memories):
        w = mpmath.mpf(1 if weights is None else weights[j])
        sq = sum((mpmath.mpf(a) - mpmath.mpf(b)) ** 2 for a, b in zip(mem, v))
        total += w * mpmath.e ** (-beta * sq)
    return -mpmath.log(total) / beta


def attractions_loop(v, memories, beta, weights=None):
    z = []
    for j, mem in enumerate(memories):
        sq = sum((a - b) ** 2 for a, b in zip(mem, v))
        z.append(-beta * sq + math.log(1 if weights is None else weights[j]))
    top = max(z)
    e = [math.exp(x - top) for x in z]
    s = sum(e)
    return [x / s for x in e]


def step_loop(v, memories, beta, step_size, weights=None, observed=None):
    """One euclidean update written coordinate by coordinate."""
    attn = attractions_loop(v, memories, beta, weights)
    out = []
    for i, vi in enumerate(v):
        if observed is not None and observed[i]:
            out.append(vi)
            continue
        move = step_size * sum(s * (mem[i] - vi) for s, mem in zip(attn, memories))
        out.append(vi + move)
    return out


def silhouette_brute(points, labels):
    n = len(points)

    def dist(a, b):
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))

    clusters = sorted(set(labels))
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(dist(points[i], points[j]) for j in own) / len(own)
        b = min(
            sum(dist(points[i], points[j]) for j in range(n) if labels[j] == c)
            / sum(1 for j in range(n) if labels[j] == c)
            for c in clusters if c != labels[i])
        scores.append((b - a) / max(a, b))
    return sum(scores) / n


def _entropy(labels):
    n = len(labels)
    return -sum((c / n) * math.log(c / n) for c in (labels.count(v) for v in set(labels)))


def nmi_brute(a, b):
    a, b = list(a), list(b)
    n = len(a)
    mi = 0.0
    for u in set(a):
        for v in set(b):
            nij = sum(1 for x, y in zip(a, b) if x == u and y == v)
            if nij:
                mi += nij / n * math.log(n * nij / (a.count(u) * b.count(v)))
    ha, hb = _entropy(a), _entropy(b)
    if ha == 0 and hb == 0:
        return 1.0
    denom = (ha + hb) / 2
    return mi / denom if denom > 0 else 0.0


def ari_brute(a, b):
    """Pair counting over all n choose 2 pairs."""
    pairs = list(itertools.combinations(range(len(a)), 2))
    same_a = [a[i] == a[j] for i, j in pairs]
    same_b = [b[i] == b[j] for i, j in pairs]
    index = sum(1 for x, y in zip(same_a, same_b) if x and y)
    sa, sb, total = sum(same_a), sum(same_b), len(pairs)
    expected = sa * sb / total
    maximum = (sa + sb) / 2
    if maximum == expected:
        return 1.0
    return (index - expected) / (maximum - expected)


def best_partition_inertia(points, k):
    """Minimum k-means objective over every labelling of 1-D points."""
    best = math.inf
    for labels in itertools.product(range(k), repeat=len(points)):
        if len(set(labels)) != k:
            continue
        cost = 0.0
        for c in range(k):
            members = [p for p, l in zip(points, labels) if l == c]
            m = sum(members) / len(members)
            cost += sum((p - m) ** 2 for p in members)
        best = min(best, cost)
    return best
