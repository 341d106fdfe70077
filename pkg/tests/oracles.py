"""Independent brute-force oracles used to check the real implementations.

Everything here is written from the definitions alone, in the most naive way
possible, and must not import the modules it is checking beyond plain data
types. Keep these slow and obvious.
"""

from __future__ import annotations

from collections import Counter

import numpy as np


# ---------------------------------------------------------------------------
# Graph expansion, straight from the definitions
# ---------------------------------------------------------------------------


def bf_expand_l1(seeds, records, cpc_level="subgroup", include_citing=False):
    """records: iterable of PatentRecord. Quadratic scan over all pairs."""
    by_id = {r.patent_id: r for r in records}

    def codes(rec):
        if cpc_level == "subgroup":
            return {str(c) for c in rec.cpc_codes}
        return {c.subclass for c in rec.cpc_codes}

    out = set(seeds)
    for s in seeds:
        seed_rec = by_id[s]
        for pid, rec in by_id.items():
            if codes(seed_rec) & codes(rec):
                out.add(pid)
            if pid in seed_rec.citations:
                out.add(pid)
            if include_citing and s in rec.citations:
                out.add(pid)
    return out


def bf_expand_l2(l1, records):
    by_id = {r.patent_id: r for r in records}
    out = set(l1)
    for p in l1:
        fam = by_id[p].family_id
        if not fam:
            continue
        for pid, rec in by_id.items():
            if rec.family_id == fam:
                out.add(pid)
    return out


def bf_khop_codes(patent_id, k, records):
    """Enumerate citation paths explicitly and tally subclass codes/pairs."""
    by_id = {r.patent_id: r for r in records}

    def subclasses(pid):
        rec = by_id.get(pid)
        return sorted({c.subclass for c in rec.cpc_codes}) if rec else []

    counts: Counter = Counter()
    if k == 1:
        for q in set(by_id[patent_id].citations):
            for sc in subclasses(q):
                counts[sc] += 1
    else:
        for q in set(by_id[patent_id].citations):
            if q not in by_id:
                continue
            for r in set(by_id[q].citations):
                for x in subclasses(q):
                    for y in subclasses(r):
                        counts[(x, y)] += 1
    return counts


# ---------------------------------------------------------------------------
# SVM dual oracle: projected-gradient ascent on the box-and-hyperplane QP
# ---------------------------------------------------------------------------


def _project_box_hyperplane(z, y, C):
    """Euclidean projection of z onto {0 <= a <= C, y.a = 0}.

    The projection is clip(z - nu*y, 0, C) where g(nu) = y.clip(...) is
    piecewise linear and non-increasing; the root is found exactly from the
    sorted breakpoints.
    """
    bps = np.sort(np.concatenate([z * y, (z - C) * y]))
    g = (y[None, :] * np.clip(z[None, :] - bps[:, None] * y[None, :], 0.0, C)).sum(axis=1)
    crossing = int(np.argmax(g <= 0.0))
    lo, hi = bps[crossing - 1], bps[crossing]
    g_lo, g_hi = g[crossing - 1], g[crossing]
    nu = lo if g_lo == g_hi else lo + (hi - lo) * g_lo / (g_lo - g_hi)
    return np.clip(z - nu * y, 0.0, C)


def _dual_value(alpha, Q):
    return float(alpha.sum() - 0.5 * alpha @ Q @ alpha)


def bf_solve_svm_dual(K, y, C, steps=1200):
    """Maximize sum(a) - 0.5 a^T (K*yy^T) a over the feasible set.

    Projected-gradient ascent with exact projections, then an active-set
    polish (solve the KKT system on the free coordinates). Only meant for
    tiny instances (n <= 12); returns (alpha, objective).
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    Q = K * np.outer(y, y)
    step = 1.0 / max(float(np.linalg.eigvalsh(Q)[-1]), 1e-9)
    alpha = _project_box_hyperplane(np.full(n, C / 2.0), y, C)
    for _ in range(steps):
        alpha = _project_box_hyperplane(alpha + step * (1.0 - Q @ alpha), y, C)
    best = _dual_value(alpha, Q)

    # Polish: freeze near-bound coordinates, solve the equality-constrained
    # QP on the rest, keep the result if it is feasible and better.
    eps = 1e-8 * max(C, 1.0)
    free = (alpha > eps) & (alpha < C - eps)
    if free.any():
        fixed = ~free
        nf = int(free.sum())
        system = np.zeros((nf + 1, nf + 1))
        system[:nf, :nf] = Q[np.ix_(free, free)]
        system[:nf, nf] = y[free]
        system[nf, :nf] = y[free]
        rhs = np.zeros(nf + 1)
        rhs[:nf] = 1.0 - Q[np.ix_(free, fixed)] @ alpha[fixed]
        rhs[nf] = -float(y[fixed] @ alpha[fixed])
        solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        candidate = alpha.copy()
        candidate[free] = solution[:nf]
        candidate = _project_box_hyperplane(candidate, y, C)
        value = _dual_value(candidate, Q)
        if value > best:
            alpha, best = candidate, value
    return alpha, best


def rbf_kernel_matrix(X, gamma):
    X = np.asarray(X, dtype=np.float64)
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * sq)


# ---------------------------------------------------------------------------
# Metrics, counted by hand
# ---------------------------------------------------------------------------


def bf_f1(y_true, y_pred, positive=1):
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == positive and p == positive)
    fp = sum(1 for t, p in zip(y_true, y_pred) if t != positive and p == positive)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t == positive and p != positive)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def bf_cohens_kappa(a, b):
    n = len(a)
    categories = sorted(set(a) | set(b))
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    p_e = sum(
        (sum(1 for x in a if x == c) / n) * (sum(1 for y in b if y == c) / n)
        for c in categories
    )
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


# ---------------------------------------------------------------------------
# Finite-difference gradients
# ---------------------------------------------------------------------------


def central_difference(f, x, h=1e-4):
    """Gradient of scalar f at flat vector x by central differences."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        bump = np.zeros_like(x)
        bump[i] = h
        grad[i] = (f(x + bump) - f(x - bump)) / (2 * h)
    return grad
