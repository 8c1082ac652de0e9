"""Naive reference implementations used as test oracles.

None of these import the package; each recomputes a quantity the slow,
obvious way so that agreement is meaningful.
"""
from __future__ import annotations

import math
from itertools import product

import numpy as np


def naive_stats(x) -> tuple:
    x = [float(v) for v in x]
    n = len(x)
    mu = math.fsum(x) / n
    sigma = math.sqrt(math.fsum((v - mu) ** 2 for v in x) / n)
    afd = math.fsum(abs(x[t + 1] - x[t]) for t in range(n - 1)) / (n - 1)
    asd = math.fsum(abs(x[t + 2] - x[t]) for t in range(n - 2)) / (n - 2)
    return mu, sigma, afd, afd / sigma, asd, asd / sigma


def binomial_difference(z, k: int) -> np.ndarray:
    """(k-1)-th backward difference from the explicit binomial expansion.

    y_t = sum_{j=1..k} C(k-1, j-1) (-1)^(j-1) z_{t-j+1},  t = k..N (1-based).
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    y = np.zeros(n - k + 1)
    for j in range(1, k + 1):
        y += math.comb(k - 1, j - 1) * (-1) ** (j - 1) * z[k - j:n - j + 1]
    return y


def loop_sign_changes(y) -> int:
    count = 0
    prev = None
    for v in y:
        sym = 1 if v >= 0 else 0
        if prev is not None:
            count += (sym - prev) ** 2
        prev = sym
    return count


def naive_hoc(x, max_order: int) -> list:
    x = np.asarray(x, dtype=np.float64)
    z = x - math.fsum(x.tolist()) / x.size
    return [loop_sign_changes(binomial_difference(z, k)) for k in range(1, max_order + 1)]


def mann_whitney_auc(scores, positive) -> float:
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(positive, dtype=bool)
    sp, sn = s[pos], s[~pos]
    u = 0.0
    for a in sp:
        u += float(np.sum(a > sn)) + 0.5 * float(np.sum(a == sn))
    return u / (sp.size * sn.size)


def best_linear_accuracy(X, y, n_angles: int = 720) -> float:
    """Highest training accuracy of any 2-D linear separator, by sweeping
    directions and every threshold between projected points."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    best = 0.0
    for theta in np.linspace(0.0, np.pi, n_angles, endpoint=False):
        proj = X @ np.array([np.cos(theta), np.sin(theta)])
        p = np.sort(proj)
        cuts = np.r_[p[0] - 1.0, 0.5 * (p[1:] + p[:-1]), p[-1] + 1.0]
        for c, (a, b) in product(cuts, [(classes[0], classes[-1]), (classes[-1], classes[0])]):
            pred = np.where(proj > c, b, a)
            best = max(best, float(np.mean(pred == y)))
    return best


def periodogram_peak_hz(x, fs: float) -> float:
    spec = np.abs(np.fft.rfft(np.asarray(x) - np.mean(x))) ** 2
    return float(np.fft.rfftfreq(len(x), 1.0 / fs)[int(np.argmax(spec))])


def sine_amplitude(y, f: float, fs: float) -> float:
    """Least-squares amplitude of a sinusoid at ``f`` in ``y``."""
    t = np.arange(len(y)) / fs
    A = np.column_stack([np.sin(2 * np.pi * f * t), np.cos(2 * np.pi * f * t)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(np.hypot(*coef))


def table_label(r: float, scheme: str):
    """Rating -> label title straight from the published range table."""
    if 1.0 <= r <= 3.0:
        lab = "Low"
    elif 4.0 <= r <= 6.0:
        lab = "Medium"
    elif 7.0 <= r <= 9.0:
        lab = "High"
    else:
        return None
    if scheme == "bipartition" and lab == "Medium":
        return None
    return lab


def gini_best_split(x, y):
    """Exhaustive Gini-impurity split on one feature: (threshold, weighted impurity)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n = y.size

    def gini(lab):
        if lab.size == 0:
            return 0.0
        _, c = np.unique(lab, return_counts=True)
        p = c / lab.size
        return 1.0 - float(np.sum(p * p))

    best = (None, math.inf)
    vals = np.unique(x)
    for a, b in zip(vals[:-1], vals[1:]):
        thr = 0.5 * (a + b)
        left = y[x <= thr]
        right = y[x > thr]
        imp = (left.size * gini(left) + right.size * gini(right)) / n
        if imp < best[1] - 1e-15:
            best = (thr, imp)
    return best
