"""Independent reference implementations used to verify the fast paths.

These are deliberately written as plain, slow scans so they share no code
with the implementations they check.
"""

from __future__ import annotations

import bisect

import numpy as np


def brute_force_extrema(series, window, kind="both"):
    """Windowed extrema by testing every sample against its full window.

    For each sample, the centered open window (t - w/2, t + w/2) is located
    with bisect and every member scanned. A sample qualifies when it
    dominates the window, sits at least w/2 from both series ends, and is
    not a continuation of a tied run. Same-kind neighbours closer than one
    window merge into the more extreme event (earlier wins ties).

    Returns a list of (t, index, value, kind_str) tuples, time-sorted with
    minima ordered before maxima at equal times.
    """
    ts = [float(t) for t, _ in series]
    vs = [float(v) for _, v in series]
    n = len(ts)
    half = window / 2.0
    events = []
    for kind_str in ("minimum", "maximum"):
        if kind not in (kind_str, "both"):
            continue
        for i in range(n):
            if ts[i] - ts[0] < half or ts[-1] - ts[i] < half:
                continue
            if i > 0 and vs[i - 1] == vs[i]:
                continue
            lo = bisect.bisect_right(ts, ts[i] - half)
            hi = bisect.bisect_left(ts, ts[i] + half)
            segment = vs[lo:hi]
            if kind_str == "maximum":
                ok = all(vs[i] >= v for v in segment)
            else:
                ok = all(vs[i] <= v for v in segment)
            if ok:
                events.append((ts[i], i, vs[i], kind_str))
    events.sort(key=lambda e: (e[0], 0 if e[3] == "minimum" else 1))
    merged = []
    for event in events:
        current = event
        while merged and merged[-1][3] == current[3] and \
                (current[0] - merged[-1][0]) < window:
            prev = merged.pop()
            if current[3] == "maximum":
                keep_prev = prev[2] >= current[2]
            else:
                keep_prev = prev[2] <= current[2]
            if keep_prev:
                current = prev
        merged.append(current)
    return merged


def solve_linear_system_by_elimination(a, b):
    """Gaussian elimination with partial pivoting, no numpy.linalg."""
    a = [list(map(float, row)) for row in a]
    b = [float(v) for v in b]
    n = len(b)
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(a[r][col]))
        if abs(a[pivot][col]) < 1e-12:
            raise ValueError("singular system")
        a[col], a[pivot] = a[pivot], a[col]
        b[col], b[pivot] = b[pivot], b[col]
        for r in range(col + 1, n):
            factor = a[r][col] / a[col][col]
            for c in range(col, n):
                a[r][c] -= factor * a[col][c]
            b[r] -= factor * b[col]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        acc = b[r] - sum(a[r][c] * x[c] for c in range(r + 1, n))
        x[r] = acc / a[r][r]
    return x


def sliding_dot_conv1d(x, w, bias, stride=1, dilation=1):
    """Direct sliding-dot-product 1D valid cross-correlation.

    x: (C, T), w: (O, C, K), bias: (O,). Returns (O, T_out).
    """
    c, t = x.shape
    o, _, k = w.shape
    span = (k - 1) * dilation + 1
    t_out = (t - span) // stride + 1
    out = np.zeros((o, t_out))
    for oc in range(o):
        for i in range(t_out):
            acc = 0.0
            for ic in range(c):
                for j in range(k):
                    acc += w[oc, ic, j] * x[ic, i * stride + j * dilation]
            out[oc, i] = acc + bias[oc]
    return out


def perceptron_separable(features, labels, max_iters=2000):
    """Perceptron convergence check: returns True iff it finds a separator.

    labels must be +/-1. Convergence of the perceptron rule proves linear
    separability; non-convergence within the budget strongly suggests not.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    aug = np.hstack([x, np.ones((len(x), 1))])
    w = np.zeros(aug.shape[1])
    for _ in range(max_iters):
        mistakes = 0
        for xi, yi in zip(aug, y):
            if yi * (w @ xi) <= 0:
                w = w + yi * xi
                mistakes += 1
        if mistakes == 0:
            return True
    return False


def central_difference_gradients(loss_fn, arrays, eps=1e-4):
    """Numeric gradient of loss_fn() with respect to each array, in place."""
    grads = []
    for arr in arrays:
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = grad.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp = loss_fn()
            flat[idx] = orig - eps
            lm = loss_fn()
            flat[idx] = orig
            gflat[idx] = (lp - lm) / (2.0 * eps)
        grads.append(grad)
    return grads
