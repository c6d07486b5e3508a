"""Point-by-point Lowess written without any vectorisation, used as an oracle."""

import math

import numpy as np


def _weighted_line(xs, ys, ws, x0, degree):
    total = sum(ws)
    if total <= 0:
        return None
    mean_y = sum(w * y for w, y in zip(ws, ys)) / total
    if degree == 0:
        return mean_y
    mean_x = sum(w * x for w, x in zip(ws, xs)) / total
    sxx = sum(w * (x - mean_x) ** 2 for w, x in zip(ws, xs))
    if sxx <= 1e-12 * total:
        return mean_y
    sxy = sum(w * (x - mean_x) * y for w, x, y in zip(ws, xs, ys))
    return mean_y + sxy / sxx * (x0 - mean_x)


def reference_lowess(y, fraction=0.3, iters=2, degree=1):
    y = [float(v) for v in y]
    n = len(y)
    xs = list(range(n))
    k = min(n, max(math.ceil(fraction * n), degree + 2))
    robust = [1.0] * n
    fitted = None
    for it in range(iters + 1):
        out = []
        for i in range(n):
            dists = sorted(abs(j - i) for j in range(n))
            h = dists[k - 1]
            ws = []
            for j in range(n):
                u = min(abs(j - i) / h, 1.0)
                ws.append((1 - u ** 3) ** 3 * robust[j])
            v = _weighted_line(xs, y, ws, i, degree)
            out.append(y[i] if v is None else v)
        fitted = out
        if it == iters:
            break
        resid = [a - b for a, b in zip(y, fitted)]
        s = float(np.median([abs(r) for r in resid]))
        if s <= 1e-7 * sum(abs(v) for v in y) / n:
            break
        robust = [(1 - min(abs(r) / (6 * s), 1.0) ** 2) ** 2 for r in resid]
    return np.array(fitted)
