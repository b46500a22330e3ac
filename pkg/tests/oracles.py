"""Independent reference computations used by the tests.

Everything here is written directly from the definitions with explicit loops
over samples and codewords, sharing no code with the package.
"""

import math

import numpy as np


def codeword(k, M):
    y = np.zeros(M)
    y[k] = 1.0
    return y


def naive_loss(f, label, M):
    yi = codeword(label, M)
    return sum(math.exp(-0.5 * np.dot(f, yi - codeword(k, M))) for k in range(M))


def naive_risk(F, labels, M):
    total = 0.0
    for f, lab in zip(F, labels):
        total += naive_loss(f, lab, M)
    return total


def naive_w(f, label, M):
    yi = codeword(label, M)
    acc = np.zeros(M)
    for k in range(M):
        yk = codeword(k, M)
        acc += (yi - yk) * math.exp(0.5 * np.dot(f, yk))
    return 0.5 * math.exp(-0.5 * np.dot(f, yi)) * acc


def naive_w_tilde(f, label, M):
    yi = codeword(label, M)
    acc = np.zeros(M)
    for k in range(M):
        yk = codeword(k, M)
        acc += (yi - yk) * math.sqrt(math.exp(-0.5 * np.dot(f, yi - yk)))
    return acc


def naive_w_hat(f, label, M):
    yi = codeword(label, M)
    acc = 0.0
    for k in range(M):
        yk = codeword(k, M)
        acc += np.dot(yi - yk, yi - yk) * math.exp(0.5 * np.dot(f, yk))
    return math.exp(-0.5 * np.dot(f, yi)) * acc


def naive_surrogate(G, H, W, Wt, Wh, base, eps, delta):
    """Term-by-term evaluation of the second-order risk expansion."""
    lin_g = lin_h = quad_g = quad_h = 0.0
    for i in range(len(W)):
        lin_g += float(np.dot(G[i], W[i]))
        lin_h += float(np.dot(H[i], W[i]))
        quad_g += float(np.dot(G[i], G[i])) + 2.0 * float(np.dot(G[i], Wt[i])) + float(Wh[i])
        quad_h += float(np.dot(H[i], H[i])) + 2.0 * float(np.dot(H[i], Wt[i])) + float(Wh[i])
    return (base - eps * lin_g - delta * lin_h
            + eps**2 / 2 * (quad_g / 4) + delta**2 / 2 * (quad_h / 4)
            + eps * delta / 2 * (lin_g + lin_h))


def best_stump(x, Y, min_leaf=1):
    """Exhaustive depth-1 split search on one feature: (sse, threshold)."""
    order = sorted(set(x))
    best = (float(((Y - Y.mean(0)) ** 2).sum()), None)
    for a, b in zip(order[:-1], order[1:]):
        thr = (a + b) / 2
        left, right = Y[x < thr], Y[x >= thr]
        if len(left) < min_leaf or len(right) < min_leaf:
            continue
        sse = float(((left - left.mean(0)) ** 2).sum() + ((right - right.mean(0)) ** 2).sum())
        if sse < best[0] - 1e-15:
            best = (sse, thr)
    return best


def central_difference(fun, params, h=1e-5):
    """Gradient of ``fun()`` w.r.t. every entry of every array in ``params`` (mutated in place)."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + h
            up = fun()
            p[idx] = old - h
            down = fun()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def max_relative_error(a, b, floor=1e-7):
    """Largest |a-b| / max(|a|, |b|, floor) over all entries."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))
