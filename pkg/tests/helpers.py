"""Shared independent oracles for the test suite.

These deliberately avoid the library's own code paths: finite
differences for gradients, naive 6-loop convolutions for conv layers,
and a double-loop MMD estimator.
"""

import math

import numpy as np


def central_diff_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function, entry by entry (64-bit)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2.0 * h)
        it.iternext()
    return g


def rel_err(a, b):
    """Norm-based relative error between two gradient tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


def conv2d_naive(x, W, b, stride, padding):
    """Direct 6-loop convolution, (N,C,H,W) x (co,ci,kh,kw) -> (N,co,Ho,Wo)."""
    n, c, hi, wi = x.shape
    co, ci, kh, kw = W.shape
    assert c == ci
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (hi + 2 * padding - kh) // stride + 1
    wo = (wi + 2 * padding - kw) // stride + 1
    y = np.zeros((n, co, ho, wo), dtype=np.float64)
    for ni in range(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for a in range(kh):
                        for bb in range(kw):
                            for ch in range(ci):
                                acc += W[o, ch, a, bb] * xp[ni, ch, i * stride + a, j * stride + bb]
                    y[ni, o, i, j] = acc + b[o]
    return y


def convtranspose2d_naive(x, W, b, stride, padding):
    """Direct transposed convolution by scatter-add, kernel (ci,co,kh,kw)."""
    n, ci, hi, wi = x.shape
    ci_w, co, kh, kw = W.shape
    assert ci == ci_w
    ho = (hi - 1) * stride - 2 * padding + kh
    wo = (wi - 1) * stride - 2 * padding + kw
    acc = np.zeros((n, co, ho + 2 * padding, wo + 2 * padding), dtype=np.float64)
    for ni in range(n):
        for ch in range(ci):
            for i in range(hi):
                for j in range(wi):
                    v = x[ni, ch, i, j]
                    for o in range(co):
                        for a in range(kh):
                            for bb in range(kw):
                                acc[ni, o, i * stride + a, j * stride + bb] += v * W[ch, o, a, bb]
    y = acc[:, :, padding:padding + ho, padding:padding + wo]
    return y + b.reshape(1, -1, 1, 1)


def gradcheck_layer(spec, x, seed=0, tol=1e-4, h=1e-5):
    """Analytic gradients vs central differences for input and every parameter.

    Runs the library forward/backward once against a random linear
    functional of the output, then finite-differences the same scalar.
    Returns the worst relative error seen (raises on violation).
    """
    from abcas.nn import ParamStore, backward, forward

    store = ParamStore(spec, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(99)
    for lp in store.params:
        for name, arr in lp.items():
            arr += 0.1 * rng.standard_normal(arr.shape)
    y, tape = forward(spec, store, x)
    c = rng.standard_normal(y.shape)

    store.zero_grad()
    dx = backward(tape, c)
    worst = 0.0

    def loss_of_input(xv):
        yv, _ = forward(spec, store, xv)
        return float(np.sum(c * yv))

    err = rel_err(dx, central_diff_grad(loss_of_input, x, h))
    assert err < tol, f"input gradient rel err {err}"
    worst = max(worst, err)

    for i, lp in enumerate(store.params):
        for name in lp:
            orig = lp[name].copy()

            def loss_of_param(pv, i=i, name=name, orig=orig):
                store.params[i][name][...] = pv
                yv, _ = forward(spec, store, x)
                store.params[i][name][...] = orig
                return float(np.sum(c * yv))

            fd = central_diff_grad(loss_of_param, orig, h)
            err = rel_err(store.grads[i][name], fd)
            assert err < tol, f"layer {i} param {name} rel err {err}"
            worst = max(worst, err)
    return worst


def nudge_off_kinks(x, margin=0.05):
    """Move entries away from zero so finite differences never straddle a kink."""
    x = x.copy()
    small = np.abs(x) < margin
    x[small] += margin * np.where(x[small] >= 0, 1.0, -1.0)
    return x


def mmd2_bruteforce(x, y, bw):
    """Unbiased squared MMD by explicit double loops (Gaussian kernel)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = len(x), len(y)

    def k(a, b):
        d = a - b
        return math.exp(-float(np.dot(d, d)) / (2.0 * bw * bw))

    sxx = sum(k(x[i], x[j]) for i in range(n) for j in range(n) if i != j)
    syy = sum(k(y[i], y[j]) for i in range(m) for j in range(m) if i != j)
    sxy = sum(k(x[i], y[j]) for i in range(n) for j in range(m))
    return sxx / (n * (n - 1)) + syy / (m * (m - 1)) - 2.0 * sxy / (n * m)
