"""Hot training kernels with a numba path and a pure-numpy path.

Set ``SWARMLEARN_DISABLE_NUMBA=1`` to force the numpy path. Both paths run
the same mini-batch AdamW epoch; they agree to rounding error, not bit for
bit, so a run is only reproducible within one path.

Flat parameter layout for ``input_dim=d`` and ``hidden=h``:

* ``h == 0``: ``w[d] | b[1]``
* ``h > 0``:  ``W1[h, d] (row-major) | b1[h] | w2[h] | b2[1]``
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and os.environ.get("SWARMLEARN_DISABLE_NUMBA", "").lower() not in (
    "1", "true", "yes", "on")

PROB_CLAMP = 1e-12


def param_count(d: int, h: int) -> int:
    return d + 1 if h == 0 else h * d + 2 * h + 1


# ---------------------------------------------------------------- numpy path

def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_np(w, X, d, h):
    """Return (probabilities, hidden activations or None)."""
    if h == 0:
        return _sigmoid(X @ w[:d] + w[d]), None
    W1 = w[:h * d].reshape(h, d)
    b1 = w[h * d:h * d + h]
    w2 = w[h * d + h:h * d + 2 * h]
    b2 = w[h * d + 2 * h]
    act = np.maximum(X @ W1.T + b1, 0.0)
    return _sigmoid(act @ w2 + b2), act


def loss_grad_np(w, X, y, d, h):
    """Mean binary cross-entropy and its gradient for one batch."""
    n = X.shape[0]
    p, act = forward_np(w, X, d, h)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    delta = (p - y) / n
    grad = np.empty_like(w)
    if h == 0:
        grad[:d] = X.T @ delta
        grad[d] = delta.sum()
        return loss, grad
    w2 = w[h * d + h:h * d + 2 * h]
    grad[h * d + h:h * d + 2 * h] = act.T @ delta
    grad[h * d + 2 * h] = delta.sum()
    dz = np.outer(delta, w2) * (act > 0.0)
    grad[:h * d] = (dz.T @ X).reshape(-1)
    grad[h * d:h * d + h] = dz.sum(axis=0)
    return loss, grad


def adamw_np(w, g, m, v, step, lr, wd, beta1, beta2, eps):
    """One in-place AdamW update; returns the new step count."""
    step += 1
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    w *= 1.0 - lr * wd
    w -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return step


def epoch_np(X, y, perm, w, m, v, step, lr, wd, beta1, beta2, eps, batch_size, d, h):
    n = perm.shape[0]
    total = 0.0
    for start in range(0, n, batch_size):
        rows = perm[start:start + batch_size]
        loss, g = loss_grad_np(w, X[rows], y[rows], d, h)
        total += loss * rows.shape[0]
        step = adamw_np(w, g, m, v, step, lr, wd, beta1, beta2, eps)
    return step, total / n


# ---------------------------------------------------------------- numba path

def _epoch_loops(X, y, perm, w, m, v, step, lr, wd, beta1, beta2, eps, batch_size, d, h):
    n = perm.shape[0]
    P = w.shape[0]
    g = np.zeros(P)
    act = np.zeros(max(h, 1))
    total = 0.0
    start = 0
    while start < n:
        stop = min(start + batch_size, n)
        bsz = stop - start
        g[:] = 0.0
        batch_loss = 0.0
        for r in range(start, stop):
            i = perm[r]
            if h == 0:
                z = w[d]
                for k in range(d):
                    z += X[i, k] * w[k]
            else:
                z = w[h * d + 2 * h]
                for j in range(h):
                    a = w[h * d + j]
                    for k in range(d):
                        a += w[j * d + k] * X[i, k]
                    if a < 0.0:
                        a = 0.0
                    act[j] = a
                    z += a * w[h * d + h + j]
            if z >= 0.0:
                p = 1.0 / (1.0 + math.exp(-z))
            else:
                ez = math.exp(z)
                p = ez / (1.0 + ez)
            pc = min(max(p, 1e-12), 1.0 - 1e-12)
            batch_loss -= y[i] * math.log(pc) + (1.0 - y[i]) * math.log(1.0 - pc)
            delta = (p - y[i]) / bsz
            if h == 0:
                for k in range(d):
                    g[k] += delta * X[i, k]
                g[d] += delta
            else:
                g[h * d + 2 * h] += delta
                for j in range(h):
                    g[h * d + h + j] += delta * act[j]
                    if act[j] > 0.0:
                        dz = delta * w[h * d + h + j]
                        g[h * d + j] += dz
                        for k in range(d):
                            g[j * d + k] += dz * X[i, k]
        total += batch_loss
        step += 1
        bc1 = 1.0 - beta1 ** step
        bc2 = 1.0 - beta2 ** step
        for q in range(P):
            m[q] = beta1 * m[q] + (1.0 - beta1) * g[q]
            v[q] = beta2 * v[q] + (1.0 - beta2) * g[q] * g[q]
            w[q] *= 1.0 - lr * wd
            w[q] -= lr * (m[q] / bc1) / (math.sqrt(v[q] / bc2) + eps)
        start = stop
    return step, total / n


epoch_nb = numba.njit(cache=True, nogil=True)(_epoch_loops) if NUMBA_AVAILABLE else None


def run_epoch(X, y, perm, w, m, v, step, lr, wd, beta1, beta2, eps, batch_size, d, h):
    """Train one shuffled epoch in place; returns (step, mean train loss)."""
    fn = epoch_nb if NUMBA_ENABLED else epoch_np
    step, loss = fn(X, y, perm, w, m, v, int(step), float(lr), float(wd), float(beta1), float(beta2),
                    float(eps), int(batch_size), int(d), int(h))
    return int(step), float(loss)
