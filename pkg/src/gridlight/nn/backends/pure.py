"""Pure numpy kernel backend.

All kernels operate on C-contiguous float64 arrays. Graph structure arrives
in CSR form: `ptr` (n+1 int64) and `idx` (E int64), where each node's
neighbor segment includes the node itself.
"""

from __future__ import annotations

import numpy as np

NAME = "pure"


def dense_forward(x, W, b):
    """Pre-activation of a fully connected layer: x @ W.T + b."""
    return x @ W.T + b


def dense_backward(x, W, g_pre):
    """Gradients (gx, gW, gb) given the gradient at the pre-activation."""
    return g_pre @ W, g_pre.T @ x, g_pre.sum(axis=0)


def gat_forward(X, Wt, Ws, Wv, ptr, idx):
    """Multi-head dot-product graph attention, heads averaged.

    Per head h: score(i,j) = (Wt_h x_i) . (Ws_h x_j), softmax over the
    neighbor segment of i, output sum_j a_ij (Wv_h x_j). Returns the
    head-averaged pre-activation `mix`, attention weights (H, E), and the
    per-head projections (T, U, V) needed for the backward pass.
    """
    n, d = X.shape
    H = Wt.shape[0]
    counts = np.diff(ptr)
    i_e = np.repeat(np.arange(n), counts)
    seg = ptr[:-1]
    mix = np.zeros((n, d))
    attn = np.empty((H, idx.shape[0]))
    T = np.empty((H, n, d))
    U = np.empty((H, n, d))
    V = np.empty((H, n, d))
    for h in range(H):
        T[h] = X @ Wt[h].T
        U[h] = X @ Ws[h].T
        V[h] = X @ Wv[h].T
        s = np.einsum("ed,ed->e", T[h][i_e], U[h][idx])
        mx = np.maximum.reduceat(s, seg)
        ex = np.exp(s - mx[i_e])
        z = np.add.reduceat(ex, seg)
        a = ex / z[i_e]
        attn[h] = a
        np.add.at(mix, i_e, a[:, None] * V[h][idx])
    mix /= H
    return mix, attn, T, U, V


def gat_backward(X, Wt, Ws, Wv, ptr, idx, attn, T, U, V, g_mix):
    """Exact gradients of the attention layer w.r.t. inputs and weights."""
    n, d = X.shape
    H = Wt.shape[0]
    counts = np.diff(ptr)
    i_e = np.repeat(np.arange(n), counts)
    seg = ptr[:-1]
    gX = np.zeros_like(X)
    gWt = np.zeros_like(Wt)
    gWs = np.zeros_like(Ws)
    gWv = np.zeros_like(Wv)
    g = g_mix / H
    for h in range(H):
        a = attn[h]
        gV = np.zeros((n, d))
        np.add.at(gV, idx, a[:, None] * g[i_e])
        ga = np.einsum("ed,ed->e", g[i_e], V[h][idx])
        dot = np.add.reduceat(a * ga, seg)
        gs = a * (ga - dot[i_e])
        gT = np.zeros((n, d))
        gU = np.zeros((n, d))
        np.add.at(gT, i_e, gs[:, None] * U[h][idx])
        np.add.at(gU, idx, gs[:, None] * T[h][i_e])
        gWt[h] = gT.T @ X
        gWs[h] = gU.T @ X
        gWv[h] = gV.T @ X
        gX += gT @ Wt[h] + gU @ Ws[h] + gV @ Wv[h]
    return gX, gWt, gWs, gWv


def adam_step(p, g, m, v, t, lr, beta1, beta2, eps):
    """In-place Adam update on flat float64 views; t is the 1-based step."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)
