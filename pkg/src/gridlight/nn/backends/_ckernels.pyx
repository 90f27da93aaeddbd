# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend; mirrors the pure numpy backend's API exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

NAME = "cython"


def dense_forward(double[:, ::1] x, double[:, ::1] W, double[::1] b):
    cdef Py_ssize_t n = x.shape[0], din = x.shape[1], dout = W.shape[0]
    cdef cnp.ndarray out = np.empty((n, dout), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, a, k
    cdef double acc
    for i in range(n):
        for a in range(dout):
            acc = b[a]
            for k in range(din):
                acc += x[i, k] * W[a, k]
            o[i, a] = acc
    return out


def dense_backward(double[:, ::1] x, double[:, ::1] W, double[:, ::1] g_pre):
    cdef Py_ssize_t n = x.shape[0], din = x.shape[1], dout = W.shape[0]
    cdef cnp.ndarray gx_arr = np.zeros((n, din), dtype=np.float64)
    cdef cnp.ndarray gW_arr = np.zeros((dout, din), dtype=np.float64)
    cdef cnp.ndarray gb_arr = np.zeros(dout, dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gW = gW_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t i, a, k
    cdef double g
    for i in range(n):
        for a in range(dout):
            g = g_pre[i, a]
            gb[a] += g
            for k in range(din):
                gx[i, k] += g * W[a, k]
                gW[a, k] += g * x[i, k]
    return gx_arr, gW_arr, gb_arr


cdef void _project(double[:, ::1] X, double[:, :, ::1] Wh, Py_ssize_t h,
                   double[:, ::1] out) noexcept:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, a, k
    cdef double acc
    for i in range(n):
        for a in range(d):
            acc = 0.0
            for k in range(d):
                acc += X[i, k] * Wh[h, a, k]
            out[i, a] = acc


def gat_forward(double[:, ::1] X, double[:, :, ::1] Wt, double[:, :, ::1] Ws,
                double[:, :, ::1] Wv, long long[::1] ptr, long long[::1] idx):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], H = Wt.shape[0]
    cdef Py_ssize_t E = idx.shape[0]
    cdef cnp.ndarray mix_arr = np.zeros((n, d), dtype=np.float64)
    cdef cnp.ndarray attn_arr = np.empty((H, E), dtype=np.float64)
    cdef cnp.ndarray T_arr = np.empty((H, n, d), dtype=np.float64)
    cdef cnp.ndarray U_arr = np.empty((H, n, d), dtype=np.float64)
    cdef cnp.ndarray V_arr = np.empty((H, n, d), dtype=np.float64)
    cdef double[:, ::1] mix = mix_arr
    cdef double[:, ::1] attn = attn_arr
    cdef double[:, :, ::1] T = T_arr
    cdef double[:, :, ::1] U = U_arr
    cdef double[:, :, ::1] V = V_arr
    cdef cnp.ndarray s_arr = np.empty(E, dtype=np.float64)
    cdef double[::1] s = s_arr
    cdef Py_ssize_t h, i, e, k, j
    cdef double acc, mx, z, a, inv_h
    inv_h = 1.0 / H
    for h in range(H):
        _project(X, Wt, h, T[h])
        _project(X, Ws, h, U[h])
        _project(X, Wv, h, V[h])
        for i in range(n):
            mx = -1e300
            for e in range(ptr[i], ptr[i + 1]):
                j = idx[e]
                acc = 0.0
                for k in range(d):
                    acc += T[h, i, k] * U[h, j, k]
                s[e] = acc
                if acc > mx:
                    mx = acc
            z = 0.0
            for e in range(ptr[i], ptr[i + 1]):
                s[e] = exp(s[e] - mx)
                z += s[e]
            for e in range(ptr[i], ptr[i + 1]):
                a = s[e] / z
                attn[h, e] = a
                j = idx[e]
                for k in range(d):
                    mix[i, k] += inv_h * a * V[h, j, k]
    return mix_arr, attn_arr, T_arr, U_arr, V_arr


def gat_backward(double[:, ::1] X, double[:, :, ::1] Wt, double[:, :, ::1] Ws,
                 double[:, :, ::1] Wv, long long[::1] ptr, long long[::1] idx,
                 double[:, ::1] attn, double[:, :, ::1] T, double[:, :, ::1] U,
                 double[:, :, ::1] V, double[:, ::1] g_mix):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], H = Wt.shape[0]
    cdef Py_ssize_t E = idx.shape[0]
    cdef cnp.ndarray gX_arr = np.zeros((n, d), dtype=np.float64)
    cdef cnp.ndarray gWt_arr = np.zeros((H, d, d), dtype=np.float64)
    cdef cnp.ndarray gWs_arr = np.zeros((H, d, d), dtype=np.float64)
    cdef cnp.ndarray gWv_arr = np.zeros((H, d, d), dtype=np.float64)
    cdef double[:, ::1] gX = gX_arr
    cdef double[:, :, ::1] gWt = gWt_arr
    cdef double[:, :, ::1] gWs = gWs_arr
    cdef double[:, :, ::1] gWv = gWv_arr
    cdef cnp.ndarray gT_arr = np.empty((n, d), dtype=np.float64)
    cdef cnp.ndarray gU_arr = np.empty((n, d), dtype=np.float64)
    cdef cnp.ndarray gV_arr = np.empty((n, d), dtype=np.float64)
    cdef cnp.ndarray ga_arr = np.empty(E, dtype=np.float64)
    cdef double[:, ::1] gT = gT_arr
    cdef double[:, ::1] gU = gU_arr
    cdef double[:, ::1] gV = gV_arr
    cdef double[::1] ga = ga_arr
    cdef Py_ssize_t h, i, e, k, j, a_, b_
    cdef double acc, dot, gs, inv_h, g
    inv_h = 1.0 / H
    for h in range(H):
        for i in range(n):
            for k in range(d):
                gT[i, k] = 0.0
                gU[i, k] = 0.0
                gV[i, k] = 0.0
        for i in range(n):
            dot = 0.0
            for e in range(ptr[i], ptr[i + 1]):
                j = idx[e]
                acc = 0.0
                for k in range(d):
                    acc += inv_h * g_mix[i, k] * V[h, j, k]
                ga[e] = acc
                dot += attn[h, e] * acc
            for e in range(ptr[i], ptr[i + 1]):
                j = idx[e]
                g = inv_h * attn[h, e]
                gs = attn[h, e] * (ga[e] - dot)
                for k in range(d):
                    gV[j, k] += g * g_mix[i, k]
                    gT[i, k] += gs * U[h, j, k]
                    gU[j, k] += gs * T[h, i, k]
        for i in range(n):
            for a_ in range(d):
                for b_ in range(d):
                    gWt[h, a_, b_] += gT[i, a_] * X[i, b_]
                    gWs[h, a_, b_] += gU[i, a_] * X[i, b_]
                    gWv[h, a_, b_] += gV[i, a_] * X[i, b_]
            for b_ in range(d):
                acc = 0.0
                for a_ in range(d):
                    acc += gT[i, a_] * Wt[h, a_, b_] + gU[i, a_] * Ws[h, a_, b_] \
                        + gV[i, a_] * Wv[h, a_, b_]
                gX[i, b_] += acc
    return gX_arr, gWt_arr, gWs_arr, gWv_arr


def adam_step(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
              long long t, double lr, double beta1, double beta2, double eps):
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (sqrt(v[i] / c2) + eps)
