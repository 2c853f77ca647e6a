# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch fitness kernels.

Same signatures, outputs and status codes as ``mmpass._fallback``. Complex
values are carried as separate real/imaginary doubles.
"""

import numpy as np

from libc.math cimport sqrt, sin, cos, hypot, log2

cdef enum:
    STATUS_OK = 0
    STATUS_DEGENERATE = 1
    STATUS_ILL_CONDITIONED = 2


def heff_batch(double[:, ::1] positions, double[:, ::1] beta_pa,
               double[::1] mode_betas, double[:, ::1] kappa, double pa_length,
               double[:, ::1] users, double pa_height, double k0, double amp):
    cdef Py_ssize_t P = positions.shape[0]
    cdef Py_ssize_t N = positions.shape[1]
    cdef Py_ssize_t M = mode_betas.shape[0]
    cdef Py_ssize_t K = users.shape[0]
    out = np.zeros((P, K, M), dtype=np.complex128)
    cdef double[:, :, ::1] o = out.view(np.float64).reshape(P, K, 2 * M)

    cdef double[:, ::1] g_re = np.empty((N, M))
    cdef double[:, ::1] g_im = np.empty((N, M))
    cdef double[::1] upstream = np.empty(M)
    cdef Py_ssize_t p, n, m, k
    cdef double delta, phi, mag, ph, x, dx, dy, dz, dist, a, hr, hi

    for p in range(P):
        for m in range(M):
            upstream[m] = 1.0
        for n in range(N):
            x = positions[p, n]
            for m in range(M):
                delta = beta_pa[p, n] - mode_betas[m]
                phi = hypot(kappa[n, m], 0.5 * delta)
                if phi > 0.0:
                    mag = kappa[n, m] / phi * sin(phi * pa_length)
                else:
                    mag = 0.0
                ph = 0.5 * pa_length * delta + x * mode_betas[m]
                g_re[n, m] = mag * upstream[m] * cos(ph)
                g_im[n, m] = -mag * upstream[m] * sin(ph)
                a = 1.0 - mag * mag
                upstream[m] *= sqrt(a) if a > 0.0 else 0.0
        for k in range(K):
            dy = users[k, 1]
            dz = pa_height - users[k, 2]
            for n in range(N):
                dx = positions[p, n] - users[k, 0]
                dist = sqrt(dx * dx + dy * dy + dz * dz)
                a = amp / dist
                # conj(h_kn) = a * exp(+j k0 dist)
                hr = a * cos(k0 * dist)
                hi = a * sin(k0 * dist)
                for m in range(M):
                    o[p, k, 2 * m] += hr * g_re[n, m] - hi * g_im[n, m]
                    o[p, k, 2 * m + 1] += hr * g_im[n, m] + hi * g_re[n, m]
    return out


def kpbf_rate_batch(H, double[:, ::1] lam, double[:, ::1] p_rel,
                    double sigma2, double p_max, double max_condition):
    H = np.ascontiguousarray(H, dtype=np.complex128)
    cdef Py_ssize_t P = H.shape[0]
    cdef Py_ssize_t K = H.shape[1]
    cdef Py_ssize_t M = H.shape[2]
    cdef double[:, :, ::1] h = H.view(np.float64).reshape(P, K, 2 * M)

    rates_arr = np.zeros(P)
    status_arr = np.zeros(P, dtype=np.int8)
    cdef double[::1] rates = rates_arr
    cdef signed char[::1] status = status_arr

    # A and its Cholesky factor share storage (lower triangle)
    cdef double[:, ::1] l_re = np.empty((M, M))
    cdef double[:, ::1] l_im = np.empty((M, M))
    cdef double[:, ::1] w_re = np.empty((M, K))
    cdef double[:, ::1] w_im = np.empty((M, K))
    cdef Py_ssize_t p, i, j, k, q, r
    cdef double trace, wl, ar, ai, br, bi, d, energy, scale, sr, si, sig, intf, g, total
    cdef bint bad

    for p in range(P):
        # A = I + (1/sigma2) sum_k lam_k a_k a_k^H, a_k = conj(H[p, k])
        trace = 0.0
        for i in range(M):
            for j in range(i + 1):
                ar = 1.0 if i == j else 0.0
                ai = 0.0
                for k in range(K):
                    wl = lam[p, k] / sigma2
                    # a_k[i] conj(a_k[j]) = conj(H_ki) H_kj
                    br = h[p, k, 2 * i]
                    bi = -h[p, k, 2 * i + 1]
                    ar += wl * (br * h[p, k, 2 * j] - bi * h[p, k, 2 * j + 1])
                    ai += wl * (br * h[p, k, 2 * j + 1] + bi * h[p, k, 2 * j])
                l_re[i, j] = ar
                l_im[i, j] = ai
            trace += l_re[i, i]
        if not (trace <= max_condition):
            status[p] = STATUS_ILL_CONDITIONED
            continue

        # in-place complex Cholesky, A = L L^H
        bad = False
        for j in range(M):
            d = l_re[j, j]
            for q in range(j):
                d -= l_re[j, q] * l_re[j, q] + l_im[j, q] * l_im[j, q]
            if not (d > 0.0):
                bad = True
                break
            d = sqrt(d)
            l_re[j, j] = d
            l_im[j, j] = 0.0
            for i in range(j + 1, M):
                ar = l_re[i, j]
                ai = l_im[i, j]
                for q in range(j):
                    # L_iq conj(L_jq)
                    ar -= l_re[i, q] * l_re[j, q] + l_im[i, q] * l_im[j, q]
                    ai -= l_im[i, q] * l_re[j, q] - l_re[i, q] * l_im[j, q]
                l_re[i, j] = ar / d
                l_im[i, j] = ai / d
        if bad:
            status[p] = STATUS_ILL_CONDITIONED
            continue

        energy = 0.0
        for k in range(K):
            # forward: L y = a_k
            for i in range(M):
                ar = h[p, k, 2 * i]
                ai = -h[p, k, 2 * i + 1]
                for q in range(i):
                    ar -= l_re[i, q] * w_re[q, k] - l_im[i, q] * w_im[q, k]
                    ai -= l_re[i, q] * w_im[q, k] + l_im[i, q] * w_re[q, k]
                w_re[i, k] = ar / l_re[i, i]
                w_im[i, k] = ai / l_re[i, i]
            # backward: L^H x = y
            for r in range(M):
                i = M - 1 - r
                ar = w_re[i, k]
                ai = w_im[i, k]
                for q in range(i + 1, M):
                    # conj(L_qi) x_q
                    ar -= l_re[q, i] * w_re[q, k] + l_im[q, i] * w_im[q, k]
                    ai -= l_re[q, i] * w_im[q, k] - l_im[q, i] * w_re[q, k]
                w_re[i, k] = ar / l_re[i, i]
                w_im[i, k] = ai / l_re[i, i]
            d = sqrt(p_rel[p, k])
            for i in range(M):
                w_re[i, k] *= d
                w_im[i, k] *= d
                energy += w_re[i, k] * w_re[i, k] + w_im[i, k] * w_im[i, k]
        if energy == 0.0:
            status[p] = STATUS_DEGENERATE
            continue
        scale = sqrt(p_max / energy)

        total = 0.0
        for k in range(K):
            sig = 0.0
            intf = 0.0
            for j in range(K):
                sr = 0.0
                si = 0.0
                for i in range(M):
                    br = w_re[i, j] * scale
                    bi = w_im[i, j] * scale
                    sr += h[p, k, 2 * i] * br - h[p, k, 2 * i + 1] * bi
                    si += h[p, k, 2 * i] * bi + h[p, k, 2 * i + 1] * br
                g = sr * sr + si * si
                if j == k:
                    sig = g
                else:
                    intf += g
            total += log2(1.0 + sig / (intf + sigma2))
        rates[p] = total
    return rates_arr, status_arr
