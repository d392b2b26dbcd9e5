# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Pure-numpy equivalents live in ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def be_integrate(
    const cnp.int32_t[::1] l_ptr, const cnp.int32_t[::1] l_idx, const double[::1] l_val,
    const double[::1] l_diag,
    const cnp.int32_t[::1] u_ptr, const cnp.int32_t[::1] u_idx, const double[::1] u_val,
    const double[::1] u_diag,
    const cnp.int64_t[::1] perm_r, const cnp.int64_t[::1] perm_c,
    const cnp.int32_t[::1] c_ptr, const cnp.int32_t[::1] c_idx, const double[::1] c_val,
    const double[:, ::1] v0,
    const cnp.int64_t[::1] inj_node, const double[::1] inj_g, const cnp.int64_t[::1] inj_col,
    const double[:, ::1] u,
    const cnp.int64_t[::1] probes,
):
    """Backward-Euler stepping with a pre-factored (G + C/dt).

    ``l_*``/``u_*`` are the strictly-triangular CSC parts of the SuperLU factors,
    ``c_*`` is C/dt in CSR. ``u[n, s]`` is source ``s`` voltage at step ``n + 1``.
    Returns probe voltages, shape (n_steps + 1, n_probes, k).
    """
    cdef Py_ssize_t n = v0.shape[0]
    cdef Py_ssize_t k = v0.shape[1]
    cdef Py_ssize_t n_steps = u.shape[0]
    cdef Py_ssize_t n_src = inj_node.shape[0]
    cdef Py_ssize_t n_probe = probes.shape[0]
    cdef Py_ssize_t step, i, j, p, s, col
    cdef double acc, yj

    out_arr = np.empty((n_steps + 1, n_probe, k), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    v_arr = np.array(v0, dtype=np.float64, copy=True)
    cdef double[:, ::1] v = v_arr
    cdef double[::1] rhs = np.empty(n, dtype=np.float64)
    cdef double[::1] y = np.empty(n, dtype=np.float64)

    for p in range(n_probe):
        for col in range(k):
            out[0, p, col] = v[probes[p], col]

    for step in range(n_steps):
        for col in range(k):
            # rhs = C/dt * v + injections
            for i in range(n):
                acc = 0.0
                for j in range(c_ptr[i], c_ptr[i + 1]):
                    acc += c_val[j] * v[c_idx[j], col]
                rhs[i] = acc
            for s in range(n_src):
                if inj_col[s] == col:
                    rhs[inj_node[s]] += inj_g[s] * u[step, s]
            # row permutation
            for i in range(n):
                y[perm_r[i]] = rhs[i]
            # forward: L y = Pr b
            for j in range(n):
                yj = y[j] / l_diag[j]
                y[j] = yj
                if yj != 0.0:
                    for i in range(l_ptr[j], l_ptr[j + 1]):
                        y[l_idx[i]] -= l_val[i] * yj
            # backward: U z = y
            for j in range(n - 1, -1, -1):
                yj = y[j] / u_diag[j]
                y[j] = yj
                if yj != 0.0:
                    for i in range(u_ptr[j], u_ptr[j + 1]):
                        y[u_idx[i]] -= u_val[i] * yj
            for i in range(n):
                v[i, col] = y[perm_c[i]]
        for p in range(n_probe):
            for col in range(k):
                out[step + 1, p, col] = v[probes[p], col]
    return out_arr


def modal_integrate(
    const double[::1] mu,
    const double[:, ::1] gain,
    const double[:, ::1] xp,
    const double[:, ::1] u,
):
    """Decoupled first-order recursions ``z <- mu*z + gain*u`` projected onto probes.

    ``gain`` is (modes, k), ``xp`` is (probes, modes), ``u`` is (n_steps, k).
    Starts from z = 0. Returns (n_steps + 1, n_probes, k).
    """
    cdef Py_ssize_t m = mu.shape[0]
    cdef Py_ssize_t k = gain.shape[1]
    cdef Py_ssize_t n_probe = xp.shape[0]
    cdef Py_ssize_t n_steps = u.shape[0]
    cdef Py_ssize_t step, j, p, col
    cdef double uc, acc

    out_arr = np.zeros((n_steps + 1, n_probe, k), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    z_arr = np.zeros((k, m), dtype=np.float64)
    cdef double[:, ::1] z = z_arr
    for step in range(n_steps):
        for col in range(k):
            uc = u[step, col]
            for j in range(m):
                z[col, j] = mu[j] * z[col, j] + gain[j, col] * uc
            for p in range(n_probe):
                acc = 0.0
                for j in range(m):
                    acc += xp[p, j] * z[col, j]
                out[step + 1, p, col] = acc
    return out_arr

def build_histograms(
    const cnp.uint8_t[:, ::1] binned,
    const cnp.intp_t[::1] rows,
    const cnp.intp_t[::1] features,
    const double[::1] target,
    const double[::1] weight,
    int n_bins,
):
    """Per-feature bin sums of ``target`` and ``weight`` over ``rows``."""
    cdef Py_ssize_t n_feat = features.shape[0]
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t a, f, r
    cdef int b
    cdef double w

    hs_arr = np.zeros((n_feat, n_bins), dtype=np.float64)
    hw_arr = np.zeros((n_feat, n_bins), dtype=np.float64)
    cdef double[:, ::1] hs = hs_arr
    cdef double[:, ::1] hw = hw_arr
    for a in range(m):
        r = rows[a]
        w = weight[r]
        if w == 0.0:
            continue
        for f in range(n_feat):
            b = binned[r, features[f]]
            hs[f, b] += target[r]
            hw[f, b] += w
    return hs_arr, hw_arr


def ensemble_predict(
    const double[:, ::1] X,
    const cnp.int32_t[::1] feature,
    const double[::1] threshold,
    const cnp.int32_t[::1] left,
    const cnp.int32_t[::1] right,
    const double[::1] value,
    const cnp.int64_t[::1] roots,
    double vote_threshold,
    bint votes,
):
    """Sum leaf values (or count leaves with value >= vote_threshold) over trees."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_trees = roots.shape[0]
    cdef Py_ssize_t i, t
    cdef cnp.int64_t node
    cdef double acc, leaf

    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            node = roots[t]
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = roots[t] + left[node]
                else:
                    node = roots[t] + right[node]
            leaf = value[node]
            if votes:
                if leaf >= vote_threshold:
                    acc += 1.0
            else:
                acc += leaf
        out[i] = acc
    return out_arr
