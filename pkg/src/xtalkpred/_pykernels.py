"""Pure numpy/scipy versions of the compiled kernels (same signatures)."""

import numpy as np


def be_integrate(l_ptr, l_idx, l_val, l_diag, u_ptr, u_idx, u_val, u_diag,
                 perm_r, perm_c, c_ptr, c_idx, c_val, v0,
                 inj_node, inj_g, inj_col, u, probes):
    import scipy.sparse as sp
    from scipy.sparse.linalg import spsolve_triangular

    n, k = v0.shape
    L = sp.csc_matrix((l_val, l_idx, l_ptr), shape=(n, n)) + sp.diags(l_diag)
    U = sp.csc_matrix((u_val, u_idx, u_ptr), shape=(n, n)) + sp.diags(u_diag)
    # dense inverse of the factored system; n is small for oracle networks
    eye = np.eye(n)
    pr = np.empty((n, n))
    pr[perm_r] = eye
    z = spsolve_triangular(U.tocsr(), spsolve_triangular(L.tocsr(), pr, lower=True), lower=False)
    m_inv = z[perm_c]
    cdt = sp.csr_matrix((c_val, c_idx, c_ptr), shape=(n, n)).toarray()
    step_mat = m_inv @ cdt
    inj = np.zeros((len(inj_node), n, k))
    for s, (node, g, col) in enumerate(zip(inj_node, inj_g, inj_col)):
        inj[s, :, col] = g * m_inv[:, node]

    v = np.array(v0, dtype=float)
    out = np.empty((u.shape[0] + 1, len(probes), k))
    out[0] = v[probes]
    for step in range(u.shape[0]):
        v = step_mat @ v + np.tensordot(u[step], inj, axes=1)
        out[step + 1] = v[probes]
    return out


def modal_integrate(mu, gain, xp, u):
    k = gain.shape[1]
    z = np.zeros_like(gain)
    zs = np.zeros((u.shape[0] + 1, gain.shape[0], k))
    for step in range(u.shape[0]):
        z = mu[:, None] * z + gain * u[step]
        zs[step + 1] = z
    return np.einsum("pm,nmk->npk", xp, zs)

def build_histograms(binned, rows, features, target, weight, n_bins):
    sub = binned[np.ix_(rows, features)]
    t = target[rows]
    w = weight[rows]
    hs = np.empty((len(features), n_bins))
    hw = np.empty((len(features), n_bins))
    for a in range(len(features)):
        hs[a] = np.bincount(sub[:, a], weights=t, minlength=n_bins)
        hw[a] = np.bincount(sub[:, a], weights=w, minlength=n_bins)
    return hs, hw


def ensemble_predict(X, feature, threshold, left, right, value, roots,
                     vote_threshold, votes):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] >= 0
        while active.any():
            nd = node[active]
            f = feature[nd]
            go_left = X[rows[active], f] <= threshold[nd]
            node[active] = root + np.where(go_left, left[nd], right[nd])
            active = feature[node] >= 0
        leaf = value[node]
        out += (leaf >= vote_threshold).astype(float) if votes else leaf
    return out
