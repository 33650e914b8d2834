"""JIT-compiled numerical cores for the slow inner loops.

Plain-Python fallbacks exist where these are optional (large-n SVM column
generation); here live the hot paths that run thousands of times per
simulation: the SMO pair-update loop over a dense kernel matrix and the
exact-greedy boosted-tree builder.  Semantics are the module contracts of
their callers; nothing here is public API.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["smo_dense", "build_tree_arrays"]


@njit(cache=True)
def smo_dense(K, y, p, c_upper, alpha, tol, max_iter):
    """Maximal-violating-pair SMO on a dense kernel matrix.

    Minimizes 0.5 a'Qa + p'a with Q = (y y') * K subject to the box
    [0, c_upper] and the equality constraint fixed by the start point.
    Returns (alpha, gradient, iterations, converged_flag).
    """
    n = K.shape[0]
    grad = p.copy()
    for i in range(n):
        if alpha[i] != 0.0:
            coef = alpha[i] * y[i]
            for t in range(n):
                grad[t] += coef * y[t] * K[t, i]

    tau = 1e-12
    it = 0
    while it < max_iter:
        gmax = -1e300
        gmin = 1e300
        i = -1
        j = -1
        for t in range(n):
            v = -y[t] * grad[t]
            if (y[t] > 0 and alpha[t] < c_upper[t]) or (y[t] < 0 and alpha[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c_upper[t]):
                if v < gmin:
                    gmin = v
                    j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            return alpha, grad, it, 1

        qij = y[i] * y[j] * K[i, j]
        old_i = alpha[i]
        old_j = alpha[j]
        ci = c_upper[i]
        cj = c_upper[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * qij
            if quad <= 0.0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > ci - cj:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = ci - diff
            else:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = cj + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * qij
            if quad <= 0.0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > ci:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = total - ci
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > cj:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = total - cj
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = total
        d_i = (alpha[i] - old_i) * y[i]
        d_j = (alpha[j] - old_j) * y[j]
        for t in range(n):
            grad[t] += y[t] * (K[t, i] * d_i + K[t, j] * d_j)
        it += 1
    return alpha, grad, it, 0


@njit(cache=True)
def build_tree_arrays(
    Xv, order, g, h, max_depth, lam, mcw, lr, feature, threshold, left, right, value, node_of
):
    """Grow one depth-capped tree by exact greedy splits; returns node count.

    ``order`` holds per-feature presorted sample indices.  Ties in gain
    break toward the earlier feature and the earlier split position.  The
    output arrays must be sized for the complete tree; ``node_of`` ends up
    holding each training sample's leaf.
    """
    n, n_features = Xv.shape
    n_nodes = 1
    node_of[:] = 0
    max_width = 2 ** max_depth
    cur_level = np.empty(max_width, np.int32)
    nxt_level = np.empty(max_width, np.int32)
    cur_level[0] = 0
    cur_count = 1

    for depth in range(max_depth):
        nxt_count = 0
        for li in range(cur_count):
            nid = cur_level[li]
            g_tot = 0.0
            h_tot = 0.0
            count = 0
            for t in range(n):
                if node_of[t] == nid:
                    g_tot += g[t]
                    h_tot += h[t]
                    count += 1
            best_gain = 1e-12
            best_f = -1
            best_thr = 0.0
            if count >= 2:
                base = g_tot * g_tot / (h_tot + lam)
                for f in range(n_features):
                    gl = 0.0
                    hl = 0.0
                    last_v = 0.0
                    seen = False
                    for oi in range(n):
                        t = order[f, oi]
                        if node_of[t] != nid:
                            continue
                        v = Xv[t, f]
                        if seen and v > last_v and hl >= mcw and (h_tot - hl) >= mcw:
                            gr = g_tot - gl
                            hr = h_tot - hl
                            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - base
                            if gain > best_gain:
                                best_gain = gain
                                best_f = f
                                best_thr = 0.5 * (last_v + v)
                        gl += g[t]
                        hl += h[t]
                        last_v = v
                        seen = True
            if best_f < 0:
                value[nid] = -lr * g_tot / (h_tot + lam)
            else:
                lid = n_nodes
                rid = n_nodes + 1
                n_nodes += 2
                feature[nid] = best_f
                threshold[nid] = best_thr
                left[nid] = lid
                right[nid] = rid
                for t in range(n):
                    if node_of[t] == nid:
                        node_of[t] = lid if Xv[t, best_f] < best_thr else rid
                nxt_level[nxt_count] = lid
                nxt_count += 1
                nxt_level[nxt_count] = rid
                nxt_count += 1
        tmp = cur_level
        cur_level = nxt_level
        nxt_level = tmp
        cur_count = nxt_count

    for li in range(cur_count):
        nid = cur_level[li]
        g_tot = 0.0
        h_tot = 0.0
        for t in range(n):
            if node_of[t] == nid:
                g_tot += g[t]
                h_tot += h[t]
        value[nid] = -lr * g_tot / (h_tot + lam)
    return n_nodes
