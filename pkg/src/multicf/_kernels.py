"""Numba kernels shared by the trainers and predictors.

All kernels are nogil so the thread-based execution layer gets real
parallelism, and every accumulation runs in a fixed order so results are
bit-reproducible regardless of how work is chunked.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# zero-size placeholders for parameter groups a model kind does not use
EMPTY_F1 = np.empty(0, dtype=np.float64)
EMPTY_F2 = np.empty((0, 0), dtype=np.float64)
EMPTY_I1 = np.empty(0, dtype=np.int64)


@njit(nogil=True, cache=True)
def rate_update(u, i, r, tb, art,
                mu, b_u, b_i, P, Q,
                has_imp, c_imp, s_imp,
                has_time, X, Z, BIB,
                has_art, b_a, Q_a,
                gamma, lam_bias, lam_fac, lam_time, qold_buf):
    """One stochastic update for a single rating.

    Biases and factors follow the usual half-gradient step gamma*(e - lam*w).
    The item-side factors see the pre-update user factor and vice versa;
    qold_buf receives the pre-update effective item factor (q_i plus the
    artist factor when present) so callers can apply implicit-feedback
    updates afterwards. Returns the residual e.
    """
    D = Q.shape[1]
    pred = mu + b_u[u] + b_i[i]
    use_art = has_art and art >= 0
    if use_art:
        pred += b_a[art]
    if has_time:
        xz = 0.0
        for d in range(X.shape[1]):
            xz += X[u, d] * Z[tb, d]
        pred += xz + BIB[i, tb]
    dot = 0.0
    for d in range(D):
        qe = Q[i, d]
        if use_art:
            qe += Q_a[art, d]
        pe = P[u, d]
        if has_imp:
            pe += s_imp[d]
        dot += qe * pe
        qold_buf[d] = qe
    pred += dot
    e = r - pred

    b_u[u] += gamma * (e - lam_bias * b_u[u])
    b_i[i] += gamma * (e - lam_bias * b_i[i])
    if use_art:
        b_a[art] += gamma * (e - lam_bias * b_a[art])
    if has_time:
        BIB[i, tb] += gamma * (e - lam_bias * BIB[i, tb])
        for d in range(X.shape[1]):
            xd = X[u, d]
            zd = Z[tb, d]
            X[u, d] += gamma * (e * zd - lam_time * xd)
            Z[tb, d] += gamma * (e * xd - lam_time * zd)
    for d in range(D):
        pe = P[u, d]
        if has_imp:
            pe += s_imp[d]
        Q[i, d] += gamma * (e * pe - lam_fac * Q[i, d])
        if use_art:
            Q_a[art, d] += gamma * (e * pe - lam_fac * Q_a[art, d])
        P[u, d] += gamma * (e * qold_buf[d] - lam_fac * P[u, d])
    return e


@njit(nogil=True, cache=True)
def implicit_sum(items, Y, out):
    """Fill out with |R_u|^{-1/2} * sum of y_j over the user's items; return the scale."""
    D = Y.shape[1]
    for d in range(D):
        out[d] = 0.0
    n = items.size
    if n == 0:
        return 0.0
    c = 1.0 / math.sqrt(n)
    for k in range(n):
        j = items[k]
        for d in range(D):
            out[d] += Y[j, d]
    for d in range(D):
        out[d] *= c
    return c


@njit(nogil=True, cache=True)
def y_update_one(j, e, c_imp, qold, Y, gamma, lam_fac):
    for d in range(Y.shape[1]):
        Y[j, d] += gamma * (e * c_imp * qold[d] - lam_fac * Y[j, d])


@njit(nogil=True, cache=True)
def user_block_update(u, items, ratings, tbins, arts,
                      mu, b_u, b_i, P, Q, Y,
                      has_imp, has_time, X, Z, BIB,
                      has_art, b_a, Q_a,
                      gamma, lam_bias, lam_fac, lam_time,
                      s_buf, qold_buf):
    """Process all of one user's ratings in order (sequential execution path)."""
    c = 0.0
    if has_imp:
        c = implicit_sum(items, Y, s_buf)
    for k in range(items.size):
        e = rate_update(u, items[k], ratings[k], tbins[k], arts[k],
                        mu, b_u, b_i, P, Q,
                        has_imp, c, s_buf,
                        has_time, X, Z, BIB,
                        has_art, b_a, Q_a,
                        gamma, lam_bias, lam_fac, lam_time, qold_buf)
        if has_imp:
            for m in range(items.size):
                y_update_one(items[m], e, c, qold_buf, Y, gamma, lam_fac)


@njit(nogil=True, cache=True)
def edge_pass_range(lo, hi, e_child, e_parent, e_w, Q, gamma, lam3, lam4):
    """Graph-smoothing pass over taxonomy edges [lo, hi).

    Each edge carries two directed terms (child toward parents, parent toward
    children); the update applied to one endpoint is exactly the negative of
    the update applied to the other.
    """
    D = Q.shape[1]
    for k in range(lo, hi):
        c = e_child[k]
        p = e_parent[k]
        w = e_w[k]
        for d in range(D):
            delta = -2.0 * gamma * lam3 * w * (Q[c, d] - Q[p, d])
            Q[c, d] += delta
            Q[p, d] -= delta
        for d in range(D):
            delta = -2.0 * gamma * lam4 * w * (Q[p, d] - Q[c, d])
            Q[p, d] += delta
            Q[c, d] -= delta


@njit(nogil=True, cache=True)
def als_solve_rows(lo, hi, ptr, idx, val, wts, Fixed, Out, lam, fail):
    """Solve ridge-regularized normal equations for rows [lo, hi).

    Each row r minimizes sum_k w_k (val_k - Out[r] . Fixed[idx_k])^2
    + lam ||Out[r]||^2 via an in-place Cholesky factorization. Rows without
    observations become zero when lam > 0. On a non-positive-definite system
    (lam == 0 with rank-deficient observations) fail[0] is set to the row
    index and the chunk stops.
    """
    D = Fixed.shape[1]
    A = np.empty((D, D))
    b = np.empty(D)
    for r in range(lo, hi):
        if ptr[r + 1] == ptr[r]:
            if lam > 0.0:
                for d in range(D):
                    Out[r, d] = 0.0
                continue
            fail[0] = r
            return
        for i in range(D):
            b[i] = 0.0
            for j in range(i + 1):
                A[i, j] = 0.0
            A[i, i] = lam
        for k in range(ptr[r], ptr[r + 1]):
            col = idx[k]
            wv = wts[k]
            v = wv * val[k]
            for i in range(D):
                fi = Fixed[col, i]
                b[i] += v * fi
                wfi = wv * fi
                for j in range(i + 1):
                    A[i, j] += wfi * Fixed[col, j]
        ok = True
        for i in range(D):
            for j in range(i):
                s = A[i, j]
                for k2 in range(j):
                    s -= A[i, k2] * A[j, k2]
                A[i, j] = s / A[j, j]
            s = A[i, i]
            for k2 in range(i):
                s -= A[i, k2] * A[i, k2]
            if not (s > 0.0) or not math.isfinite(s):
                ok = False
                break
            A[i, i] = math.sqrt(s)
        if not ok:
            fail[0] = r
            return
        for i in range(D):
            s = b[i]
            for k2 in range(i):
                s -= A[i, k2] * b[k2]
            b[i] = s / A[i, i]
        for i in range(D - 1, -1, -1):
            s = b[i]
            for k2 in range(i + 1, D):
                s -= A[k2, i] * b[k2]
            b[i] = s / A[i, i]
        for d in range(D):
            Out[r, d] = b[d]


@njit(nogil=True, cache=True)
def ac_pair(users_i, cvals_i, users_j, cvals_j):
    """Adjusted-cosine similarity of two items from their user-sorted centered
    rating lists, accumulated in ascending user order."""
    a = 0
    b = 0
    num = 0.0
    di = 0.0
    dj = 0.0
    n = 0
    while a < users_i.size and b < users_j.size:
        if users_i[a] < users_j[b]:
            a += 1
        elif users_i[a] > users_j[b]:
            b += 1
        else:
            x = cvals_i[a]
            y = cvals_j[b]
            num += x * y
            di += x * x
            dj += y * y
            n += 1
            a += 1
            b += 1
    if n == 0 or di == 0.0 or dj == 0.0:
        return 0.0
    return num / math.sqrt(di * dj)


@njit(nogil=True, cache=True)
def ac_topk_block(lo, hi, it_ptr, it_users, it_cvals, K, out_ids, out_w, out_len):
    """Top-K neighbor lists for target items [lo, hi) against all items.

    Candidates with nonzero similarity are ranked by |w| descending with ties
    broken by smaller item id (stable sort over ascending candidate ids).
    """
    I = it_ptr.size - 1
    w_row = np.empty(I)
    cand = np.empty(I, np.int64)
    keys = np.empty(I)
    for i in range(lo, hi):
        ncand = 0
        ui = it_users[it_ptr[i]:it_ptr[i + 1]]
        ci = it_cvals[it_ptr[i]:it_ptr[i + 1]]
        for j in range(I):
            if j == i:
                continue
            w = ac_pair(ui, ci,
                        it_users[it_ptr[j]:it_ptr[j + 1]],
                        it_cvals[it_ptr[j]:it_ptr[j + 1]])
            if w != 0.0:
                w_row[ncand] = w
                cand[ncand] = j
                ncand += 1
        for k in range(ncand):
            keys[k] = -abs(w_row[k])
        order = np.argsort(keys[:ncand], kind="mergesort")
        m = K if K < ncand else ncand
        out_len[i] = m
        for k in range(m):
            out_ids[i, k] = cand[order[k]]
            out_w[i, k] = w_row[order[k]]


@njit(nogil=True, cache=True)
def knn_predict_batch(qu, qi, qt, nbr_ids, nbr_w, nbr_len,
                      u_ptr, u_items, u_scores, u_times,
                      beta, mean_val, mean_has, mu, out):
    """Neighborhood predictions for query triples, with optional time decay.

    Falls back to the user's training mean, then the global mean, when no
    neighbor evidence exists. Each decay factor uses the neighbor rating's
    own timestamp.
    """
    n_users = u_ptr.size - 1
    n_items = nbr_len.size
    for n in range(qu.size):
        u = qu[n]
        i = qi[n]
        t = qt[n]
        num = 0.0
        den = 0.0
        if 0 <= u < n_users and 0 <= i < n_items:
            for k in range(nbr_len[i]):
                j = nbr_ids[i, k]
                lo = u_ptr[u]
                hi = u_ptr[u + 1] - 1
                pos = -1
                while lo <= hi:
                    mid = (lo + hi) // 2
                    if u_items[mid] < j:
                        lo = mid + 1
                    elif u_items[mid] > j:
                        hi = mid - 1
                    else:
                        pos = mid
                        break
                if pos >= 0:
                    w = nbr_w[i, k]
                    if beta == 0.0:
                        f = 1.0
                    else:
                        f = math.exp(-beta * (t - u_times[pos]))
                    num += f * w * u_scores[pos]
                    den += f * abs(w)
        if den > 0.0:
            out[n] = num / den
        elif 0 <= u < mean_has.size and mean_has[u]:
            out[n] = mean_val[u]
        else:
            out[n] = mu


@njit(nogil=True, cache=True)
def mf_predict_batch(qu, qi, mu, b_u, b_i, P, Q,
                     has_imp, S, has_time, qtb, X, Z, BIB,
                     has_art, arts, b_a, Q_a, out):
    """Batch factor-model predictions with cold-start fallback.

    S holds per-user scaled implicit sums; arts maps query items to artist
    ids (-1 when absent). Out-of-range users/items keep only the terms that
    are known.
    """
    n_users = b_u.size
    n_items = b_i.size
    D = Q.shape[1]
    for n in range(qu.size):
        u = qu[n]
        i = qi[n]
        know_u = 0 <= u < n_users
        know_i = 0 <= i < n_items
        pred = mu
        if know_u:
            pred += b_u[u]
        if know_i:
            pred += b_i[i]
            if has_art and arts[n] >= 0:
                pred += b_a[arts[n]]
        if has_time and know_u:
            tb = qtb[n]
            xz = 0.0
            for d in range(X.shape[1]):
                xz += X[u, d] * Z[tb, d]
            pred += xz
        if has_time and know_i:
            pred += BIB[i, qtb[n]]
        if know_u and know_i:
            dot = 0.0
            for d in range(D):
                qe = Q[i, d]
                if has_art and arts[n] >= 0:
                    qe += Q_a[arts[n], d]
                pe = P[u, d]
                if has_imp:
                    pe += S[u, d]
                dot += qe * pe
            pred += dot
        out[n] = pred


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    i1 = np.zeros(1, np.int64)
    f1 = np.zeros(1, np.float64)
    f2 = np.zeros((1, 1), np.float64)
    buf = np.zeros(1, np.float64)
    rate_update(0, 0, 1.0, 0, 0, 0.0, f1.copy(), f1.copy(), f2.copy(), f2.copy(),
                True, 1.0, buf.copy(), True, f2.copy(), f2.copy(), f2.copy(),
                True, f1.copy(), f2.copy(), 0.01, 0.0, 0.0, 0.0, buf.copy())
    implicit_sum(i1, f2.copy(), buf.copy())
    y_update_one(0, 0.1, 1.0, buf, f2.copy(), 0.01, 0.0)
    user_block_update(0, i1, f1, i1, i1, 0.0, f1.copy(), f1.copy(), f2.copy(),
                      f2.copy(), f2.copy(), True, True, f2.copy(), f2.copy(),
                      f2.copy(), True, f1.copy(), f2.copy(),
                      0.01, 0.0, 0.0, 0.0, buf.copy(), buf.copy())
    edge_pass_range(0, 1, i1, i1, f1, np.zeros((2, 1)), 0.01, 0.1, 0.1)
    als_solve_rows(0, 1, np.array([0, 1], np.int64), i1, np.ones(1), np.ones(1),
                   np.ones((1, 1)), np.zeros((1, 1)), 1.0,
                   np.full(1, -1, np.int64))
    ac_pair(i1, f1, i1, f1)
    ac_topk_block(0, 1, np.array([0, 1], np.int64), i1, f1, 1,
                  np.zeros((1, 1), np.int64), np.zeros((1, 1)), np.zeros(1, np.int64))
    knn_predict_batch(i1, i1, i1, np.zeros((1, 1), np.int64), np.zeros((1, 1)),
                      np.ones(1, np.int64), np.array([0, 1], np.int64), i1, f1, i1,
                      0.0, f1, np.ones(1, np.bool_), 0.0, buf.copy())
    mf_predict_batch(i1, i1, 0.0, f1, f1, f2, f2, True, f2, True, i1,
                     f2, f2, f2, True, i1, f1, f2, buf.copy())
