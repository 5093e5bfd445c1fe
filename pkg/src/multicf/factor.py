"""Latent-factor predictors and trainers: biased MF, SVD++, time-aware
variants, and (weighted) alternating least squares.

The SGD family minimizes the squared-error objective with per-observation
regularization; updates follow the usual half-gradient convention
w += gamma * (e - lam * w). Loss and gradient functions evaluate the exact
objective and its true gradient, used by the finite-difference test suites.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .data import Dataset, ScoreScale, DEFAULT_SCALE, TimeBinner
from .errors import ConfigError, DivergenceError, ShapeError, SingularSystemError, UnknownIdError
from .parallel import LockTable, NULL_LOCKS, UserTask, even_bounds, parallel_for_users, run_blocks

SGD_KINDS = ("sgd", "svdpp", "time-svd", "time-svdpp")
ALS_KINDS = ("als", "wals")
FACTOR_KINDS = SGD_KINDS + ALS_KINDS

INIT_AMPLITUDE = 0.005


@dataclass
class HyperParams:
    gamma: float = 5e-4
    decay: float = 0.95
    lam: float = 1e-4
    lam1: float = 1e-5
    lam2: float = 1e-4
    lam3: float = 3e-4
    iters: int = 50
    D: int = 50
    D_t: int = 8

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if not 0 < self.decay <= 1:
            raise ConfigError("decay must be in (0, 1]")
        for name in ("lam", "lam1", "lam2", "lam3"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.iters < 0:
            raise ConfigError("iters must be >= 0")
        if self.D < 1 or self.D_t < 1:
            raise ConfigError("factor dimensions must be >= 1")


def default_hyper(kind: str) -> HyperParams:
    """Tuned settings per model kind (contest-scale defaults)."""
    if kind == "sgd":
        return HyperParams(gamma=5e-4, decay=0.95, lam=1e-4, iters=50, D=50)
    if kind == "svdpp":
        return HyperParams(gamma=5e-4, decay=0.95, lam=1e-4, iters=50, D=50)
    if kind == "time-svd":
        return HyperParams(gamma=1e-4, decay=0.95, lam1=1e-4, lam2=5e-4, lam3=5e-4,
                           iters=50, D=50)
    if kind == "time-svdpp":
        return HyperParams(gamma=5e-5, decay=0.95, lam1=1e-5, lam2=1e-4, lam3=3e-4,
                           iters=50, D=50)
    if kind in ALS_KINDS:
        return HyperParams(gamma=1.0, decay=1.0, lam=1.0, iters=50, D=120)
    raise ConfigError(f"unknown factor model kind {kind!r}")


@dataclass
class FactorModel:
    """All latent state of one factor model; arrays for unused parameter
    groups have zero size."""

    kind: str
    mu: float
    b_u: np.ndarray
    b_i: np.ndarray
    p: np.ndarray
    q: np.ndarray
    y: np.ndarray
    x: np.ndarray
    z: np.ndarray
    b_ibin: np.ndarray
    D: int
    D_t: int
    implicit_on: bool
    time_on: bool
    binner: TimeBinner | None
    seed: int
    scale: ScoreScale = DEFAULT_SCALE
    epochs_done: int = 0
    shuffle_rng: np.random.Generator = field(default=None, repr=False, compare=False)

    @property
    def num_users(self) -> int:
        return self.b_u.size

    @property
    def num_items(self) -> int:
        return self.b_i.size

    def param_arrays(self) -> dict[str, np.ndarray]:
        out = {"b_u": self.b_u, "b_i": self.b_i, "p": self.p, "q": self.q}
        if self.implicit_on:
            out["y"] = self.y
        if self.time_on:
            out.update({"x": self.x, "z": self.z, "b_ibin": self.b_ibin})
        return out

    def check_finite(self, epoch: int) -> None:
        for name, arr in self.param_arrays().items():
            if arr.size and not np.isfinite(arr).all():
                raise DivergenceError(epoch, f"non-finite {name} after epoch {epoch}")

    def copy(self) -> "FactorModel":
        c = dataclasses.replace(
            self, b_u=self.b_u.copy(), b_i=self.b_i.copy(), p=self.p.copy(),
            q=self.q.copy(), y=self.y.copy(), x=self.x.copy(), z=self.z.copy(),
            b_ibin=self.b_ibin.copy())
        return c


def init_model(kind: str, train: Dataset, hyper: HyperParams, seed: int,
               binner: TimeBinner | None = None,
               num_users: int | None = None, num_items: int | None = None) -> FactorModel:
    """Seeded initialization: biases zero, factor entries i.i.d. uniform in
    [-0.005, 0.005] scaled by 1/sqrt(D). Factor groups draw in a fixed order
    (q, p, then y, then x and z) so models of different kinds share identical
    common parameters for the same seed."""
    if kind not in FACTOR_KINDS:
        raise ConfigError(f"unknown factor model kind {kind!r}")
    implicit_on = kind in ("svdpp", "time-svdpp")
    time_on = kind in ("time-svd", "time-svdpp")
    U = num_users if num_users is not None else train.num_users
    I = num_items if num_items is not None else train.num_items
    D, D_t = hyper.D, hyper.D_t
    if time_on and binner is None:
        binner = TimeBinner(train.t_min, train.t_max)
    n_bins = binner.num_bins if binner is not None else 0

    rng = np.random.default_rng([seed, 1])
    amp = INIT_AMPLITUDE / np.sqrt(D)
    q = rng.uniform(-amp, amp, (I, D))
    p = rng.uniform(-amp, amp, (U, D))
    if implicit_on:
        y = rng.uniform(-amp, amp, (I, D))
    else:
        y = np.empty((0, D))
    if time_on:
        amp_t = INIT_AMPLITUDE / np.sqrt(D_t)
        x = rng.uniform(-amp_t, amp_t, (U, D_t))
        z = rng.uniform(-amp_t, amp_t, (n_bins, D_t))
        b_ibin = np.zeros((I, n_bins))
    else:
        x = np.empty((0, D_t))
        z = np.empty((0, D_t))
        b_ibin = np.empty((0, 0))
    mu = 0.0 if kind in ALS_KINDS else train.global_mean()
    return FactorModel(kind=kind, mu=mu, b_u=np.zeros(U), b_i=np.zeros(I),
                       p=p, q=q, y=y, x=x, z=z, b_ibin=b_ibin, D=D, D_t=D_t,
                       implicit_on=implicit_on, time_on=time_on, binner=binner,
                       seed=seed, scale=train.scale,
                       shuffle_rng=np.random.default_rng([seed, 2]))


# ---------------------------------------------------------------------------
# prediction

def _check_ids(model: FactorModel, u: int, i: int) -> None:
    if not 0 <= u < model.num_users:
        raise UnknownIdError(f"user {u} outside model bounds")
    if not 0 <= i < model.num_items:
        raise UnknownIdError(f"item {i} outside model bounds")


def predict_mf(model: FactorModel, u: int, i: int) -> float:
    _check_ids(model, u, i)
    return float(model.mu + model.b_i[i] + model.b_u[u] + model.q[i] @ model.p[u])


def _implicit_vec(model: FactorModel, r_u) -> np.ndarray:
    r_u = np.asarray(r_u, dtype=np.int64)
    if r_u.size == 0:
        return np.zeros(model.D)
    return model.y[r_u].sum(axis=0) / np.sqrt(r_u.size)


def predict_svdpp(model: FactorModel, u: int, i: int, r_u) -> float:
    _check_ids(model, u, i)
    p_eff = model.p[u] + _implicit_vec(model, r_u)
    return float(model.mu + model.b_i[i] + model.b_u[u] + model.q[i] @ p_eff)


def predict_time(model: FactorModel, u: int, i: int, t: int, r_u,
                 binner: TimeBinner | None = None) -> float:
    _check_ids(model, u, i)
    binner = binner or model.binner
    tb = binner.bin_of(t)
    p_eff = model.p[u]
    if model.implicit_on:
        p_eff = p_eff + _implicit_vec(model, r_u)
    return float(model.mu + model.b_i[i] + model.b_u[u]
                 + model.x[u] @ model.z[tb] + model.b_ibin[i, tb]
                 + model.q[i] @ p_eff)


def _implicit_sums(model: FactorModel, context: Dataset) -> np.ndarray:
    """Per-user scaled implicit sums |R_u|^{-1/2} sum y_j from a context split."""
    S = np.zeros((model.num_users, model.D))
    if context is None or len(context) == 0:
        return S
    np.add.at(S, context.users, model.y[context.items])
    counts = np.bincount(context.users, minlength=model.num_users)
    nz = counts > 0
    S[nz] /= np.sqrt(counts[nz])[:, None]
    return S


def predict_batch(model: FactorModel, users, items, times=None,
                  context: Dataset | None = None) -> np.ndarray:
    """Vectorized prediction with cold-start fallback: ids outside the model
    keep only the known terms; out-of-range timestamps clamp to the boundary
    bins. Output is unclipped."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    out = np.empty(users.size)
    if model.implicit_on:
        S = _implicit_sums(model, context)
    else:
        S = K.EMPTY_F2
    if model.time_on:
        qtb = model.binner.bins(np.asarray(times, dtype=np.int64), clamp=True)
    else:
        qtb = K.EMPTY_I1
    K.mf_predict_batch(users, items, model.mu, model.b_u, model.b_i,
                       model.p, model.q, model.implicit_on, S,
                       model.time_on, qtb, model.x, model.z, model.b_ibin,
                       False, K.EMPTY_I1, K.EMPTY_F1, K.EMPTY_F2, out)
    return out


# ---------------------------------------------------------------------------
# objectives and exact gradients

def _pred_vec(model: FactorModel, data: Dataset, binner: TimeBinner | None = None):
    """In-range vectorized predictions used by losses/gradients, plus the
    per-observation pieces the gradients reuse."""
    u, i = data.users, data.items
    p_eff = model.p[u]
    c_u = None
    if model.implicit_on:
        S = _implicit_sums(model, data)
        p_eff = p_eff + S[u]
        counts = np.bincount(u, minlength=model.num_users)
        c_u = np.zeros(model.num_users)
        nz = counts > 0
        c_u[nz] = 1.0 / np.sqrt(counts[nz])
    pred = model.mu + model.b_u[u] + model.b_i[i] + np.einsum("nd,nd->n", model.q[i], p_eff)
    tb = None
    if model.time_on:
        binner = binner or model.binner
        tb = binner.bins(data.times)
        pred = pred + np.einsum("nd,nd->n", model.x[u], model.z[tb]) + model.b_ibin[i, tb]
    return pred, p_eff, c_u, tb


def loss_mf(model: FactorModel, data: Dataset, lam: float) -> float:
    """Squared error plus lam * (b_i^2 + b_u^2 + |q_i|^2 + |p_u|^2) summed per
    observation."""
    u, i = data.users, data.items
    pred, _, _, _ = _pred_vec(model, data)
    e = data.scores - pred
    reg = (model.b_i[i] ** 2 + model.b_u[u] ** 2
           + (model.q[i] ** 2).sum(axis=1) + (model.p[u] ** 2).sum(axis=1))
    return float((e ** 2).sum() + lam * reg.sum())


def loss_svdpp(model: FactorModel, data: Dataset, lam: float) -> float:
    """loss_mf extended with the implicit term; each observation additionally
    regularizes every y_j in its user's rated set."""
    u, i = data.users, data.items
    pred, _, _, _ = _pred_vec(model, data)
    e = data.scores - pred
    ynorm = (model.y ** 2).sum(axis=1)
    yss_u = np.zeros(model.num_users)
    np.add.at(yss_u, u, ynorm[i])
    reg = (model.b_i[i] ** 2 + model.b_u[u] ** 2
           + (model.q[i] ** 2).sum(axis=1) + (model.p[u] ** 2).sum(axis=1)
           + yss_u[u])
    return float((e ** 2).sum() + lam * reg.sum())


def loss_time(model: FactorModel, data: Dataset, lam1: float, lam2: float,
              lam3: float, binner: TimeBinner | None = None) -> float:
    """Time-aware objective: three regularization groups (biases incl. the
    item-bin bias; factors incl. implicit; time factors), summed per
    observation."""
    u, i = data.users, data.items
    pred, _, _, tb = _pred_vec(model, data, binner)
    e = data.scores - pred
    reg1 = model.b_i[i] ** 2 + model.b_u[u] ** 2 + model.b_ibin[i, tb] ** 2
    reg2 = (model.q[i] ** 2).sum(axis=1) + (model.p[u] ** 2).sum(axis=1)
    if model.implicit_on:
        ynorm = (model.y ** 2).sum(axis=1)
        yss_u = np.zeros(model.num_users)
        np.add.at(yss_u, u, ynorm[i])
        reg2 = reg2 + yss_u[u]
    reg3 = (model.x[u] ** 2).sum(axis=1) + (model.z[tb] ** 2).sum(axis=1)
    return float((e ** 2).sum() + lam1 * reg1.sum() + lam2 * reg2.sum()
                 + lam3 * reg3.sum())


def _grad_common(model, data, e, p_eff, lam_bias, lam_fac, c_u):
    """True gradients of the squared error + per-observation regularizers for
    the parameter groups every SGD-family model shares."""
    u, i = data.users, data.items
    U, I = model.num_users, model.num_items
    cnt_u = np.bincount(u, minlength=U).astype(float)
    cnt_i = np.bincount(i, minlength=I).astype(float)
    g = {}
    g["b_u"] = -2.0 * np.bincount(u, weights=e, minlength=U) + 2.0 * lam_bias * cnt_u * model.b_u
    g["b_i"] = -2.0 * np.bincount(i, weights=e, minlength=I) + 2.0 * lam_bias * cnt_i * model.b_i
    gq = np.zeros_like(model.q)
    np.add.at(gq, i, -2.0 * e[:, None] * p_eff)
    g["q"] = gq + 2.0 * lam_fac * cnt_i[:, None] * model.q
    gp = np.zeros_like(model.p)
    np.add.at(gp, u, -2.0 * e[:, None] * model.q[i])
    g["p"] = gp + 2.0 * lam_fac * cnt_u[:, None] * model.p
    if model.implicit_on:
        gy = np.zeros_like(model.y)
        order, ptr = data.by_user()
        for uu in range(U):
            lo, hi = ptr[uu], ptr[uu + 1]
            if lo == hi:
                continue
            recs = order[lo:hi]
            r_u = data.items[recs]
            pull = -2.0 * c_u[uu] * (e[recs][:, None] * model.q[data.items[recs]]).sum(axis=0)
            gy[r_u] += pull + 2.0 * lam_fac * (hi - lo) * model.y[r_u]
        g["y"] = gy
    return g


def grad_mf(model: FactorModel, data: Dataset, lam: float) -> dict[str, np.ndarray]:
    pred, p_eff, c_u, _ = _pred_vec(model, data)
    e = data.scores - pred
    return _grad_common(model, data, e, p_eff, lam, lam, c_u)


def grad_svdpp(model: FactorModel, data: Dataset, lam: float) -> dict[str, np.ndarray]:
    return grad_mf(model, data, lam)


def grad_time(model: FactorModel, data: Dataset, lam1: float, lam2: float,
              lam3: float, binner: TimeBinner | None = None) -> dict[str, np.ndarray]:
    u, i = data.users, data.items
    pred, p_eff, c_u, tb = _pred_vec(model, data, binner)
    e = data.scores - pred
    g = _grad_common(model, data, e, p_eff, lam1, lam2, c_u)
    gx = np.zeros_like(model.x)
    np.add.at(gx, u, -2.0 * e[:, None] * model.z[tb] + 2.0 * lam3 * model.x[u])
    gz = np.zeros_like(model.z)
    np.add.at(gz, tb, -2.0 * e[:, None] * model.x[u] + 2.0 * lam3 * model.z[tb])
    gb = np.zeros_like(model.b_ibin)
    np.add.at(gb, (i, tb), -2.0 * e + 2.0 * lam1 * model.b_ibin[i, tb])
    g["x"], g["z"], g["b_ibin"] = gx, gz, gb
    return g


# ---------------------------------------------------------------------------
# SGD epochs

def _epoch_layout(model: FactorModel, data: Dataset, arts_of_item: np.ndarray | None):
    """Per-user CSR slices of the training data in a fixed order."""
    order, ptr = data.by_user()
    items = data.items[order]
    ratings = data.scores[order]
    if model.time_on:
        tbins = model.binner.bins(data.times)[order]
    else:
        tbins = np.zeros(items.size, dtype=np.int64)
    if arts_of_item is None:
        arts = np.full(items.size, -1, dtype=np.int64)
    else:
        arts = arts_of_item[items]
    return ptr, items, ratings, tbins, arts


def _sgd_pass(model: FactorModel, data: Dataset, gamma: float,
              lam_bias: float, lam_fac: float, lam_time: float,
              threads: int = 1, locks=NULL_LOCKS,
              arts_of_item: np.ndarray | None = None,
              b_a: np.ndarray | None = None, q_a: np.ndarray | None = None,
              shuffle: np.ndarray | None = None) -> None:
    """One rating-driven pass over all users in a seeded shuffled order.

    Sequentially each user's block runs as one kernel call; with threads > 1
    every rating's item-side state (item id plus artist id) is mutated under
    its lock batch while user-side state stays worker-private.
    """
    ptr, items, ratings, tbins, arts = _epoch_layout(model, data, arts_of_item)
    has_art = b_a is not None
    b_a_arr = b_a if has_art else K.EMPTY_F1
    q_a_arr = q_a if has_art else K.EMPTY_F2
    perm = shuffle if shuffle is not None else model.shuffle_rng.permutation(data.num_users)
    active = [int(u) for u in perm if ptr[u + 1] > ptr[u]]

    if threads <= 1:
        s_buf = np.zeros(model.D)
        qold = np.zeros(model.D)
        for u in active:
            lo, hi = ptr[u], ptr[u + 1]
            K.user_block_update(u, items[lo:hi], ratings[lo:hi], tbins[lo:hi],
                                arts[lo:hi], model.mu, model.b_u, model.b_i,
                                model.p, model.q, model.y,
                                model.implicit_on, model.time_on,
                                model.x, model.z, model.b_ibin,
                                has_art, b_a_arr, q_a_arr,
                                gamma, lam_bias, lam_fac, lam_time, s_buf, qold)
        return

    def make_task(u: int) -> UserTask:
        lo, hi = ptr[u], ptr[u + 1]
        u_items = items[lo:hi]
        u_ratings = ratings[lo:hi]
        u_tbins = tbins[lo:hi]
        u_arts = arts[lo:hi]
        touched = np.unique(np.concatenate([u_items, u_arts[u_arts >= 0]]))

        def run(lk):
            s_buf = np.zeros(model.D)
            qold = np.zeros(model.D)
            c = K.implicit_sum(u_items, model.y, s_buf) if model.implicit_on else 0.0
            for k in range(u_items.size):
                it = int(u_items[k])
                a = int(u_arts[k])
                ids = (it,) if a < 0 or a == it else (it, a)
                with lk.acquire(ids):
                    e = K.rate_update(u, it, u_ratings[k], u_tbins[k], a,
                                      model.mu, model.b_u, model.b_i,
                                      model.p, model.q,
                                      model.implicit_on, c, s_buf,
                                      model.time_on, model.x, model.z, model.b_ibin,
                                      has_art, b_a_arr, q_a_arr,
                                      gamma, lam_bias, lam_fac, lam_time, qold)
                if model.implicit_on:
                    for j in u_items:
                        with lk.acquire_one(int(j)):
                            K.y_update_one(int(j), e, c, qold, model.y, gamma, lam_fac)

        return UserTask(u, touched, run)

    parallel_for_users([make_task(u) for u in active], threads, locks)


def sgd_epoch(model: FactorModel, train: Dataset, hyper: HyperParams,
              threads: int = 1, locks=NULL_LOCKS) -> FactorModel:
    """One epoch of biased-MF SGD; decays hyper.gamma in place afterwards."""
    _sgd_pass(model, train, hyper.gamma, hyper.lam, hyper.lam, 0.0, threads, locks)
    model.epochs_done += 1
    model.check_finite(model.epochs_done)
    hyper.gamma *= hyper.decay
    return model


def sgd_epoch_svdpp(model: FactorModel, train: Dataset, hyper: HyperParams,
                    threads: int = 1, locks=NULL_LOCKS) -> FactorModel:
    """SVD++ epoch: per-user cached implicit sums, y updates per rating."""
    if not model.implicit_on:
        raise ConfigError("sgd_epoch_svdpp requires an implicit-feedback model")
    return sgd_epoch(model, train, hyper, threads, locks)


def sgd_epoch_time(model: FactorModel, train: Dataset, hyper: HyperParams,
                   threads: int = 1, locks=NULL_LOCKS) -> FactorModel:
    """Time-aware epoch with the three regularization groups lam1/lam2/lam3."""
    if not model.time_on:
        raise ConfigError("sgd_epoch_time requires a time-aware model")
    _sgd_pass(model, train, hyper.gamma, hyper.lam1, hyper.lam2, hyper.lam3,
              threads, locks)
    model.epochs_done += 1
    model.check_finite(model.epochs_done)
    hyper.gamma *= hyper.decay
    return model


# ---------------------------------------------------------------------------
# alternating least squares

def _side_csr(data: Dataset, side: str, weights: np.ndarray | None):
    if side == "users":
        keys, cols = data.users, data.items
        n = data.num_users
    elif side == "items":
        keys, cols = data.items, data.users
        n = data.num_items
    else:
        raise ConfigError(f"side must be 'users' or 'items', got {side!r}")
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    w = np.ones(len(data)) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.size != len(data):
        raise ShapeError(f"expected {len(data)} weights, got {w.size}")
    return ptr, cols[order], data.scores[order], w[order]


def als_half_step(model: FactorModel, train: Dataset, side: str, lam: float,
                  weights: np.ndarray | None = None, threads: int = 1) -> FactorModel:
    """Exactly solve the (weighted) regularized normal equations for one side.

    Rows without observations become zero when lam > 0; with lam == 0 a
    rank-deficient row raises SingularSystemError. Output is bit-identical
    for every thread count.
    """
    if weights is not None and np.any(np.asarray(weights) < 0):
        raise ConfigError("observation weights must be >= 0")
    ptr, idx, val, wts = _side_csr(train, side, weights)
    fixed = model.q if side == "users" else model.p
    out = model.p if side == "users" else model.q
    n_rows = out.shape[0]
    fails = []

    def work(lo: int, hi: int) -> None:
        fail = np.full(1, -1, dtype=np.int64)
        K.als_solve_rows(lo, hi, ptr, idx, val, wts, fixed, out, lam, fail)
        if fail[0] >= 0:
            fails.append(int(fail[0]))

    run_blocks(work, even_bounds(n_rows, max(threads, 1)), threads)
    if fails:
        raise SingularSystemError(
            f"singular normal equations at {side} row {min(fails)}; use lam > 0")
    return model


def als_objective(model: FactorModel, data: Dataset, lam: float,
                  weights: np.ndarray | None = None) -> float:
    """Weighted squared error plus lam * (||P||_F^2 + ||Q||_F^2)."""
    pred = np.einsum("nd,nd->n", model.q[data.items], model.p[data.users])
    w = np.ones(len(data)) if weights is None else np.asarray(weights, dtype=np.float64)
    err = float((w * (data.scores - pred) ** 2).sum())
    return err + lam * float((model.p ** 2).sum() + (model.q ** 2).sum())


def als_iteration(model: FactorModel, train: Dataset, lam: float,
                  weights: np.ndarray | None = None, threads: int = 1) -> FactorModel:
    """One full iteration: fix user side and solve items, then the reverse."""
    als_half_step(model, train, "items", lam, weights, threads)
    als_half_step(model, train, "users", lam, weights, threads)
    return model


# ---------------------------------------------------------------------------
# training driver

@dataclass
class EpochStats:
    epoch: int
    gamma: float
    objective: float
    valid_rmse: float


def objective_of(model: FactorModel, data: Dataset, hyper: HyperParams,
                 weights: np.ndarray | None = None) -> float:
    if model.kind == "sgd":
        return loss_mf(model, data, hyper.lam)
    if model.kind == "svdpp":
        return loss_svdpp(model, data, hyper.lam)
    if model.kind in ("time-svd", "time-svdpp"):
        return loss_time(model, data, hyper.lam1, hyper.lam2, hyper.lam3)
    return als_objective(model, data, hyper.lam, weights)


def run_epoch(model: FactorModel, train: Dataset, hyper: HyperParams,
              threads: int = 1, locks=NULL_LOCKS,
              weights: np.ndarray | None = None) -> FactorModel:
    if model.kind == "sgd":
        return sgd_epoch(model, train, hyper, threads, locks)
    if model.kind == "svdpp":
        return sgd_epoch_svdpp(model, train, hyper, threads, locks)
    if model.kind in ("time-svd", "time-svdpp"):
        return sgd_epoch_time(model, train, hyper, threads, locks)
    if model.kind in ALS_KINDS:
        model.epochs_done += 1
        return als_iteration(model, train, hyper.lam, weights, threads)
    raise ConfigError(f"cannot run epochs for kind {model.kind!r}")


def train(kind: str, train_data: Dataset, validation: Dataset | None,
          hyper: HyperParams, threads: int = 1, seed: int = 0,
          binner: TimeBinner | None = None, weights: np.ndarray | None = None,
          num_users: int | None = None, num_items: int | None = None,
          ) -> tuple[FactorModel, list[EpochStats]]:
    """Run hyper.iters epochs from a seeded initialization; returns the final
    model plus one report row per epoch (training objective, optional
    clipped validation RMSE). The caller's hyper is left untouched."""
    hyper = dataclasses.replace(hyper)
    model = init_model(kind, train_data, hyper, seed, binner=binner,
                       num_users=num_users, num_items=num_items)
    locks = LockTable(model.num_items) if threads > 1 and kind in SGD_KINDS else NULL_LOCKS
    report: list[EpochStats] = []
    for ep in range(hyper.iters):
        gamma_used = hyper.gamma
        run_epoch(model, train_data, hyper, threads, locks, weights)
        obj = objective_of(model, train_data, hyper, weights)
        vr = float("nan")
        if validation is not None and len(validation):
            pred = predict_batch(model, validation.users, validation.items,
                                 validation.times, train_data)
            vr = float(np.sqrt(np.mean((model.scale.clip(pred) - validation.scores) ** 2)))
        report.append(EpochStats(ep, gamma_used, obj, vr))
    return model, report
