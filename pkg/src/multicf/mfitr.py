"""Matrix factorization with item-taxonomy regularization, plus its
time-aware extension.

On top of the biased-MF terms, every rated item contributes its artist's bias
and factor to the prediction, and a graph-smoothing penalty pulls the factors
of parent/child taxonomy nodes together in proportion to their rating-derived
similarity. Every taxonomy node (track, album, artist) owns an entry in the
item-factor table, so never-rated albums and artists are still shaped by the
graph terms.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .data import Dataset, TimeBinner
from .errors import ConfigError, DivergenceError
from .factor import EpochStats, FactorModel, HyperParams, init_model, _sgd_pass
from .neighborhood import UserMeanTable, adjusted_cosine, user_means
from .parallel import LockTable, NULL_LOCKS, UserTask, parallel_for_users
from .taxonomy import TaxonomyGraph

MFITR_KINDS = ("mfitr", "time-mfitr")


@dataclass
class MfitrHyper:
    gamma: float = 8e-5
    decay: float = 0.95
    lam1: float = 1e-5
    lam2: float = 1e-4
    lam3: float = 1e-3
    lam4: float = 1e-3
    lam5: float = 1e-3
    iters: int = 50
    D: int = 50
    D_t: int = 8

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError("gamma must be > 0")
        if not 0 < self.decay <= 1:
            raise ConfigError("decay must be in (0, 1]")
        for name in ("lam1", "lam2", "lam3", "lam4", "lam5"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.iters < 0:
            raise ConfigError("iters must be >= 0")
        if self.D < 1 or self.D_t < 1:
            raise ConfigError("factor dimensions must be >= 1")


def default_mfitr_hyper(kind: str = "mfitr") -> MfitrHyper:
    if kind not in MFITR_KINDS:
        raise ConfigError(f"unknown taxonomy model kind {kind!r}")
    return MfitrHyper()


@dataclass
class TaxonomyEdgeWeights:
    """Similarity weight per taxonomy edge, aligned with the graph edge list;
    clamped to [0, 1] so the smoothing penalty stays bounded below."""

    edge_child: np.ndarray
    edge_parent: np.ndarray
    w: np.ndarray

    def weight(self, i: int, j: int) -> float:
        for k in range(self.edge_child.size):
            if self.edge_child[k] == i and self.edge_parent[k] == j:
                return float(self.w[k])
        raise KeyError(f"({i}, {j}) is not a taxonomy edge")


def edge_weights(graph: TaxonomyGraph, train: Dataset,
                 means: UserMeanTable | None = None) -> TaxonomyEdgeWeights:
    """Adjusted-cosine similarity on every parent/child edge, negatives
    clamped to zero; edges without co-rating evidence get weight 0."""
    if means is None:
        means = user_means(train)
    w = np.empty(graph.edge_child.size)
    for k in range(graph.edge_child.size):
        sim = adjusted_cosine(int(graph.edge_child[k]), int(graph.edge_parent[k]),
                              train, means)
        w[k] = sim if sim > 0.0 else 0.0
    return TaxonomyEdgeWeights(graph.edge_child, graph.edge_parent, w)


@dataclass
class MfitrModel:
    """Factor model extended with per-artist bias/factor tables (indexed by
    artist item id) and the taxonomy used to resolve artists."""

    base: FactorModel
    b_a: np.ndarray
    q_a: np.ndarray
    artist_of_item: np.ndarray = field(repr=False)

    @property
    def kind(self) -> str:
        return "time-mfitr" if self.base.time_on else "mfitr"

    @property
    def mu(self) -> float:
        return self.base.mu

    @property
    def scale(self):
        return self.base.scale

    @property
    def num_users(self) -> int:
        return self.base.num_users

    @property
    def num_items(self) -> int:
        return self.base.num_items

    def check_finite(self, epoch: int) -> None:
        self.base.check_finite(epoch)
        for name, arr in (("b_a", self.b_a), ("q_a", self.q_a)):
            if not np.isfinite(arr).all():
                raise DivergenceError(epoch, f"non-finite {name} after epoch {epoch}")

    def copy(self) -> "MfitrModel":
        return MfitrModel(self.base.copy(), self.b_a.copy(), self.q_a.copy(),
                          self.artist_of_item)


def init_mfitr(kind: str, train: Dataset, graph: TaxonomyGraph, hyper: MfitrHyper,
               seed: int, binner: TimeBinner | None = None,
               num_users: int | None = None, num_items: int | None = None) -> MfitrModel:
    """Seeded init on top of the base factor model; the artist factor table
    draws immediately after q and p so base parameters match a plain model
    created with the same seed."""
    if kind not in MFITR_KINDS:
        raise ConfigError(f"unknown taxonomy model kind {kind!r}")
    time_on = kind == "time-mfitr"
    n_items = num_items if num_items is not None else max(train.num_items, graph.num_nodes)
    base_hyper = HyperParams(D=hyper.D, D_t=hyper.D_t)  # only dimensions matter here
    base = init_model("time-svd" if time_on else "sgd", train, base_hyper, seed,
                      binner=binner, num_users=num_users, num_items=n_items)
    rng = np.random.default_rng([seed, 3])
    amp = 0.005 / np.sqrt(hyper.D)
    q_a = rng.uniform(-amp, amp, (n_items, hyper.D))
    return MfitrModel(base, np.zeros(n_items), q_a, graph.artist_array(n_items))


def _artist_of(model: MfitrModel, i: int) -> int:
    if 0 <= i < model.artist_of_item.size:
        return int(model.artist_of_item[i])
    return -1


def predict_mfitr(model: MfitrModel, u: int, i: int,
                  graph: TaxonomyGraph | None = None) -> float:
    """mu + b_i + b_u + b_a + (q_i + q_a) . p_u with vanishing artist terms
    when the item has no known artist."""
    base = model.base
    a = _artist_of(model, i)
    q_eff = base.q[i] if a < 0 else base.q[i] + model.q_a[a]
    pred = base.mu + base.b_i[i] + base.b_u[u]
    if a >= 0:
        pred += model.b_a[a]
    return float(pred + q_eff @ base.p[u])


def predict_time_mfitr(model: MfitrModel, u: int, i: int, t: int,
                       graph: TaxonomyGraph | None = None,
                       binner: TimeBinner | None = None) -> float:
    base = model.base
    binner = binner or base.binner
    tb = binner.bin_of(t)
    return float(predict_mfitr(model, u, i, graph)
                 + base.x[u] @ base.z[tb] + base.b_ibin[i, tb])


def predict_batch(model: MfitrModel, users, items, times=None) -> np.ndarray:
    """Vectorized predictions with cold-start fallback; unclipped."""
    base = model.base
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    arts = np.full(items.size, -1, dtype=np.int64)
    in_range = (items >= 0) & (items < model.artist_of_item.size)
    arts[in_range] = model.artist_of_item[items[in_range]]
    if base.time_on:
        qtb = base.binner.bins(np.asarray(times, dtype=np.int64), clamp=True)
    else:
        qtb = K.EMPTY_I1
    out = np.empty(users.size)
    K.mf_predict_batch(users, items, base.mu, base.b_u, base.b_i, base.p, base.q,
                       False, K.EMPTY_F2, base.time_on, qtb, base.x, base.z,
                       base.b_ibin, True, arts, model.b_a, model.q_a, out)
    return out


# ---------------------------------------------------------------------------
# objective and exact gradient

def _rating_terms(model: MfitrModel, data: Dataset):
    base = model.base
    u, i = data.users, data.items
    arts = model.artist_of_item[i]
    has = arts >= 0
    safe = np.where(has, arts, 0)
    q_eff = base.q[i] + np.where(has[:, None], model.q_a[safe], 0.0)
    pred = (base.mu + base.b_u[u] + base.b_i[i] + np.where(has, model.b_a[safe], 0.0)
            + np.einsum("nd,nd->n", q_eff, base.p[u]))
    tb = None
    if base.time_on:
        tb = base.binner.bins(data.times)
        pred = pred + np.einsum("nd,nd->n", base.x[u], base.z[tb]) + base.b_ibin[i, tb]
    return pred, arts, has, safe, tb


def graph_penalty(model: MfitrModel, ew: TaxonomyEdgeWeights,
                  lam3: float, lam4: float) -> float:
    q = model.base.q
    d2 = ((q[ew.edge_child] - q[ew.edge_parent]) ** 2).sum(axis=1)
    return float(lam3 * (ew.w * d2).sum() + lam4 * (ew.w * d2).sum())


def loss_mfitr(model: MfitrModel, train: Dataset, graph: TaxonomyGraph,
               ew: TaxonomyEdgeWeights, hyper: MfitrHyper) -> float:
    """Squared error with lam1/lam2 regularizers summed per observation, plus
    the parent- and child-side graph penalties summed once over the edges."""
    base = model.base
    u, i = train.users, train.items
    pred, arts, has, safe, tb = _rating_terms(model, train)
    e = train.scores - pred
    reg1 = base.b_i[i] ** 2 + base.b_u[u] ** 2 + np.where(has, model.b_a[safe] ** 2, 0.0)
    reg2 = ((base.q[i] ** 2).sum(axis=1) + (base.p[u] ** 2).sum(axis=1)
            + np.where(has, (model.q_a[safe] ** 2).sum(axis=1), 0.0))
    total = float((e ** 2).sum() + hyper.lam1 * reg1.sum() + hyper.lam2 * reg2.sum())
    if base.time_on:
        reg1_t = base.b_ibin[i, tb] ** 2
        reg5 = (base.x[u] ** 2).sum(axis=1) + (base.z[tb] ** 2).sum(axis=1)
        total += float(hyper.lam1 * reg1_t.sum() + hyper.lam5 * reg5.sum())
    return total + graph_penalty(model, ew, hyper.lam3, hyper.lam4)


def grad_mfitr(model: MfitrModel, train: Dataset, graph: TaxonomyGraph,
               ew: TaxonomyEdgeWeights, hyper: MfitrHyper) -> dict[str, np.ndarray]:
    """True gradient of loss_mfitr for every parameter group."""
    base = model.base
    u, i = train.users, train.items
    U, I = base.num_users, base.num_items
    pred, arts, has, safe, tb = _rating_terms(model, train)
    e = train.scores - pred
    cnt_u = np.bincount(u, minlength=U).astype(float)
    cnt_i = np.bincount(i, minlength=I).astype(float)
    cnt_a = np.zeros(I)
    np.add.at(cnt_a, arts[has], 1.0)

    g = {}
    g["b_u"] = -2.0 * np.bincount(u, weights=e, minlength=U) + 2.0 * hyper.lam1 * cnt_u * base.b_u
    g["b_i"] = -2.0 * np.bincount(i, weights=e, minlength=I) + 2.0 * hyper.lam1 * cnt_i * base.b_i
    g_ba = np.zeros(I)
    np.add.at(g_ba, arts[has], -2.0 * e[has])
    g["b_a"] = g_ba + 2.0 * hyper.lam1 * cnt_a * model.b_a

    q_eff = base.q[i] + np.where(has[:, None], model.q_a[safe], 0.0)
    gq = np.zeros_like(base.q)
    np.add.at(gq, i, -2.0 * e[:, None] * base.p[u])
    gq += 2.0 * hyper.lam2 * cnt_i[:, None] * base.q
    # graph penalty: both directed sums hit each edge
    diff = base.q[ew.edge_child] - base.q[ew.edge_parent]
    coef = 2.0 * (hyper.lam3 + hyper.lam4) * ew.w
    np.add.at(gq, ew.edge_child, coef[:, None] * diff)
    np.add.at(gq, ew.edge_parent, -coef[:, None] * diff)
    g["q"] = gq

    g_qa = np.zeros_like(model.q_a)
    np.add.at(g_qa, arts[has], -2.0 * e[has, None] * base.p[u[has]])
    g["q_a"] = g_qa + 2.0 * hyper.lam2 * cnt_a[:, None] * model.q_a

    gp = np.zeros_like(base.p)
    np.add.at(gp, u, -2.0 * e[:, None] * q_eff)
    g["p"] = gp + 2.0 * hyper.lam2 * cnt_u[:, None] * base.p

    if base.time_on:
        gx = np.zeros_like(base.x)
        np.add.at(gx, u, -2.0 * e[:, None] * base.z[tb] + 2.0 * hyper.lam5 * base.x[u])
        gz = np.zeros_like(base.z)
        np.add.at(gz, tb, -2.0 * e[:, None] * base.x[u] + 2.0 * hyper.lam5 * base.z[tb])
        gb = np.zeros_like(base.b_ibin)
        np.add.at(gb, (i, tb), -2.0 * e + 2.0 * hyper.lam1 * base.b_ibin[i, tb])
        g["x"], g["z"], g["b_ibin"] = gx, gz, gb
    return g


# ---------------------------------------------------------------------------
# training

def _edge_pass(model: MfitrModel, ew: TaxonomyEdgeWeights, gamma: float,
               lam3: float, lam4: float, threads: int = 1, locks=NULL_LOCKS) -> None:
    """Graph-smoothing pass; parallel mode locks both endpoints per edge."""
    n_edges = ew.edge_child.size
    if n_edges == 0 or (lam3 == 0.0 and lam4 == 0.0):
        return
    q = model.base.q
    if threads <= 1:
        K.edge_pass_range(0, n_edges, ew.edge_child, ew.edge_parent, ew.w,
                          q, gamma, lam3, lam4)
        return

    def make_task(k: int) -> UserTask:
        c, p = int(ew.edge_child[k]), int(ew.edge_parent[k])

        def run(lk):
            with lk.acquire((c, p)):
                K.edge_pass_range(k, k + 1, ew.edge_child, ew.edge_parent, ew.w,
                                  q, gamma, lam3, lam4)

        return UserTask(-1, np.array([c, p]), run)

    parallel_for_users([make_task(k) for k in range(n_edges)], threads, locks)


def sgd_epoch_mfitr(model: MfitrModel, train: Dataset, graph: TaxonomyGraph,
                    ew: TaxonomyEdgeWeights, hyper: MfitrHyper,
                    threads: int = 1, locks=NULL_LOCKS) -> MfitrModel:
    """One rating-driven pass (artist parameters locked like items), then one
    pass over the taxonomy edges; decays hyper.gamma afterwards."""
    base = model.base
    _sgd_pass(base, train, hyper.gamma, hyper.lam1, hyper.lam2, hyper.lam5,
              threads, locks, arts_of_item=model.artist_of_item,
              b_a=model.b_a, q_a=model.q_a)
    _edge_pass(model, ew, hyper.gamma, hyper.lam3, hyper.lam4, threads, locks)
    base.epochs_done += 1
    model.check_finite(base.epochs_done)
    hyper.gamma *= hyper.decay
    return model


def sgd_epoch_time_mfitr(model: MfitrModel, train: Dataset, graph: TaxonomyGraph,
                         ew: TaxonomyEdgeWeights, hyper: MfitrHyper,
                         threads: int = 1, locks=NULL_LOCKS) -> MfitrModel:
    if not model.base.time_on:
        raise ConfigError("sgd_epoch_time_mfitr requires a time-aware model")
    return sgd_epoch_mfitr(model, train, graph, ew, hyper, threads, locks)


def train_mfitr(kind: str, train_data: Dataset, validation: Dataset | None,
                graph: TaxonomyGraph, hyper: MfitrHyper, threads: int = 1,
                seed: int = 0, binner: TimeBinner | None = None,
                ew: TaxonomyEdgeWeights | None = None,
                num_users: int | None = None, num_items: int | None = None,
                ) -> tuple[MfitrModel, list[EpochStats]]:
    hyper = dataclasses.replace(hyper)
    model = init_mfitr(kind, train_data, graph, hyper, seed, binner=binner,
                       num_users=num_users, num_items=num_items)
    if ew is None:
        ew = edge_weights(graph, train_data)
    locks = LockTable(model.num_items) if threads > 1 else NULL_LOCKS
    epoch_fn = sgd_epoch_time_mfitr if kind == "time-mfitr" else sgd_epoch_mfitr
    report: list[EpochStats] = []
    for ep in range(hyper.iters):
        gamma_used = hyper.gamma
        epoch_fn(model, train_data, graph, ew, hyper, threads, locks)
        obj = loss_mfitr(model, train_data, graph, ew, hyper)
        vr = float("nan")
        if validation is not None and len(validation):
            pred = predict_batch(model, validation.users, validation.items,
                                 validation.times)
            vr = float(np.sqrt(np.mean((model.scale.clip(pred) - validation.scores) ** 2)))
        report.append(EpochStats(ep, gamma_used, obj, vr))
    return model, report
