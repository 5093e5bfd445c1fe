"""Model persistence.

Factor-family models use a deterministic binary layout: one magic line, one
JSON header line (kind, dimensions, counts, flags, seed, score scale, binner,
and the array manifest), then each array's raw little-endian float64 bytes in
manifest order. Neighbor tables persist as text (see neighborhood.py). Byte
output depends only on the model contents, so identical training runs produce
identical files.
"""
from __future__ import annotations

import json

import numpy as np

from .data import ScoreScale, TimeBinner
from .errors import ParseError
from .factor import FactorModel
from .mfitr import MfitrModel
from .neighborhood import NeighborTable, load_neighbors, save_neighbors

MAGIC = b"multicf-model-v1\n"
KNN_MAGIC = "#multicf-knn-v1"


def _array_manifest(arrays: dict[str, np.ndarray]) -> list[list]:
    return [[name, list(arr.shape)] for name, arr in arrays.items()]


def _factor_arrays(model: FactorModel) -> dict[str, np.ndarray]:
    return {"b_u": model.b_u, "b_i": model.b_i, "p": model.p, "q": model.q,
            "y": model.y, "x": model.x, "z": model.z, "b_ibin": model.b_ibin}


def save_model(model, path) -> None:
    if isinstance(model, NeighborTable):
        save_neighbors(model, path)
        return
    if isinstance(model, MfitrModel):
        base = model.base
        arrays = _factor_arrays(base)
        arrays.update({"b_a": model.b_a, "q_a": model.q_a,
                       "artist_of_item": model.artist_of_item.astype(np.float64)})
        kind = model.kind
    else:
        base = model
        arrays = _factor_arrays(base)
        kind = model.kind
    header = {
        "kind": kind,
        "D": base.D,
        "D_t": base.D_t,
        "num_users": base.num_users,
        "num_items": base.num_items,
        "implicit_on": base.implicit_on,
        "time_on": base.time_on,
        "mu": base.mu,
        "seed": base.seed,
        "epochs_done": base.epochs_done,
        "scale": [base.scale.lo, base.scale.hi],
        "binner": ([base.binner.t_min, base.binner.t_max, base.binner.num_bins]
                   if base.binner is not None else None),
        "arrays": _array_manifest(arrays),
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for name, _ in header["arrays"]:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())


def load_model(path):
    """Load any persisted model; dispatches on the magic line."""
    with open(path, "rb") as fh:
        first = fh.readline()
        if first.decode("utf-8", "replace").strip() == KNN_MAGIC:
            return load_neighbors(path)
        if first != MAGIC:
            raise ParseError(path, 1, "not a multicf model file")
        header = json.loads(fh.readline().decode("utf-8"))
        arrays = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ParseError(path, 2, f"truncated array block {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

    binner = None
    if header["binner"] is not None:
        t0, t1, nb = header["binner"]
        binner = TimeBinner(int(t0), int(t1), int(nb))
    scale = ScoreScale(*header["scale"])
    kind = header["kind"]
    base_kind = {"mfitr": "sgd", "time-mfitr": "time-svd"}.get(kind, kind)
    base = FactorModel(
        kind=base_kind, mu=float(header["mu"]),
        b_u=arrays["b_u"], b_i=arrays["b_i"], p=arrays["p"], q=arrays["q"],
        y=arrays["y"], x=arrays["x"], z=arrays["z"], b_ibin=arrays["b_ibin"],
        D=int(header["D"]), D_t=int(header["D_t"]),
        implicit_on=bool(header["implicit_on"]), time_on=bool(header["time_on"]),
        binner=binner, seed=int(header["seed"]), scale=scale,
        epochs_done=int(header["epochs_done"]),
        shuffle_rng=np.random.default_rng([int(header["seed"]), 2]))
    if kind in ("mfitr", "time-mfitr"):
        return MfitrModel(base, arrays["b_a"], arrays["q_a"],
                          arrays["artist_of_item"].astype(np.int64))
    return base
