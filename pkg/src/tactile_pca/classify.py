"""Nearest-neighbour and histogram-likelihood classifiers over PC vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data_model import ClassLabel, GridMetadata, check_schema
from .evaluation import PredictionRecord
from .pca import PcVector

CLASSIFIER_SCHEMA = "tactile-classifier"
CLASSIFIER_VERSION = 1

DEFAULT_BINS = 20
DEFAULT_EPSILON = 1e-6
RANGE_EXPANSION = 0.05


class ClassifierError(ValueError):
    pass


@dataclass(frozen=True)
class KnnModel:
    """Exhaustive-search 1-NN. Training vectors are kept sorted by label so
    that ``argmin`` resolves distance ties to the lowest (loc, id) label."""

    vectors: np.ndarray
    labels: tuple[ClassLabel, ...]
    target: str = "id"
    k: int = 1

    def __post_init__(self) -> None:
        if self.target not in ("loc", "id"):
            raise ClassifierError(f"target must be 'loc' or 'id', got {self.target!r}")
        if self.k != 1:
            raise ClassifierError("only k=1 is supported")

    @classmethod
    def from_pcs(cls, pcs: Sequence[PcVector], target: str = "id") -> "KnnModel":
        if not pcs:
            raise ClassifierError("empty model")
        order = sorted(range(len(pcs)), key=lambda i: pcs[i].label.key)
        vectors = np.stack([pcs[i].components for i in order]).astype(float)
        return cls(vectors, tuple(pcs[i].label for i in order), target)

    def nearest(self, p: np.ndarray) -> ClassLabel:
        if len(self.labels) == 0:
            raise ClassifierError("empty model")
        p = np.asarray(p, dtype=float)
        if p.shape != self.vectors.shape[1:]:
            raise ClassifierError(f"query length {p.shape} does not match model {self.vectors.shape[1:]}")
        d2 = np.sum((self.vectors - p) ** 2, axis=1)
        return self.labels[int(np.argmin(d2))]


def knn_predict(model: KnnModel, p: PcVector | np.ndarray) -> int:
    """Class index (loc or id, per ``model.target``) of the nearest training vector."""
    comps = p.components if isinstance(p, PcVector) else p
    lab = model.nearest(comps)
    return lab.loc_index if model.target == "loc" else lab.id_index


@dataclass(frozen=True)
class HistModel:
    classes: tuple[tuple[int, int], ...]  # (loc_index, id_index), sorted
    lows: np.ndarray  # per PC, lower edge of bin 0
    widths: np.ndarray  # per PC, bin width
    probs: np.ndarray  # (n_classes, n_reduced, n_bins)
    epsilon: float
    loc_values: dict
    id_values: dict

    @property
    def n_bins(self) -> int:
        return self.probs.shape[2]

    @property
    def n_reduced(self) -> int:
        return self.probs.shape[1]

    def edges(self, r: int) -> np.ndarray:
        return self.lows[r] + self.widths[r] * np.arange(self.n_bins + 1)

    def bins(self, values: np.ndarray) -> np.ndarray:
        """Bin index per component; out-of-range values clamp to the edge bins."""
        idx = np.floor((np.asarray(values, dtype=float) - self.lows) / self.widths)
        return np.clip(idx, 0, self.n_bins - 1).astype(int)

    def class_position(self, loc_index: int, id_index: int) -> int:
        try:
            return self._lookup[(loc_index, id_index)]
        except KeyError:
            raise ClassifierError(f"unknown class {(loc_index, id_index)}") from None

    @property
    def _lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {c: i for i, c in enumerate(self.classes)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def log_likelihoods(self, p: np.ndarray) -> np.ndarray:
        """Mean log bin probability of ``p`` under every class, in ``classes`` order."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_reduced,):
            raise ClassifierError(f"query length {p.shape} does not match model ({self.n_reduced},)")
        b = self.bins(p)
        picked = self.probs[:, np.arange(self.n_reduced), b]
        return np.log(picked).mean(axis=1)


def hist_fit(
    pcs: Sequence[PcVector],
    n_bins: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
    meta: GridMetadata | None = None,
) -> HistModel:
    """Per-class, per-component histogram likelihoods with additive smoothing.

    Bin edges are shared by all classes: uniform over the training range of
    each component, widened by 5% on both sides. With ``meta`` given every
    class of the grid must be represented.
    """
    if n_bins < 2:
        raise ClassifierError("n_bins must be at least 2")
    if epsilon < 0:
        raise ClassifierError("epsilon must be non-negative")
    if not pcs:
        raise ClassifierError("missing class")
    x = np.stack([p.components for p in pcs]).astype(float)
    keys = [p.label.key for p in pcs]
    if meta is not None:
        classes = [(l, i) for l in range(1, meta.n_loc + 1) for i in range(1, meta.n_id + 1)]
        missing = set(classes) - set(keys)
        if missing:
            raise ClassifierError(f"missing class {sorted(missing)[0]}")
    else:
        classes = sorted(set(keys))
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    pad = np.where(span > 0, RANGE_EXPANSION * span, 0.5)
    lows = lo - pad
    widths = (span + 2 * pad) / n_bins
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), x.shape[1], n_bins))
    partial = HistModel(tuple(classes), lows, widths, counts, epsilon, {}, {})
    rows = np.arange(x.shape[1])
    for key, vec in zip(keys, x):
        counts[index[key], rows, partial.bins(vec)] += 1.0
    totals = counts.sum(axis=2, keepdims=True)
    probs = (counts + epsilon) / (totals + n_bins * epsilon)
    loc_values = {p.label.loc_index: p.label.loc_value for p in pcs}
    id_values = {p.label.id_index: p.label.id_value for p in pcs}
    return HistModel(tuple(classes), lows, widths, probs, epsilon, loc_values, id_values)


def log_likelihood(model: HistModel, p: PcVector | np.ndarray, loc_index: int, id_index: int) -> float:
    comps = p.components if isinstance(p, PcVector) else p
    row = model.class_position(loc_index, id_index)
    return float(model.log_likelihoods(comps)[row])


def _marginal(model: HistModel, p, axis: str) -> tuple[list[int], np.ndarray]:
    comps = p.components if isinstance(p, PcVector) else p
    ll = model.log_likelihoods(comps)
    like = np.exp(ll - ll.max())  # common factor does not move the argmax
    pos = 1 if axis == "id" else 0
    values = sorted({c[pos] for c in model.classes})
    where = {v: i for i, v in enumerate(values)}
    sums = np.zeros(len(values))
    for c, v in zip(model.classes, like):
        sums[where[c[pos]]] += v
    return values, sums


def map_what(model: HistModel, p: PcVector | np.ndarray) -> int:
    """Identity index maximising the likelihood summed over locations."""
    values, sums = _marginal(model, p, "id")
    return values[int(np.argmax(sums))]


def map_where(model: HistModel, p: PcVector | np.ndarray) -> int:
    """Location index maximising the likelihood summed over identities."""
    values, sums = _marginal(model, p, "loc")
    return values[int(np.argmax(sums))]


# --- batch prediction ------------------------------------------------------


@dataclass(frozen=True)
class Classifiers:
    knn_what: KnnModel
    knn_where: KnnModel
    hist: HistModel

    @classmethod
    def train(cls, pcs: Sequence[PcVector], meta: GridMetadata | None = None,
              n_bins: int = DEFAULT_BINS, epsilon: float = DEFAULT_EPSILON) -> "Classifiers":
        return cls(
            KnnModel.from_pcs(pcs, "id"),
            KnnModel.from_pcs(pcs, "loc"),
            hist_fit(pcs, n_bins, epsilon, meta),
        )

    def predict(self, pcs: Sequence[PcVector], method: str = "both") -> list[PredictionRecord]:
        if method not in ("knn", "prob", "both"):
            raise ClassifierError(f"unknown method {method!r}")
        methods = ["knn", "prob"] if method == "both" else [method]
        records = []
        for m in methods:
            for p in pcs:
                if m == "knn":
                    what = self.knn_what.nearest(p.components)
                    where = self.knn_where.nearest(p.components)
                    pred = ClassLabel(where.loc_index, what.id_index, where.loc_value, what.id_value)
                else:
                    li, ii = map_where(self.hist, p), map_what(self.hist, p)
                    pred = ClassLabel(li, ii, self.hist.loc_values[li], self.hist.id_values[ii])
                records.append(PredictionRecord(p.label, pred, m))
        return records


def _labels_to_list(labels: Sequence[ClassLabel]) -> list:
    return [[l.loc_index, l.id_index, l.loc_value, l.id_value] for l in labels]


def _labels_from_list(rows) -> tuple[ClassLabel, ...]:
    return tuple(ClassLabel(int(a), int(b), float(c), float(d)) for a, b, c, d in rows)


def classifiers_to_dict(c: Classifiers) -> dict:
    h = c.hist
    return {
        "schema": CLASSIFIER_SCHEMA,
        "version": CLASSIFIER_VERSION,
        "knn": {
            "k": c.knn_what.k,
            "vectors": c.knn_what.vectors.tolist(),
            "labels": _labels_to_list(c.knn_what.labels),
        },
        "hist": {
            "n_bins": h.n_bins,
            "epsilon": h.epsilon,
            "edges": [h.edges(r).tolist() for r in range(h.n_reduced)],
            "lows": h.lows.tolist(),
            "widths": h.widths.tolist(),
            "classes": [list(k) for k in h.classes],
            "probs": h.probs.tolist(),
            "loc_values": sorted([k, v] for k, v in h.loc_values.items()),
            "id_values": sorted([k, v] for k, v in h.id_values.items()),
        },
    }


def classifiers_from_dict(doc: dict) -> Classifiers:
    check_schema(doc, CLASSIFIER_SCHEMA, CLASSIFIER_VERSION)
    k = doc["knn"]
    labels = _labels_from_list(k["labels"])
    vectors = np.array(k["vectors"], dtype=float).reshape(len(labels), -1)
    h = doc["hist"]
    hist = HistModel(
        tuple((int(a), int(b)) for a, b in h["classes"]),
        np.array(h["lows"], dtype=float),
        np.array(h["widths"], dtype=float),
        np.array(h["probs"], dtype=float),
        float(h["epsilon"]),
        {int(a): float(b) for a, b in h["loc_values"]},
        {int(a): float(b) for a, b in h["id_values"]},
    )
    return Classifiers(KnnModel(vectors, labels, "id"), KnnModel(vectors, labels, "loc"), hist)


def save_classifiers(c: Classifiers, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(classifiers_to_dict(c), fh)


def load_classifiers(path: str | Path) -> Classifiers:
    with open(path) as fh:
        return classifiers_from_dict(json.load(fh))
