"""Per-datum sensitivity over the PC manifold and the fixation location.

Sensitivity of a point is the distance to nearby points of a different
identity class divided by the identity change between them. Distances are
found in overlapping sections of the manifold sorted by the first
component; a point that falls in two sections keeps the smaller distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data_model import GridMetadata, what_diff
from .pca import PcVector


class SensitivityError(ValueError):
    pass


@dataclass(frozen=True)
class AlgParams:
    b: int = 10
    theta_threshold: float = math.pi / 18
    n_neighbours: int = 5
    overlap_fraction: float = 0.5
    filter_window: int = 5

    def __post_init__(self) -> None:
        if self.b < 2:
            raise SensitivityError("b must be at least 2")
        if not 0 < self.theta_threshold < math.pi / 2:
            raise SensitivityError("theta_threshold must lie in (0, pi/2)")
        if self.n_neighbours < 1:
            raise SensitivityError("n_neighbours must be positive")
        if not 0 < self.overlap_fraction < 1:
            raise SensitivityError("overlap_fraction must lie in (0, 1)")
        if self.filter_window < 1 or self.filter_window % 2 == 0:
            raise SensitivityError("filter_window must be a positive odd integer")


def _point_distance(x: np.ndarray, ids: np.ndarray, values: np.ndarray, q: int,
                    circular: bool, params: AlgParams) -> tuple[float, float]:
    """(distance, identity change) for point ``q`` within a batch."""
    delta_all = what_diff(values, values[q], circular)
    cand = np.nonzero((ids != ids[q]) & (delta_all > 0))[0]
    if cand.size == 0:
        return math.inf, math.nan
    vecs = x[cand] - x[q]
    lengths = np.sqrt(np.sum(vecs * vecs, axis=1))
    order = np.argsort(lengths, kind="stable")
    first = order[0]
    if lengths[first] == 0.0:
        # no direction to test against; only other coincident points qualify
        inside = lengths == 0.0
    else:
        units = vecs / np.where(lengths > 0, lengths, 1.0)[:, None]
        inside = (units @ units[first]) > math.cos(params.theta_threshold)
        inside &= lengths > 0
    inside[first] = False
    chosen = [first] + [i for i in order if inside[i]][: params.n_neighbours - 1]
    mid = chosen[(len(chosen) - 1) // 2]  # lower median; chosen is sorted by length
    return float(lengths[mid]), float(delta_all[cand[mid]])


def batch_distances(x: np.ndarray, ids: np.ndarray, values: np.ndarray,
                    circular: bool, params: AlgParams) -> tuple[np.ndarray, np.ndarray]:
    if np.unique(ids).size < 2:
        raise SensitivityError("indistinguishable batch")
    out = [_point_distance(x, ids, values, q, circular, params) for q in range(len(ids))]
    d, delta = zip(*out)
    return np.array(d), np.array(delta)


def compute_distance(batch: Sequence[PcVector], params: AlgParams = AlgParams(),
                     circular: bool = False) -> np.ndarray:
    """Neighbour distance of every point in one batch (no cross-section minimum)."""
    x = np.stack([p.components for p in batch]).astype(float)
    ids = np.array([p.label.id_index for p in batch])
    values = np.array([p.label.id_value for p in batch], dtype=float)
    return batch_distances(x, ids, values, circular, params)[0]


def sections(n: int, params: AlgParams) -> list[range]:
    """``b`` sections of a sorted batch; neighbours share ``overlap_fraction * n / b`` points."""
    stride = math.ceil(n / params.b)
    size = math.ceil(n / params.b * (1 + params.overlap_fraction))
    out = []
    for i in range(params.b):
        start = i * stride
        if start >= n:
            break
        out.append(range(start, min(n, start + size)))
    return out


def canonical_order(x: np.ndarray, loc: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Sort by first component, then remaining components, then labels."""
    keys = [ids, loc] + [x[:, r] for r in range(x.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


def point_sensitivities(manifold: Sequence[PcVector], circular: bool,
                        params: AlgParams = AlgParams()) -> np.ndarray:
    """Sensitivity of each manifold point, in input order."""
    x = np.stack([p.components for p in manifold]).astype(float)
    loc = np.array([p.label.loc_index for p in manifold])
    ids = np.array([p.label.id_index for p in manifold])
    values = np.array([p.label.id_value for p in manifold], dtype=float)
    if np.unique(ids).size < 2:
        raise SensitivityError("need at least two identity classes")
    order = canonical_order(x, loc, ids)
    xs, ids_s, vals_s = x[order], ids[order], values[order]
    dist = np.full(len(order), math.inf)
    delta = np.full(len(order), math.nan)
    for sec in sections(len(order), params):
        idx = np.arange(sec.start, sec.stop)
        if np.unique(ids_s[idx]).size < 2:
            continue
        d, dl = batch_distances(xs[idx], ids_s[idx], vals_s[idx], circular, params)
        better = d < dist[idx]
        dist[idx[better]] = d[better]
        delta[idx[better]] = dl[better]
    # points never paired within a section fall back to the whole manifold
    for q in np.nonzero(~np.isfinite(dist))[0]:
        dist[q], delta[q] = _point_distance(xs, ids_s, vals_s, q, circular, params)
    sens_sorted = dist / delta
    sens = np.empty_like(sens_sorted)
    sens[order] = sens_sorted
    return sens


def moving_median(values: np.ndarray, window: int) -> np.ndarray:
    """Median filter along axis 0; the window is truncated at the ends."""
    values = np.asarray(values, dtype=float)
    h = window // 2
    n = values.shape[0]
    return np.stack([np.median(values[max(0, i - h): i + h + 1], axis=0) for i in range(n)])


@dataclass(frozen=True)
class FixationSummary:
    loc_index: int
    min_filtered: np.ndarray
    max_filtered: np.ndarray
    rank_sum: np.ndarray


def fixation_point(values: np.ndarray, params: AlgParams = AlgParams()) -> FixationSummary:
    """Location whose filtered min and max sensitivity rank highest combined.

    Ranks are ascending (1 = smallest) with ties averaged; the largest rank
    sum wins and ties go to the lowest location index.
    """
    values = np.asarray(values, dtype=float)
    filtered = moving_median(values, params.filter_window)
    lo, hi = filtered.min(axis=1), filtered.max(axis=1)
    total = rankdata(lo, method="average") + rankdata(hi, method="average")
    return FixationSummary(int(np.argmax(total)) + 1, lo, hi, total)


@dataclass(frozen=True)
class SensitivityMap:
    values: np.ndarray  # n_loc x n_id
    normalized: np.ndarray
    fixation_loc_index: int
    fixation_loc_value: float
    fixation: FixationSummary
    point_values: np.ndarray

    def filtered(self, window: int) -> np.ndarray:
        return moving_median(self.normalized, window)


def sensitivity_map(manifold: Sequence[PcVector], meta: GridMetadata,
                    params: AlgParams = AlgParams()) -> SensitivityMap:
    if meta.n_id < 2:
        raise SensitivityError("need at least two identity classes")
    sens = point_sensitivities(manifold, meta.circular_what, params)
    cells: dict[tuple[int, int], list[float]] = {}
    for p, s in zip(manifold, sens):
        cells.setdefault(p.label.key, []).append(float(s))
    values = np.zeros((meta.n_loc, meta.n_id))
    for l in range(1, meta.n_loc + 1):
        for i in range(1, meta.n_id + 1):
            if (l, i) not in cells:
                raise SensitivityError(f"manifold does not cover class {(l, i)}")
            values[l - 1, i - 1] = np.median(cells[(l, i)])
    normalized = values * meta.what_increment
    fix = fixation_point(normalized, params)
    return SensitivityMap(values, normalized, fix.loc_index, meta.loc_value(fix.loc_index), fix, sens)


def location_profile(smap: SensitivityMap, window: int) -> dict[str, np.ndarray]:
    """Median and quartiles over identities of the filtered normalized map."""
    f = smap.filtered(window)
    p25, med, p75 = np.percentile(f, [25, 50, 75], axis=1)
    return {"median": med, "p25": p25, "p75": p75}
