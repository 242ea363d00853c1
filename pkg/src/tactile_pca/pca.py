"""Two-stage PCA: temporal PCA per sensor dimension, then spatial PCA.

Eigendecompositions use a parallel-ordering (round-robin) cyclic Jacobi
method: each step rotates ``n // 2`` disjoint index pairs at once, so a
sweep costs ``n - 1`` vectorised row/column updates.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data_model import ClassLabel, DatasetGrid, GridMetadata, TactileSegment, check_schema

MODEL_SCHEMA = "tactile-pca-model"
MODEL_VERSION = 1

DEFAULT_GAMMA1 = 0.05
DEFAULT_GAMMA2 = 0.005
SIGN_TIE_RTOL = 1e-10


class PcaError(ValueError):
    pass


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings covering every (p, q) once per sweep (circle method)."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=int), np.array(qs, dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _jacobi(a: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    rounds = _round_robin(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(a.diagonal()))
        if off <= 1e-15 * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = a[p, p], a[q, q]
            theta = (aqq - app) / (2.0 * apq)
            # for huge theta, t ~ 1 / (2 theta) without squaring
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.where(th >= 0, 1.0, -1.0) / (np.abs(th) + np.sqrt(th * th + 1.0))
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            cc, ss = c[:, None], s[:, None]
            a[p, :] = cc * rp - ss * rq
            a[q, :] = ss * rp + cc * rq
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    return a.diagonal().copy(), v


def normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Entries within ``SIGN_TIE_RTOL`` of the largest magnitude count as tied
    and the first of them decides, so rounding cannot flip the choice.
    """
    out = np.array(vectors, dtype=float, copy=True)
    if out.size == 0:
        return out
    mag = np.abs(out)
    top = mag.max(axis=0)
    idx = np.argmax(mag >= top * (1.0 - SIGN_TIE_RTOL), axis=0)
    signs = np.sign(out[idx, np.arange(out.shape[1])])
    signs[signs == 0] = 1.0
    return out * signs


def symmetric_eig(m) -> EigenResult:
    """Eigen-decomposition of a real symmetric matrix, eigenvalues descending."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PcaError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PcaError("matrix has non-finite entries")
    if np.max(np.abs(m - m.T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(m), initial=0.0)):
        raise PcaError("matrix is not symmetric")
    vals, vecs = _jacobi(0.5 * (m + m.T))
    order = np.argsort(-vals, kind="stable")
    return EigenResult(vals[order], normalize_signs(vecs[:, order]))


def scree_cut(eigenvalues: Sequence[float], gamma: float) -> int:
    """Number of leading components up to the last normalised gap above ``gamma``."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.size == 0:
        raise PcaError("no eigenvalues")
    total = lam.sum()
    if not total > 0:
        raise PcaError("degenerate spectrum")
    gaps = (lam - np.append(lam[1:], 0.0)) / total
    hits = np.nonzero(gaps > gamma)[0]
    return int(hits[-1]) + 1 if hits.size else 1


def covariance(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and (N-1)-normalised covariance of the rows of ``x``."""
    mean = x.mean(axis=0)
    xc = x - mean
    return mean, xc.T @ xc / (x.shape[0] - 1)


@dataclass(frozen=True)
class PcVector:
    components: np.ndarray
    label: ClassLabel


@dataclass(frozen=True)
class PcaModel:
    stage1_means: tuple[np.ndarray, ...]  # per dimension, length n_samples
    stage1_vectors: tuple[np.ndarray, ...]  # per dimension, n_samples x m_k
    stage2_mean: np.ndarray  # length n_total
    stage2_vectors: np.ndarray  # n_total x n_reduced
    gamma1: float = DEFAULT_GAMMA1
    gamma2: float = DEFAULT_GAMMA2
    stage2_eigenvalues: np.ndarray | None = None
    meta: GridMetadata | None = None

    @property
    def n_dims(self) -> int:
        return len(self.stage1_means)

    @property
    def n_samples(self) -> int:
        return self.stage1_means[0].size

    @property
    def kept_per_dim(self) -> list[int]:
        return [v.shape[1] for v in self.stage1_vectors]

    @property
    def n_total(self) -> int:
        return int(sum(self.kept_per_dim))

    @property
    def n_reduced(self) -> int:
        return self.stage2_vectors.shape[1]

    def compress(self, samples: np.ndarray) -> np.ndarray:
        """Time-compressed row (length ``n_total``) of one segment."""
        if samples.shape != (self.n_dims, self.n_samples):
            raise PcaError(
                f"segment shape {samples.shape} does not match model "
                f"({self.n_dims}, {self.n_samples})"
            )
        parts = [(samples[k] - self.stage1_means[k]) @ self.stage1_vectors[k]
                 for k in range(self.n_dims)]
        return np.concatenate(parts)

    def project_samples(self, samples: np.ndarray) -> np.ndarray:
        return (self.compress(np.asarray(samples, dtype=float)) - self.stage2_mean) @ self.stage2_vectors


def _zero_variance(xc: np.ndarray, x: np.ndarray) -> bool:
    scale = max(np.max(np.abs(x), initial=0.0), np.finfo(float).tiny)
    return float(np.max(np.abs(xc), initial=0.0)) <= 1e-12 * scale


def fit(grid: DatasetGrid, gamma1: float = DEFAULT_GAMMA1, gamma2: float = DEFAULT_GAMMA2) -> PcaModel:
    """Fit both PCA stages on a preprocessed grid.

    A sensor dimension with no variance across segments keeps one
    (arbitrary) component, which projects every segment to zero.
    """
    if len(grid) < 2:
        raise PcaError("need at least 2 segments")
    data = grid.stack()  # (N, n_dims, n_samples)
    if not np.all(np.isfinite(data)):
        raise PcaError("invalid sample")
    means, vectors, varying = [], [], []
    for k in range(data.shape[1]):
        x = data[:, k, :]
        mean, cov = covariance(x)
        means.append(mean)
        if _zero_variance(x - mean, x):
            vectors.append(np.eye(x.shape[1])[:, :1])
            varying.append(False)
            continue
        eig = symmetric_eig(cov)
        vectors.append(np.ascontiguousarray(eig.eigenvectors[:, : scree_cut(eig.eigenvalues, gamma1)]))
        varying.append(True)
    if not any(varying):
        raise PcaError("zero variance")
    partial = PcaModel(tuple(means), tuple(vectors), np.zeros(0), np.zeros((0, 0)), gamma1, gamma2)
    compressed = np.stack([partial.compress(seg) for seg in data])
    mean2, cov2 = covariance(compressed)
    if _zero_variance(compressed - mean2, compressed):
        raise PcaError("zero variance")
    eig2 = symmetric_eig(cov2)
    n_reduced = scree_cut(eig2.eigenvalues, gamma2)
    return PcaModel(
        tuple(means), tuple(vectors), mean2, np.ascontiguousarray(eig2.eigenvectors[:, :n_reduced]),
        gamma1, gamma2, eig2.eigenvalues, grid.meta,
    )


def project(model: PcaModel, segment: TactileSegment) -> PcVector:
    return PcVector(model.project_samples(segment.samples), segment.label)


def project_grid(model: PcaModel, grid: DatasetGrid) -> list[PcVector]:
    return [project(model, s) for s in grid.segments]


def manifold_matrix(pcs: Sequence[PcVector]) -> np.ndarray:
    return np.stack([p.components for p in pcs])


# --- serialization ---------------------------------------------------------


def model_to_dict(model: PcaModel) -> dict:
    return {
        "schema": MODEL_SCHEMA,
        "version": MODEL_VERSION,
        "gamma1": model.gamma1,
        "gamma2": model.gamma2,
        "n_total": model.n_total,
        "n_reduced": model.n_reduced,
        "stage1": [
            {"mean": m.tolist(), "eigenvectors": v.tolist()}
            for m, v in zip(model.stage1_means, model.stage1_vectors)
        ],
        "stage2": {
            "mean": model.stage2_mean.tolist(),
            "eigenvectors": model.stage2_vectors.tolist(),
            "eigenvalues": None if model.stage2_eigenvalues is None else model.stage2_eigenvalues.tolist(),
        },
        "grid": None if model.meta is None else model.meta.to_dict(),
    }


def model_from_dict(doc: dict) -> PcaModel:
    check_schema(doc, MODEL_SCHEMA, MODEL_VERSION)
    s2 = doc["stage2"]
    n_total = int(doc["n_total"])
    vecs2 = np.array(s2["eigenvectors"], dtype=float).reshape(n_total, int(doc["n_reduced"]))
    model = PcaModel(
        tuple(np.array(d["mean"], dtype=float) for d in doc["stage1"]),
        tuple(np.array(d["eigenvectors"], dtype=float).reshape(len(d["mean"]), -1) for d in doc["stage1"]),
        np.array(s2["mean"], dtype=float),
        vecs2,
        float(doc["gamma1"]),
        float(doc["gamma2"]),
        None if s2.get("eigenvalues") is None else np.array(s2["eigenvalues"], dtype=float),
        None if doc.get("grid") is None else GridMetadata.from_dict(doc["grid"]),
    )
    if model.n_total != n_total:
        raise PcaError("inconsistent n_total in model file")
    return model


def save_model(model: PcaModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path: str | Path) -> PcaModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def write_manifold(pcs: Sequence[PcVector], path: str | Path, dims: int | None = None) -> None:
    """Labelled PC vectors as CSV; ``dims`` keeps only the leading components."""
    n = pcs[0].components.size if pcs else 0
    n = n if dims is None else min(dims, n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["loc_index", "id_index", "loc_value", "id_value"] + [f"pc{r + 1}" for r in range(n)])
        for p in pcs:
            lab = p.label
            w.writerow([lab.loc_index, lab.id_index, repr(lab.loc_value), repr(lab.id_value)]
                       + [repr(float(v)) for v in p.components[:n]])


def read_manifold(path: str | Path) -> list[PcVector]:
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or header[:4] != ["loc_index", "id_index", "loc_value", "id_value"]:
            raise PcaError(f"{path}: not a manifold CSV")
        out = []
        for row in rows:
            label = ClassLabel(int(row[0]), int(row[1]), float(row[2]), float(row[3]))
            out.append(PcVector(np.array([float(v) for v in row[4:]]), label))
    return out
