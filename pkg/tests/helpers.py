"""Grid builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from tactile_pca.data_model import ClassLabel, DatasetGrid, GridMetadata, TactileSegment
from tactile_pca.pca import PcVector


def meta_for(n_loc: int, n_id: int, n_dims: int, n_samples: int, circular: bool = False,
             id_step: float = 1.0, loc_step: float = 1.0, id_start: float = 1.0) -> GridMetadata:
    return GridMetadata(
        sensor="test", n_id=n_id, n_loc=n_loc, n_dims=n_dims, nominal_samples=n_samples,
        what_increment=id_step, circular_what=circular,
        units={"loc": "mm", "id": "deg" if circular else "mm"},
        ranges={"loc": [1.0, 1.0 + (n_loc - 1) * loc_step],
                "id": [id_start, id_start + (n_id - 1) * id_step]},
        increments={"loc": loc_step, "id": id_step},
    )


def label(meta: GridMetadata, loc: int, ident: int) -> ClassLabel:
    return ClassLabel(loc, ident, meta.loc_value(loc), meta.id_value(ident))


def grid_from_array(data: np.ndarray, n_loc: int | None = None, circular: bool = False) -> DatasetGrid:
    """Wrap an ``(N, n_dims, n_samples)`` array; labels cycle through a loc x id grid."""
    n = data.shape[0]
    if n_loc is None:
        n_loc = 1
    n_id = int(np.ceil(n / n_loc))
    meta = meta_for(n_loc, n_id, data.shape[1], data.shape[2], circular)
    segs = [TactileSegment(data[k], label(meta, k // n_id + 1, k % n_id + 1)) for k in range(n)]
    return DatasetGrid(tuple(segs), meta)


def pcs_from(points, locs, ids, id_values=None, loc_values=None) -> list[PcVector]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    id_values = ids if id_values is None else id_values
    loc_values = locs if loc_values is None else loc_values
    return [
        PcVector(pts[k], ClassLabel(int(locs[k]), int(ids[k]), float(loc_values[k]), float(id_values[k])))
        for k in range(len(pts))
    ]
