"""Figure export: every figure is written as SVG next to a CSV of its data.

SVG output is made reproducible by fixing matplotlib's hash salt and
dropping the creation date, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .data_model import GridMetadata  # noqa: E402
from .pca import PcVector  # noqa: E402

STYLE = {
    "svg.hashsalt": "tactile-pca",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "figure.dpi": 100,
}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None}, bbox_inches="tight")
    plt.close(fig)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def manifold_figure(pcs: Sequence[PcVector], meta: GridMetadata, out: Path, dims: int = 3) -> None:
    """Leading PCs of the training manifold, coloured by identity and by location."""
    x = np.stack([p.components for p in pcs])
    dims = min(dims, x.shape[1])
    _write_csv(
        out.with_suffix(".csv"),
        ["loc_index", "id_index", "loc_value", "id_value"] + [f"pc{r + 1}" for r in range(dims)],
        ([p.label.loc_index, p.label.id_index, p.label.loc_value, p.label.id_value]
         + [float(v) for v in p.components[:dims]] for p in pcs),
    )
    with plt.rc_context(STYLE):
        fig = plt.figure(figsize=(9, 4))
        for k, (attr, title, unit) in enumerate([
            ("id_value", "identity", meta.units.get("id", "")),
            ("loc_value", "location", meta.units.get("loc", "")),
        ]):
            c = [getattr(p.label, attr) for p in pcs]
            if dims >= 3:
                ax = fig.add_subplot(1, 2, k + 1, projection="3d")
                sc = ax.scatter(x[:, 0], x[:, 1], x[:, 2], c=c, cmap="jet", s=6)
                ax.set_zlabel("PC3")
            else:
                ax = fig.add_subplot(1, 2, k + 1)
                sc = ax.scatter(x[:, 0], x[:, 1] if dims > 1 else np.zeros(len(x)), c=c, cmap="jet", s=6)
            ax.set_xlabel("PC1")
            ax.set_ylabel("PC2")
            ax.set_title(f"coloured by {title}")
            fig.colorbar(sc, ax=ax, shrink=0.6, label=f"{title} ({unit})")
        _save(fig, out)


def predicted_vs_actual(summary: dict[int, dict[str, float]], actual: dict[int, float],
                        axis_label: str, out: Path) -> None:
    """Median predicted class with the 25th-75th percentile band against the actual class."""
    keys = sorted(summary)
    a = np.array([actual[k] for k in keys])
    med = np.array([summary[k]["median"] for k in keys])
    p25 = np.array([summary[k]["p25"] for k in keys])
    p75 = np.array([summary[k]["p75"] for k in keys])
    _write_csv(out.with_suffix(".csv"), ["class_index", "actual", "median", "p25", "p75"],
               zip(keys, a, med, p25, p75))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        lim = [min(a.min(), p25.min()), max(a.max(), p75.max())]
        ax.plot(lim, lim, color="0.6", lw=0.8)
        ax.plot(a, p25, "k--", lw=0.8)
        ax.plot(a, p75, "k--", lw=0.8)
        ax.scatter(a, med, c=a, cmap="jet", s=12, zorder=3)
        ax.set_xlabel(f"actual {axis_label}")
        ax.set_ylabel(f"predicted {axis_label}")
        _save(fig, out)


def sensitivity_heatmap(normalized: np.ndarray, meta: GridMetadata, out: Path) -> None:
    loc_v, id_v = meta.loc_values(), meta.id_values()
    _write_csv(out.with_suffix(".csv"), ["loc_value"] + [f"id_{v!r}" for v in id_v],
               ([lv] + list(row) for lv, row in zip(loc_v, normalized)))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 4))
        im = ax.imshow(normalized.T, origin="lower", aspect="auto", cmap="gray",
                       extent=[loc_v[0], loc_v[-1], id_v[0], id_v[-1]])
        ax.set_xlabel(f"location ({meta.units.get('loc', '')})")
        ax.set_ylabel(f"identity ({meta.units.get('id', '')})")
        fig.colorbar(im, ax=ax, label="normalised sensitivity")
        _save(fig, out)


def sensitivity_profile(profile: dict[str, np.ndarray], meta: GridMetadata, fixation_value: float,
                        out: Path) -> None:
    loc_v = meta.loc_values()
    _write_csv(out.with_suffix(".csv"), ["loc_value", "median", "p25", "p75"],
               zip(loc_v, profile["median"], profile["p25"], profile["p75"]))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(loc_v, profile["median"], color="tab:orange")
        ax.plot(loc_v, profile["p25"], color="k", lw=0.8)
        ax.plot(loc_v, profile["p75"], color="k", lw=0.8)
        ax.axvline(fixation_value, ls="--", color="0.4", lw=0.8)
        ax.set_xlabel(f"location ({meta.units.get('loc', '')})")
        ax.set_ylabel("normalised sensitivity")
        _save(fig, out)


def error_by_location(errors: dict[str, dict[int, float]], meta: GridMetadata,
                      fixation_value: float | None, out: Path) -> None:
    methods = sorted(errors)
    locs = sorted({k for m in methods for k in errors[m]})
    _write_csv(out.with_suffix(".csv"), ["loc_index", "loc_value"] + methods,
               ([l, meta.loc_value(l)] + [errors[m].get(l, float("nan")) for m in methods] for l in locs))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        for m in methods:
            ax.plot([meta.loc_value(l) for l in locs], [errors[m].get(l, np.nan) for l in locs], label=m)
        if fixation_value is not None:
            ax.axvline(fixation_value, ls="--", color="0.4", lw=0.8)
        ax.set_xlabel(f"location ({meta.units.get('loc', '')})")
        ax.set_ylabel(f"mean |identity error| ({meta.units.get('id', '')})")
        ax.legend()
        _save(fig, out)
