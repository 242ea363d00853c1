"""Synthetic where/what tactile grids.

Each tap is ``envelope(j) * contact(taxel) + noise``. The envelope is a
raised cosine that is zero at the first and last sample. Contact is a
quasi-static indentation profile seen through Gaussian receptive fields
truncated at four standard deviations, so taxels out of reach of the
stimulus read exactly zero.

Noise is drawn from ``numpy.random.default_rng(seed)`` (PCG64), one
``(n_dims, n_samples)`` block per segment in grid order (location-major,
then identity, then repeat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .data_model import ClassLabel, DatasetGrid, GridMetadata, TactileSegment

KERNEL_CUTOFF = 4.0  # receptive field truncation, in standard deviations


@dataclass(frozen=True)
class SensorSpec:
    taxel_positions: tuple[tuple[float, float], ...]
    receptive_width: float = 1.5
    noise_std: float = 0.0
    nominal_samples: int = 30
    dims_per_taxel: int = 1
    name: str = "synthetic"

    def __post_init__(self) -> None:
        pos = tuple((float(x), float(y)) for x, y in self.taxel_positions)
        object.__setattr__(self, "taxel_positions", pos)
        if not pos:
            raise ValueError("sensor needs at least one taxel")
        if self.receptive_width <= 0:
            raise ValueError("receptive_width must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.nominal_samples < 2:
            raise ValueError("nominal_samples must be at least 2")
        if self.dims_per_taxel not in (1, 2):
            raise ValueError("dims_per_taxel must be 1 or 2")

    @property
    def positions(self) -> np.ndarray:
        return np.array(self.taxel_positions, dtype=float).reshape(-1, 2)

    @property
    def n_dims(self) -> int:
        return len(self.taxel_positions) * self.dims_per_taxel


@dataclass(frozen=True)
class StimulusSpec:
    """Grid of stimuli.

    For cylinders, ``id_values`` are diameters (mm) and ``loc_values`` are
    lateral sensor positions; the cylinder axis sits under the array centre
    when the location equals ``loc_origin``. For edges, ``id_values`` are
    orientations (degrees) and ``loc_values`` radial displacements of the
    edge from the array centre (positive = further onto the object).
    """

    kind: str
    id_values: tuple[float, ...]
    loc_values: tuple[float, ...]
    circular_what: bool = False
    depth: float = 1.5
    loc_origin: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("cylinder", "edge"):
            raise ValueError(f"unknown stimulus kind {self.kind!r}")
        object.__setattr__(self, "id_values", tuple(float(v) for v in self.id_values))
        object.__setattr__(self, "loc_values", tuple(float(v) for v in self.loc_values))
        for name in ("id_values", "loc_values"):
            _increment(getattr(self, name), name)

    @property
    def id_increment(self) -> float:
        return _increment(self.id_values, "id_values")

    @property
    def loc_increment(self) -> float:
        return _increment(self.loc_values, "loc_values")


def _increment(values: Sequence[float], name: str) -> float:
    if len(values) == 0:
        raise ValueError(f"{name} is empty")
    if len(values) == 1:
        return 0.0
    d = np.diff(values)
    if np.any(d <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    if not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise ValueError(f"{name} must have a uniform increment")
    return float(d[0])


def hex_layout(rings: int, spacing: float) -> tuple[tuple[float, float], ...]:
    """Hexagonal taxel array: 1 + 3 r (r + 1) taxels for ``r`` rings."""
    pts = [(0.0, 0.0)]
    axial = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    for r in range(1, rings + 1):
        q, s = -r, r
        for side in range(6):
            dq, ds = axial[side]
            for _ in range(r):
                x = spacing * (q + 0.5 * s)
                y = spacing * (math.sqrt(3) / 2) * s
                pts.append((round(x, 12) + 0.0, round(y, 12) + 0.0))
                q, s = q + dq, s + ds
    return tuple(pts)


def envelope(n_samples: int) -> np.ndarray:
    """Raised-cosine tap profile: 0 at both ends, peak mid-tap."""
    j = np.arange(n_samples, dtype=float)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * j / (n_samples - 1)))


# --- cylinder contact --------------------------------------------------------


@lru_cache(maxsize=256)
def _cylinder_profile(diameter: float, depth: float, width: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tabulated smoothed indentation versus |lateral distance| from the axis.

    Returns (distance grid, contact, d contact / d distance).
    """
    radius = diameter / 2.0
    depth = min(depth, radius)
    half_contact = math.sqrt(max(2.0 * radius * depth - depth * depth, 0.0))
    step = min(width, max(half_contact, width)) / 50.0
    n_pen = int(math.ceil(half_contact / step))
    n_ker = int(math.ceil(KERNEL_CUTOFF * width / step))
    u = np.arange(-n_pen, n_pen + 1) * step
    pen = np.clip(np.sqrt(np.clip(radius**2 - u**2, 0.0, None)) - (radius - depth), 0.0, None)
    k = np.arange(-n_ker, n_ker + 1) * step
    ker = np.exp(-0.5 * (k / width) ** 2)
    ker /= ker.sum()
    smooth = np.convolve(pen, ker)  # centred at index n_pen + n_ker
    centre = n_pen + n_ker
    half = smooth[centre:].copy()
    # roundoff only; the exact convolution of log-concave profiles is unimodal
    half = np.minimum.accumulate(half)
    half[-1] = 0.0
    grid = np.arange(half.size) * step
    slope = np.gradient(half, step)
    slope[-1] = 0.0
    return grid, half, slope


def cylinder_contact(sensor: SensorSpec, diameter: float, offset: float, depth: float) -> np.ndarray:
    """Per-dimension contact for a cylinder whose axis is ``offset`` mm from the array centre."""
    grid, prof, slope = _cylinder_profile(float(diameter), float(depth), float(sensor.receptive_width))
    dx = sensor.positions[:, 0] - offset
    dist = np.abs(dx)
    c = np.interp(dist, grid, prof, right=0.0)
    if sensor.dims_per_taxel == 1:
        return c
    g = -np.interp(dist, grid, slope, right=0.0) * np.sign(dx) * sensor.receptive_width
    out = np.zeros(2 * dist.size)
    out[0::2] = g
    return out


# --- edge contact ------------------------------------------------------------


def edge_normal(orientation_deg: float) -> tuple[float, float]:
    """Unit normal of an edge; exact under 360 degree wraps and quarter turns."""
    theta = float(orientation_deg) % 360.0
    quarter = int(theta // 90.0)
    rest = theta - 90.0 * quarter
    c, s = math.cos(math.radians(rest)), math.sin(math.radians(rest))
    for _ in range(quarter):
        c, s = -s, c
    return c, s


def edge_contact(sensor: SensorSpec, orientation: float, displacement: float, depth: float) -> np.ndarray:
    """Half-plane edge contact; the object covers points with ``n.p < displacement``."""
    nx, ny = edge_normal(orientation)
    pos = sensor.positions
    proj = pos[:, 0] * nx + pos[:, 1] * ny
    z = (displacement - proj) / sensor.receptive_width
    lo = ndtr(-KERNEL_CUTOFF)
    norm = ndtr(KERNEL_CUTOFF) - lo
    inside = np.abs(z) <= KERNEL_CUTOFF
    cover = np.where(z > KERNEL_CUTOFF, 1.0, 0.0)
    cover[inside] = np.clip((ndtr(z[inside]) - lo) / norm, 0.0, 1.0)
    if sensor.dims_per_taxel == 1:
        return depth * cover
    dens = np.zeros_like(z)
    dens[inside] = np.exp(-0.5 * z[inside] ** 2) / (math.sqrt(2 * math.pi) * norm)
    out = np.empty(2 * z.size)
    out[0::2] = depth * dens * nx
    out[1::2] = depth * dens * ny
    return out


# --- grids -------------------------------------------------------------------


def _contact_fn(stim: StimulusSpec) -> Callable[[SensorSpec, float, float], np.ndarray]:
    if stim.kind == "cylinder":
        return lambda sensor, what, where: cylinder_contact(
            sensor, what, where - stim.loc_origin, stim.depth
        )
    return lambda sensor, what, where: edge_contact(sensor, what, where - stim.loc_origin, stim.depth)


def noise_free_segment(sensor: SensorSpec, stim: StimulusSpec, what: float, where: float) -> np.ndarray:
    contact = _contact_fn(stim)(sensor, what, where)
    return np.outer(contact, envelope(sensor.nominal_samples))


def _metadata(sensor: SensorSpec, stim: StimulusSpec) -> GridMetadata:
    if stim.kind == "cylinder":
        units = {"loc": "mm", "id": "mm"}
    else:
        units = {"loc": "mm", "id": "deg"}
    return GridMetadata(
        sensor=sensor.name,
        n_id=len(stim.id_values),
        n_loc=len(stim.loc_values),
        n_dims=sensor.n_dims,
        nominal_samples=sensor.nominal_samples,
        what_increment=stim.id_increment,
        circular_what=stim.circular_what,
        units=units,
        ranges={"loc": [stim.loc_values[0], stim.loc_values[-1]],
                "id": [stim.id_values[0], stim.id_values[-1]]},
        increments={"loc": stim.loc_increment, "id": stim.id_increment},
    )


def _generate(sensor: SensorSpec, stim: StimulusSpec, seed: int, n_repeats: int) -> DatasetGrid:
    if n_repeats < 1:
        raise ValueError("n_repeats must be positive")
    rng = np.random.default_rng(seed)
    segments = []
    for li, where in enumerate(stim.loc_values, start=1):
        for ii, what in enumerate(stim.id_values, start=1):
            clean = noise_free_segment(sensor, stim, what, where)
            label = ClassLabel(li, ii, where, what)
            for _ in range(n_repeats):
                noise = rng.standard_normal(clean.shape)
                segments.append(TactileSegment(clean + sensor.noise_std * noise, label))
    return DatasetGrid(tuple(segments), _metadata(sensor, stim))


def generate_cylinder_grid(sensor: SensorSpec, stim: StimulusSpec, seed: int, n_repeats: int = 1) -> DatasetGrid:
    if stim.kind != "cylinder":
        raise ValueError(f"expected a cylinder stimulus, got {stim.kind!r}")
    return _generate(sensor, stim, seed, n_repeats)


def generate_edge_grid(sensor: SensorSpec, stim: StimulusSpec, seed: int, n_repeats: int = 1) -> DatasetGrid:
    if stim.kind != "edge":
        raise ValueError(f"expected an edge stimulus, got {stim.kind!r}")
    if not stim.circular_what:
        raise ValueError("edge orientation grids must be circular")
    if stim.id_values[0] < 0 or stim.id_values[-1] >= 360:
        raise ValueError("edge orientations must lie in [0, 360)")
    return _generate(sensor, stim, seed, n_repeats)


def generate_grid(sensor: SensorSpec, stim: StimulusSpec, seed: int, n_repeats: int = 1) -> DatasetGrid:
    if stim.kind == "cylinder":
        return generate_cylinder_grid(sensor, stim, seed, n_repeats)
    return generate_edge_grid(sensor, stim, seed, n_repeats)


def contact_mask(sensor: SensorSpec, stim: StimulusSpec) -> np.ndarray:
    """Boolean per location: True where any identity produces nonzero contact."""
    fn = _contact_fn(stim)
    return np.array([
        any(np.any(fn(sensor, what, where) != 0) for what in stim.id_values)
        for where in stim.loc_values
    ])


def peak_deflection(sensor: SensorSpec, stim: StimulusSpec) -> float:
    fn = _contact_fn(stim)
    peak = max(np.max(np.abs(fn(sensor, w, x))) for x in stim.loc_values for w in stim.id_values)
    return float(peak * envelope(sensor.nominal_samples).max())


# --- presets -----------------------------------------------------------------

NOISE_FRACTION = 0.01


def _with_noise(sensor: SensorSpec, stim: StimulusSpec, fraction: float):
    return replace(sensor, noise_std=fraction * peak_deflection(sensor, stim)), stim


def _cylinders(noise: float):
    sensor = SensorSpec(hex_layout(2, 4.0), receptive_width=2.0, nominal_samples=30,
                        dims_per_taxel=1, name="synthetic-hex19")
    stim = StimulusSpec(
        kind="cylinder",
        id_values=tuple(np.arange(10.0, 29.0, 2.0)),
        loc_values=tuple(np.arange(0.0, 39.0, 2.0)),
        depth=1.5,
        loc_origin=23.0,
    )
    return _with_noise(sensor, stim, noise)


def _edges(noise: float):
    sensor = SensorSpec(hex_layout(2, 4.0), receptive_width=1.5, nominal_samples=30,
                        dims_per_taxel=2, name="synthetic-hex19-xy")
    stim = StimulusSpec(
        kind="edge",
        id_values=tuple(np.arange(0.0, 360.0, 30.0)),
        loc_values=tuple(np.arange(-16.0, 8.5, 1.5)),
        circular_what=True,
        depth=1.0,
    )
    return _with_noise(sensor, stim, noise)


PRESETS: dict[str, Callable[[], tuple[SensorSpec, StimulusSpec]]] = {
    "cylinders-small": lambda: _cylinders(NOISE_FRACTION),
    "cylinders-noisefree": lambda: _cylinders(0.0),
    "edge-orientation": lambda: _edges(NOISE_FRACTION),
    "edge-orientation-noisefree": lambda: _edges(0.0),
}


def preset(name: str) -> tuple[SensorSpec, StimulusSpec]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
