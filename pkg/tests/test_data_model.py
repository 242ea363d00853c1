import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import label, meta_for
from tactile_pca.data_model import (
    DatasetError,
    DatasetGrid,
    SchemaError,
    TactileSegment,
    center_segment,
    circular_diff,
    export_grid_csv,
    filter_abnormal_taps,
    grid_from_dict,
    grid_to_dict,
    load_grid,
    preprocess,
    read_grid_csv,
    save_grid,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def _grid_with_counts(counts: list[int], n_dims: int = 1) -> DatasetGrid:
    meta = meta_for(1, len(counts), n_dims, max(counts))
    rng = np.random.default_rng(0)
    segs = [TactileSegment(rng.normal(size=(n_dims, c)), label(meta, 1, i + 1)) for i, c in enumerate(counts)]
    return DatasetGrid(tuple(segs), meta)


def test_filter_keeps_modal_count():
    counts = [46] * 99 + [12]
    rng = np.random.default_rng(1)
    rng.shuffle(counts)
    grid = _grid_with_counts(counts)
    out, report = filter_abnormal_taps(grid)
    assert len(out) == 99
    assert out.meta.nominal_samples == 46
    assert report.dropped == [counts.index(12)]


def test_filter_all_equal_is_identity():
    grid = _grid_with_counts([10] * 5)
    out, report = filter_abnormal_taps(grid)
    assert report.dropped == [] and report.notes == []
    assert all(a is b for a, b in zip(out.segments, grid.segments))


def test_filter_empty_grid():
    with pytest.raises(DatasetError, match="empty dataset"):
        filter_abnormal_taps(DatasetGrid((), meta_for(1, 1, 1, 5)))


def test_filter_ambiguous_mode_prefers_larger():
    out, report = filter_abnormal_taps(_grid_with_counts([8, 8, 9, 9, 3]))
    assert out.meta.nominal_samples == 9
    assert report.dropped == [0, 1, 4]
    assert report.notes and "ambiguous" in report.notes[0]


def test_filter_drops_non_finite():
    grid = _grid_with_counts([6, 6, 6])
    bad = np.array(grid.segments[1].samples)
    bad[0, 2] = np.nan
    segs = list(grid.segments)
    segs[1] = TactileSegment(bad, segs[1].label)
    out, report = filter_abnormal_taps(DatasetGrid(tuple(segs), grid.meta))
    assert len(out) == 2 and report.dropped == [1]


@given(st.lists(st.integers(3, 6), min_size=1, max_size=12))
def test_filter_changes_membership_only(counts):
    grid = _grid_with_counts(counts)
    out, report = filter_abnormal_taps(grid)
    kept = [i for i in range(len(grid)) if i not in report.dropped]
    assert len(kept) == len(out)
    for i, seg in zip(kept, out.segments):
        assert np.array_equal(seg.samples, grid.segments[i].samples)
        assert seg.label == grid.segments[i].label


def test_center_examples():
    lab = label(meta_for(1, 1, 1, 3), 1, 1)
    assert center_segment(TactileSegment([[1.0, 2.0, 3.0]], lab)).samples.tolist() == [[-1.0, 0.0, 1.0]]
    assert center_segment(TactileSegment([[-1.0, 0.0, 1.0]], lab)).samples.tolist() == [[-1.0, 0.0, 1.0]]
    assert center_segment(TactileSegment([[4.5, 4.5, 4.5]], lab)).samples.tolist() == [[0.0, 0.0, 0.0]]


def test_center_rejects_non_finite():
    lab = label(meta_for(1, 1, 1, 3), 1, 1)
    with pytest.raises(DatasetError, match="invalid sample"):
        center_segment(TactileSegment([[1.0, np.inf, 3.0]], lab))


@given(arrays(float, st.tuples(st.integers(1, 4), st.integers(1, 12)), elements=finite))
def test_center_zero_mean_and_idempotent(x):
    lab = label(meta_for(1, 1, x.shape[0], x.shape[1]), 1, 1)
    once = center_segment(TactileSegment(x, lab))
    twice = center_segment(once)
    scale = max(1.0, float(np.max(np.abs(x))))
    assert np.all(np.abs(once.samples.mean(axis=1)) <= 1e-12 * scale)
    assert np.allclose(once.samples, twice.samples, rtol=0, atol=1e-12 * scale)
    assert once.label == lab


def test_segment_validation():
    lab = label(meta_for(1, 1, 1, 3), 1, 1)
    with pytest.raises(DatasetError):
        TactileSegment(np.zeros(3), lab)
    with pytest.raises(DatasetError):
        TactileSegment(np.zeros((0, 3)), lab)
    seg = TactileSegment(np.ones((2, 3)), lab)
    with pytest.raises(ValueError):
        seg.samples[0, 0] = 5.0


def test_grid_rejects_dimension_mismatch():
    meta = meta_for(1, 1, 2, 3)
    with pytest.raises(DatasetError):
        DatasetGrid((TactileSegment(np.ones((3, 3)), label(meta, 1, 1)),), meta)


@settings(max_examples=30)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 3), st.integers(1, 6)), elements=finite))
def test_json_round_trip_bit_identical(data):
    meta = meta_for(1, data.shape[0], data.shape[1], data.shape[2])
    grid = DatasetGrid(tuple(TactileSegment(d, label(meta, 1, i + 1)) for i, d in enumerate(data)), meta)
    back = grid_from_dict(json.loads(json.dumps(grid_to_dict(grid))))
    assert back.meta == grid.meta
    for a, b in zip(grid.segments, back.segments):
        assert a.label == b.label
        assert a.samples.tobytes() == b.samples.tobytes()


def test_file_round_trips(tmp_path):
    grid = _grid_with_counts([5, 5, 5], n_dims=2)
    save_grid(grid, tmp_path / "g.json")
    export_grid_csv(grid, tmp_path / "g.csv")
    for back in (load_grid(tmp_path / "g.json"), read_grid_csv(tmp_path / "g.csv", grid.meta)):
        assert [s.label for s in back.segments] == [s.label for s in grid.segments]
        assert all(np.array_equal(a.samples, b.samples) for a, b in zip(grid.segments, back.segments))


def test_schema_version_mismatch():
    doc = grid_to_dict(_grid_with_counts([4, 4]))
    doc["version"] = 99
    with pytest.raises(SchemaError, match="version"):
        grid_from_dict(doc)
    doc["schema"] = "something-else"
    with pytest.raises(SchemaError):
        grid_from_dict(doc)


def test_preprocess_filters_then_centers():
    grid = _grid_with_counts([6, 6, 4])
    out, report = preprocess(grid)
    assert report.dropped == [2]
    assert np.allclose(np.stack([s.samples for s in out.segments]).mean(axis=2), 0.0, atol=1e-12)


def test_circular_diff():
    assert circular_diff(0.0, 348.0) == 12.0
    assert circular_diff(0.0, 360.0) == 0.0
    assert circular_diff(10.0, 190.0) == 180.0
