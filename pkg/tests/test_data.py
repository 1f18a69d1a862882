import json
import math

import numpy as np
import pytest

from tdp.data import (
    PreprocessReport,
    RecordMatrix,
    TargetVector,
    clip_rows_to_unit_ball,
    cumulative_distance,
    preprocess,
    read_csv,
    scale_target_unit_interval,
    standardize_columns,
    validate_l2_ball,
    write_csv,
)
from tdp.errors import DegenerateRange, ShapeMismatch, ZeroVarianceColumn
from tdp.rng import RandomSource


def test_standardize_simple_column():
    X, report = standardize_columns(np.array([[1.0], [2.0], [3.0]]))
    # population std of [1,2,3] is sqrt(2/3)
    expected = (np.array([1.0, 2.0, 3.0]) - 2.0) / math.sqrt(2.0 / 3.0)
    assert np.allclose(X.values[:, 0], expected, atol=1e-12)
    assert np.allclose(expected, [-1.224744871, 0.0, 1.224744871], atol=1e-9)
    assert report.column_means[0] == 2.0
    assert report.std_convention == "population"


def test_standardize_postconditions_and_idempotence():
    gen = np.random.default_rng(0)
    raw = gen.normal(size=(40, 6)) * gen.uniform(0.5, 9, 6) + gen.normal(size=6)
    X, _ = standardize_columns(raw)
    n = raw.shape[0]
    assert np.all(np.abs(X.values.mean(axis=0)) <= 1e-12 * n)
    assert np.all(np.abs(X.values.std(axis=0) - 1.0) <= 1e-12)
    again, _ = standardize_columns(X.values)
    assert np.allclose(again.values, X.values, atol=1e-10)


def test_standardize_rejects_constant_column():
    raw = np.column_stack([np.arange(5.0), np.full(5, 3.25)])
    with pytest.raises(ZeroVarianceColumn) as err:
        standardize_columns(raw)
    assert err.value.column == 1


def test_clip_rows():
    X = clip_rows_to_unit_ball(np.array([[3.0, 4.0], [0.1, 0.2], [0.0, 0.0]]))
    assert np.allclose(X.values[0], [0.6, 0.8], atol=1e-15)
    assert np.allclose(X.values[1], [0.1, 0.2])
    assert np.allclose(X.values[2], [0.0, 0.0])
    assert X.normalized
    assert validate_l2_ball(X)
    # idempotent
    again = clip_rows_to_unit_ball(X.values)
    assert np.array_equal(again.values, X.values)


def test_scale_target():
    y = scale_target_unit_interval(np.array([5.0, 10.0, 15.0]))
    assert y.kind == "regression"
    assert np.allclose(y.values, [0.0, 0.5, 1.0])

    labels = scale_target_unit_interval(np.array([0.0, 1.0, 1.0]))
    assert labels.kind == "binary"
    assert np.array_equal(labels.values, [0.0, 1.0, 1.0])

    with pytest.raises(DegenerateRange):
        scale_target_unit_interval(np.full(4, 2.5))


def test_cumulative_distance_cases():
    a = np.zeros((3, 2))
    assert cumulative_distance(a, a) == 0.0

    b = a.copy()
    b[1] = [0.3, 0.4]
    assert cumulative_distance(a, b) == pytest.approx(0.5, abs=1e-15)

    c = a.copy()
    c[0, 0] = 0.5
    c[2, 1] = 0.25
    assert cumulative_distance(a, c) == pytest.approx(0.75, abs=1e-15)

    with pytest.raises(ShapeMismatch):
        cumulative_distance(a, np.zeros((2, 2)))


def test_cumulative_distance_triangle_inequality():
    gen = np.random.default_rng(42)
    for _ in range(1000):
        x, y, z = gen.normal(size=(3, 5, 3))
        dxz = cumulative_distance(x, z)
        dxy = cumulative_distance(x, y)
        dyz = cumulative_distance(y, z)
        assert dxz <= dxy + dyz + 1e-12
        assert dxy == pytest.approx(cumulative_distance(y, x), abs=1e-12)


def test_validate_l2_ball_cases():
    assert validate_l2_ball(np.array([[0.5]]))
    assert not validate_l2_ball(np.array([[1.5, 0.0]]))


def test_record_matrix_validation():
    with pytest.raises(ValueError):
        RecordMatrix(np.array([[np.inf, 0.0]]))
    with pytest.raises(ShapeMismatch):
        RecordMatrix(np.empty((0, 3)))
    with pytest.raises(ValueError):
        TargetVector(np.array([0.0, 2.0]), kind="binary")


def test_random_source_contract():
    a = RandomSource(123, 7).generator().normal(size=10)
    b = RandomSource(123, 7).generator().normal(size=10)
    assert np.array_equal(a, b)

    c = RandomSource(123, 8).generator().normal(size=10)
    assert not np.array_equal(a, c)

    kids1 = [g.normal() for g in RandomSource(9).generators(4)]
    kids2 = [g.normal() for g in RandomSource(9).generators(4)]
    assert kids1 == kids2
    assert len(set(kids1)) == 4


def test_csv_roundtrip(tmp_path):
    gen = np.random.default_rng(5)
    values = gen.normal(size=(17, 4)) * 1e-7
    path = tmp_path / "m.csv"
    write_csv(path, values, ["a", "b", "c", "d"])
    back, header = read_csv(path)
    assert header == ["a", "b", "c", "d"]
    assert np.array_equal(back, values)  # repr round-trips floats exactly


def test_preprocess_pipeline_and_report_roundtrip():
    gen = np.random.default_rng(3)
    raw = gen.normal(size=(30, 4)) * 3 + 1
    y_raw = gen.uniform(10, 20, size=30)
    X, y, report = preprocess(raw, y_raw)

    assert validate_l2_ball(X)
    assert y.kind == "regression"
    assert report.target_min == pytest.approx(y_raw.min())
    assert report.target_max == pytest.approx(y_raw.max())
    assert report.row_scales.shape == (30,)

    back = PreprocessReport.from_json(report.to_json())
    assert np.array_equal(back.column_means, report.column_means)
    assert np.array_equal(back.row_scales, report.row_scales)
    assert back.target_max == report.target_max
    assert back.std_convention == "population"
