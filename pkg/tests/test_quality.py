import csv
import math

import numpy as np
import pytest

from oracles import procrustes_residual
from provsem.errors import ProjectionError, ShapeError
from provsem.quality import analogy_residual, balanced_sample, project_2d


def test_analogy_residual_by_hand():
    # d(e1,e2) = 1 - cos(90deg) = 1 ; d(e3,e4) = 1 - cos(60deg) = 0.5
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    e3, e4 = np.array([1.0, 0.0]), np.array([0.5, math.sqrt(3) / 2])
    r = analogy_residual(e1, e2, e3, e4, tolerance=0.1, name="q")
    assert r.d12 == pytest.approx(1.0) and r.d34 == pytest.approx(0.5)
    assert r.residual == pytest.approx(0.5) and not r.passed
    diff1, diff2 = e1 - e2, e3 - e4
    expected = np.linalg.norm(diff1 - diff2) / ((np.linalg.norm(diff1) + np.linalg.norm(diff2)) / 2)
    assert r.vector_residual == pytest.approx(expected)
    assert r.to_dict()["name"] == "q" and type(r.passed) is bool


def test_analogy_parallel_offsets_pass():
    a = np.array([1.0, 2.0, 0.5])
    off = np.array([0.3, -0.2, 0.1])
    r = analogy_residual(a + off, a, a + off, a)
    assert r.residual == 0.0 and r.vector_residual == 0.0 and r.passed
    with pytest.raises(ShapeError):
        analogy_residual(np.ones(2), np.ones(2), np.ones(3), np.ones(3))


def test_balanced_sample():
    labels = ["b"] * 10 + ["a"] * 4
    idx = balanced_sample(labels, 3, seed=1)
    assert idx.size == 6 and np.all(np.diff(idx) > 0)
    assert sum(labels[i] == "a" for i in idx) == 3
    assert np.array_equal(idx, balanced_sample(labels, 3, seed=1))
    with pytest.raises(ProjectionError):
        balanced_sample(labels, 5, seed=0)


def test_project_2d_recovers_planar_angles():
    # unit vectors in the plane: cosine distance is a function of the angle only
    ang = np.linspace(0, 1.2, 6)
    X = np.stack([np.cos(ang), np.sin(ang), np.zeros(6)], axis=1)
    p = project_2d(X, keys=[f"k{i}" for i in range(6)], labels=["x"] * 6)
    assert p.coords.points.shape == (6, 2)
    assert p.keys[0] == "k0" and p.labels == ["x"] * 6
    # projecting the same set twice is deterministic
    assert procrustes_residual(p.coords.points, project_2d(X).coords.points) < 1e-12


def test_project_2d_errors_and_csv(tmp_path):
    with pytest.raises(ProjectionError):
        project_2d(np.eye(2))
    with pytest.raises(ProjectionError):
        project_2d(np.ones((4, 3)))
    rng = np.random.default_rng(0)
    X = rng.normal(size=(8, 5))
    p = project_2d(X, labels=["a"] * 4 + ["b"] * 4, per_label=2, seed=0)
    assert len(p.keys) == 4 and sorted(p.labels) == ["a", "a", "b", "b"]
    p.write_csv(tmp_path / "p.csv")
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["id", "label", "x", "y"] and len(rows) == 5
    assert float(rows[1][2]) == p.coords.points[0, 0]
