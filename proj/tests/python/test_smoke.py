import math

import numpy as np
import pytest

import treepot


def test_f1_potential_thirds():
    d = treepot.finite_potential("f1.json", 1)
    assert d["nodes"] == ["r", "a", "b"]
    expect = np.array([[2, 1, 2], [1, 2, 1], [2, 1, 5]]) / 3.0
    assert np.max(np.abs(d["V"] - expect)) <= 4.5e-16
    assert np.max(np.abs(d["V"] - d["dense"])) <= 1e-12


def test_verify_inverse_f1():
    assert treepot.verify_inverse("f1.json", 2)["residual"] <= 1e-12


def test_homogeneous_exit_measure_and_kernel():
    masses = treepot.exit_measure("homog2.json", 2, mode="absorbed")
    assert len(masses) == 6
    for v in masses.values():
        assert v == pytest.approx(1 / 6, abs=1e-9)
    # kappa(i, ray) = p^(2n - m) in reflected mode
    assert treepot.martin_kernel("homog2.json", "0.0", mode="reflected") == pytest.approx(4.0, abs=1e-6)
    a = treepot.martin_kernel("asym.json", "1.1", route="ratio")
    b = treepot.martin_kernel("asym.json", "1.1", route="series")
    assert a == pytest.approx(b, abs=1e-9)


def test_classification_and_ray():
    assert treepot.classify("homog2.json")["status"] == "transient"
    r = treepot.ray_regularity("figure2.json")
    assert r["status"] == "irregular" and r["accessible"]


def test_boundary_simulation_lifetime_mean():
    d = treepot.simulate_boundary("homog2.json", 3, 4000, 11, start="0.0.0")
    assert all(d["killed"])
    mean = sum(d["end_time"]) / len(d["end_time"])
    g0 = d["G0"]
    assert abs(mean - g0) < 4 * g0 / math.sqrt(4000)


def test_ultrametric_generator_f4():
    U = np.loadtxt(treepot.fixtures_dir() + "/f4.csv", delimiter=",", comments="#")
    g = treepot.ultrametric_generator(U)
    assert g["certified"]
    assert np.allclose(-g["Q"] @ U, np.eye(U.shape[0]), atol=1e-12)
    ext = treepot.minimal_tree_extension(U)
    assert np.array_equal(ext["restricted"], U)


def test_errors_carry_code():
    with pytest.raises(treepot.TreepotError) as e:
        treepot.ultrametric_generator(np.array([[1.0, 2.0], [1.0, 1.0]]))
    assert e.value.code in ("asymmetric", "not_ultrametric", "bad_matrix")
    assert not treepot.is_ultrametric(
        np.loadtxt(treepot.fixtures_dir() + "/not_ultrametric.csv", delimiter=",", comments="#")
    )


def test_criterion_runner():
    r = treepot.run_criterion(9)
    assert r["passed"], r["detail"]
