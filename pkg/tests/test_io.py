import math

import numpy as np
import pytest

from nhcollapse.dynamics import IntegratorConfig, Trajectory, evolve
from nhcollapse.ham_models import EPLoop, LoopSpec
from nhcollapse.io import (
    CsvTable,
    fmt,
    jsonable,
    summary_document,
    trajectory_table,
    write_surface_csv,
    write_trajectory_csv,
)
from nhcollapse.spectral import sample_surface


def test_fmt_round_trips_doubles():
    for x in (0.1, 1 / 3, math.pi * 1e-300, -2.5e17, 5e-324):
        assert float(fmt(x)) == x
    assert fmt(True) == "1" and fmt(np.int64(7)) == "7"


def test_trajectory_csv_round_trip(tmp_path):
    fam = EPLoop(1.0, LoopSpec(period=10.0))
    traj = evolve(fam, [0.6, 0.8j], 0.0, 10.0, IntegratorConfig(dt=0.01, record_stride=7), track_eigenweights=True)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    table = CsvTable.read(path)
    assert table.header == ["t", "re_psi_1", "im_psi_1", "re_psi_2", "im_psi_2", "norm", "P_1", "P_2", "w_1", "w_2"]
    assert len(table.rows) == len(traj)
    np.testing.assert_array_equal(table.column("t"), traj.times)
    np.testing.assert_array_equal(table.column("re_psi_2"), traj.states[:, 1].real)
    np.testing.assert_array_equal(table.column("P_1"), traj.relative_populations[:, 0])
    total = table.column("P_1") + table.column("P_2")
    assert np.abs(total - 1).max() < 1e-12


def test_trajectory_labels():
    fam = EPLoop(1.0, LoopSpec(period=1.0))
    traj = evolve(fam, [1, 0], 0.0, 1.0, IntegratorConfig(dt=0.1))
    assert trajectory_table(traj, ("up", "down")).header[-2:] == ["P_up", "P_down"]


def test_empty_trajectory_is_rejected():
    empty = Trajectory(np.zeros(0), np.zeros((0, 2), complex), np.zeros(0), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        trajectory_table(empty)


def test_table_shape_is_checked():
    with pytest.raises(ValueError):
        CsvTable(["a", "b"], [[1, 2], [3]])


def test_surface_csv(tmp_path):
    res = 17
    grid = sample_surface(1.0, (-1, 1), (0, 2), res)
    path = tmp_path / "surface.csv"
    write_surface_csv(grid, path)
    table = CsvTable.read(path)
    assert table.header == ["re_z", "im_z", "sheet", "re_lambda", "im_lambda"]
    assert len(table.rows) == 2 * res * res
    on_axis = table.column("im_z") == 0.0
    assert on_axis.sum() == 2 * res
    assert np.all(np.abs(table.column("im_lambda")[on_axis]) < 1e-15)


def test_jsonable_and_summary():
    doc = summary_document("surface", {"gamma0": 1.0}, {"z": 1 + 2j, "a": np.arange(3), "x": np.float64(0.5)})
    assert doc["schema_version"] == "1"
    assert doc["results"] == {"z": {"re": 1.0, "im": 2.0}, "a": [0, 1, 2], "x": 0.5}
    assert jsonable(float("inf")) == "inf"
