"""Config parsing, VSLB snapshots, and report emission."""

import os
import struct

import numpy as np
import pytest

from vslab.config import ConfigError, echo_config, load_config, parse_config_text
from vslab.estimates import enstrophy_ledger
from vslab.reports import SERIES_COLUMNS, SLAB_COLUMNS, emit_reports, fmt, write_csv
from vslab.slabs import uniform_partition
from vslab.snapshots import (
    SnapshotError,
    load_field,
    load_trajectory,
    persist_field,
    save_trajectory,
)
from vslab.spectral import Grid, random_divfree_field
from vslab.trajectory import ScalarSeries, Trajectory

HERE = os.path.dirname(__file__)
REPO = os.path.dirname(HERE)


# -- config ---------------------------------------------------------------------


def test_minimal_config_fills_defaults():
    cfg = parse_config_text("n = 16\nT = 0.5\n")
    assert cfg.n == 16 and cfg.T == 0.5
    assert cfg.nu == 1.0 and cfg.policy == "uniform" and cfg.slabs == 8
    assert cfg.epsilon0 == 0.5 and cfg.provider == "self-consistent"


def test_config_range_error_names_key():
    with pytest.raises(ConfigError, match="epsilon0"):
        parse_config_text("epsilon0 = 1.5\n")


def test_config_unknown_key_carries_line_number():
    with pytest.raises(ConfigError, match="cfg:3"):
        parse_config_text("n = 8\n\nwhatsit = 1\n", source="cfg")


def test_config_bad_value_type():
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_config_text("n = sixteen\n")


def test_config_sections_and_comments_ignored():
    cfg = parse_config_text("[grid]\n# comment\nn = 8\n; another\n[run]\nT = 0.25\n")
    assert cfg.n == 8 and cfg.T == 0.25


def test_config_overrides():
    cfg = parse_config_text("n = 8\n", overrides=["T=0.125", "slabs=2"])
    assert cfg.T == 0.125 and cfg.slabs == 2
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("n = 8\n", overrides=["zoom=1"])


def test_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/path.cfg")


def test_sample_config_echo_matches_golden(tmp_path):
    cfg = load_config(os.path.join(REPO, "configs", "sample.cfg"), echo=False)
    path = echo_config(cfg, tmp_path)
    with open(path, "rb") as fh:
        got = fh.read()
    with open(os.path.join(HERE, "golden", "sample.echo.cfg"), "rb") as fh:
        want = fh.read()
    assert got == want


def test_load_config_echoes_to_outdir(tmp_path):
    src = tmp_path / "run.cfg"
    src.write_text(f"n = 8\noutdir = {tmp_path / 'out'}\n")
    load_config(src)
    assert (tmp_path / "out" / "config.echo.cfg").exists()


def test_echo_replays_to_identical_config(tmp_path):
    src = tmp_path / "run.cfg"
    src.write_text(f"n = 8\nT = 0.25\ndt = 0.005\nseed = 3\noutdir = {tmp_path / 'out'}\n")
    cfg = load_config(src)
    replayed = load_config(tmp_path / "out" / "config.echo.cfg", echo=False)
    assert replayed == cfg


# -- snapshots -------------------------------------------------------------------


def test_snapshot_round_trip_bit_exact(tmp_path):
    grid = Grid(8)
    w = random_divfree_field(grid, seed=77)
    path = tmp_path / "field.vslb"
    persist_field(path, w, 0.375)
    n, t, back = load_field(path)
    assert n == 8 and t == 0.375
    assert np.array_equal(back, w)


def test_snapshot_golden_bytes_2cubed(tmp_path):
    path = tmp_path / "zero.vslb"
    size = persist_field(path, np.zeros((3, 2, 2, 2), dtype=complex), 0.25)
    with open(path, "rb") as fh:
        got = fh.read()
    want = struct.pack("<4sIIId", b"VSLB", 1, 2, 3, 0.25) + b"\x00" * (3 * 8 * 16)
    assert got == want
    assert size == 24 + 384


def test_snapshot_bad_magic(tmp_path):
    path = tmp_path / "bad.vslb"
    persist_field(path, np.zeros((3, 4, 4, 4), dtype=complex), 0.0)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(SnapshotError, match="bad magic"):
        load_field(path)


def test_snapshot_bad_version(tmp_path):
    path = tmp_path / "ver.vslb"
    persist_field(path, np.zeros((3, 4, 4, 4), dtype=complex), 0.0)
    blob = bytearray(path.read_bytes())
    blob[4:8] = struct.pack("<I", 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(SnapshotError, match="version"):
        load_field(path)


def test_snapshot_truncated(tmp_path):
    path = tmp_path / "short.vslb"
    persist_field(path, np.zeros((3, 4, 4, 4), dtype=complex), 0.0)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(SnapshotError, match="truncated"):
        load_field(path)


def test_snapshot_symmetry_violation(tmp_path):
    grid = Grid(4)
    w = np.zeros((3, 4, 4, 4), dtype=complex)
    w[0, 1, 0, 0] = 1.0  # no conjugate partner
    path = tmp_path / "asym.vslb"
    persist_field(path, w, 0.0)
    with pytest.raises(SnapshotError, match="symmetry"):
        load_field(path)


def test_trajectory_save_load(tmp_path):
    grid = Grid(8)
    w = random_divfree_field(grid, seed=5)
    times = np.array([0.0, 0.5, 1.0])
    fields = [w, 0.5 * w, 0.25 * w]
    traj = Trajectory(grid=grid, nu=1.0, times=times, fields=fields)
    save_trajectory(tmp_path, traj)
    back = load_trajectory(tmp_path)
    assert np.array_equal(back.times, times)
    assert all(np.array_equal(a, b) for a, b in zip(back.fields, fields))
    assert back.series is not None


# -- reports ----------------------------------------------------------------------


def _tiny_ledger(grid):
    times = np.linspace(0.0, 1.0, 11)
    zeros = np.zeros((3, grid.n, grid.n, grid.n), dtype=complex)
    traj = Trajectory(grid=grid, nu=1.0, times=times, fields=[zeros] * 11)
    traj.series = ScalarSeries(
        times=times,
        energy=np.linspace(4.0, 3.0, 11),
        enstrophy=np.linspace(2.0, 1.0, 11),
        dissipation=np.linspace(1.0, 0.5, 11),
        enstrophy_dissipation=np.linspace(0.5, 0.25, 11),
    )
    return enstrophy_ledger(traj, uniform_partition(1.0, 2), eps0=0.5, C=1.0)


def test_float_formatting_round_trips():
    for x in (1.0 / 3.0, 1e-17, 123456.789, np.pi, 2.0 ** -1074):
        assert float(fmt(x)) == x


def test_empty_csv_has_header(tmp_path):
    path = write_csv(tmp_path / "empty.csv", ("a", "b"), [])
    with open(path, newline="") as fh:
        content = fh.read()
    assert content == "a,b\r\n"


def test_known_rows_exact_text(tmp_path):
    path = write_csv(tmp_path / "two.csv", ("k", "v"), [(0, 0.5), (1, 0.25)])
    with open(path, newline="") as fh:
        content = fh.read()
    assert content == "k,v\r\n0,0.5\r\n1,0.25\r\n"


def test_emit_reports_layout(tmp_path):
    grid = Grid(8)
    paths = emit_reports(tmp_path, _tiny_ledger(grid))
    with open(paths["series"]) as fh:
        header = fh.readline().strip()
    assert header == ",".join(SERIES_COLUMNS)
    with open(paths["slabs"]) as fh:
        header = fh.readline().strip()
    assert header == ",".join(SLAB_COLUMNS)
    assert os.path.exists(paths["summary"])


def test_svg_polyline_point_counts(tmp_path):
    grid = Grid(8)
    paths = emit_reports(tmp_path, _tiny_ledger(grid))
    with open(paths["series_svg"]) as fh:
        svg = fh.read()
    polylines = [chunk.split('"')[0] for chunk in svg.split('points="')[1:]]
    assert len(polylines) == 3
    for pts in polylines:
        assert len(pts.split()) == 11  # one point per sample


def test_emit_reports_empty_ledger(tmp_path):
    from vslab.estimates import EstimateLedger

    empty = EstimateLedger(
        rows=[], K0=0.0, eps0=0.5, C=1.0, T=0.0,
        global_bound=0.0, sup_enstrophy=0.0, global_ok=True,
    )
    paths = emit_reports(tmp_path, empty)
    with open(paths["slabs"], newline="") as fh:
        assert fh.read() == ",".join(SLAB_COLUMNS) + "\r\n"
    with open(paths["series"], newline="") as fh:
        assert fh.read() == ",".join(SERIES_COLUMNS) + "\r\n"


def test_csv_numbers_parse_back_to_doubles(tmp_path):
    grid = Grid(8)
    ledger = _tiny_ledger(grid)
    paths = emit_reports(tmp_path, ledger)
    import csv

    with open(paths["slabs"]) as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["M_k"]) == ledger.rows[0].M_k
    assert float(rows[0]["gronwall_bound"]) == ledger.rows[0].gronwall_bound
    assert float(rows[1]["kstar"]) == ledger.rows[1].kstar
