import json
import math
from pathlib import Path

import numpy as np
import pytest

from hardscatter import __version__
from hardscatter.cli import ConfigError, main, parse_h_list, parse_k_range, resolve_config
from hardscatter.geometry import (
    PolyChain,
    Scatterer,
    dumps_geometry,
    empty_scatterer,
    load_geometry,
    polygon,
    polyline,
    regular_polygon,
    unit_square,
)


@pytest.fixture()
def geo(tmp_path):
    """Write a named geometry to disk and return its path."""

    def write(name, k):
        p = tmp_path / f"{name}.json"
        p.write_text(dumps_geometry(k))
        return str(p)

    return write


def manifest(out) -> dict:
    return json.loads((Path(out) / "manifest.json").read_text())


def test_parse_helpers():
    assert parse_k_range("1:3:5") == (1.0, 3.0, 5)
    assert parse_h_list("0.2,0.1") == [0.2, 0.1]
    for bad in ("1:3", "3:1:2", "0:1:2", "a:b:c"):
        with pytest.raises(ConfigError):
            parse_k_range(bad)
    for bad in ("0.1,0.2", "x", "0.1,-0.05"):
        with pytest.raises(ConfigError):
            parse_h_list(bad)


def test_check_valid_geometry(geo, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["check", "--geometry", geo("sq", unit_square()), "--out", str(out)]) == 0
    rep = json.loads((out / "check.json").read_text())
    assert rep["exterior_connected"] is True
    assert rep["assumption_b"]["components"] == 1
    m = manifest(out)
    assert m["status"] == 0 and m["version"] == __version__
    assert "check.json" in m["outputs"]
    assert "exterior connected: True" in capsys.readouterr().out


def test_check_nearly_closed_screen(geo, tmp_path):
    out = tmp_path / "o"
    c_shape = polyline([[0.5, -0.5], [-0.5, -0.5], [-0.5, 0.5], [0.5, 0.5], [0.5, -0.3]], 1.0)
    assert main(["check", "--geometry", geo("c", c_shape), "--out", str(out), "--grid-res", "0.02"]) == 0
    assert json.loads((out / "check.json").read_text())["exterior_connected"] is True


def test_check_touching_screens_rejected(geo, tmp_path):
    # two screens meeting at their ends would enclose a cavity
    k = Scatterer(
        (),
        (
            PolyChain(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]), False),
            PolyChain(np.array([[-0.5, 0.5], [-0.5, -0.5]]), False),
        ),
        1.0,
    )
    out = tmp_path / "o"
    assert main(["check", "--geometry", geo("box", k), "--out", str(out), "--grid-res", "0.01"]) == 1
    assert "touch" in manifest(out)["message"]


def test_solve_empty_scatterer(geo, tmp_path):
    out = tmp_path / "o"
    code = main(["solve", "--geometry", geo("e", empty_scatterer(1.0)), "--k", "1", "--h-mesh", "0.1", "--out", str(out)])
    assert code == 0
    rep = json.loads((out / "solve.json").read_text())
    assert rep["scattered_to_incident"] <= 1e-6
    assert rep["d"] == [1.0, 0.0] and rep["truncation_radius"] == 1.0
    for name in ("scattered.csv", "mesh.txt", "scattered.png", "total.png"):
        assert (out / name).exists()
    assert manifest(out)["resolved"]["n_modes"] == 16


def test_solve_square_and_farfield(geo, tmp_path):
    g = geo("sq", unit_square())
    out = tmp_path / "o"
    assert main(["farfield", "--geometry", g, "--k", "2", "--d-angle", "90", "--h-mesh", "0.1", "--out", str(out), "--no-plots"]) == 0
    rep = json.loads((out / "farfield.json").read_text())
    assert rep["optical_theorem_rel_error"] < 3e-2
    assert rep["d_angle_rad"] == pytest.approx(math.pi / 2)
    assert not (out / "farfield.png").exists()
    lines = (out / "farfield.csv").read_text().splitlines()
    assert lines[0] == "theta,re,im,abs" and len(lines) == 361


def test_thicken_segment(geo, tmp_path):
    out = tmp_path / "o"
    seg = polyline([[0.0, 0.0], [1.0, 0.0]], 1.2)
    assert main(["thicken", "--geometry", geo("s", seg), "--h", "0.1", "--out", str(out)]) == 0
    k = load_geometry(out / "thickened.json")
    v = k.loops[0].vertices
    assert len(k.loops) == 1 and not k.screens
    assert v.min(axis=0) == pytest.approx([-0.1, -0.1], abs=1e-9)
    assert v.max(axis=0) == pytest.approx([1.1, 0.1], abs=1e-9)
    assert (out / "thickened.png").exists()


def test_solve_rejects_screens(geo, tmp_path):
    out = tmp_path / "o"
    seg = polyline([[0.0, 0.0], [1.0, 0.0]], 1.2)
    assert main(["solve", "--geometry", geo("s", seg), "--out", str(out)]) == 1
    assert "thicken" in manifest(out)["message"]


def test_malformed_geometry_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"bounding_radius": 1.0,\n "loops": [,]}')
    out = tmp_path / "o"
    assert main(["check", "--geometry", str(bad), "--out", str(out)]) == 1
    err = capsys.readouterr().err
    assert "line 2, column" in err
    assert manifest(out)["status"] == 1


def test_missing_geometry_is_config_error(tmp_path):
    out = tmp_path / "o"
    assert main(["solve", "--out", str(out)]) == 1
    assert manifest(out)["config"] is None


def test_mesh_failure_exit_code(geo, tmp_path):
    out = tmp_path / "o"
    code = main(["solve", "--geometry", geo("sq", unit_square()), "--r1", "0.6", "--out", str(out)])
    assert code == 1


def test_config_file_and_override(geo, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"k": 3.0, "h_mesh": 0.2, "d-angle": 45.0}))
    g = geo("sq", unit_square())
    c = resolve_config(["solve", "--config", str(cfg), "--geometry", g, "--k", "1.5"])
    assert c.k == 1.5 and c.h_mesh == 0.2 and c.d_angle == 45.0
    assert c.jobs == 1 and c.min_angle == 20.0


def test_config_errors(tmp_path, geo):
    g = geo("sq", unit_square())
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"k": 1.0,\n  "oops": }')
    with pytest.raises(ConfigError, match="line 2"):
        resolve_config(["solve", "--config", str(cfg), "--geometry", g])
    cfg.write_text(json.dumps({"wavenumber": 1.0}))
    with pytest.raises(ConfigError, match="unknown option"):
        resolve_config(["solve", "--config", str(cfg), "--geometry", g])
    with pytest.raises(ConfigError):
        resolve_config(["solve", "--geometry", g, "--k", "-1"])
    with pytest.raises(ConfigError):
        resolve_config(["sweep"])


def test_manifest_records_all_options(geo, tmp_path):
    out = tmp_path / "o"
    main(["check", "--geometry", geo("sq", unit_square()), "--out", str(out)])
    conf = manifest(out)["config"]
    for key in ("k", "d_angle", "h_mesh", "min_angle", "n_modes", "jobs", "h_list", "k_range", "d_count", "background_res", "seed"):
        assert key in conf


def test_mosco_command(geo, tmp_path):
    out = tmp_path / "o"
    args = ["mosco", "--geometry", geo("sq", unit_square()), "--n-steps", "2", "--h-mesh", "0.1",
            "--background-res", "0.02", "--vertex", "2", "--perturbation-scale", "0.3", "--out", str(out)]
    assert main(args) == 0
    rep = json.loads((out / "mosco.json").read_text())
    assert len(rep["per_step"]) == 3 and rep["realization_floor"] is not None
    assert (out / "mosco.csv").exists() and (out / "mosco.png").exists()


def test_screen_study_command(geo, tmp_path):
    out = tmp_path / "o"
    seg = polyline([[-0.5, 0.0], [0.5, 0.0]], 1.0)
    args = ["screen-study", "--geometry", geo("s", seg), "--k", "2", "--d-angle", "-90", "--h-list", "0.2,0.1",
            "--h-mesh", "0.1", "--out", str(out)]
    assert main(args) == 0
    rep = json.loads((out / "screen.json").read_text())
    assert len(rep["cauchy_deltas"]) == 1 and rep["direction"] == pytest.approx([0.0, -1.0], abs=1e-15)


def test_sweep_and_decay_commands(geo, tmp_path):
    out = tmp_path / "o"
    base = ["--perturbed", "2", "--k-range", "1:2:2", "--d-count", "2", "--h-mesh", "0.15"]
    assert main(["sweep", *base, "--out", str(out)]) == 0
    rep = json.loads((out / "sweep.json").read_text())
    assert len(rep["per_case"]) == 8 and rep["norm_radius"] == 2.0
    assert main(["decay", *base, "--n-radii", "5", "--n-angles", "90", "--out", str(out)]) == 0
    rep = json.loads((out / "decay.json").read_text())
    assert rep["r_min"] == 3.0 and rep["r_max"] == 12.0
    assert (out / "decay.png").exists() and (out / "sweep.png").exists()


def test_partial_failure_exit_code(geo, tmp_path):
    out = tmp_path / "o"
    args = ["sweep", "--geometry", geo("sq", unit_square()), "--k-range", "1:2:2", "--d-count", "1",
            "--n-modes", "13", "--r1", "2", "--h-mesh", "0.15", "--out", str(out), "--no-plots"]
    assert main(args) == 2
    assert manifest(out)["status"] == 2
    assert len(json.loads((out / "sweep.json").read_text())["failures"]) == 1


def test_reports_deterministic(geo, tmp_path):
    g = geo("hex", polygon(regular_polygon(6, 0.5), 1.0))
    texts = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert main(["farfield", "--geometry", g, "--k", "2", "--h-mesh", "0.1", "--out", str(out), "--no-plots"]) == 0
        texts.append([(out / n).read_text() for n in ("farfield.json", "farfield.csv", "manifest.json")])
    # manifests differ only in the output directory
    assert texts[0][:2] == texts[1][:2]
    m0, m1 = (json.loads(t[2]) for t in texts)
    m0["config"].pop("out"), m1["config"].pop("out")
    assert m0 == m1
    assert np.isfinite(json.loads(texts[0][0])["l2_norm"])
