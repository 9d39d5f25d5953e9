import json
import time

import numpy as np
import pytest

from subspace_mds.cli import EXIT_OK, EXIT_VALIDATION, main
from subspace_mds.mesh_io import RasterImage, generate_sphere_mesh, load_image, load_mesh, save_image, save_mesh
from subspace_mds.metric import MeshGeodesics
from subspace_mds.stress import StressProblem, stress_value, unit_weights

from conftest import torus_mesh


@pytest.fixture(scope="module")
def sphere_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("mesh") / "sphere2.off"
    save_mesh(generate_sphere_mesh(2), path)
    return path


@pytest.fixture(scope="module")
def torus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("mesh") / "torus.off"
    mesh = torus_mesh(12, 10)
    # squash so the canonical form has something to undo
    save_mesh(mesh.with_vertices(mesh.vertices * np.array([1.0, 0.6, 1.0])), path)
    return path


def test_no_arguments_prints_help(capsys):
    assert main([]) == EXIT_VALIDATION
    assert "usage" in capsys.readouterr().out.lower()
    assert main(["--help"]) == EXIT_OK


def test_missing_input_no_partial_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["embed", "--input", str(tmp_path / "absent.off"), "--output-dir", str(out)]) == EXIT_VALIDATION
    assert not out.exists() or not any(out.iterdir())


def test_bad_mesh_is_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.off"
    bad.write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n")
    out = tmp_path / "out"
    assert main(["embed", "--input", str(bad), "--output-dir", str(out)]) == EXIT_VALIDATION
    assert "error" in capsys.readouterr().err
    assert not (out / "embedding.csv").exists()


def test_unknown_config_key_rejected(tmp_path, sphere_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"maxiterations": 3}))
    assert main(["embed", "--config", str(cfg), "--input", str(sphere_file),
                 "--output-dir", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_flags_override_config(tmp_path, sphere_file):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"maxiter": 20, "r_tol": 0.0}))
    out = tmp_path / "o"
    assert main(["embed", "--config", str(cfg), "--maxiter", "4", "--input", str(sphere_file),
                 "--output-dir", str(out)]) == EXIT_OK
    rows = (out / "log.csv").read_text().splitlines()
    assert len(rows) == 1 + 5
    out2 = tmp_path / "o2"
    assert main(["embed", "--config", str(cfg), "--input", str(sphere_file), "--output-dir", str(out2)]) == EXIT_OK
    assert len((out2 / "log.csv").read_text().splitlines()) == 1 + 21


def test_embed_outputs_and_deterministic_log(tmp_path, sphere_file):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["embed", "--input", str(sphere_file), "--solver", "smacof", "--maxiter", "30",
                     "--output-dir", str(out), "--seed", "3"]) == EXIT_OK
        runs.append(out)
    assert (runs[0] / "log.csv").read_bytes() == (runs[1] / "log.csv").read_bytes()
    X = np.loadtxt(runs[0] / "embedding.csv", delimiter=",")
    assert X.shape == (162, 3)
    assert load_mesh(runs[0] / "embedding.off").n_vertices == 162
    stresses = np.loadtxt(runs[0] / "log.csv", delimiter=",", skiprows=1)[:, 1]
    assert np.all(np.diff(stresses) <= 0)


def test_embed_distance_table_relative_weights(tmp_path):
    rng = np.random.default_rng(5)
    P = rng.standard_normal((20, 2))
    D = np.linalg.norm(P[:, None] - P[None], axis=2)
    table = tmp_path / "d.csv"
    np.savetxt(table, D, delimiter=",")
    out = tmp_path / "o"
    assert main(["embed", "--input", str(table), "--dim", "2", "--weights", "relative", "--solver", "smacof-rre",
                 "--output-dir", str(out)]) == EXIT_OK
    assert np.loadtxt(out / "embedding.csv", delimiter=",").shape == (20, 2)
    # spectral solvers need a mesh
    assert main(["embed", "--input", str(table), "--solver", "spectral", "--output-dir",
                 str(tmp_path / "x")]) == EXIT_VALIDATION


def test_embed_multires_schedule(tmp_path, torus_file):
    out = tmp_path / "o"
    assert main(["embed", "--input", str(torus_file), "--solver", "multires", "--schedule-q", "40,80,N",
                 "--schedule-p", "20,40,N", "--output-dir", str(out)]) == EXIT_OK
    levels = np.loadtxt(out / "log.csv", delimiter=",", skiprows=1)[:, 2]
    assert sorted(set(levels.astype(int))) == [0, 1, 2]


def test_schedule_violating_sampling_criterion(tmp_path, torus_file):
    assert main(["embed", "--input", str(torus_file), "--solver", "multires", "--schedule-q", "30,N",
                 "--schedule-p", "20,N", "--output-dir", str(tmp_path / "o")]) == EXIT_VALIDATION


def test_canonical_form_lowers_stress_deterministically(tmp_path, torus_file):
    outs = [tmp_path / "a.off", tmp_path / "b.off"]
    for o in outs:
        assert main(["canonical-form", "--input", str(torus_file), "--output", str(o), "--schedule-q", "40,80,N",
                     "--schedule-p", "20,40,N", "--log", str(o.with_suffix(".csv"))]) == EXIT_OK
    assert outs[0].read_bytes() == outs[1].read_bytes()
    mesh = load_mesh(torus_file)
    prob = StressProblem(MeshGeodesics(mesh).all_pairs(), unit_weights(mesh.n_vertices), 3)
    assert stress_value(load_mesh(outs[0]).vertices, prob) < stress_value(mesh.vertices, prob)


def test_bench_outputs(tmp_path, torus_file):
    out = tmp_path / "b"
    assert main(["bench", "--input", str(torus_file), "--solver", "spectral", "-p", "20", "-q", "60", "--rre",
                 "--output-dir", str(out)]) == EXIT_OK
    header = (out / "bench.csv").read_text().splitlines()[0]
    assert header == "solver,iteration,seconds,stress,level"
    summary = json.loads((out / "summary.json").read_text())
    assert "speedup" in summary and "smacof-rre" in summary
    if summary["smacof"]["matched"]:
        assert summary["speedup"] > 0


def test_basis_cache_hit_is_faster(tmp_path, capsys):
    mesh_path = tmp_path / "s4.off"
    save_mesh(generate_sphere_mesh(4), mesh_path)
    cache = tmp_path / "cache"
    args = ["basis", "--input", str(mesh_path), "-p", "100", "--cache-dir", str(cache)]
    t = time.perf_counter()
    assert main(args) == EXIT_OK
    miss = time.perf_counter() - t
    assert "cache=miss" in capsys.readouterr().out
    t = time.perf_counter()
    assert main(args) == EXIT_OK
    hit = time.perf_counter() - t
    assert "cache=hit" in capsys.readouterr().out
    assert hit * 10 <= miss


def test_basis_cache_from_environment(tmp_path, sphere_file, monkeypatch, capsys):
    monkeypatch.setenv("SUBSPACE_MDS_CACHE", str(tmp_path / "env-cache"))
    main(["basis", "--input", str(sphere_file), "-p", "10"])
    capsys.readouterr()
    main(["basis", "--input", str(sphere_file), "-p", "10"])
    assert "cache=hit" in capsys.readouterr().out


def test_basis_p_too_large(tmp_path, sphere_file):
    out = tmp_path / "basis.npz"
    assert main(["basis", "--input", str(sphere_file), "-p", "162", "--output", str(out)]) == EXIT_VALIDATION
    assert not out.exists()


def _write_images(tmp_path, h=48, w=96):
    yy, xx = np.mgrid[0:h, 0:w]
    src = RasterImage(np.stack([0.5 + 0.4 * np.sin(xx / 7.0), 0.5 + 0.4 * np.cos(yy / 5.0),
                                np.full((h, w), 0.3)], axis=2))
    sal = np.zeros((h, w))
    sal[12:36, 40:56] = 1.0
    save_image(src, tmp_path / "src.ppm")
    save_image(RasterImage(sal), tmp_path / "sal.pgm")
    return tmp_path / "src.ppm", tmp_path / "sal.pgm"


def test_retarget_ratio_one_reproduces_source(tmp_path):
    src, sal = _write_images(tmp_path)
    out = tmp_path / "r"
    assert main(["retarget", "--source", str(src), "--saliency", str(sal), "--ratio", "1.0", "--grid-rows", "12",
                 "--grid-cols", "24", "-p", "20", "-q", "80", "--output-dir", str(out)]) == EXIT_OK
    a = load_image(src).quantized().astype(int)
    b = load_image(out / "retargeted.ppm").quantized().astype(int)
    assert a.shape == b.shape
    assert np.abs(a - b).max() <= 1
    report = json.loads((out / "report.json").read_text())
    assert report["full_grid_violations"] == 0


def test_retarget_half_width(tmp_path):
    src, sal = _write_images(tmp_path)
    out = tmp_path / "r"
    assert main(["retarget", "--source", str(src), "--saliency", str(sal), "--grid-rows", "12", "--grid-cols", "24",
                 "-p", "20", "-q", "80", "--output-dir", str(out)]) == EXIT_OK
    assert load_image(out / "retargeted.ppm").width == 48
    assert load_mesh(out / "grid.off").n_vertices == 12 * 24


def test_retarget_missing_saliency(tmp_path):
    src, _ = _write_images(tmp_path)
    out = tmp_path / "r"
    assert main(["retarget", "--source", str(src), "--output-dir", str(out)]) == EXIT_VALIDATION
    assert not out.exists() or not any(out.iterdir())
