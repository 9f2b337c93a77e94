import io
import json

import numpy as np
import pytest

from schur_icp import bench
from schur_icp.bench import Perturbation, parse, read_report, run_benchmark, serialize
from schur_icp.cli import cli_main
from schur_icp.cloud import PointCloud, estimate_normals, load_cloud
from schur_icp.errors import InvalidSpec
from schur_icp.pipeline import SolverConfig, pose_error
from schur_icp.scenes import SceneSpec, gen_scene, perturb_pose
from schur_icp.se3 import RigidTransform


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli_main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture(scope="module")
def cylinder_report():
    return run_benchmark(SceneSpec(), bench.ALL_SOLVERS, SolverConfig())


def test_cylinder_scene_shape():
    c = gen_scene(SceneSpec(point_count=7600))
    assert len(c) == 7600
    assert np.allclose(np.linalg.norm(c.normals, axis=1), 1.0)
    assert np.all(c.normals[:, 2] == 0)
    radial = np.linalg.norm(c.points[:, :2], axis=1)
    assert np.all(np.abs(radial - 5.0) < 6 * 0.02 * np.sqrt(2))


def test_plane_scene_exact_and_seeded():
    p = gen_scene(SceneSpec(kind="plane", noise_sigma=0.0))
    assert np.all(p.points[:, 2] == 0) and np.all(p.normals == [0, 0, 1])
    for kind in ("cylinder", "corridor", "room"):
        a, b = gen_scene(SceneSpec(kind=kind, seed=3)), gen_scene(SceneSpec(kind=kind, seed=3))
        assert np.array_equal(a.points, b.points)
    assert not np.array_equal(gen_scene(SceneSpec(seed=1)).points, gen_scene(SceneSpec(seed=2)).points)


@pytest.mark.parametrize("kw", [dict(point_count=99), dict(radius=0), dict(kind="cave"), dict(noise_sigma=-1)])
def test_scene_spec_validation(kw):
    with pytest.raises(InvalidSpec):
        SceneSpec(**kw)


def test_analytic_normals_match_estimated():
    for kind in ("cylinder", "room", "corridor"):
        c = gen_scene(SceneSpec(kind=kind, noise_sigma=0.0))
        est = estimate_normals(PointCloud(c.points), k=5).normals
        ang = np.degrees(np.arccos(np.clip(np.abs(np.einsum("ij,ij->i", est, c.normals)), 0, 1)))
        # interior points: keep those away from the edges where two faces meet
        interior = _far_from_edges(c, kind)
        assert np.median(ang[interior]) < 3.0
        assert np.mean(ang[interior] < 3.0) > 0.95


def _far_from_edges(c, kind, margin=0.3):
    p = np.abs(c.points)
    if kind == "cylinder":
        return p[:, 2] < 5.0 - margin
    if kind == "room":
        return np.sum(p > 5.0 - margin, axis=1) <= 1
    near_wall = np.abs(p[:, 1] - 2.0) < margin
    near_floor = p[:, 2] < margin
    return ~(near_wall & near_floor) & (p[:, 0] < 5.0 - margin)


def test_perturb_pose():
    T = perturb_pose("z", 0, "z", 0)
    assert np.array_equal(T.rotation, np.eye(3)) and np.array_equal(T.translation, np.zeros(3))
    T = perturb_pose("z", 2.0, "z", 0.5)
    assert np.allclose(T.translation, [0, 0, 0.5])
    te, re = pose_error(T, RigidTransform.identity())
    assert te == 0.5 and abs(re - 2.0) < 1e-12
    with pytest.raises(InvalidSpec):
        perturb_pose("z", np.inf)


def test_benchmark_rows_and_ordering(cylinder_report):
    rows = cylinder_report.by_solver()
    assert [r.solver for r in cylinder_report.records] == list(bench.ALL_SOLVERS)
    best = min(r.rot_error_deg for r in cylinder_report.records)
    # errors at the 1e-14 deg level are round-off; treat those as ties
    assert rows["dcreg-pcg"].rot_error_deg <= best + 1e-9
    assert len({r.config_hash for r in cylinder_report.records}) == 1


def test_benchmark_empty(tmp_path):
    rep = run_benchmark(SceneSpec(), [], SolverConfig(), tmp_path / "empty")
    assert len(rep) == 0 and (tmp_path / "empty.jsonl").read_text() == ""
    assert run_cli("bench", "--solvers", "", "--out", tmp_path / "e2")[0] == 0


def test_benchmark_deterministic_and_parallel(tmp_path):
    a = run_benchmark(SceneSpec(point_count=1500), ["dcreg-pcg", "plain"], SolverConfig(max_icp_iterations=8))
    b = run_benchmark(SceneSpec(point_count=1500), ["dcreg-pcg", "plain"], SolverConfig(max_icp_iterations=8),
                      workers=2)
    assert [r.metrics() for r in a.records] == [r.metrics() for r in b.records]


def test_report_round_trip(tmp_path, cylinder_report):
    assert parse(serialize(cylinder_report)).records == cylinder_report.records
    jsonl, csv_path = bench.write_report(cylinder_report, tmp_path / "rep.jsonl")
    assert read_report(jsonl).records == cylinder_report.records
    lines = csv_path.read_text().splitlines()
    assert lines[0].split(",") == list(bench.CSV_FIELDS) and len(lines) == 6
    bad = serialize(cylinder_report).replace('"schema_version": 1', '"schema_version": 99')
    with pytest.raises(ValueError):
        parse(bad)


def test_config_hash_sensitivity():
    s, c, p = SceneSpec(), SolverConfig(), Perturbation()
    h = bench.config_hash(s, c, p, "estimated")
    assert h == bench.config_hash(SceneSpec(), SolverConfig(), Perturbation(), "estimated")
    assert h != bench.config_hash(s, c.replace(kappa_tg=5.0), p, "estimated")
    assert h != bench.config_hash(s, c, p, "analytic")


def test_cli_gen_then_register(tmp_path):
    f = tmp_path / "cyl.ply"
    code, out, _ = run_cli("gen", "--scene", "cylinder", "--points", 7600, "--out", f)
    assert code == 0 and len(load_cloud(f)) == 7600
    code, out, _ = run_cli("register", f, f, "--aligned", tmp_path / "aligned.xyz")
    res = json.loads(out)
    assert code == 0 and res["converged"] and res["metrics"]["fitness"] == 100.0
    assert len(load_cloud(tmp_path / "aligned.xyz")) == 7600


def test_cli_inspect_plane(tmp_path):
    f = tmp_path / "plane.pcd"
    assert run_cli("gen", "--scene", "plane", "--noise", 0, "--out", f)[0] == 0
    code, out, _ = run_cli("inspect", f, "--json")
    rep = json.loads(out)
    assert code == 0 and rep["mask_trans"].count("1") == 2
    trans = [r for r in rep["rows"] if r["subspace"] == "trans" and r["degenerate"]]
    assert {r["dominant_axis"] for r in trans} <= {"x", "y"}
    code, out, _ = run_cli("inspect", f)
    assert code == 0 and "contributions" in out


def test_cli_bench_twice_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        code, _, _ = run_cli("bench", "--scene", "cylinder", "--solvers", "all", "--seed", 7, "--out", tmp_path / name)
        assert code == 0
        outs.append([r.metrics() for r in read_report(tmp_path / f"{name}.jsonl").records])
    assert outs[0] == outs[1]


def test_cli_exit_codes(tmp_path):
    assert run_cli()[0] == 1
    assert run_cli("bench", "--solvers", "magic")[0] == 1
    assert run_cli("bench", "--kappa-tg", 0.5)[0] == 1
    assert run_cli("gen", "--points", 10, "--out", tmp_path / "x.ply")[0] == 1
    assert run_cli("register", "only-one.ply")[0] == 1
    assert run_cli("--help")[0] == 0
    assert run_cli("inspect", tmp_path / "missing.ply")[0] == 2
    bad = tmp_path / "bad.xyz"
    bad.write_text("1 2\n")
    assert run_cli("register", bad, bad)[0] == 2
