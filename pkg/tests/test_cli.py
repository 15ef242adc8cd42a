import json

import numpy as np
import pytest

from lskit.cli import main
from lskit.matio import read_matrix
from lskit.synth import sphere_bump_family, sphere_bump_ground_truth, two_cluster_family, two_cluster_ground_truth, write_family


@pytest.fixture(scope="module")
def family_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("family")
    fam = sphere_bump_family(subdivisions=1)
    write_family(fam.meshes, root, sphere_bump_ground_truth(fam))
    return root


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, family_dir):
    ws = tmp_path_factory.mktemp("ws")
    assert main(["spectra", str(family_dir), "--workspace", str(ws), "--k", "16"]) == 0
    assert main(["fmn", "--workspace", str(ws), "--topology", "clique", "--maps", "identity"]) == 0
    assert (
        main(["latent", "--workspace", str(ws), "--m", "10", "--kind", "both", "--normalized"])
        == 0
    )
    return ws


def manifest_of(ws):
    return json.loads((ws / "manifest.json").read_text())


def test_synth_command(tmp_path):
    out = tmp_path / "chain"
    assert main(["synth", "chain", "--out", str(out), "--count", "5", "--subdivisions", "1"]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert "ground_truth.json" in names and "correspondences" in names
    assert sum(n.endswith(".off") for n in names) == 5
    assert len(list((out / "correspondences").iterdir())) == 8  # 4 consecutive pairs x 2


def test_spectra_manifest_and_idempotence(family_dir, workspace, capsys):
    manifest = manifest_of(workspace)
    assert sorted(manifest["shapes"]) == ["a0", "a1", "b0", "b1"]
    for sid, entry in manifest["shapes"].items():
        assert entry["k"] == 16
        for rel in entry["files"].values():
            assert (workspace / rel).is_file()
    capsys.readouterr()
    assert main(["spectra", str(family_dir), "--workspace", str(workspace), "--k", "16"]) == 0
    out = capsys.readouterr().out
    assert "up to date" in out


def test_spectra_corrupt_mesh_fails_loudly(tmp_path, capsys):
    fam_dir = tmp_path / "meshes"
    fam = sphere_bump_family(subdivisions=1)
    write_family(fam.meshes, fam_dir)
    (fam_dir / "broken.off").write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n")
    ws = tmp_path / "ws"
    assert main(["spectra", str(fam_dir), "--workspace", str(ws), "--k", "8"]) == 1
    err = capsys.readouterr().err
    assert "broken.off" in err


def test_fmn_artifacts(workspace):
    manifest = manifest_of(workspace)
    assert manifest["fmn"]["topology"] == "clique"
    assert len(manifest["fmn"]["edges"]) == 12  # 4 shapes, clique, both directions
    for _, _, rel in manifest["fmn"]["edges"]:
        assert (workspace / rel).is_file()


def test_fmn_knn_saturation(tmp_path, family_dir, caplog):
    ws = tmp_path / "ws"
    assert main(["spectra", str(family_dir), "--workspace", str(ws), "--k", "12"]) == 0
    assert main(["fmn", "--workspace", str(ws), "--topology", "knn:10", "--maps", "identity"]) == 0
    manifest = json.loads((ws / "manifest.json").read_text())
    assert len(manifest["fmn"]["edges"]) == 12  # saturated to the clique


def test_fmn_missing_correspondence(tmp_path, family_dir, capsys):
    ws = tmp_path / "ws"
    assert main(["spectra", str(family_dir), "--workspace", str(ws), "--k", "8"]) == 0
    empty = tmp_path / "corr"
    empty.mkdir()
    code = main([
        "fmn", "--workspace", str(ws), "--topology", "chain",
        "--maps", "correspondence", "--corr-dir", str(empty),
    ])
    assert code == 1
    assert "missing correspondence" in capsys.readouterr().err


def test_latent_artifacts_and_outputs(workspace, capsys):
    manifest = manifest_of(workspace)
    lat = manifest["latent"]
    assert lat["m"] == 10 and lat["canonical"]
    assert sorted(lat["Y"]) == ["a0", "a1", "b0", "b1"]
    assert set(manifest["diffs"]["kinds"]) == {"area", "conformal"}
    for kind in ("area", "conformal"):
        assert len(manifest["diffs"]["files"][kind]) == 4
    lam0 = read_matrix(workspace / lat["lambda0"])
    assert lam0.shape == (10, 1)
    assert lam0[0, 0] <= 1e-8 * max(1.0, lam0.max())


def test_latent_m_too_large_is_usage_error(workspace):
    assert main(["latent", "--workspace", str(workspace), "--m", "99"]) == 2


def test_variability_global_and_cross(workspace, family_dir):
    part = family_dir / "ground_truth.json"
    assert main(["variability", "--workspace", str(workspace), "--mode", "global", "--count", "3"]) == 0
    doc = json.loads((workspace / "variability" / "global.json").read_text())
    assert doc["count"] == 3
    eigs = [f["eigenvalue"] for f in doc["functions"]]
    assert eigs == sorted(eigs, reverse=True)
    assert (workspace / "variability" / "global_embedding.csv").is_file()
    assert (
        main([
            "variability", "--workspace", str(workspace), "--mode", "cross",
            "--partition", str(part), "--emit-fields",
        ])
        == 0
    )
    bundle = json.loads((workspace / "fields" / "cross.json").read_text())
    assert sorted(bundle["shapes"]) == ["a0", "a1", "b0", "b1"]
    field_file = workspace / "fields" / "cross.a0.txt"
    lines = field_file.read_text().splitlines()
    assert len(lines) == 42  # one value per vertex
    idx, val = lines[5].split()
    assert idx == "5"
    float(val)


def test_variability_cross_requires_partition(workspace):
    assert main(["variability", "--workspace", str(workspace), "--mode", "cross"]) == 2


def test_ops_interp_identity(workspace):
    assert main([
        "ops", "interp", "a0", "a0", "--t", "0.3", "--workspace", str(workspace),
    ]) == 0
    out = read_matrix(workspace / "ops" / "interp_a0_a0_t0.3.area.lsk")
    manifest = manifest_of(workspace)
    a0 = read_matrix(workspace / manifest["diffs"]["files"]["area"]["a0"])
    np.testing.assert_allclose(out, a0, atol=1e-12)  # (1-t)A + tA rounds at ulp scale
    recipe = json.loads((workspace / "ops" / "interp_a0_a0_t0.3.area.json").read_text())
    assert recipe["op"] == "interpolate" and recipe["t"] == 0.3


def test_ops_analogy_and_descriptors(workspace):
    assert main(["ops", "analogy", "a0", "a1", "b0", "--workspace", str(workspace)]) == 0
    assert (workspace / "ops" / "analogy_a0_a1_b0.area.lsk").is_file()
    assert main(["ops", "descriptors", "--workspace", str(workspace)]) == 0
    doc = json.loads((workspace / "ops" / "descriptors.area.json").read_text())
    assert sorted(doc) == ["a0", "a1", "b0", "b1"]
    assert all(len(v) == 10 for v in doc.values())


def test_ops_mix_with_region(workspace, family_dir):
    truth = json.loads((family_dir / "ground_truth.json").read_text())
    region_doc = {"shape": "a0", "vertices": truth["vertical_region"]}
    region_path = workspace / "region.json"
    region_path.write_text(json.dumps(region_doc))
    assert main([
        "ops", "mix", "a0", "b0", "--region", str(region_path), "--workspace", str(workspace),
    ]) == 0
    assert (workspace / "ops" / "mix_a0_b0.area.lsk").is_file()


def test_ops_align_two_cluster(tmp_path, capsys):
    fam = two_cluster_family(n_per_cluster=2, subdivisions=2)
    fam_dir = tmp_path / "meshes"
    write_family(fam.meshes, fam_dir, two_cluster_ground_truth(fam))
    ws = tmp_path / "ws"
    assert main(["spectra", str(fam_dir), "--workspace", str(ws), "--k", "40"]) == 0
    part = fam_dir / "ground_truth.json"
    assert main([
        "fmn", "--workspace", str(ws), "--topology", "two-cluster",
        "--maps", "identity", "--partition", str(part),
    ]) == 0
    assert main(["latent", "--workspace", str(ws), "--m", "15"]) == 0
    capsys.readouterr()
    assert main(["ops", "align", "--workspace", str(ws), "--partition", str(part)]) == 0
    out = capsys.readouterr().out
    assert "a0 -> b0" in out and "a1 -> b1" in out


def test_extend_duplicate_twin(tmp_path, workspace, capsys):
    from lskit.meshes import load_mesh, save_off

    manifest = manifest_of(workspace)
    mesh = load_mesh(workspace / manifest["shapes"]["a0"]["mesh"], shape_id="dup")
    dup_path = tmp_path / "dup.off"
    save_off(mesh, dup_path)
    n = mesh.num_vertices
    corr_path = tmp_path / "corr.txt"
    corr_path.write_text("".join(f"{i} {i}\n" for i in range(n)))
    assert main([
        "extend", "--workspace", str(workspace), "--mesh", str(dup_path),
        "--neighbor", "auto", "--corr", str(corr_path),
    ]) == 0
    out = capsys.readouterr().out
    assert "a0" in out  # neighbor choice logged
    manifest = manifest_of(workspace)
    ext = manifest["latent"]["extended"]["dup"]
    assert ext["neighbor"] == "a0" and ext["extended"]
    dup_area = read_matrix(workspace / ext["diffs"]["area"])
    a0_area = read_matrix(workspace / manifest["diffs"]["files"]["area"]["a0"])
    assert np.abs(dup_area - a0_area).max() <= 1e-8


def test_extend_unknown_neighbor(tmp_path, workspace):
    from lskit.meshes import load_mesh, save_off

    manifest = manifest_of(workspace)
    mesh = load_mesh(workspace / manifest["shapes"]["a1"]["mesh"], shape_id="dup2")
    dup_path = tmp_path / "dup2.off"
    save_off(mesh, dup_path)
    corr_path = tmp_path / "corr.txt"
    corr_path.write_text("".join(f"{i} {i}\n" for i in range(mesh.num_vertices)))
    assert main([
        "extend", "--workspace", str(workspace), "--mesh", str(dup_path),
        "--neighbor", "nope", "--corr", str(corr_path),
    ]) == 1


def test_manifest_tamper_aborts(tmp_path, family_dir, capsys):
    ws = tmp_path / "ws"
    assert main(["spectra", str(family_dir), "--workspace", str(ws), "--k", "8"]) == 0
    manifest = json.loads((ws / "manifest.json").read_text())
    victim = next(iter(manifest["hashes"]))
    with open(ws / victim, "r+b") as fh:
        fh.seek(16)
        fh.write(b"\x01")
    assert main(["fmn", "--workspace", str(ws), "--topology", "clique", "--maps", "identity"]) == 1
    assert "hash mismatch" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["fmn"])  # missing required --workspace
    assert exc.value.code == 2


def test_fmn_correspondence_mode_matches_identity(tmp_path):
    out = tmp_path / "chain"
    assert main(["synth", "chain", "--out", str(out), "--count", "4", "--subdivisions", "1"]) == 0
    corr_dir = out / "correspondences"
    assert len(list(corr_dir.iterdir())) == 6  # 3 consecutive pairs, both directions
    ws_a, ws_b = tmp_path / "wsa", tmp_path / "wsb"
    for ws in (ws_a, ws_b):
        assert main(["spectra", str(out), "--workspace", str(ws), "--k", "10"]) == 0
    assert main([
        "fmn", "--workspace", str(ws_a), "--topology", "chain",
        "--maps", "correspondence", "--corr-dir", str(corr_dir),
    ]) == 0
    assert main(["fmn", "--workspace", str(ws_b), "--topology", "chain", "--maps", "identity"]) == 0
    man_a = json.loads((ws_a / "manifest.json").read_text())
    man_b = json.loads((ws_b / "manifest.json").read_text())
    assert len(man_a["fmn"]["edges"]) == 6
    for (sa, ta, rel_a), (sb, tb, rel_b) in zip(man_a["fmn"]["edges"], man_b["fmn"]["edges"]):
        assert (sa, ta) == (sb, tb)
        np.testing.assert_array_equal(read_matrix(ws_a / rel_a), read_matrix(ws_b / rel_b))


def test_config_file_supplies_defaults(tmp_path, family_dir):
    ws = tmp_path / "ws"
    ws.mkdir()
    (ws / "config.json").write_text(json.dumps({"k": 9, "m": 5}))
    assert main(["spectra", str(family_dir), "--workspace", str(ws)]) == 0
    manifest = json.loads((ws / "manifest.json").read_text())
    assert all(entry["k"] == 9 for entry in manifest["shapes"].values())
    assert manifest["config"]["k"] == 9 and "tolerances" in manifest["config"]


def test_ops_analogy_ill_conditioned_exits_1(tmp_path, family_dir, capsys):
    from lskit.matio import Workspace, write_matrix

    ws = tmp_path / "ws"
    assert main(["spectra", str(family_dir), "--workspace", str(ws), "--k", "12"]) == 0
    assert main(["fmn", "--workspace", str(ws), "--topology", "mst", "--maps", "identity"]) == 0
    assert main(["latent", "--workspace", str(ws), "--m", "8"]) == 0
    # overwrite one stored operator with a near-singular matrix, keep hashes valid
    wsp = Workspace(ws)
    manifest = wsp.load_manifest()
    rel = manifest["diffs"]["files"]["area"]["a0"]
    write_matrix(wsp.path(rel), np.diag([1.0] + [1e-14] * 7))
    wsp.track(manifest, rel)
    wsp.save_manifest(manifest)
    assert main(["ops", "analogy", "a0", "a1", "b0", "--workspace", str(ws)]) == 1
    assert "condition" in capsys.readouterr().err


def test_ops_recipe_json_replays_bit_identical(workspace):
    from lskit.opalg import replay

    assert main(["ops", "analogy", "a1", "b0", "b1", "--workspace", str(workspace)]) == 0
    stored = read_matrix(workspace / "ops" / "analogy_a1_b0_b1.area.lsk")
    doc = json.loads((workspace / "ops" / "analogy_a1_b0_b1.area.json").read_text())
    recipe = {
        "op": doc["op"],
        "operands": {k: np.array(v) for k, v in doc["operands"].items()},
    }
    again = replay(recipe)
    np.testing.assert_array_equal(again.result, stored)


def test_latent_identical_shapes_residuals(tmp_path, capsys):
    fam_dir = tmp_path / "meshes"
    assert main([
        "synth", "sphere-bump", "--out", str(fam_dir), "--subdivisions", "1",
        "--horizontal-height", "0", "--vertical-height", "0",
    ]) == 0
    ws = tmp_path / "ws"
    assert main(["spectra", str(fam_dir), "--workspace", str(ws), "--k", "12"]) == 0
    assert main(["fmn", "--workspace", str(ws), "--topology", "clique", "--maps", "identity"]) == 0
    capsys.readouterr()
    assert main(["latent", "--workspace", str(ws), "--m", "12"]) == 0
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if l.startswith("canonical residuals"))
    nums = [float(tok.rstrip(",")) for tok in line.split() if any(c.isdigit() for c in tok)]
    assert all(v <= 1e-8 for v in nums)


def test_ops_align_prints_accuracy(tmp_path, capsys):
    fam = two_cluster_family(n_per_cluster=2, subdivisions=2)
    fam_dir = tmp_path / "meshes"
    write_family(fam.meshes, fam_dir, two_cluster_ground_truth(fam))
    ws = tmp_path / "ws"
    assert main(["spectra", str(fam_dir), "--workspace", str(ws), "--k", "40"]) == 0
    part = fam_dir / "ground_truth.json"
    assert main([
        "fmn", "--workspace", str(ws), "--topology", "two-cluster",
        "--maps", "identity", "--partition", str(part),
    ]) == 0
    assert main(["latent", "--workspace", str(ws), "--m", "15"]) == 0
    capsys.readouterr()
    assert main(["ops", "align", "--workspace", str(ws), "--partition", str(part)]) == 0
    out = capsys.readouterr().out
    assert "pairing accuracy vs ground truth: 2/2 (100%)" in out
