"""Command-line pipeline over a collection workspace.

Subcommands: synth, spectra, fmn, latent, variability, ops, extend.
Exit codes: 0 ok, 1 computation error, 2 usage error.
"""

import argparse
import hashlib
import json
import os
import shutil
import sys

import numpy as np

from . import fmaps, latent as latent_mod, network, opalg, spectral, synth, variability
from .errors import LskitError, ManifestError, ProviderFailure
from .matio import Config, Workspace, read_matrix, read_vector, sha256_file, write_matrix
from .meshes import load_mesh
from .spectral import Shape, SpectralBasis, _eigen_clusters, metric_measure

MESH_EXTENSIONS = (".off", ".obj", ".ply")


def _fail(msg):
    print(f"error: {msg}", file=sys.stderr)
    return 1


def _usage_fail(msg):
    print(f"usage error: {msg}", file=sys.stderr)
    return 2


def _load_config(ws: Workspace, args):
    cfg_path = ws.path("config.json")
    cfg = Config.load(cfg_path) if os.path.isfile(cfg_path) else Config()
    for name in ("k", "m", "kind", "topology", "maps", "landmark_weight", "within_weight"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "normalized", False):
        cfg.normalized = True
    return cfg


def _load_shapes(ws: Workspace, manifest):
    """Rebuild Shape bundles from tracked meshes and spectra containers."""
    shapes = {}
    for sid in sorted(manifest["shapes"]):
        entry = manifest["shapes"][sid]
        mesh = load_mesh(ws.path(entry["mesh"]), entry.get("format") or None, shape_id=sid)
        lam = read_vector(ws.path(entry["files"]["lam"]))
        phi = read_matrix(ws.path(entry["files"]["phi"]))
        basis = SpectralBasis(lam, phi, sid, _eigen_clusters(lam))
        shapes[sid] = Shape(mesh, metric_measure(mesh), basis)
    return shapes


def _load_network(ws: Workspace, manifest, shapes):
    fmn = manifest.get("fmn")
    if not fmn:
        raise ManifestError("no functional map network in this workspace; run `fmn` first")
    edges = {}
    for src, tgt, rel in fmn["edges"]:
        edges[(src, tgt)] = fmaps.FunctionalMap(read_matrix(ws.path(rel)), src, tgt)
    # only the nodes the network was built over (extensions live outside it)
    ordered = [shapes[sid] for sid in fmn["nodes"]]
    return network.FMNetwork(ordered, edges, fmn["topology"])


def _load_clb(ws: Workspace, manifest):
    lat = manifest.get("latent")
    if not lat:
        raise ManifestError("no latent artifacts in this workspace; run `latent` first")
    order = tuple(lat["order"])
    Y = {sid: read_matrix(ws.path(lat["Y"][sid])) for sid in lat["Y"]}
    clb = latent_mod.ConsistentLatentBasis(
        Y, lat["m"], order, lat["canonical"], lat["consistency_residual"]
    )
    spectrum = read_vector(ws.path(lat["lambda0"]))
    return clb, latent_mod.LatentShape(spectrum, clb)


def _load_diffs(ws: Workspace, manifest, kind):
    diffs = manifest.get("diffs", {})
    if kind not in diffs.get("kinds", []):
        raise ManifestError(f"no {kind!r} differences stored; rerun `latent` with --kind")
    out = {}
    for sid, rel in diffs["files"][kind].items():
        out[sid] = latent_mod.LatentDifference(
            read_matrix(ws.path(rel)), kind, sid, diffs["normalized"]
        )
    return out


def _read_partition(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "partition" in doc:
        doc = doc["partition"]
    try:
        return variability.Partition(doc["cluster_a"], doc["cluster_b"])
    except KeyError as exc:
        raise ManifestError(f"partition file lacks key {exc}") from exc


def _ground_truth_pairing(path):
    """Optional ground-truth pairing carried by a family sidecar."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    pairing = doc.get("pairing")
    return [tuple(p) for p in pairing] if pairing else None


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args):
    out = args.out
    if args.family == "sphere-bump":
        fam = synth.sphere_bump_family(
            horizontal_height=args.horizontal_height,
            vertical_heights=(args.vertical_height, 0.0),
            n_per_cluster=args.per_cluster,
            subdivisions=args.subdivisions,
            seed=args.seed,
        )
        truth = synth.sphere_bump_ground_truth(fam)
    elif args.family == "chain":
        fam = synth.chain_family(
            count=args.count, cycle=not args.no_cycle, subdivisions=args.subdivisions, seed=args.seed
        )
        truth = synth.chain_ground_truth(fam)
    else:
        fam = synth.two_cluster_family(
            n_per_cluster=args.per_cluster,
            intra_spread=args.intra_spread,
            inter_gap=args.inter_gap,
            seed=args.seed,
            subdivisions=args.subdivisions,
        )
        truth = synth.two_cluster_ground_truth(fam)
    synth.write_family(fam.meshes, out, truth)
    pairs = synth.family_pairs(truth)
    synth.write_identity_correspondences(fam.meshes, pairs, os.path.join(out, "correspondences"))
    print(
        f"wrote {len(fam.meshes)} meshes, ground_truth.json and "
        f"{2 * len(pairs)} correspondence files to {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# spectra


def cmd_spectra(args):
    ws = Workspace(args.workspace)
    cfg = _load_config(ws, args)
    manifest = ws.load_manifest() if ws.exists() else ws.init_manifest(cfg)
    manifest["config"] = cfg.effective()

    fmt = args.format or cfg.mesh_format or None
    patterns = (f".{fmt}",) if fmt else MESH_EXTENSIONS
    files = sorted(
        f for f in os.listdir(args.mesh_dir) if os.path.splitext(f)[1].lower() in patterns
    )
    if not files:
        return _fail(f"no mesh files in {args.mesh_dir}")
    failures = []
    done = skipped = 0
    for fname in files:
        sid = os.path.splitext(fname)[0]
        src = os.path.join(args.mesh_dir, fname)
        try:
            src_hash = sha256_file(src)
            entry = manifest["shapes"].get(sid)
            if entry and entry["mesh_sha256"] == src_hash and entry["k"] == cfg.k:
                try:
                    ws.verify({"hashes": {r: manifest["hashes"][r] for r in entry["files"].values()}})
                    skipped += 1
                    continue
                except (ManifestError, KeyError):
                    pass  # artifacts missing or stale: recompute
            rel_mesh = os.path.join("meshes", fname)
            os.makedirs(ws.path("meshes"), exist_ok=True)
            if os.path.abspath(src) != os.path.abspath(ws.path(rel_mesh)):
                shutil.copyfile(src, ws.path(rel_mesh))
            mesh = load_mesh(ws.path(rel_mesh), args.format or None, shape_id=sid)
            shape = spectral.compute_shape(mesh, cfg.k)
            files_entry = {
                "phi": ws.write_tracked_matrix(manifest, os.path.join("spectra", f"{sid}.phi.lsk"), shape.basis.eigenvectors),
                "lam": ws.write_tracked_matrix(manifest, os.path.join("spectra", f"{sid}.lam.lsk"), shape.basis.eigenvalues),
                "dna": ws.write_tracked_matrix(manifest, os.path.join("spectra", f"{sid}.dna.lsk"), shape.dna()),
            }
            manifest["shapes"][sid] = {
                "mesh": rel_mesh,
                "mesh_sha256": sha256_file(ws.path(rel_mesh)),
                "format": args.format or "",
                "k": cfg.k,
                "vertices": mesh.num_vertices,
                "triangles": mesh.num_triangles,
                "files": files_entry,
                "clusters": [list(c) for c in shape.basis.clusters],
            }
            manifest["hashes"][rel_mesh] = manifest["shapes"][sid]["mesh_sha256"]
            done += 1
        except LskitError as exc:
            failures.append((fname, exc))
            print(f"error: {fname}: {exc}", file=sys.stderr)
    ws.save_manifest(manifest)
    if skipped and not done:
        print(f"up to date ({skipped} shapes)")
    else:
        print(f"computed spectra for {done} shapes (k={cfg.k}), {skipped} up to date")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# fmn


def _corr_provider(args, cfg):
    directory = args.corr_dir
    if not directory:
        raise ManifestError("--maps correspondence requires --corr-dir")

    def provider(src: Shape, tgt: Shape):
        path = fmaps.correspondence_path(directory, src.shape_id, tgt.shape_id)
        if not os.path.isfile(path):
            raise ProviderFailure(
                (src.shape_id, tgt.shape_id), f"missing correspondence file {path}"
            )
        corr = fmaps.load_correspondence(path)
        return fmaps.fmap_from_correspondence(src, tgt, corr)

    return provider


def _landmark_provider(args, cfg):
    directory = args.corr_dir
    if not directory:
        raise ManifestError("--maps landmarks requires --corr-dir")

    def provider(src: Shape, tgt: Shape):
        path = fmaps.correspondence_path(directory, src.shape_id, tgt.shape_id)
        if not os.path.isfile(path):
            raise ProviderFailure(
                (src.shape_id, tgt.shape_id), f"missing landmark file {path}"
            )
        marks = fmaps.load_correspondence(path, kind="sparse_landmarks")
        return fmaps.fmap_from_landmarks(src, tgt, marks, cfg.landmark_weight)

    return provider


def cmd_fmn(args):
    ws = Workspace(args.workspace)
    cfg = _load_config(ws, args)
    manifest = ws.load_manifest()
    shapes = _load_shapes(ws, manifest)
    ids = sorted(shapes)
    dnas = [shapes[sid].dna() for sid in ids]

    topology = cfg.topology
    cross_pairs = []
    if topology.startswith("knn"):
        k_nn = int(topology.split(":", 1)[1]) if ":" in topology else 10
        edges = network.build_topology(dnas, "knn", k_nn=k_nn)
    elif topology == "two-cluster":
        if not args.partition:
            return _usage_fail("--topology two-cluster requires --partition")
        part = _read_partition(args.partition)
        if set(part.cluster_a) | set(part.cluster_b) != set(ids):
            return _fail("partition must cover exactly the workspace shapes")
        labels = [0 if sid in part.cluster_a else 1 for sid in ids]
        edges, cross_pairs = network.two_cluster_topology(dnas, labels)
    else:
        edges = network.build_topology(dnas, topology)

    if cfg.maps == "identity":
        provider = network.identity_map_provider
    elif cfg.maps == "correspondence":
        provider = _corr_provider(args, cfg)
    elif cfg.maps == "landmarks":
        provider = _landmark_provider(args, cfg)
    else:
        return _fail(f"unknown maps mode {cfg.maps!r}")

    ordered = [shapes[sid] for sid in ids]
    net = network.attach_maps(ordered, edges, provider, topology)

    os.makedirs(ws.path("maps"), exist_ok=True)
    edge_entries = []
    for (src, tgt), fm in sorted(net.edges.items()):
        rel = os.path.join("maps", f"{src}__{tgt}.lsk")
        ws.write_tracked_matrix(manifest, rel, fm.matrix)
        edge_entries.append([src, tgt, rel])
    manifest["fmn"] = {
        "topology": topology,
        "maps": cfg.maps,
        "nodes": ids,
        "edges": edge_entries,
        "cross_edges": [[ids[i], ids[j]] for i, j in cross_pairs],
    }
    manifest["config"] = cfg.effective()
    ws.save_manifest(manifest)

    report = network.consistency_report(net)
    print(
        f"fmn: {len(ids)} shapes, {len(net.edges)} directed edges ({topology}); "
        f"cycle residuals min={report.min:.3e} mean={report.mean:.3e} max={report.max:.3e}"
    )
    return 0


# ---------------------------------------------------------------------------
# latent


def cmd_latent(args):
    ws = Workspace(args.workspace)
    cfg = _load_config(ws, args)
    manifest = ws.load_manifest()
    shapes = _load_shapes(ws, manifest)
    net = _load_network(ws, manifest, shapes)
    k_min = min(s.basis.k for s in net.shapes)
    if cfg.m > k_min:
        return _usage_fail(f"--m {cfg.m} exceeds the smallest basis truncation {k_min}")

    clb = latent_mod.consistent_latent_basis(net, cfg.m)
    spectra = net.spectra()
    canonical, latent_shape = latent_mod.canonicalize(clb, spectra)
    ortho, offdiag = latent_mod.canonical_residuals(canonical, spectra)

    os.makedirs(ws.path("latent"), exist_ok=True)
    y_files = {}
    for sid in canonical.order:
        rel = os.path.join("latent", f"Y.{sid}.lsk")
        ws.write_tracked_matrix(manifest, rel, canonical.Y[sid])
        y_files[sid] = rel
    lam0_rel = os.path.join("latent", "lambda0.lsk")
    ws.write_tracked_matrix(manifest, lam0_rel, latent_shape.spectrum)
    collection = hashlib.sha256(
        "\n".join(f"{sid}:{manifest['shapes'][sid]['mesh_sha256']}" for sid in canonical.order).encode()
    ).hexdigest()
    manifest["latent"] = {
        "m": cfg.m,
        "canonical": True,
        "order": list(canonical.order),
        "collection_hash": collection,
        "consistency_residual": canonical.consistency_residual,
        "Y": y_files,
        "lambda0": lam0_rel,
        "extended": {},
    }

    kinds = ["area", "conformal"] if cfg.kind == "both" else [cfg.kind]
    os.makedirs(ws.path("diffs"), exist_ok=True)
    diff_files = {}
    for kind in kinds:
        diffs = latent_mod.latent_differences(canonical, spectra, latent_shape, kind, cfg.normalized)
        diff_files[kind] = {}
        for sid, D in diffs.items():
            rel = os.path.join("diffs", f"{sid}.{kind}.lsk")
            ws.write_tracked_matrix(manifest, rel, D.matrix)
            diff_files[kind][sid] = rel
    manifest["diffs"] = {"kinds": kinds, "normalized": cfg.normalized, "files": diff_files}
    manifest["config"] = cfg.effective()
    ws.save_manifest(manifest)

    head = ", ".join(f"{v:.6g}" for v in latent_shape.spectrum[: min(6, cfg.m)])
    print(f"latent: m={cfg.m}, consistency residual {canonical.consistency_residual:.6e}")
    print(f"latent spectrum head: [{head}]")
    print(f"canonical residuals: orthonormality {ortho:.3e}, off-diagonal mass {offdiag:.3e}")
    return 0


# ---------------------------------------------------------------------------
# variability


def cmd_variability(args):
    ws = Workspace(args.workspace)
    cfg = _load_config(ws, args)
    manifest = ws.load_manifest()
    diffs = _load_diffs(ws, manifest, args.diff_kind)

    if args.mode == "cross":
        if not args.partition:
            return _usage_fail("--mode cross requires --partition")
        part = _read_partition(args.partition)
        funcs = variability.cross_collection_variability(
            diffs, part, count=args.count, within_weight=cfg.within_weight
        )
    else:
        funcs = variability.global_variability(diffs, count=args.count)

    os.makedirs(ws.path("variability"), exist_ok=True)
    doc = {
        "mode": args.mode,
        "kind": args.diff_kind,
        "count": len(funcs),
        "functions": [
            {
                "alpha": f.alpha.tolist(),
                "eigenvalue": f.eigenvalue,
                "degenerate": f.degenerate,
            }
            for f in funcs
        ],
    }
    out_json = ws.path("variability", f"{args.mode}.json")
    with open(out_json, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)

    ids, _, coords = variability.separation_embedding(diffs, funcs[0])
    csv_path = ws.path("variability", f"{args.mode}_embedding.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("shape_id,pc1,pc2\n")
        for sid, (x, y) in zip(ids, coords):
            fh.write(f"{sid},{float(x)!r},{float(y)!r}\n")

    if args.emit_fields:
        clb, _ = _load_clb(ws, manifest)
        shapes = _load_shapes(ws, manifest)
        os.makedirs(ws.path("fields"), exist_ok=True)
        bundle = {"mode": args.mode, "shapes": {}}
        for sid in clb.order:
            raw, norm = variability.transfer_to_shape(funcs[0], shapes[sid], clb.Y[sid])
            txt = ws.path("fields", f"{args.mode}.{sid}.txt")
            with open(txt, "w", encoding="utf-8") as fh:
                for idx, val in enumerate(raw):
                    fh.write(f"{idx} {float(val)!r}\n")
            bundle["shapes"][sid] = {
                "field": os.path.relpath(txt, ws.root),
                "max_abs": float(np.max(np.abs(raw))),
                "normalized": norm.tolist(),
            }
        with open(ws.path("fields", f"{args.mode}.json"), "w", encoding="utf-8") as fh:
            json.dump(bundle, fh, indent=2, sort_keys=True)

    top = funcs[0]
    print(
        f"variability ({args.mode}): top eigenvalue {top.eigenvalue:.6e}"
        + (" [degenerate]" if top.degenerate else "")
    )
    print(f"wrote {out_json} and {csv_path}")
    return 0


# ---------------------------------------------------------------------------
# ops


def _write_expression(ws, name, expr):
    os.makedirs(ws.path("ops"), exist_ok=True)
    mat_rel = os.path.join("ops", f"{name}.lsk")
    write_matrix(ws.path(mat_rel), expr.result)
    doc = {"op": expr.recipe["op"]}
    for key, val in expr.recipe.items():
        if key == "operands":
            doc["operands"] = {k: np.asarray(v).tolist() for k, v in val.items()}
        elif key != "op":
            doc[key] = val
    json_rel = os.path.join("ops", f"{name}.json")
    with open(ws.path(json_rel), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return mat_rel


def cmd_ops(args):
    ws = Workspace(args.workspace)
    manifest = ws.load_manifest()
    kind = args.diff_kind

    if args.action == "descriptors":
        diffs = _load_diffs(ws, manifest, kind)
        doc = {sid: opalg.lssd_spectrum_descriptor(D).tolist() for sid, D in sorted(diffs.items())}
        os.makedirs(ws.path("ops"), exist_ok=True)
        path = ws.path("ops", f"descriptors.{kind}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        print(f"wrote {path}")
        return 0

    if args.action == "align":
        if not args.partition:
            return _usage_fail("ops align requires --partition")
        part = _read_partition(args.partition)
        shapes = _load_shapes(ws, manifest)
        net = _load_network(ws, manifest, shapes)
        descs = {}
        for name, cluster in (("a", part.cluster_a), ("b", part.cluster_b)):
            members = [shapes[sid] for sid in sorted(cluster)]
            edges = {
                (i, j): fm
                for (i, j), fm in net.edges.items()
                if i in cluster and j in cluster
            }
            sub = network.FMNetwork(members, edges, "intra")
            m = min(manifest["latent"]["m"] if manifest.get("latent") else 10, min(s.basis.k for s in members))
            clb = latent_mod.consistent_latent_basis(sub, m)
            canonical, lat = latent_mod.canonicalize(clb, sub.spectra())
            diffs = latent_mod.latent_differences(canonical, sub.spectra(), lat, "area", normalized=True)
            descs[name] = {sid: opalg.lssd_spectrum_descriptor(D) for sid, D in diffs.items()}
        pairing = opalg.align_by_descriptor(descs["a"], descs["b"])
        for ida, idb in sorted(pairing.items()):
            print(f"{ida} -> {idb}")
        truth = _ground_truth_pairing(args.partition)
        if truth:
            hits = sum(pairing.get(a) == b for a, b in truth)
            print(f"pairing accuracy vs ground truth: {hits}/{len(truth)} ({hits / len(truth):.0%})")
        return 0

    diffs = _load_diffs(ws, manifest, kind)

    def get(sid):
        if sid not in diffs:
            return None
        return diffs[sid]

    if args.action == "analogy":
        A, B, C = get(args.a), get(args.b), get(args.c)
        if None in (A, B, C):
            return _fail("analogy operands must be shape ids with stored differences")
        expr = opalg.analogy(A, B, C)
        rel = _write_expression(ws, f"analogy_{args.a}_{args.b}_{args.c}.{kind}", expr)
        print(f"wrote {rel} (condition {expr.recipe['condition']:.3e})")
        return 0
    if args.action == "interp":
        A, B = get(args.a), get(args.b)
        if None in (A, B):
            return _fail("interp operands must be shape ids with stored differences")
        expr = opalg.interpolate(A, B, args.t)
        rel = _write_expression(ws, f"interp_{args.a}_{args.b}_t{args.t:g}.{kind}", expr)
        print(f"wrote {rel}")
        return 0
    if args.action == "mix":
        A, B = get(args.a), get(args.b)
        if None in (A, B):
            return _fail("mix operands must be shape ids with stored differences")
        with open(args.region, "r", encoding="utf-8") as fh:
            region_doc = json.load(fh)
        shapes = _load_shapes(ws, manifest)
        clb, latent_shape = _load_clb(ws, manifest)
        host = shapes[region_doc["shape"]]
        F = opalg.localized_basis(latent_shape, clb, host, region_doc["vertices"])
        expr = opalg.partial_mix(A, B, F)
        rel = _write_expression(ws, f"mix_{args.a}_{args.b}.{kind}", expr)
        print(f"wrote {rel} (localized basis rank {F.p})")
        return 0
    return _fail(f"unknown ops action {args.action!r}")


# ---------------------------------------------------------------------------
# extend


def cmd_extend(args):
    ws = Workspace(args.workspace)
    manifest = ws.load_manifest()
    shapes = _load_shapes(ws, manifest)
    net = _load_network(ws, manifest, shapes)
    _, latent_shape = _load_clb(ws, manifest)
    k = manifest["config"]["k"]

    mesh = load_mesh(args.mesh)
    if mesh.shape_id in shapes:
        return _fail(f"shape id {mesh.shape_id!r} already in the collection")
    new_shape = spectral.compute_shape(mesh, k)
    corr = fmaps.load_correspondence(args.corr)

    if args.neighbor != "auto" and args.neighbor not in shapes:
        return _fail(f"unknown --neighbor {args.neighbor!r}")

    def provider(src: Shape, tgt: Shape):
        return fmaps.fmap_from_correspondence(src, tgt, corr)

    forced = None if args.neighbor == "auto" else args.neighbor
    normalized = bool(manifest.get("diffs", {}).get("normalized", False))
    neighbor, Y_new, diffs = latent_mod.extend_to_shape(
        latent_shape, net, new_shape, provider, normalized=normalized, neighbor_id=forced
    )
    if forced is None:
        print(f"neighbor chosen by shape-DNA: {neighbor}")

    sid = mesh.shape_id
    rel_mesh = os.path.join("meshes", os.path.basename(args.mesh))
    os.makedirs(ws.path("meshes"), exist_ok=True)
    if os.path.abspath(args.mesh) != os.path.abspath(ws.path(rel_mesh)):
        shutil.copyfile(args.mesh, ws.path(rel_mesh))
    manifest["shapes"][sid] = {
        "mesh": rel_mesh,
        "mesh_sha256": sha256_file(ws.path(rel_mesh)),
        "format": "",
        "k": k,
        "vertices": mesh.num_vertices,
        "triangles": mesh.num_triangles,
        "files": {
            "phi": ws.write_tracked_matrix(manifest, os.path.join("spectra", f"{sid}.phi.lsk"), new_shape.basis.eigenvectors),
            "lam": ws.write_tracked_matrix(manifest, os.path.join("spectra", f"{sid}.lam.lsk"), new_shape.basis.eigenvalues),
            "dna": ws.write_tracked_matrix(manifest, os.path.join("spectra", f"{sid}.dna.lsk"), new_shape.dna()),
        },
        "clusters": [list(c) for c in new_shape.basis.clusters],
    }
    manifest["hashes"][rel_mesh] = manifest["shapes"][sid]["mesh_sha256"]

    y_rel = ws.write_tracked_matrix(manifest, os.path.join("latent", f"Y.{sid}.lsk"), Y_new)
    diff_rels = {}
    for kind, D in diffs.items():
        rel = os.path.join("diffs", f"{sid}.{kind}.lsk")
        ws.write_tracked_matrix(manifest, rel, D.matrix)
        diff_rels[kind] = rel
        if kind in manifest.get("diffs", {}).get("kinds", []):
            manifest["diffs"]["files"][kind][sid] = rel
    manifest["latent"]["extended"][sid] = {
        "neighbor": neighbor,
        "Y": y_rel,
        "diffs": diff_rels,
        "extended": True,
    }
    ws.save_manifest(manifest)
    print(f"extended collection with {sid!r} via neighbor {neighbor!r}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="lskit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic test family")
    sp.add_argument("family", choices=["sphere-bump", "chain", "two-cluster"])
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--subdivisions", type=int, default=None)
    sp.add_argument("--per-cluster", type=int, default=None)
    sp.add_argument("--count", type=int, default=23)
    sp.add_argument("--no-cycle", action="store_true")
    sp.add_argument("--horizontal-height", type=float, default=0.5)
    sp.add_argument("--vertical-height", type=float, default=0.25)
    sp.add_argument("--intra-spread", type=float, default=0.15)
    sp.add_argument("--inter-gap", type=float, default=0.4)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("spectra", help="per-shape stiffness/mass/eigenbasis/DNA")
    sp.add_argument("mesh_dir")
    sp.add_argument("--workspace", required=True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--format", choices=["off", "obj", "ply"], default=None)
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("fmn", help="build topology and functional maps")
    sp.add_argument("--workspace", required=True)
    sp.add_argument("--topology", default=None, help="mst | knn:K | clique | chain | two-cluster")
    sp.add_argument("--maps", choices=["correspondence", "landmarks", "identity"], default=None)
    sp.add_argument("--corr-dir", default=None)
    sp.add_argument("--partition", default=None)
    sp.add_argument("--landmark-weight", type=float, default=None, dest="landmark_weight")
    sp.set_defaults(func=cmd_fmn)

    sp = sub.add_parser("latent", help="consistent latent basis and differences")
    sp.add_argument("--workspace", required=True)
    sp.add_argument("--m", type=int, default=None)
    sp.add_argument("--kind", choices=["area", "conformal", "both"], default=None)
    sp.add_argument("--normalized", action="store_true")
    sp.set_defaults(func=cmd_latent)

    sp = sub.add_parser("variability", help="distinctive functions and embeddings")
    sp.add_argument("--workspace", required=True)
    sp.add_argument("--mode", choices=["global", "cross"], required=True)
    sp.add_argument("--partition", default=None)
    sp.add_argument("--count", type=int, default=3)
    sp.add_argument("--emit-fields", action="store_true")
    sp.add_argument("--diff-kind", choices=["area", "conformal"], default="area")
    sp.set_defaults(func=cmd_variability)

    sp = sub.add_parser("ops", help="operator algebra on stored differences")
    ops_sub = sp.add_subparsers(dest="action", required=True)
    for name, extra in (
        ("analogy", ("a", "b", "c")),
        ("interp", ("a", "b")),
        ("mix", ("a", "b")),
    ):
        op = ops_sub.add_parser(name)
        for arg in extra:
            op.add_argument(arg)
        op.add_argument("--workspace", required=True)
        op.add_argument("--diff-kind", choices=["area", "conformal"], default="area")
        if name == "interp":
            op.add_argument("--t", type=float, required=True)
        if name == "mix":
            op.add_argument("--region", required=True)
        op.set_defaults(func=cmd_ops)
    for name in ("descriptors", "align"):
        op = ops_sub.add_parser(name)
        op.add_argument("--workspace", required=True)
        op.add_argument("--diff-kind", choices=["area", "conformal"], default="area")
        if name == "align":
            op.add_argument("--partition", default=None)
        op.set_defaults(func=cmd_ops)

    sp = sub.add_parser("extend", help="attach a new shape to an existing latent")
    sp.add_argument("--workspace", required=True)
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--neighbor", default="auto")
    sp.add_argument("--corr", required=True)
    sp.set_defaults(func=cmd_extend)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    defaults = {"subdivisions": {"sphere-bump": 3, "chain": 2, "two-cluster": 2},
                "per_cluster": {"sphere-bump": 2, "two-cluster": 3}}
    if args.command == "synth":
        if args.subdivisions is None:
            args.subdivisions = defaults["subdivisions"][args.family]
        if getattr(args, "per_cluster", None) is None and args.family in defaults["per_cluster"]:
            args.per_cluster = defaults["per_cluster"][args.family]
    try:
        return args.func(args)
    except (LskitError, ValueError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
