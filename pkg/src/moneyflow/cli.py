"""Command line pipeline over a shared workspace directory.

Each subcommand reads earlier artifacts from ``--out`` and writes its own
next to them, plus a ``manifest_<name>.json`` recording the configuration
and sha256 of every input and output.  Manifests carry no timestamps, so
rerunning a subcommand on identical inputs reproduces them byte for byte.

Exit codes: 0 success, 1 usage error, 2 missing or invalid data,
3 failed convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bowtie import (
    COMPONENT_NAMES,
    BowtiePartition,
    classify_bowtie,
    distance_profile,
)
from .community import community_report, detect_communities, flat_table
from .geonmf import (
    DEFAULT_BOUNDS,
    GAMMA_THRESHOLD,
    SIMILARITY_THRESHOLD,
    GeoGrid,
    bin_transfers,
    d_sweep,
    localization,
    nmf,
    similarity_matrix,
    write_matrix,
    write_sparse_matrix,
)
from .hodge import ConvergenceError, hodge_decompose, potential_histograms, potential_vs_net
from .ingest import (
    FilterPolicy,
    aggregate,
    collect_node_coords,
    filter_records,
    parse_log,
    read_links,
    read_node_coords,
    write_links,
    write_node_coords,
)
from .network import build_network, ccdf, degree_correlation, degree_stats, net_flow_per_node, summary
from .svgplot import heatmap_svg, line_plot, step_histogram
from .synth import blocks_scenario, cities_scenario, walnut_scenario, generate, write_records


class DataError(Exception):
    """Required input is missing or unusable; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# workspace plumbing


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonify(obj):
    """Mirror obj into plain JSON types; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else None
    return obj


def _write_json(path: Path, obj) -> None:
    text = json.dumps(_jsonify(obj), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8")


def _write_manifest(
    out: Path,
    name: str,
    config: dict,
    inputs: dict[str, Path],
    outputs: list[Path],
) -> None:
    config = _jsonify(config)
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "subcommand": name,
        "config": config,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "inputs": {label: _sha256(p) for label, p in inputs.items()},
        "outputs": {p.name: _sha256(p) for p in outputs},
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "moneyflow": __version__,
        },
    }
    _write_json(out / f"manifest_{name}.json", manifest)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(out: Path, filename: str, producer: str) -> Path:
    path = out / filename
    if not path.is_file():
        raise DataError(
            f"missing {filename} in {out}; run the '{producer}' subcommand first"
        )
    return path


def _load_network(out: Path):
    path = _require(out, "links.csv", "ingest")
    with open(path, "r", encoding="utf-8") as fh:
        links = read_links(fh)
    if not links:
        raise DataError(f"{path} contains no links")
    return build_network(links), path


def _num(x) -> str:
    """Compact text form: integers without a trailing .0."""
    f = float(x)
    return str(int(f)) if f.is_integer() and abs(f) < 1e15 else repr(f)


def _write_ccdf(path: Path, values) -> None:
    dist = ccdf(values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("value\tfraction\n")
        for v, frac in zip(dist.values, dist.fractions):
            fh.write(f"{_num(v)}\t{repr(float(frac))}\n")


def _read_ccdf(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> None:
    out = _outdir(args)
    scenarios = {
        "walnut": lambda: walnut_scenario(
            n_nodes=args.nodes or 2000, seed=args.seed
        ),
        "cities": lambda: cities_scenario(
            n_nodes=args.nodes or 3000, seed=args.seed, hub=False
        ),
        "full": lambda: cities_scenario(
            n_nodes=args.nodes or 3000, seed=args.seed, hub=True
        ),
        "blocks": lambda: blocks_scenario(
            n_nodes=args.nodes or 240,
            seed=args.seed,
            n_blocks=args.blocks,
            nested=args.nested,
        ),
    }
    spec = scenarios[args.scenario]()
    records, truth = generate(spec)

    log_path = out / "synthetic_log.csv"
    with open(log_path, "w", encoding="utf-8") as fh:
        write_records(records, fh)
    truth_path = out / "ground_truth.json"
    _write_json(truth_path, truth.as_dict())

    config = {
        "scenario": args.scenario,
        "nodes": spec.n_nodes,
        "seed": args.seed,
        "blocks": args.blocks if args.scenario == "blocks" else None,
        "nested": args.nested if args.scenario == "blocks" else None,
    }
    _write_manifest(out, "synth", config, {}, [log_path, truth_path])
    print(f"synth: {len(records)} transfers over {spec.n_nodes} accounts -> {log_path}")


def _cmd_ingest(args) -> None:
    out = _outdir(args)
    src = Path(args.input)
    if not src.is_file():
        raise DataError(f"input log not found: {src}")
    policy = FilterPolicy(
        require_intra_bank=not args.keep_external,
        require_firm_both_ends=not args.keep_nonfirm,
        drop_self_loops=not args.keep_self_loops,
    )
    with open(src, "r", encoding="utf-8", newline="") as fh:
        records, rejected = parse_log(fh, delimiter=args.delimiter, strict=args.strict)
    kept = filter_records(records, policy)
    links = aggregate(kept)
    coords, conflicts = collect_node_coords(kept)

    links_path = out / "links.csv"
    with open(links_path, "w", encoding="utf-8") as fh:
        write_links(links, fh)
    nodes_path = out / "nodes.csv"
    with open(nodes_path, "w", encoding="utf-8") as fh:
        write_node_coords(coords, fh)

    outputs = [links_path, nodes_path]
    if rejected:
        rej_path = out / "rejected.csv"
        with open(rej_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["line_no", "reason"])
            writer.writerows((r.line_no, r.reason) for r in rejected)
        outputs.append(rej_path)

    node_set = {l.source for l in links} | {l.destination for l in links}
    summary_obj = {
        "records_parsed": len(records),
        "records_rejected": len(rejected),
        "records_kept": len(kept),
        "links": len(links),
        "nodes": len(node_set),
        "flow_total_yen": sum(l.flow for l in links),
        "frequency_total": sum(l.frequency for l in links),
        "coordinate_conflicts": conflicts,
        "filters": {
            "require_intra_bank": policy.require_intra_bank,
            "require_firm_both_ends": policy.require_firm_both_ends,
            "drop_self_loops": policy.drop_self_loops,
        },
    }
    summary_path = out / "ingest_summary.json"
    _write_json(summary_path, summary_obj)
    outputs.append(summary_path)

    config = {
        "input": str(args.input),
        "delimiter": args.delimiter,
        "strict": args.strict,
        "keep_external": args.keep_external,
        "keep_nonfirm": args.keep_nonfirm,
        "keep_self_loops": args.keep_self_loops,
    }
    _write_manifest(out, "ingest", config, {str(args.input): src}, outputs)
    print(
        f"ingest: kept {len(kept)}/{len(records)} transfers, "
        f"{len(links)} links over {len(node_set)} accounts"
    )


def _cmd_stats(args) -> None:
    out = _outdir(args)
    net, links_path = _load_network(out)
    in_deg, out_deg, _ = degree_stats(net)
    flow = net.weights("flow")
    freq = net.weights("frequency")

    if net.n_nodes >= 2:
        pearson, kendall = degree_correlation(net)
    else:
        pearson = kendall = float("nan")
    stats_obj = {
        "nodes": net.n_nodes,
        "links": net.n_links,
        "flow": summary(flow).as_dict(),
        "frequency": summary(freq).as_dict(),
        "in_degree": summary(in_deg).as_dict(),
        "out_degree": summary(out_deg).as_dict(),
        "degree_correlation": {"pearson": pearson, "kendall_tau_b": kendall},
        "net_balance": {
            "flow_sum": int(net_flow_per_node(net, "flow").sum()),
            "frequency_sum": int(net_flow_per_node(net, "frequency").sum()),
        },
    }
    stats_path = out / "stats.json"
    _write_json(stats_path, stats_obj)

    outputs = [stats_path]
    for name, values in (
        ("ccdf_flow.tsv", flow),
        ("ccdf_frequency.tsv", freq),
        ("ccdf_in_degree.tsv", in_deg),
        ("ccdf_out_degree.tsv", out_deg),
    ):
        path = out / name
        _write_ccdf(path, values)
        outputs.append(path)

    _write_manifest(out, "stats", {}, {"links.csv": links_path}, outputs)
    print(f"stats: {net.n_nodes} nodes, {net.n_links} links -> {stats_path}")


def _cmd_bowtie(args) -> None:
    out = _outdir(args)
    net, links_path = _load_network(out)
    part = classify_bowtie(net)
    profile = distance_profile(net, part)

    table_path = out / "bowtie.csv"
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("node_id,component\n")
        for i, node in enumerate(net.node_ids):
            fh.write(f"{node},{part.component_name(i)}\n")

    sizes = part.sizes
    gwcc = part.gwcc_size
    walnut = {
        name: (sizes[name] / gwcc if gwcc else None)
        for name in COMPONENT_NAMES[:4]
    }
    summary_obj = {
        "n_nodes": net.n_nodes,
        "sizes": sizes,
        "gwcc_size": gwcc,
        "gwcc_fractions": walnut,
        "identity_holds": sum(sizes[n] for n in COMPONENT_NAMES[:4]) == gwcc,
        "in_distance_counts": {str(d): c for d, c in sorted(profile.in_to_gscc.items())},
        "out_distance_counts": {str(d): c for d, c in sorted(profile.gscc_to_out.items())},
        "in_distance_ratios": {str(d): r for d, r in profile.in_ratios().items()},
        "out_distance_ratios": {str(d): r for d, r in profile.out_ratios().items()},
    }
    summary_path = out / "bowtie_summary.json"
    _write_json(summary_path, summary_obj)

    _write_manifest(
        out, "bowtie", {}, {"links.csv": links_path}, [table_path, summary_path]
    )
    shares = ", ".join(
        f"{name} {sizes[name]}" for name in COMPONENT_NAMES
    )
    print(f"bowtie: {shares} -> {summary_path}")


def _cmd_hodge(args) -> None:
    out = _outdir(args)
    net, links_path = _load_network(out)
    decomp = hodge_decompose(net, kind=args.weight, tol=args.tol)
    corr = potential_vs_net(decomp.phi, net)

    pot_path = out / "hodge_potentials.csv"
    with open(pot_path, "w", encoding="utf-8") as fh:
        fh.write("node_id,phi,net_degree,net_flow\n")
        for i, node in enumerate(net.node_ids):
            fh.write(
                f"{node},{repr(float(decomp.phi[i]))},"
                f"{int(corr.net_degree[i])},{int(corr.net_flow[i])}\n"
            )

    link_path = out / "hodge_links.csv"
    with open(link_path, "w", encoding="utf-8") as fh:
        fh.write("source_id,destination_id,f_net,f_gradient,f_circular\n")
        for src, dst, f_net, f_grad, f_circ in decomp.link_table(net):
            fh.write(
                f"{src},{dst},{repr(f_net)},{repr(f_grad)},{repr(f_circ)}\n"
            )

    total = float((decomp.problem.F.data ** 2).sum())
    circ = float((decomp.circular.data ** 2).sum())
    summary_obj = {
        "weight": args.weight,
        "tol": args.tol,
        "n_weak_components": decomp.problem.components[1],
        "r_phi_net_degree": corr.r_net_degree,
        "r_phi_net_flow": corr.r_net_flow,
        "circular_share": (circ / total if total > 0 else None),
        "max_abs_circular_divergence": float(
            np.abs(decomp.circular_divergence()).max()
        ),
    }
    summary_path = out / "hodge_summary.json"
    _write_json(summary_path, summary_obj)

    config = {"weight": args.weight, "tol": args.tol}
    _write_manifest(
        out, "hodge", config, {"links.csv": links_path},
        [pot_path, link_path, summary_path],
    )
    share = summary_obj["circular_share"]
    print(
        f"hodge: r(phi, net degree) = {corr.r_net_degree:+.4f}, "
        f"circular share = {'n/a' if share is None else format(share, '.4f')}"
    )


def _cmd_communities(args) -> None:
    out = _outdir(args)
    net, links_path = _load_network(out)
    tree = detect_communities(
        net, seed=args.seed, trials=args.trials, kind=args.weight
    )
    report = community_report(tree)

    tree_obj = tree.as_dict()
    tree_obj["history"] = list(tree.history)
    tree_path = out / "communities.json"
    _write_json(tree_path, tree_obj)

    flat_path = out / "communities_flat.csv"
    with open(flat_path, "w", encoding="utf-8") as fh:
        for row in flat_table(tree):
            fh.write(",".join(row) + "\n")

    report_path = out / "community_report.json"
    _write_json(report_path, report.as_dict())

    config = {"seed": args.seed, "trials": args.trials, "weight": args.weight}
    _write_manifest(
        out, "communities", config, {"links.csv": links_path},
        [tree_path, flat_path, report_path],
    )
    top = len(tree.children)
    leaves = len(tree.leaves())
    print(
        f"communities: {top} top-level, {leaves} irreducible, "
        f"codelength {tree.value:.4f} bits"
    )


def _cmd_nmf(args) -> None:
    out = _outdir(args)
    links_path = _require(out, "links.csv", "ingest")
    nodes_path = _require(out, "nodes.csv", "ingest")
    with open(links_path, "r", encoding="utf-8") as fh:
        links = read_links(fh)
    with open(nodes_path, "r", encoding="utf-8") as fh:
        coords = read_node_coords(fh)

    grid = GeoGrid(*args.bounds, k=args.grid_k)
    gfm = bin_transfers(links, grid, coords=coords)
    if gfm.included == 0:
        raise DataError(
            "no transfers with in-bounds coordinates on both ends; "
            "check nodes.csv and --bounds"
        )

    fact = nmf(gfm, args.nmf_d, seed=args.seed, max_iters=args.max_iters, tol=args.tol)
    loc = localization(fact, grid, radius_km=args.radius_km)
    sims = similarity_matrix(fact)
    diag = [float(sims[i, i]) for i in range(fact.d)]

    outputs = []
    v_path = out / "V.txt"
    write_sparse_matrix(v_path, gfm.V)
    w_path = out / "W.txt"
    write_matrix(w_path, fact.W)
    h_path = out / "H.txt"
    write_matrix(h_path, fact.H)
    outputs += [v_path, w_path, h_path]

    for side, results in (("origin", loc.origin), ("destination", loc.destination)):
        for res in results:
            stem = f"heatmap_{side}_{res.index + 1:02d}"
            tsv = out / f"{stem}.tsv"
            with open(tsv, "w", encoding="utf-8") as fh:
                for row in res.heatmap:
                    fh.write("\t".join(repr(float(v)) for v in row) + "\n")
            svg = out / f"{stem}.svg"
            svg.write_text(
                heatmap_svg(
                    res.heatmap,
                    title=f"{side} pattern {res.index + 1} "
                    f"(gamma {res.gamma:.3f})" if res.gamma is not None
                    else f"{side} pattern {res.index + 1}",
                ),
                encoding="utf-8",
            )
            outputs += [tsv, svg]

    def loc_entry(res):
        return {
            "factor": res.index + 1,
            "gamma": res.gamma,
            "center": list(res.center) if res.center else None,
        }

    summary_obj = {
        "d": fact.d,
        "grid_k": grid.k,
        "bounds": list(args.bounds),
        "radius_km": args.radius_km,
        "seed": args.seed,
        "objective": fact.objective,
        "iterations": len(fact.history) - 1,
        "included_events": gfm.included,
        "excluded_events": gfm.excluded,
        "gamma_threshold": GAMMA_THRESHOLD,
        "similarity_threshold": SIMILARITY_THRESHOLD,
        "localization": {
            "origin": [loc_entry(r) for r in loc.origin],
            "destination": [loc_entry(r) for r in loc.destination],
        },
        "localized_origin": sum(
            1 for r in loc.origin if r.gamma is not None and r.gamma > GAMMA_THRESHOLD
        ),
        "localized_destination": sum(
            1
            for r in loc.destination
            if r.gamma is not None and r.gamma > GAMMA_THRESHOLD
        ),
        "diagonal_similarity": diag,
        "matched_pairs": sum(
            1 for s in diag if np.isfinite(s) and s >= SIMILARITY_THRESHOLD
        ),
        "similarity": sims,
    }
    summary_path = out / "nmf_summary.json"
    _write_json(summary_path, summary_obj)
    outputs.append(summary_path)

    config = {
        "grid_k": args.grid_k,
        "nmf_d": args.nmf_d,
        "bounds": list(args.bounds),
        "radius_km": args.radius_km,
        "seed": args.seed,
        "max_iters": args.max_iters,
        "tol": args.tol,
        "d_range": list(args.nmf_d_range) if args.nmf_d_range else None,
    }
    if args.nmf_d_range:
        rows = d_sweep(
            gfm,
            args.nmf_d_range,
            seed=args.seed,
            radius_km=args.radius_km,
            max_iters=args.max_iters,
            tol=args.tol,
        )
        sweep_path = out / "sweep.json"
        _write_json(sweep_path, [row.as_dict() for row in rows])
        outputs.append(sweep_path)

    _write_manifest(
        out, "nmf", config,
        {"links.csv": links_path, "nodes.csv": nodes_path}, outputs,
    )
    print(
        f"nmf: d={fact.d}, localized origin {summary_obj['localized_origin']}, "
        f"destination {summary_obj['localized_destination']}, "
        f"matched pairs {summary_obj['matched_pairs']}"
    )


def _read_csv_dict(path: Path, key_col: int = 0):
    """Rows of a small comma file as {first column: remaining columns}."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, {row[key_col]: row[1:] for row in reader if row}


def _cmd_report(args) -> None:
    out = _outdir(args)
    needed = {
        "stats.json": "stats",
        "ccdf_flow.tsv": "stats",
        "ccdf_frequency.tsv": "stats",
        "ccdf_in_degree.tsv": "stats",
        "ccdf_out_degree.tsv": "stats",
        "bowtie.csv": "bowtie",
        "bowtie_summary.json": "bowtie",
        "hodge_potentials.csv": "hodge",
        "hodge_summary.json": "hodge",
        "community_report.json": "communities",
        "nmf_summary.json": "nmf",
    }
    inputs = {name: _require(out, name, producer) for name, producer in needed.items()}

    rep_dir = out / "report"
    rep_dir.mkdir(exist_ok=True)
    outputs = []

    def emit(name: str, svg_text: str) -> None:
        path = rep_dir / name
        path.write_text(svg_text, encoding="utf-8")
        outputs.append(path)

    for stem, label in (("flow", "flow [yen]"), ("frequency", "frequency")):
        xs, ys = _read_ccdf(inputs[f"ccdf_{stem}.tsv"])
        emit(
            f"ccdf_{stem}.svg",
            line_plot(
                [(stem, xs, ys)],
                title=f"Link {stem} CCDF",
                xlabel=label,
                ylabel="P(X >= x)",
                logx=True,
                logy=True,
            ),
        )
    deg_series = []
    for stem in ("in_degree", "out_degree"):
        xs, ys = _read_ccdf(inputs[f"ccdf_{stem}.tsv"])
        deg_series.append((stem.replace("_", " "), xs, ys))
    emit(
        "ccdf_degrees.svg",
        line_plot(
            deg_series,
            title="Degree CCDF",
            xlabel="degree",
            ylabel="P(X >= x)",
            logx=True,
            logy=True,
        ),
    )

    # potential histogram per walnut class; join phi and labels by node id
    _, pot_rows = _read_csv_dict(inputs["hodge_potentials.csv"])
    _, comp_rows = _read_csv_dict(inputs["bowtie.csv"])
    if set(pot_rows) != set(comp_rows):
        raise DataError(
            "hodge_potentials.csv and bowtie.csv disagree on the node set; "
            "rerun both on the current links.csv"
        )
    nodes = sorted(pot_rows)
    phi = np.array([float(pot_rows[n][0]) for n in nodes])
    code_of = {name: code for code, name in enumerate(COMPONENT_NAMES)}
    labels = np.array([code_of[comp_rows[n][0]] for n in nodes], dtype=np.int8)
    part = BowtiePartition(labels=labels)
    if part.gwcc_size > 0:
        edges, counts = potential_histograms(phi, part, bins=50)
        emit(
            "potential_histogram.svg",
            step_histogram(
                edges,
                counts,
                title="Hodge potential by walnut component",
                xlabel="potential",
            ),
        )

    community = json.loads(inputs["community_report.json"].read_text())
    size_rank = [row["size"] for row in community.get("size_rank", [])]
    if size_rank:
        ranks = np.arange(1, len(size_rank) + 1, dtype=float)
        emit(
            "community_size_rank.svg",
            line_plot(
                [("communities", ranks, np.array(size_rank, dtype=float))],
                title="Irreducible community sizes",
                xlabel="rank",
                ylabel="accounts",
                logx=True,
                logy=True,
            ),
        )

    nmf_summary = json.loads(inputs["nmf_summary.json"].read_text())
    sims = np.array(
        [
            [np.nan if v is None else v for v in row]
            for row in nmf_summary["similarity"]
        ],
        dtype=float,
    )
    emit(
        "similarity.svg",
        heatmap_svg(
            sims,
            title="Origin/destination factor similarity",
            annotate=sims.shape[0] <= 12,
            flip_rows=False,
        ),
    )

    stats_obj = json.loads(inputs["stats.json"].read_text())
    bowtie_obj = json.loads(inputs["bowtie_summary.json"].read_text())
    hodge_obj = json.loads(inputs["hodge_summary.json"].read_text())
    mean_phi = {}
    for name in COMPONENT_NAMES[:4]:
        mask = labels == code_of[name]
        mean_phi[name] = float(phi[mask].mean()) if mask.any() else None
    report_obj = {
        "nodes": stats_obj["nodes"],
        "links": stats_obj["links"],
        "degree_correlation": stats_obj["degree_correlation"],
        "walnut": {
            "gwcc_fractions": bowtie_obj["gwcc_fractions"],
            "in_distance_ratios": bowtie_obj["in_distance_ratios"],
            "out_distance_ratios": bowtie_obj["out_distance_ratios"],
        },
        "hodge": {
            "r_phi_net_degree": hodge_obj["r_phi_net_degree"],
            "r_phi_net_flow": hodge_obj["r_phi_net_flow"],
            "circular_share": hodge_obj["circular_share"],
            "mean_potential": mean_phi,
        },
        "communities": {
            "levels": community.get("levels", []),
            "largest": size_rank[:10],
        },
        "nmf": {
            "d": nmf_summary["d"],
            "localized_origin": nmf_summary["localized_origin"],
            "localized_destination": nmf_summary["localized_destination"],
            "matched_pairs": nmf_summary["matched_pairs"],
        },
        "figures": sorted(p.name for p in outputs),
    }
    report_path = rep_dir / "report.json"
    _write_json(report_path, report_obj)
    outputs.append(report_path)

    manifest_outputs = [p for p in outputs]
    _write_manifest(out, "report", {}, inputs, manifest_outputs)
    print(f"report: {len(outputs)} files -> {rep_dir}")


# ---------------------------------------------------------------------------
# parser


def _parse_bounds(text: str) -> tuple[float, float, float, float]:
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(
            "bounds must be lat_min:lat_max:lon_min:lon_max"
        )
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _parse_d_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("d range must be d_min:d_max")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"invalid d range [{lo}, {hi}]")
    return lo, hi


def build_parser() -> _Parser:
    parser = _Parser(
        prog="moneyflow",
        description="Money-flow network pipeline: ingest, structure, "
        "Hodge decomposition, communities, geographic factorization.",
    )
    parser.add_argument(
        "--version", action="version", version=f"moneyflow {__version__}"
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_text, func):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument(
            "--out", default=".", metavar="DIR",
            help="workspace directory for artifacts (default: current)",
        )
        p.set_defaults(func=func)
        return p

    p = add("synth", "generate a seeded synthetic transfer log", _cmd_synth)
    p.add_argument(
        "--scenario", choices=("walnut", "cities", "blocks", "full"),
        default="walnut",
        help="walnut structure, geographic cities, planted blocks, "
        "or cities plus a prefecture-wide hub",
    )
    p.add_argument("--nodes", type=int, default=None, help="account count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", type=int, default=4, help="block count (blocks scenario)")
    p.add_argument(
        "--nested", action="store_true",
        help="pair blocks into a two-level hierarchy (blocks scenario)",
    )

    p = add("ingest", "parse, filter and aggregate a transfer log", _cmd_ingest)
    p.add_argument("--input", required=True, metavar="LOG", help="raw transfer log")
    p.add_argument("--delimiter", default=",")
    p.add_argument(
        "--strict", action="store_true",
        help="fail on the first malformed line instead of skipping it",
    )
    p.add_argument(
        "--keep-nonfirm", action="store_true",
        help="keep transfers with household endpoints",
    )
    p.add_argument(
        "--keep-external", action="store_true",
        help="keep transfers crossing the bank boundary",
    )
    p.add_argument("--keep-self-loops", action="store_true")

    add("stats", "distribution summaries and CCDFs of the link table", _cmd_stats)

    add("bowtie", "walnut decomposition around the strongly connected core", _cmd_bowtie)

    p = add("hodge", "Helmholtz split into gradient and circular flow", _cmd_hodge)
    p.add_argument(
        "--weight", choices=("flow", "frequency"), default="frequency",
        help="link weight entering the flow matrix (default: frequency)",
    )
    p.add_argument(
        "--tol", type=float, default=1e-10,
        help="relative residual target for the potential solve",
    )

    p = add("communities", "hierarchical map-equation partition", _cmd_communities)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=10, help="optimizer restarts")
    p.add_argument(
        "--weight", choices=("flow", "frequency"), default="frequency",
        help="link weight driving the random walk (default: frequency)",
    )

    p = add("nmf", "geographic origin-destination factorization", _cmd_nmf)
    p.add_argument("--grid-k", type=int, default=100, help="cells per axis")
    p.add_argument("--nmf-d", type=int, default=10, help="factor count")
    p.add_argument(
        "--nmf-d-range", type=_parse_d_range, default=None, metavar="LO:HI",
        help="additionally sweep factor counts LO..HI into sweep.json",
    )
    p.add_argument("--radius-km", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument(
        "--tol", type=float, default=1e-12,
        help="relative objective change that stops the updates",
    )
    p.add_argument(
        "--bounds", type=_parse_bounds, default=DEFAULT_BOUNDS,
        metavar="S:N:W:E", help="lat_min:lat_max:lon_min:lon_max",
    )

    add("report", "collate all artifacts into report.json plus SVG figures", _cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except DataError as exc:
        print(f"moneyflow {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"moneyflow {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(
            f"moneyflow {args.command}: failed to converge: {exc} "
            f"(residual {exc.residual:.3e})",
            file=sys.stderr,
        )
        return 3
    except RuntimeError as exc:
        print(f"moneyflow {args.command}: failed to converge: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
