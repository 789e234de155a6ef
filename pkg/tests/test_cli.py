"""End-to-end checks of the command line pipeline, run in process."""

import hashlib
import json

import pytest

from moneyflow.cli import main


def pipeline_steps(out):
    """Full workspace run on a small seeded scenario."""
    d = str(out)
    return [
        ["synth", "--out", d, "--scenario", "full", "--nodes", "300", "--seed", "1"],
        ["ingest", "--out", d, "--input", str(out / "synthetic_log.csv")],
        ["stats", "--out", d],
        ["bowtie", "--out", d],
        ["hodge", "--out", d],
        ["communities", "--out", d, "--trials", "2"],
        [
            "nmf", "--out", d,
            "--grid-k", "20", "--nmf-d", "3", "--max-iters", "200",
        ],
        ["report", "--out", d],
    ]


def run_pipeline(out):
    for argv in pipeline_steps(out):
        assert main(argv) == 0, f"step {argv[0]} failed"


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    out = tmp_path_factory.mktemp("pipeline")
    run_pipeline(out)
    return out


class TestUsage:
    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert capsys.readouterr().out.startswith("moneyflow ")

    def test_no_subcommand(self, capsys):
        assert main([]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_choice(self, tmp_path):
        argv = ["synth", "--out", str(tmp_path), "--scenario", "bogus"]
        assert main(argv) == 1

    def test_missing_required_flag(self, tmp_path):
        assert main(["ingest", "--out", str(tmp_path)]) == 1


class TestDataErrors:
    def test_missing_producer_is_named(self, tmp_path, capsys):
        assert main(["hodge", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "links.csv" in err and "'ingest'" in err

    def test_report_names_first_missing(self, tmp_path, capsys):
        assert main(["report", "--out", str(tmp_path)]) == 2
        assert "'stats'" in capsys.readouterr().err

    def test_input_log_not_found(self, tmp_path):
        argv = ["ingest", "--out", str(tmp_path), "--input", str(tmp_path / "nope.csv")]
        assert main(argv) == 2

    def test_strict_ingest_rejects_bad_line(self, tmp_path, capsys):
        log = tmp_path / "bad.csv"
        log.write_text("timestamp,junk\nonly,two\n", encoding="utf-8")
        argv = ["ingest", "--out", str(tmp_path), "--input", str(log), "--strict"]
        assert main(argv) == 2
        assert "expected 10 fields" in capsys.readouterr().err

    def test_invalid_scenario_parameters(self, tmp_path):
        argv = [
            "synth", "--out", str(tmp_path),
            "--scenario", "blocks", "--nested", "--blocks", "3",
        ]
        assert main(argv) == 2

    def test_unattainable_tolerance(self, ws, capsys):
        # negative target: no residual can satisfy it, so the solve
        # must report failed convergence rather than bogus success
        assert main(["hodge", "--out", str(ws), "--tol=-1"]) == 3
        assert "converge" in capsys.readouterr().err


class TestArtifacts:
    def test_expected_files(self, ws):
        expected = [
            "synthetic_log.csv", "ground_truth.json",
            "links.csv", "nodes.csv", "ingest_summary.json",
            "stats.json", "ccdf_flow.tsv", "ccdf_frequency.tsv",
            "ccdf_in_degree.tsv", "ccdf_out_degree.tsv",
            "bowtie.csv", "bowtie_summary.json",
            "hodge_potentials.csv", "hodge_links.csv", "hodge_summary.json",
            "communities.json", "communities_flat.csv", "community_report.json",
            "V.txt", "W.txt", "H.txt", "nmf_summary.json",
        ]
        for name in expected:
            assert (ws / name).is_file(), name
        for step in ("synth", "ingest", "stats", "bowtie", "hodge",
                     "communities", "nmf", "report"):
            assert (ws / f"manifest_{step}.json").is_file()
        report = json.loads((ws / "report" / "report.json").read_text())
        for fig in report["figures"]:
            assert (ws / "report" / fig).is_file()

    def test_ingest_summary_accounting(self, ws):
        summary = json.loads((ws / "ingest_summary.json").read_text())
        assert summary["records_rejected"] == 0
        assert summary["records_kept"] == summary["records_parsed"]
        assert summary["frequency_total"] == summary["records_kept"]
        assert summary["links"] > 0 and summary["nodes"] == 300

    def test_bowtie_identity(self, ws):
        summary = json.loads((ws / "bowtie_summary.json").read_text())
        assert summary["identity_holds"] is True
        sizes = summary["sizes"]
        gwcc = sum(sizes[k] for k in ("GSCC", "IN", "OUT", "TE"))
        assert gwcc == summary["gwcc_size"]
        assert gwcc + sizes["outside_GWCC"] == summary["n_nodes"] == 300

        lines = (ws / "bowtie.csv").read_text().splitlines()
        assert lines[0] == "node_id,component"
        assert len(lines) == 301

    def test_hodge_summary(self, ws):
        summary = json.loads((ws / "hodge_summary.json").read_text())
        assert summary["max_abs_circular_divergence"] <= 1e-6
        assert -1.0 <= summary["r_phi_net_degree"] <= 1.0
        assert 0.0 <= summary["circular_share"] <= 1.0

        lines = (ws / "hodge_potentials.csv").read_text().splitlines()
        assert lines[0] == "node_id,phi,net_degree,net_flow"
        phi = [float(l.split(",")[1]) for l in lines[1:]]
        assert abs(sum(phi)) < 1e-6  # zero-mean gauge

    def test_communities_flat_covers_nodes(self, ws):
        lines = (ws / "communities_flat.csv").read_text().splitlines()
        assert lines[0].startswith("node_id,level_1")
        assert len(lines) == 301
        tree = json.loads((ws / "communities.json").read_text())
        assert tree["node_count"] == 300
        hist = tree["history"]
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_nmf_summary(self, ws):
        summary = json.loads((ws / "nmf_summary.json").read_text())
        assert summary["d"] == 3 and summary["grid_k"] == 20
        assert summary["included_events"] > 0
        links = (ws / "links.csv").read_text().splitlines()[1:]
        total = sum(int(l.split(",")[3]) for l in links)
        assert summary["included_events"] + summary["excluded_events"] == total
        assert len(summary["diagonal_similarity"]) == 3

    def test_sweep_artifact(self, ws, tmp_path):
        argv = [
            "nmf", "--out", str(ws), "--grid-k", "20", "--nmf-d", "3",
            "--max-iters", "60", "--nmf-d-range", "2:3",
        ]
        assert main(argv) == 0
        rows = json.loads((ws / "sweep.json").read_text())
        assert [r["d"] for r in rows] == [2, 3]
        # restore the module workspace for later tests
        argv = [
            "nmf", "--out", str(ws), "--grid-k", "20", "--nmf-d", "3",
            "--max-iters", "200",
        ]
        assert main(argv) == 0


class TestManifests:
    def test_manifest_hashes_match_files(self, ws):
        manifest = json.loads((ws / "manifest_bowtie.json").read_text())
        assert manifest["subcommand"] == "bowtie"
        for name, digest in manifest["outputs"].items():
            actual = hashlib.sha256((ws / name).read_bytes()).hexdigest()
            assert actual == digest
        assert set(manifest["versions"]) == {"python", "numpy", "scipy", "moneyflow"}

    def test_rerun_is_byte_identical(self, tmp_path):
        out = tmp_path / "ws"
        run_pipeline(out)
        first = {p.name: p.read_bytes() for p in out.glob("manifest_*.json")}
        assert len(first) == 8
        run_pipeline(out)
        second = {p.name: p.read_bytes() for p in out.glob("manifest_*.json")}
        assert second == first
