import pytest

from parkcast.cli import main


@pytest.fixture(scope="module")
def cli_workspace(tmp_path_factory):
    """Drive the whole pipeline through the command line."""
    ws = tmp_path_factory.mktemp("cli_ws")
    root = str(ws)
    assert main(["--workspace", root, "synth", "--blocks", "40", "--days", "3", "--seed", "3"]) == 0
    city = ws / "city"
    assert main(
        [
            "--workspace", root, "ingest",
            "--occupancy", str(city / "occupancy.csv"),
            "--blocks", str(city / "blocks.geojson"),
            "--pois", str(city / "pois.geojson"),
            "--amenity-stats", str(city / "amenity_stats.csv"),
            "--basis", "time_spent",
            "--merge-distance", "100",
        ]
    ) == 0
    assert main(["--workspace", root, "cluster", "--k", "2", "--ratio", "2.6", "--seed", "1"]) == 0
    assert main(["--workspace", root, "train", "--learner", "gbt", "--seed", "1"]) == 0
    assert main(["--workspace", root, "similarity", "--metric", "cosine"]) == 0
    assert main(["--workspace", root, "similarity", "--metric", "emd"]) == 0
    return ws


class TestPipelineCommands:
    def test_artifacts_present(self, cli_workspace):
        for rel in (
            "city/occupancy.csv",
            "occupancy.csv",
            "partition.json",
            "models/index.json",
            "similarity/cosine-time_spent.csv",
            "similarity/emd-time_spent.csv",
        ):
            assert (cli_workspace / rel).exists(), rel

    def test_proportional_cluster_count(self, cli_workspace):
        import json

        doc = json.loads((cli_workspace / "partition.json").read_text())
        assert doc["k_with"] == 2 and doc["k_without"] == 5

    def test_estimate_prints_table(self, cli_workspace, capsys):
        rc = main(
            [
                "--workspace", str(cli_workspace), "estimate",
                "--target", "0", "--date", "2017-11-04", "--time", "09:00",
                "--metric", "cosine",
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "target cluster 0" in out
        assert "source_id" in out and "eii_lo%" in out

    def test_estimate_default_grid_prints_eight_tables(self, cli_workspace, capsys):
        rc = main(
            ["--workspace", str(cli_workspace), "estimate", "--target", "1", "--metric", "emd"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert out.count("target cluster 1") == 8

    def test_evaluate_writes_tables(self, cli_workspace, capsys):
        rc = main(
            [
                "--workspace", str(cli_workspace), "evaluate",
                "--k", "2", "--merge-distance", "100", "--seed", "1",
                "--learner", "gbt", "--datapoints", "all:aggregate",
            ]
        )
        assert rc == 0
        assert (cli_workspace / "evaluation" / "transfer_errors_gbt.csv").exists()
        assert (cli_workspace / "evaluation" / "correlations.csv").exists()
        lines = (cli_workspace / "evaluation" / "correlations.csv").read_text().splitlines()
        assert lines[0].startswith("learner,k,merge_distance")
        assert "all:aggregate" in lines[1]

    def test_synth_rerun_identical(self, tmp_path):
        args = ["synth", "--blocks", "24", "--days", "2", "--seed", "5"]
        assert main(["--workspace", str(tmp_path / "a")] + args) == 0
        assert main(["--workspace", str(tmp_path / "b")] + args) == 0
        for name in ("blocks.geojson", "pois.geojson", "occupancy.csv", "amenity_stats.csv"):
            assert (tmp_path / "a" / "city" / name).read_bytes() == (
                tmp_path / "b" / "city" / name
            ).read_bytes()

    def test_bad_datapoints_flag(self, cli_workspace):
        rc = main(
            ["--workspace", str(cli_workspace), "evaluate", "--k", "2",
             "--datapoints", "aggregate:bogus"]
        )
        assert rc == 2
