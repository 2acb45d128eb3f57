"""End-to-end command line coverage: every subcommand, exit codes, formats."""

import json
import zipfile

import pytest

from taskgraphs import cli
from taskgraphs.core import load_jsonl


def write_jsonl(path, objs):
    path.write_text("\n".join(json.dumps(o) for o in objs) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def sample(fixtures):
    return {
        "gold": str(fixtures / "sample" / "gold.jsonl"),
        "pred": str(fixtures / "sample" / "pred.jsonl"),
        "labels": str(fixtures / "sample" / "labels.jsonl"),
    }


class TestEvalNodes:
    def test_json_report_to_stdout(self, sample, capsys):
        assert cli.main(["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"]]) == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report["aggregate"]) == {
            "rouge1",
            "rouge2",
            "rougeL",
            "legacy",
            "hungarian",
            "relaxed_hungarian",
        }
        assert report["meta"]["n_tasks"] == 7
        assert 0.0 < report["aggregate"]["hungarian"]["f1"] <= 1.0

    def test_out_file_and_summary_line(self, sample, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert (
            cli.main(
                ["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"], "--out", str(out)]
            )
            == 0
        )
        stdout = capsys.readouterr().out
        assert stdout.startswith("eval-nodes: 7 tasks")
        assert str(out) in stdout
        assert json.loads(out.read_text())["meta"]["n_tasks"] == 7

    def test_reruns_are_byte_identical(self, sample, tmp_path):
        argv = ["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"]]
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        assert cli.main(argv + ["--out", str(a)]) == 0
        assert cli.main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_jobs_match_serial(self, sample, tmp_path):
        argv = ["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"]]
        serial = tmp_path / "serial.json"
        parallel = tmp_path / "parallel.json"
        assert cli.main(argv + ["--out", str(serial)]) == 0
        assert cli.main(argv + ["--jobs", "2", "--out", str(parallel)]) == 0
        assert serial.read_bytes() == parallel.read_bytes()

    def test_csv_format(self, sample, capsys):
        assert (
            cli.main(
                ["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"], "--format", "csv"]
            )
            == 0
        )
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "family,precision,recall,f1,f2"
        assert len(lines) == 7

    def test_task_means_flag(self, sample, capsys):
        assert (
            cli.main(
                ["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"], "--task-means"]
            )
            == 0
        )
        report = json.loads(capsys.readouterr().out)
        assert "f_task_means" in report["meta"]

    def test_embedding_sim_requires_embeddings(self, sample, capsys):
        code = cli.main(
            ["eval-nodes", "--gold", sample["gold"], "--pred", sample["pred"], "--sim", "embedding"]
        )
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_file_is_exit_2(self, sample, tmp_path, capsys):
        code = cli.main(
            ["eval-nodes", "--gold", str(tmp_path / "nope.jsonl"), "--pred", sample["pred"]]
        )
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestEvalEdges:
    def test_identity_scores_one(self, sample, capsys):
        assert cli.main(["eval-edges", "--gold", sample["gold"], "--pred", sample["gold"]]) == 0
        report = json.loads(capsys.readouterr().out)
        for metric in ("in_degree", "out_degree", "step_proximity"):
            assert report["aggregate"][metric]["rouge1"] == 1.0

    def test_summary_line_with_out(self, sample, tmp_path, capsys):
        out = tmp_path / "edges.json"
        assert (
            cli.main(
                ["eval-edges", "--gold", sample["gold"], "--pred", sample["pred"], "--out", str(out)]
            )
            == 0
        )
        assert capsys.readouterr().out.startswith("eval-edges: 7 tasks")
        assert out.exists()


class TestEvalPairwise:
    def test_labels_fixture(self, sample, capsys):
        assert cli.main(["eval-pairwise", "--gold", sample["gold"], "--labels", sample["labels"]]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["accuracy"] == pytest.approx(5 / 6)
        assert report["n_labels"] == 6

    def test_not_before_baseline(self, sample, capsys):
        assert cli.main(["eval-pairwise", "--gold", sample["gold"], "--not-before-baseline"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert 0.0 < report["accuracy"] < 1.0

    def test_requires_a_label_source(self, sample, capsys):
        assert cli.main(["eval-pairwise", "--gold", sample["gold"]]) == 1
        assert "--labels or --not-before-baseline" in capsys.readouterr().err


class TestGraphConstruction:
    def test_graph_from_sequences_reduction(self, tmp_path, capsys):
        src = write_jsonl(
            tmp_path / "seqs.jsonl",
            [{"task_id": "t", "task": "demo task", "sequences": [["a", "b", "c"], ["a", "c", "b"]]}],
        )
        assert cli.main(["graph-from-sequences", "--in", src]) == 0
        graph = json.loads(capsys.readouterr().out)
        assert sorted(tuple(e) for e in graph["edges"]) == [("s0", "s1"), ("s0", "s2")]

    def test_graph_from_sequences_closure(self, tmp_path, capsys):
        src = write_jsonl(
            tmp_path / "seqs.jsonl",
            [{"task_id": "t", "task": "demo task", "sequences": [["a", "b", "c"]]}],
        )
        assert cli.main(["graph-from-sequences", "--in", src, "--emit", "closure"]) == 0
        graph = json.loads(capsys.readouterr().out)
        assert len(graph["edges"]) == 3

    def test_graph_linear(self, tmp_path, capsys):
        src = write_jsonl(
            tmp_path / "seqs.jsonl",
            [{"task_id": "t", "task": "demo task", "sequences": [["dig", "plant"]]}],
        )
        assert cli.main(["graph-linear", "--in", src]) == 0
        graph = json.loads(capsys.readouterr().out)
        assert [tuple(e) for e in graph["edges"]] == [("s0", "s1")]

    def test_graph_linear_rejects_multiple_sequences(self, tmp_path, capsys):
        src = write_jsonl(
            tmp_path / "seqs.jsonl",
            [{"task_id": "t", "task": "demo task", "sequences": [["a"], ["b"]]}],
        )
        assert cli.main(["graph-linear", "--in", src]) == 1
        assert "exactly one sequence" in capsys.readouterr().err

    def test_decycle(self, tmp_path, capsys):
        src = write_jsonl(
            tmp_path / "graphs.jsonl",
            [
                {
                    "task_id": "t",
                    "task": "demo task",
                    "steps": [{"id": "a", "text": "one"}, {"id": "b", "text": "two"}],
                    "edges": [["a", "b"], ["b", "a"]],
                }
            ],
        )
        assert cli.main(["decycle", "--in", src]) == 0
        graph = json.loads(capsys.readouterr().out)
        assert graph["edges"] == []


class TestDedupCommands:
    def test_merge_sequences(self, fixtures, tmp_path, capsys):
        out = tmp_path / "merged.jsonl"
        code = cli.main(
            [
                "merge-sequences",
                "--in",
                str(fixtures / "dedup" / "sequences.jsonl"),
                "--threshold",
                "0.9",
                "--sim",
                "embedding",
                "--embeddings",
                str(fixtures / "dedup" / "embeddings.jsonl"),
                "--embedding-format",
                "step_jsonl",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        assert "wrote 1 records" in capsys.readouterr().out
        record = load_jsonl(out, "sequences")[0]
        assert record.sequences == (("preheat oven", "mix flour", "knead dough"),)

    def test_fit_threshold(self, fixtures, capsys):
        assert cli.main(["fit-threshold", "--pairs", str(fixtures / "threshold_pairs.jsonl")]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["accuracy"] == 1.0
        assert result["threshold"] == pytest.approx(0.5749149571305298, abs=1e-12)


class TestSequencePipeline:
    def test_sf_then_select_top(self, sample, tmp_path, capsys):
        candidates = write_jsonl(
            tmp_path / "cands.jsonl",
            [
                {
                    "task_id": "t2",
                    "task": "plant a tree",
                    "sequences": [
                        ["dig a hole", "place the sapling", "water the soil"],
                        ["water the soil", "dig a hole"],
                    ],
                }
            ],
        )
        scored_path = tmp_path / "scored.jsonl"
        assert (
            cli.main(
                ["sf-dataset", "--gold", sample["gold"], "--candidates", candidates, "--out", str(scored_path)]
            )
            == 0
        )
        capsys.readouterr()
        scored = [json.loads(line) for line in scored_path.read_text().splitlines()]
        assert len(scored) == 2
        assert scored[0]["score"] == pytest.approx(1.0)

        assert cli.main(["select-top", "--in", str(scored_path), "--keep-fraction", "0.5"]) == 0
        kept = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(kept) == 1
        assert kept[0]["score"] == pytest.approx(1.0)

    def test_swap_candidates(self, tmp_path, capsys, caplog):
        src = write_jsonl(
            tmp_path / "seqs.jsonl",
            [
                {"task_id": "t", "task": "demo task", "sequences": [["a", "b", "c"]]},
                {"task_id": "solo", "task": "demo task", "sequences": [["only"]]},
            ],
        )
        with caplog.at_level("WARNING"):
            assert cli.main(["swap-candidates", "--in", src]) == 0
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 1
        assert records[0]["sequences"] == [["b", "a", "c"], ["c", "b", "a"], ["a", "c", "b"]]
        assert any("no swap variants" in r.message for r in caplog.records)

    def test_swap_limit(self, tmp_path, capsys):
        src = write_jsonl(
            tmp_path / "seqs.jsonl",
            [{"task_id": "t", "task": "demo task", "sequences": [["a", "b", "c", "d"]]}],
        )
        assert cli.main(["swap-candidates", "--in", src, "--limit", "2"]) == 0
        record = json.loads(capsys.readouterr().out)
        assert len(record["sequences"]) == 2


class TestDatasetCommands:
    def test_split_dataset(self, sample, capsys):
        assert cli.main(["split-dataset", "--in", sample["gold"]]) == 0
        result = json.loads(capsys.readouterr().out)
        assert set(result) == {"split", "clusters"}
        counts = {"train": 0, "validation": 0, "test": 0}
        for name in result["split"].values():
            counts[name] += 1
        assert counts == {"train": 4, "validation": 1, "test": 2}
        assert len(result["clusters"]) == 7

    def test_split_summary_with_out(self, sample, tmp_path, capsys):
        out = tmp_path / "split.json"
        assert cli.main(["split-dataset", "--in", sample["gold"], "--out", str(out)]) == 0
        assert capsys.readouterr().out.startswith("split-dataset: train 4, validation 1, test 2")

    def test_baseline_repeat_task(self, sample, capsys):
        assert cli.main(["baseline-repeat-task", "--in", sample["gold"], "-m", "3"]) == 0
        records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
        assert len(records) == 7
        for record in records:
            assert len(record["steps"]) == 3
            assert all(s["text"] == record["task"] for s in record["steps"])

    def test_baseline_repeat_similar(self, fixtures, capsys):
        code = cli.main(
            [
                "baseline-repeat-similar",
                "--in",
                str(fixtures / "smoothie.jsonl"),
                "-m",
                "2",
                "--embeddings",
                str(fixtures / "glove_toy.txt"),
                "-k",
                "2",
                "--seed",
                "9",
            ]
        )
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert len(record["steps"]) == 2
        for step in record["steps"]:
            assert step["text"] != record["task"]

    def test_baseline_repeat_similar_deterministic(self, fixtures, tmp_path):
        argv = [
            "baseline-repeat-similar",
            "--in",
            str(fixtures / "smoothie.jsonl"),
            "-m",
            "2",
            "--embeddings",
            str(fixtures / "glove_toy.txt"),
            "--seed",
            "9",
        ]
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert cli.main(argv + ["--out", str(a)]) == 0
        assert cli.main(argv + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestConvertTasklama:
    RECORDS = [
        {
            "task_name": "bake bread",
            "steps": [{"step": "mix the dough"}, {"step": "bake the loaf"}],
            "dependencies": [[0, 1]],
        },
        {
            "task_name": "wash the car",
            "steps": [{"step": "rinse"}, {"step": "soap"}, {"step": "dry"}],
            "dependencies": [[0, 1], [1, 2]],
        },
    ]

    def test_directory_archive(self, tmp_path, capsys):
        archive = tmp_path / "arch"
        archive.mkdir()
        write_jsonl(archive / "part1.jsonl", self.RECORDS[:1])
        (archive / "part2.json").write_text(json.dumps(self.RECORDS[1:]))
        out = tmp_path / "converted.jsonl"
        assert cli.main(["convert-tasklama", "--archive", str(archive), "--out", str(out)]) == 0
        assert capsys.readouterr().out.startswith("convert-tasklama: 2 tasks, 5 steps, 3 edges")
        ds = load_jsonl(out, "graph")
        assert {g.task for g in ds.tasks} == {"bake bread", "wash the car"}
        assert all(g.task_id.startswith("t0") for g in ds.tasks)

    def test_zip_archive_stats_to_stderr(self, tmp_path, capsys):
        zip_path = tmp_path / "arch.zip"
        with zipfile.ZipFile(zip_path, "w") as zf:
            zf.writestr("data/records.json", json.dumps(self.RECORDS))
        assert cli.main(["convert-tasklama", "--archive", str(zip_path)]) == 0
        captured = capsys.readouterr()
        assert len(captured.out.splitlines()) == 2
        assert "convert-tasklama: 2 tasks" in captured.err

    def test_missing_archive(self, tmp_path, capsys):
        assert cli.main(["convert-tasklama", "--archive", str(tmp_path / "gone.zip")]) == 1
        assert "archive not found" in capsys.readouterr().err


class TestParser:
    def test_unknown_command_exits(self):
        with pytest.raises(SystemExit):
            cli.main(["no-such-command"])

    def test_missing_required_flag_exits(self):
        with pytest.raises(SystemExit):
            cli.main(["eval-nodes", "--gold", "x.jsonl"])
