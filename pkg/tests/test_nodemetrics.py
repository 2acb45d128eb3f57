"""Step-content metrics: fixture values, identities, and orderings."""

import random

import pytest

from taskgraphs.core import Dataset, Step, TaskGraph, ValidationError, load_jsonl
from taskgraphs.nodemetrics import (
    FAMILIES,
    check_task_coverage,
    eval_corpus,
    eval_nodes,
)
from taskgraphs.sim import EmbeddingSimilarity, TokenSimilarity, load_embeddings
from helpers import TableSimilarity


def graph(task_id, texts, edges=(), task="demo task"):
    steps = tuple(Step(id=f"s{i}", text=t) for i, t in enumerate(texts))
    return TaskGraph(task_id=task_id, task=task, steps=steps, edges=tuple(edges))


@pytest.fixture(scope="module")
def m1m2(fixtures):
    provider = EmbeddingSimilarity(
        load_embeddings(fixtures / "m1m2" / "embeddings.jsonl", "step_jsonl")
    )
    gold = load_jsonl(fixtures / "m1m2" / "gold.jsonl", "graph")
    m1 = load_jsonl(fixtures / "m1m2" / "pred_m1.jsonl", "graph")
    m2 = load_jsonl(fixtures / "m1m2" / "pred_m2.jsonl", "graph")
    return provider, gold, m1, m2


class TestDuplicationFixture:
    def test_legacy_rewards_duplication(self, m1m2):
        provider, gold, m1, m2 = m1m2
        r1 = eval_corpus(gold, m1, provider).aggregate["legacy"]
        r2 = eval_corpus(gold, m2, provider).aggregate["legacy"]
        assert r1.precision == pytest.approx(0.3, abs=1e-9)
        assert r1.recall == pytest.approx(0.3, abs=1e-9)
        assert r2.precision == pytest.approx(0.4, abs=1e-9)
        assert r2.recall == pytest.approx(0.3, abs=1e-9)

    def test_hungarian_punishes_duplication(self, m1m2):
        provider, gold, m1, m2 = m1m2
        h1 = eval_corpus(gold, m1, provider).aggregate["hungarian"]
        h2 = eval_corpus(gold, m2, provider).aggregate["hungarian"]
        assert h1.precision == pytest.approx(0.3, abs=1e-9)
        assert h2.precision == pytest.approx(0.2, abs=1e-9)
        assert h2.precision < h1.precision
        assert h2.recall == pytest.approx(h1.recall, abs=1e-9)

    def test_relaxed_forgives_duplication(self, m1m2):
        provider, gold, _, m2 = m1m2
        r2 = eval_corpus(gold, m2, provider).aggregate["relaxed_hungarian"]
        assert r2.precision == pytest.approx(0.4, abs=1e-9)
        assert r2.recall == pytest.approx(0.3, abs=1e-9)


class TestIdentity:
    def test_gold_scored_against_itself_is_perfect(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        report = eval_corpus(gold, gold, TokenSimilarity())
        for family in FAMILIES:
            s = report.aggregate[family]
            assert (s.precision, s.recall, s.f1, s.f2) == (1.0, 1.0, 1.0, 1.0)


class TestSingleTask:
    def test_task_id_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            eval_nodes(graph("a", ["x"]), graph("b", ["x"]), TokenSimilarity())

    def test_empty_pred_scores_zero_with_warning(self, caplog):
        gold = graph("t", ["mix flour"])
        pred = graph("t", [])
        with caplog.at_level("WARNING"):
            report = eval_nodes(gold, pred, TokenSimilarity())
        assert all(report.aggregate[f].f1 == 0.0 for f in FAMILIES)
        assert any("predicted" in r.message for r in caplog.records)

    def test_empty_gold_scores_zero_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            report = eval_nodes(graph("t", []), graph("t", ["x"]), TokenSimilarity())
        assert all(report.aggregate[f].f1 == 0.0 for f in FAMILIES)
        assert any("gold" in r.message for r in caplog.records)

    def test_meta_marks_single_task(self):
        report = eval_nodes(graph("t", ["x"]), graph("t", ["x"]), TokenSimilarity())
        assert report.meta["aggregation"] == "single_task"
        assert list(report.per_task) == ["t"]


class TestScoreOrderings:
    def make_random_pair(self, rng, tid):
        vocab = ["mix", "pour", "bake", "stir", "chop", "salt", "oven", "bowl"]
        gold_texts = [
            " ".join(rng.sample(vocab, rng.randint(2, 4))) for _ in range(rng.randint(1, 5))
        ]
        pred_texts = [
            " ".join(rng.sample(vocab, rng.randint(2, 4))) for _ in range(rng.randint(1, 5))
        ]
        return graph(tid, pred_texts), graph(tid, gold_texts)

    def test_hungarian_never_exceeds_legacy(self):
        rng = random.Random(20240817)
        for i in range(50):
            pred, gold = self.make_random_pair(rng, f"t{i}")
            report = eval_nodes(gold, pred, TokenSimilarity())
            hung = report.aggregate["hungarian"]
            legacy = report.aggregate["legacy"]
            assert hung.precision <= legacy.precision + 1e-12
            assert hung.recall <= legacy.recall + 1e-12

    def test_relaxed_never_below_hungarian(self):
        rng = random.Random(20240818)
        for i in range(50):
            pred, gold = self.make_random_pair(rng, f"t{i}")
            report = eval_nodes(gold, pred, TokenSimilarity())
            hung = report.aggregate["hungarian"]
            relaxed = report.aggregate["relaxed_hungarian"]
            assert relaxed.precision >= hung.precision - 1e-12
            assert relaxed.recall >= hung.recall - 1e-12


class TestCorpus:
    def test_coverage_missing_prediction(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        partial = Dataset(tasks=gold.tasks[:3])
        with pytest.raises(ValidationError, match="missing predictions"):
            check_task_coverage(gold, partial)

    def test_coverage_unknown_prediction(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        extra = Dataset(tasks=gold.tasks + (graph("zz", ["x"]),))
        with pytest.raises(ValidationError, match="unknown tasks"):
            check_task_coverage(gold, extra)

    def test_macro_aggregate_recomputes_f(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        pred = load_jsonl(fixtures / "sample" / "pred.jsonl", "graph")
        report = eval_corpus(gold, pred, TokenSimilarity())
        n = report.meta["n_tasks"]
        for family in FAMILIES:
            mean_p = sum(report.per_task[t][family].precision for t in report.per_task) / n
            mean_r = sum(report.per_task[t][family].recall for t in report.per_task) / n
            agg = report.aggregate[family]
            assert agg.precision == pytest.approx(mean_p, abs=1e-12)
            assert agg.recall == pytest.approx(mean_r, abs=1e-12)
            if mean_p + mean_r:
                want_f1 = 2 * mean_p * mean_r / (mean_p + mean_r)
                assert agg.f1 == pytest.approx(want_f1, abs=1e-12)

    def test_input_order_does_not_matter(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        pred = load_jsonl(fixtures / "sample" / "pred.jsonl", "graph")
        shuffled_gold = Dataset(tasks=tuple(reversed(gold.tasks)))
        shuffled_pred = Dataset(tasks=tuple(reversed(pred.tasks)))
        a = eval_corpus(gold, pred, TokenSimilarity())
        b = eval_corpus(shuffled_gold, shuffled_pred, TokenSimilarity())
        assert a.to_json_obj() == b.to_json_obj()

    def test_parallel_jobs_match_serial(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        pred = load_jsonl(fixtures / "sample" / "pred.jsonl", "graph")
        serial = eval_corpus(gold, pred, TokenSimilarity(), jobs=1)
        parallel = eval_corpus(gold, pred, TokenSimilarity(), jobs=2)
        assert serial.to_json_obj() == parallel.to_json_obj()

    def test_f_task_means_flag(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        pred = load_jsonl(fixtures / "sample" / "pred.jsonl", "graph")
        without = eval_corpus(gold, pred, TokenSimilarity())
        assert "f_task_means" not in without.meta
        with_means = eval_corpus(
            gold, pred, TokenSimilarity(), include_f_task_means=True
        )
        means = with_means.meta["f_task_means"]
        n = with_means.meta["n_tasks"]
        for family in FAMILIES:
            want = sum(with_means.per_task[t][family].f1 for t in with_means.per_task) / n
            assert means[family]["f1"] == pytest.approx(want, abs=1e-12)


class TestReportShapes:
    def test_json_obj_layout(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        report = eval_corpus(gold, gold, TokenSimilarity())
        obj = report.to_json_obj()
        assert set(obj) == {"meta", "aggregate", "per_task"}
        assert set(obj["aggregate"]) == set(FAMILIES)
        assert set(obj["aggregate"]["hungarian"]) == {"precision", "recall", "f1", "f2"}

    def test_csv_layout(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        report = eval_corpus(gold, gold, TokenSimilarity())
        lines = report.to_csv().splitlines()
        assert lines[0] == "family,precision,recall,f1,f2"
        assert len(lines) == 1 + len(FAMILIES)
        assert lines[1].startswith("rouge1,")

    def test_csv_gains_columns_with_task_means(self, fixtures):
        gold = load_jsonl(fixtures / "sample" / "gold.jsonl", "graph")
        report = eval_corpus(gold, gold, TokenSimilarity(), include_f_task_means=True)
        header = report.to_csv().splitlines()[0]
        assert header.endswith("f1_task_mean,f2_task_mean")


class TestProviderChoiceMatters:
    def test_table_provider_drives_scores(self):
        gold = graph("t", ["alpha", "beta"])
        pred = graph("t", ["one", "two"])
        provider = TableSimilarity({("one", "alpha"): 0.9, ("two", "beta"): 0.5})
        report = eval_nodes(gold, pred, provider)
        assert report.aggregate["hungarian"].precision == pytest.approx(0.7)
