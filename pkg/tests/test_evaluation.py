"""Metric oracles, judge parsing, and small benchmark runs."""

import itertools
import json

import pytest

from qarag import (
    Engine,
    ChunkStore,
    Chunk,
    FunctionGenerator,
    MockEmbedder,
    MockGenerator,
    MockReranker,
    ModelGateway,
    QAExample,
    RetrievalStrategy,
    VectorIndex,
    context_precision,
    context_recall,
    judge_relevance,
    run_benchmark,
    split_statements,
    token_f1,
)
from qarag.evaluation import load_dataset, render_report_table
from qarag.errors import BenchmarkDegradedError, DatasetParseError

from oracles import precision_formula


# --- judge_relevance ----------------------------------------------------


def test_judge_yes_with_trailing_text():
    judge = FunctionGenerator(lambda m: "Yes — covers the question.")
    assert judge_relevance("q", "ctx", judge) is True


def test_judge_no():
    assert judge_relevance("q", "ctx", FunctionGenerator(lambda m: "no")) is False


def test_judge_unparseable_counts_as_not_relevant():
    judge = FunctionGenerator(lambda m: "maybe")
    transcripts = []
    assert judge_relevance("q", "ctx", judge, transcripts=transcripts) is False
    assert len(judge.calls) == 2  # one retry
    assert transcripts[0]["warning"]


def test_judge_case_insensitive():
    assert judge_relevance("q", "c", FunctionGenerator(lambda m: "YES.")) is True
    assert judge_relevance("q", "c", FunctionGenerator(lambda m: "No way")) is False


# --- context_precision -------------------------------------------------------


def test_precision_all_relevant():
    assert context_precision([True, True, True]) == 1.0


def test_precision_none_relevant():
    assert context_precision([False, False]) == 0.0


def test_precision_interleaved():
    # (1/1 + 2/3) / 2, hand-computed.
    assert context_precision([True, False, True]) == pytest.approx(0.833333333, abs=1e-9)


def test_precision_matches_formula_oracle_exhaustively():
    for length in (1, 2, 3, 4):
        for bits in itertools.product([False, True], repeat=length):
            assert context_precision(list(bits)) == pytest.approx(
                precision_formula(list(bits)), abs=1e-12
            )


def test_precision_rank_sensitivity():
    # Permuting a non-constant verdict vector always changes the value.
    for length in (2, 3, 4):
        for bits in itertools.product([False, True], repeat=length):
            if all(bits) or not any(bits):
                continue
            base = context_precision(list(bits))
            for perm in set(itertools.permutations(bits)):
                if list(perm) != list(bits):
                    assert context_precision(list(perm)) != pytest.approx(base, abs=1e-12)


def test_precision_empty_rejected():
    with pytest.raises(ValueError):
        context_precision([])


# --- split_statements --------------------------------------------------------


def test_split_numbered_reply():
    judge = FunctionGenerator(lambda m: "1. S1\n2. S2")
    assert split_statements("whatever answer", judge) == ["S1", "S2"]


def test_split_falls_back_to_sentences():
    judge = FunctionGenerator(lambda m: "cannot comply")
    assert split_statements("An answer. Two parts.", judge) == ["An answer.", "Two parts."]


def test_split_single_sentence():
    judge = FunctionGenerator(lambda m: "no numbering")
    assert split_statements("Only one statement", judge) == ["Only one statement"]


# --- context_recall ----------------------------------------------------------


def yes_no_judge(answers):
    replies = iter(answers)
    return FunctionGenerator(lambda m: next(replies))


def test_recall_all_attributed():
    judge = yes_no_judge(["yes"] * 4)
    assert context_recall(["s1", "s2", "s3", "s4"], ["ctx"], judge) == 1.0


def test_recall_three_of_four():
    judge = yes_no_judge(["yes", "yes", "no", "yes"])
    assert context_recall(["s1", "s2", "s3", "s4"], ["ctx"], judge) == 0.75


def test_recall_none_attributed():
    judge = yes_no_judge(["no", "no"])
    assert context_recall(["s1", "s2"], ["ctx"], judge) == 0.0


def test_recall_empty_statements_rejected():
    with pytest.raises(ValueError):
        context_recall([], ["ctx"], FunctionGenerator(lambda m: "yes"))


# --- token_f1 ----------------------------------------------------------------


def test_token_f1_identical():
    assert token_f1("same text here", "same text here") == (1.0, 1.0, 1.0)


def test_token_f1_partial_overlap():
    p, r, f1 = token_f1("a b c", "a b d")
    assert p == pytest.approx(2 / 3, abs=1e-9)
    assert r == pytest.approx(2 / 3, abs=1e-9)
    assert f1 == pytest.approx(2 / 3, abs=1e-9)


def test_token_f1_disjoint():
    assert token_f1("aa bb", "cc dd") == (0.0, 0.0, 0.0)


def test_token_f1_multiset_counts():
    # "a a b" vs "a b b": overlap multiset is {a×1 wait a:1? no a:min(2,1)=1, b:min(1,2)=1} = 2
    p, r, f1 = token_f1("a a b", "a b b")
    assert p == pytest.approx(2 / 3)
    assert r == pytest.approx(2 / 3)


def test_token_f1_swap_symmetry():
    p, r, f1 = token_f1("x y z w", "x y q")
    p2, r2, f12 = token_f1("x y q", "x y z w")
    assert (p, r) == (r2, p2)
    assert f1 == pytest.approx(f12)


def test_token_f1_empty_rejected():
    with pytest.raises(ValueError):
        token_f1("", "x")


# --- dataset loading ----------------------------------------------------------


def test_load_dataset(tmp_path):
    path = tmp_path / "ds.jsonl"
    path.write_text(
        '{"id": "1", "question": "q1", "answer": "a1"}\n'
        '{"id": "2", "question": "q2", "answer": "a2"}\n'
    )
    examples = load_dataset(path)
    assert [e.id for e in examples] == ["1", "2"]


def test_load_dataset_reports_bad_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"id": "1", "question": "q", "answer": "a"}\n'
        '{"id": "2", "question": "q", "answer": "a"}\n'
        "{broken json\n"
    )
    with pytest.raises(DatasetParseError) as err:
        load_dataset(path)
    assert err.value.line_number == 3
    assert "line 3" in str(err.value)


def test_load_dataset_duplicate_ids(tmp_path):
    path = tmp_path / "dup.jsonl"
    path.write_text(
        '{"id": "1", "question": "q", "answer": "a"}\n'
        '{"id": "1", "question": "q2", "answer": "a2"}\n'
    )
    with pytest.raises(DatasetParseError):
        load_dataset(path)


# --- run_benchmark ------------------------------------------------------------


def tiny_engine(judge_reply="yes"):
    embedder = MockEmbedder(dimension=16, seed=21)
    texts = [f"guideline text {i} about requirement" for i in range(8)]
    chunks = [
        Chunk(doc_id=f"d{i}", chunk_index=0, text=t, char_start=0, char_end=len(t))
        for i, t in enumerate(texts)
    ]
    index = VectorIndex(16)
    for chunk, vec in zip(chunks, embedder.embed_batch(texts)):
        index.add(chunk.key, vec)
    gateway = ModelGateway(
        embedder=embedder,
        tuned=MockGenerator("echo"),
        general=MockGenerator("echo"),
        reranker=MockReranker(),
        judge=FunctionGenerator(lambda m: judge_reply),
    )
    return Engine(index=index, store=ChunkStore(chunks), gateway=gateway)


STRATEGIES = [
    RetrievalStrategy(kind="only_question", pool_size=4),
    RetrievalStrategy(kind="only_answer", pool_size=4),
]

DATASET = [
    QAExample(id="e1", question="what about requirement one", reference_answer="It is required. Fully."),
    QAExample(id="e2", question="what about requirement two", reference_answer="Also required."),
]


def test_benchmark_row_count_and_means():
    engine = tiny_engine()
    report, records = run_benchmark(DATASET, STRATEGIES, engine)
    assert len(records) == 4
    for kind in ("only_question", "only_answer"):
        rows = [r for r in records if r.strategy == kind]
        mean = sum(r.context_precision for r in rows) / len(rows)
        assert report.strategies[kind]["context_precision"] == pytest.approx(mean)
        assert report.strategies[kind]["examples"] == 2
    assert report.failed_rows == 0


def test_benchmark_metrics_in_unit_range():
    engine = tiny_engine()
    _, records = run_benchmark(DATASET, STRATEGIES, engine)
    for r in records:
        for name in ("context_precision", "context_recall", "answer_precision",
                     "answer_recall", "answer_f1"):
            value = getattr(r, name)
            assert value is not None and 0.0 <= value <= 1.0


def test_benchmark_without_answers_omits_answer_metrics():
    engine = tiny_engine()
    _, records = run_benchmark(DATASET, STRATEGIES, engine, generate_answers=False)
    for r in records:
        assert r.generated_answer is None
        assert r.answer_f1 is None
        assert r.context_precision is not None


def test_benchmark_jsonl_deterministic(tmp_path):
    out1 = tmp_path / "run1.jsonl"
    out2 = tmp_path / "run2.jsonl"
    run_benchmark(DATASET, STRATEGIES, tiny_engine(), records_path=out1)
    run_benchmark(DATASET, STRATEGIES, tiny_engine(), records_path=out2)
    assert out1.read_bytes() == out2.read_bytes()
    rows = [json.loads(line) for line in out1.read_text().splitlines()]
    assert [(r["example_id"], r["strategy"]) for r in rows] == [
        ("e1", "only_question"), ("e1", "only_answer"),
        ("e2", "only_question"), ("e2", "only_answer"),
    ]


def test_benchmark_records_row_failures():
    engine = tiny_engine()

    calls = {"n": 0}

    def flaky(messages):
        calls["n"] += 1
        raise_for = calls["n"] == 1
        if raise_for:
            from qarag.errors import EndpointUnavailableError

            raise EndpointUnavailableError("endpoint unavailable")
        return "ECHO:" + messages[-1].content

    engine.gateway.tuned = FunctionGenerator(flaky)
    report, records = run_benchmark(DATASET, STRATEGIES, engine)
    failed = [r for r in records if r.error is not None]
    assert len(failed) == 1
    assert report.failed_rows == 1
    assert report.strategies["only_answer"]["examples"] == 1


def test_benchmark_degraded_raises():
    engine = tiny_engine()

    class AlwaysFailing:
        def generate(self, messages):
            from qarag.errors import EndpointUnavailableError

            raise EndpointUnavailableError("endpoint unavailable")

    engine.gateway.tuned = AlwaysFailing()
    only_answer = [RetrievalStrategy(kind="only_answer", pool_size=4)]
    with pytest.raises(BenchmarkDegradedError) as err:
        run_benchmark(DATASET, only_answer, engine)
    assert err.value.report.failed_rows == 2


def test_report_table_renders_all_strategies():
    report, _ = run_benchmark(DATASET, STRATEGIES, tiny_engine())
    table = render_report_table(report)
    assert "only_question" in table
    assert "only_answer" in table
    assert "context_precision" in table
