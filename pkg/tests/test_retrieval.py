"""Strategy pool construction: shares, dedup, attribution, failure modes."""

import pytest

from qarag import (
    FunctionGenerator,
    MockEmbedder,
    MockGenerator,
    MockReranker,
    ModelGateway,
    RetrievalStrategy,
    VectorIndex,
    hyde_document,
    hypothetical_answer,
    multiquery_expand,
    retrieve,
)
from qarag.errors import (
    EmptyIndexError,
    EndpointUnavailableError,
    ExpansionParseError,
    GenerationFailedError,
)


def build_index(texts, embedder):
    index = VectorIndex(embedder.dimension)
    for i, (text, vector) in enumerate(zip(texts, embedder.embed_batch(texts))):
        index.add((f"doc{i:02d}", 0), vector)
    return index


@pytest.fixture
def corpus30():
    embedder = MockEmbedder(dimension=32, seed=5)
    texts = [f"guideline chunk number {i} with body text" for i in range(30)]
    index = build_index(texts, embedder)
    gateway = ModelGateway(
        embedder=embedder,
        tuned=MockGenerator("echo"),
        general=MockGenerator("echo"),
        reranker=MockReranker(),
    )
    return index, gateway


# --- generation helpers -------------------------------------------------


def test_hypothetical_answer_echo():
    client = MockGenerator("echo")
    assert hypothetical_answer("What is process validation?", client) == (
        "ECHO:What is process validation?"
    )


def test_hypothetical_answer_keyword():
    canned = "Process validation is documented evidence of consistent manufacture."
    client = MockGenerator("keyword", replies={"validation": canned})
    assert hypothetical_answer("Explain validation requirements", client) == canned


def test_hypothetical_answer_rejects_empty_question():
    with pytest.raises(ValueError):
        hypothetical_answer("  ", MockGenerator("echo"))


def test_hypothetical_answer_failure_tagged():
    class Failing:
        def generate(self, messages):
            raise EndpointUnavailableError("endpoint unavailable after 3 attempts")

    with pytest.raises(GenerationFailedError) as err:
        hypothetical_answer("q", Failing())
    assert err.value.track == "answer"


def test_hyde_document_echo():
    assert hyde_document("what is sterility", MockGenerator("echo")) == "ECHO:what is sterility"


def test_multiquery_parses_numbered_lines():
    client = FunctionGenerator(lambda m: "1. A\n2. B\n3. C")
    assert multiquery_expand("orig question", 3, client) == ["A", "B", "C"]


def test_multiquery_wrong_count_retries_then_errors():
    client = FunctionGenerator(lambda m: "1. only\n2. two lines")
    with pytest.raises(ExpansionParseError):
        multiquery_expand("orig", 3, client)
    assert len(client.calls) == 2  # one retry with the stricter prompt


def test_multiquery_retry_can_recover():
    replies = iter(["no numbering here", "1. X\n2. Y\n3. Z"])
    client = FunctionGenerator(lambda m: next(replies))
    assert multiquery_expand("orig", 3, client) == ["X", "Y", "Z"]


def test_multiquery_variants_distinct_from_original():
    client = FunctionGenerator(lambda m: "1. orig\n2. B\n3. C")
    with pytest.raises(ExpansionParseError):
        multiquery_expand("orig", 3, client)


# --- strategy validation ---------------------------------------------------


def test_strategy_validation():
    with pytest.raises(ValueError):
        RetrievalStrategy(kind="bm25")
    with pytest.raises(ValueError):
        RetrievalStrategy(pool_size=0)
    with pytest.raises(ValueError):
        RetrievalStrategy(question_share=30, pool_size=24)
    with pytest.raises(ValueError):
        RetrievalStrategy(kind="multiquery", pool_size=25, extra_queries=3)
    RetrievalStrategy(kind="multiquery", pool_size=24, extra_queries=3)


# --- retrieve ----------------------------------------------------------------


def test_dual_track_disjoint_pool_of_24(corpus30):
    index, gateway = corpus30
    pool = retrieve("what does chunk seven say", RetrievalStrategy(), index, gateway)
    assert len(pool.candidates) <= 24
    question_hits = [c for c in pool.candidates if c.source_track == "question"]
    answer_hits = [c for c in pool.candidates if c.source_track == "answer"]
    assert len(question_hits) <= 12
    assert len(answer_hits) <= 12
    assert len(pool.hypothetical_texts) == 1
    assert pool.hypothetical_texts[0].startswith("ECHO:")


def test_dual_track_identical_tracks_dedupe():
    # A tuned mock that answers with the question itself makes both tracks
    # embed the same text, so the pools fully overlap.
    embedder = MockEmbedder(dimension=16, seed=9)
    texts = [f"chunk {i}" for i in range(30)]
    index = build_index(texts, embedder)
    gateway = ModelGateway(
        embedder=embedder,
        tuned=FunctionGenerator(lambda m: m[-1].content),
        general=MockGenerator("echo"),
        reranker=MockReranker(),
    )
    pool = retrieve("identical probe", RetrievalStrategy(), index, gateway)
    assert len(pool.candidates) == 12
    assert all(c.source_track == "question" for c in pool.candidates)


def test_pool_never_exceeds_pool_size(corpus30):
    index, gateway = corpus30
    for kind in ("dual_track", "only_question", "only_answer", "hyde"):
        pool = retrieve("q text", RetrievalStrategy(kind=kind), index, gateway)
        assert len(pool.candidates) <= 24
        assert len(set(pool.keys())) == len(pool.candidates)


def test_only_question_full_pool(corpus30):
    index, gateway = corpus30
    pool = retrieve("q text", RetrievalStrategy(kind="only_question"), index, gateway)
    assert len(pool.candidates) == 24
    assert all(c.source_track == "question" for c in pool.candidates)
    assert pool.hypothetical_texts == []


def test_only_answer_tracks_and_audit(corpus30):
    index, gateway = corpus30
    pool = retrieve("q text", RetrievalStrategy(kind="only_answer"), index, gateway)
    assert all(c.source_track == "answer" for c in pool.candidates)
    assert pool.hypothetical_texts == ["ECHO:q text"]


def test_hyde_uses_general_endpoint(corpus30):
    index, _ = corpus30
    general = FunctionGenerator(lambda m: "a web-search style passage")
    tuned = FunctionGenerator(lambda m: pytest.fail("tuned endpoint must not be called"))
    gateway = ModelGateway(
        embedder=MockEmbedder(dimension=32, seed=5),
        tuned=tuned,
        general=general,
        reranker=MockReranker(),
    )
    pool = retrieve("q text", RetrievalStrategy(kind="hyde"), index, gateway)
    assert all(c.source_track == "hyde_doc" for c in pool.candidates)
    assert pool.hypothetical_texts == ["a web-search style passage"]
    assert len(general.calls) == 1


def test_multiquery_shares_and_attribution(corpus30):
    index, _ = corpus30
    expansion = FunctionGenerator(
        lambda m: "1. variant one\n2. variant two\n3. variant three"
    )
    gateway = ModelGateway(
        embedder=MockEmbedder(dimension=32, seed=5),
        tuned=MockGenerator("echo"),
        general=MockGenerator("echo"),
        expansion=expansion,
        reranker=MockReranker(),
    )
    strategy = RetrievalStrategy(kind="multiquery", pool_size=24, extra_queries=3)
    pool = retrieve("original q", strategy, index, gateway)
    assert len(pool.candidates) <= 24
    tracks = {"question", "query_variant_1", "query_variant_2", "query_variant_3"}
    per_track: dict[str, int] = {}
    for c in pool.candidates:
        assert c.source_track in tracks
        per_track[c.source_track] = per_track.get(c.source_track, 0) + 1
    assert all(count <= 6 for count in per_track.values())
    assert pool.hypothetical_texts == ["variant one", "variant two", "variant three"]


def test_multiquery_matches_single_track_replay(corpus30):
    """Every candidate's track correctly identifies the query that found it."""
    index, _ = corpus30
    embedder = MockEmbedder(dimension=32, seed=5)
    variants = ["variant one", "variant two", "variant three"]
    gateway = ModelGateway(
        embedder=embedder,
        tuned=MockGenerator("echo"),
        general=MockGenerator("echo"),
        expansion=FunctionGenerator(lambda m: "1. variant one\n2. variant two\n3. variant three"),
        reranker=MockReranker(),
    )
    strategy = RetrievalStrategy(kind="multiquery", pool_size=24, extra_queries=3)
    pool = retrieve("original q", strategy, index, gateway)

    # Replay each track's search independently through the raw index.
    track_hits = {}
    for name, text in [("question", "original q")] + [
        (f"query_variant_{i}", v) for i, v in enumerate(variants, 1)
    ]:
        vector = embedder.embed_batch([text])[0]
        track_hits[name] = {h.key: h.similarity for h in index.search_top_k(vector, 6)}

    for candidate in pool.candidates:
        assert candidate.key in track_hits[candidate.source_track]
        best = max(
            sims[candidate.key] for sims in track_hits.values() if candidate.key in sims
        )
        assert candidate.similarity == pytest.approx(best, abs=1e-12)


def test_dedup_keeps_higher_similarity():
    # Two tracks retrieve the same key with different similarities: the
    # candidate must carry the higher one and the first track's position.
    embedder = MockEmbedder(dimension=16, seed=13)
    texts = [f"c{i}" for i in range(4)]
    index = build_index(texts, embedder)
    gateway = ModelGateway(
        embedder=embedder,
        tuned=FunctionGenerator(lambda m: texts[0]),  # answer == chunk 0's text
        general=MockGenerator("echo"),
        reranker=MockReranker(),
    )
    strategy = RetrievalStrategy(pool_size=4, question_share=2)
    pool = retrieve("some unrelated question", strategy, index, gateway)
    by_key = {c.key: c for c in pool.candidates}
    target = by_key[("doc00", 0)]
    assert target.similarity == pytest.approx(1.0, abs=1e-6)
    assert target.source_track == "answer"


def test_ablation_share_extremes_match_single_track(corpus30):
    index, gateway = corpus30
    question = "the ablation probe"
    dual_all_question = retrieve(
        question, RetrievalStrategy(question_share=24), index, gateway
    )
    only_question = retrieve(
        question, RetrievalStrategy(kind="only_question"), index, gateway
    )
    assert dual_all_question.candidates == only_question.candidates
    assert dual_all_question.hypothetical_texts == []

    dual_all_answer = retrieve(
        question, RetrievalStrategy(question_share=0), index, gateway
    )
    only_answer = retrieve(
        question, RetrievalStrategy(kind="only_answer"), index, gateway
    )
    assert dual_all_answer.candidates == only_answer.candidates
    assert dual_all_answer.hypothetical_texts == only_answer.hypothetical_texts


def test_share_24_never_calls_tuned_generator(corpus30):
    index, _ = corpus30
    tuned = FunctionGenerator(lambda m: pytest.fail("tuned must not be called"))
    gateway = ModelGateway(
        embedder=MockEmbedder(dimension=32, seed=5),
        tuned=tuned,
        general=MockGenerator("echo"),
        reranker=MockReranker(),
    )
    retrieve("q", RetrievalStrategy(question_share=24), index, gateway)
    assert tuned.calls == []


def test_retrieve_deterministic(corpus30):
    index, gateway = corpus30
    a = retrieve("repeatable question", RetrievalStrategy(), index, gateway)
    b = retrieve("repeatable question", RetrievalStrategy(), index, gateway)
    assert a.candidates == b.candidates
    assert a.hypothetical_texts == b.hypothetical_texts


def test_empty_index_rejected(mock_gateway):
    with pytest.raises(EmptyIndexError):
        retrieve("q", RetrievalStrategy(), VectorIndex(32), mock_gateway)


def test_generation_failure_aborts_retrieve(corpus30):
    index, _ = corpus30

    class Failing:
        def generate(self, messages):
            raise EndpointUnavailableError("endpoint unavailable")

    gateway = ModelGateway(
        embedder=MockEmbedder(dimension=32, seed=5),
        tuned=Failing(),
        general=MockGenerator("echo"),
        reranker=MockReranker(),
    )
    with pytest.raises(GenerationFailedError) as err:
        retrieve("q", RetrievalStrategy(), index, gateway)
    assert err.value.track == "answer"
