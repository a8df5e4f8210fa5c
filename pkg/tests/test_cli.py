"""CLI behavior: exit codes, output shapes, reproducible ingest."""

import json

import pytest
from click.testing import CliRunner

from qarag.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def write_corpus(tmp_path, n=4):
    root = tmp_path / "docs"
    root.mkdir(exist_ok=True)
    for i in range(n):
        (root / f"g{i}.txt").write_text(f"guideline {i} body requirement text", "utf-8")
    return root


def write_config(tmp_path):
    config = tmp_path / "config.toml"
    config.write_text(
        '[gateway]\nmode = "mock"\nseed = 11\ndimension = 16\n', encoding="utf-8"
    )
    return config


def write_dataset(tmp_path, n=2):
    path = tmp_path / "ds.jsonl"
    rows = [
        json.dumps({"id": f"e{i}", "question": f"question {i}", "answer": f"answer {i}."})
        for i in range(n)
    ]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path


def test_ingest_prints_counts_and_creates_index(runner, tmp_path):
    corpus = write_corpus(tmp_path, n=2)
    config = write_config(tmp_path)
    index = tmp_path / "i.idx"
    result = runner.invoke(
        main, ["ingest", "--corpus", str(corpus), "--index", str(index), "--config", str(config)]
    )
    assert result.exit_code == 0, result.output
    assert "documents: 2" in result.output
    assert index.exists()
    assert index.with_name("i.idx.manifest.json").exists()
    assert index.with_name("i.idx.chunks.jsonl").exists()


def test_ingest_missing_dir_exits_1(runner, tmp_path):
    result = runner.invoke(
        main,
        ["ingest", "--corpus", str(tmp_path / "nope"), "--index", str(tmp_path / "i.idx")],
    )
    assert result.exit_code == 1


def test_ingest_rerun_produces_identical_index_bytes(runner, tmp_path):
    corpus = write_corpus(tmp_path)
    config = write_config(tmp_path)
    index1 = tmp_path / "one.idx"
    index2 = tmp_path / "two.idx"
    for index in (index1, index2):
        result = runner.invoke(
            main,
            ["ingest", "--corpus", str(corpus), "--index", str(index), "--config", str(config)],
        )
        assert result.exit_code == 0
    assert index1.read_bytes() == index2.read_bytes()


def ingested(runner, tmp_path, n=8):
    corpus = write_corpus(tmp_path, n=n)
    config = write_config(tmp_path)
    index = tmp_path / "i.idx"
    runner.invoke(
        main, ["ingest", "--corpus", str(corpus), "--index", str(index), "--config", str(config)]
    )
    return config, index


def test_ask_prints_answer(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    result = runner.invoke(
        main,
        ["ask", "--question", "what is required", "--index", str(index), "--config", str(config)],
    )
    assert result.exit_code == 0, result.output
    assert "ECHO:" in result.output


def test_ask_without_index_exits_1(runner, tmp_path):
    result = runner.invoke(main, ["ask", "--question", "q"])
    assert result.exit_code == 1
    assert "ingest" in result.output


def test_ask_hyde_notes_hypothetical_passage(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    result = runner.invoke(
        main,
        [
            "ask", "--question", "q", "--strategy", "hyde",
            "--index", str(index), "--config", str(config),
        ],
    )
    assert result.exit_code == 0
    assert "1 hypothetical text(s)" in result.output


def test_ask_show_contexts_prints_top_n_blocks(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    result = runner.invoke(
        main,
        [
            "ask", "--question", "q", "--show-contexts", "--top-n", "3",
            "--index", str(index), "--config", str(config),
        ],
    )
    assert result.exit_code == 0
    assert result.output.count("score=") == 3


def test_ask_verbose_prints_effective_config(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    result = runner.invoke(
        main,
        [
            "ask", "--question", "q", "--verbose", "--pool-size", "8",
            "--question-share", "4", "--scorer", "llm_agent",
            "--index", str(index), "--config", str(config),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "pool_size=8" in result.output
    assert "question_share=4" in result.output
    assert "scorer=llm_agent" in result.output


def test_ask_json_output(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    result = runner.invoke(
        main,
        ["ask", "--question", "q", "--json", "--index", str(index), "--config", str(config)],
    )
    assert result.exit_code == 0
    body = json.loads(result.output)
    assert set(body) == {"answer", "strategy", "contexts", "hypothetical_texts", "timings_ms"}
    assert len(body["contexts"]) == 6


def test_eval_renders_table_with_five_strategies(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    dataset = write_dataset(tmp_path)
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "eval", "--dataset", str(dataset), "--out", str(out),
            "--index", str(index), "--config", str(config),
        ],
    )
    assert result.exit_code == 0, result.output
    for kind in ("dual_track", "only_question", "only_answer", "multiquery", "hyde"):
        assert kind in result.output
    assert (out / "report.json").exists()
    assert (out / "records.jsonl").exists()
    assert (out / "report.txt").exists()
    assert len((out / "records.jsonl").read_text().splitlines()) == 10


def test_eval_bad_dataset_line_exits_1_with_line_number(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    dataset = tmp_path / "ds.jsonl"
    dataset.write_text(
        '{"id": "1", "question": "q", "answer": "a"}\n'
        '{"id": "2", "question": "q", "answer": "a"}\n'
        "}{ not json\n",
        encoding="utf-8",
    )
    result = runner.invoke(
        main,
        [
            "eval", "--dataset", str(dataset), "--out", str(tmp_path / "out"),
            "--index", str(index), "--config", str(config),
        ],
    )
    assert result.exit_code == 1
    assert "line 3" in result.output


def test_eval_unknown_strategy_is_usage_error(runner, tmp_path):
    config, index = ingested(runner, tmp_path)
    result = runner.invoke(
        main,
        [
            "eval", "--dataset", "x", "--out", str(tmp_path / "o"),
            "--strategies", "bm25", "--index", str(index), "--config", str(config),
        ],
    )
    assert result.exit_code == 2


def test_usage_error_exit_code(runner):
    assert runner.invoke(main, ["ask"]).exit_code == 2  # missing --question
    assert runner.invoke(main, ["nonsense"]).exit_code == 2


def test_serve_exits_cleanly_on_sigterm(tmp_path):
    import signal
    import socket
    import subprocess
    import sys
    import time

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]

    config = tmp_path / "serve.toml"
    config.write_text(
        f'listen = "127.0.0.1:{port}"\n[gateway]\nmode = "mock"\ndimension = 8\n',
        encoding="utf-8",
    )
    process = subprocess.Popen(
        [sys.executable, "-m", "qarag.cli", "serve", "--config", str(config)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    try:
        deadline = time.time() + 15
        while time.time() < deadline:
            try:
                with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                    break
            except OSError:
                time.sleep(0.1)
        else:
            pytest.fail("server did not start listening")
        process.send_signal(signal.SIGTERM)
        assert process.wait(timeout=15) == 0
    finally:
        if process.poll() is None:
            process.kill()
