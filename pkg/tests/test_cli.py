import json

import pytest

from ensembleseed.cli import main
from ensembleseed.evaluate import load_report
from ensembleseed.simulate import load_truth


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """simulate -> train -> basecall on a corpus small enough for one test run."""
    root = tmp_path_factory.mktemp("pipeline")
    sim = root / "sim"
    assert run_cli(
        "simulate", "--model-k", 3, "--ref-length", 5000, "--reads", 6,
        "--events-per-read", 120, "--seed", 99, "--out-dir", sim,
    ) == 0
    train = root / "train"
    assert run_cli(
        "train", "--model-k", 3, "--source", "truth",
        "--true-paths", sim / "true_paths.jsonl", "--out-dir", train,
    ) == 0
    calls = root / "calls"
    assert run_cli(
        "basecall", "--model-k", 3, "--events", sim / "events.jsonl",
        "--pore-model", sim / "pore_model.tsv", "--n", 3, "--seed", 7,
        "--out-dir", calls,
    ) == 0
    return root, sim, train, calls


def test_simulate_outputs(pipeline):
    _, sim, _, _ = pipeline
    for name in (
        "reference.fasta", "pore_model.tsv", "events.jsonl",
        "truth.tsv", "true_paths.jsonl", "simulate_config.json",
    ):
        assert (sim / name).exists(), name
    truth = load_truth(sim / "truth.tsv")
    assert len(truth) == 6
    config = json.loads((sim / "simulate_config.json").read_text())
    assert config["seed"] == 99
    assert config["model_k"] == 3


def test_train_outputs(pipeline):
    _, _, train, _ = pipeline
    text = (train / "transitions.tsv").read_text().splitlines()
    assert text[0].startswith("# k=3 max_shift=2 mode=per-order")
    assert text[1] == "order\tprob"


def test_basecall_outputs(pipeline):
    _, _, _, calls = pipeline
    fasta = (calls / "basecalls.fasta").read_text()
    assert fasta.count(">") == 6 * 4  # viterbi + 3 samples per read
    assert "viterbi" in fasta
    assert (calls / "spans.jsonl").exists()


def test_eval_and_report(pipeline, tmp_path):
    root, sim, _, calls = pipeline
    out = tmp_path / "eval"
    assert run_cli(
        "eval", "--model-k", 3, "--reference", sim / "reference.fasta",
        "--basecalls", calls / "basecalls.fasta", "--spans", calls / "spans.jsonl",
        "--truth", sim / "truth.tsv", "--true-paths", sim / "true_paths.jsonl",
        "--window", 60, "--seed-k", 6, "--t", "1,2", "--n", "1,3",
        "--out-dir", out,
    ) == 0
    rows = load_report(out / "report.tsv")
    # 4 strategies x 2 thresholds x 2 sample counts
    assert len(rows) == 16
    labels = {r.strategy for r in rows}
    assert labels == {"single-kmer", "chain", "single-kmer-viterbi", "chain-viterbi"}

    points = tmp_path / "points"
    assert run_cli("report", "--report", out / "report.tsv", "--out-dir", points) == 0
    produced = sorted(p.name for p in points.glob("points_*.tsv"))
    assert len(produced) == 8  # one file per (strategy, t)
    assert any("single-kmer_t1" in name for name in produced)


def test_eval_reruns_are_byte_identical(pipeline, tmp_path):
    _, sim, _, calls = pipeline
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run_cli(
            "eval", "--model-k", 3, "--reference", sim / "reference.fasta",
            "--basecalls", calls / "basecalls.fasta", "--spans", calls / "spans.jsonl",
            "--truth", sim / "truth.tsv", "--true-paths", sim / "true_paths.jsonl",
            "--window", 60, "--seed-k", 5, "--n", "1,2", "--out-dir", out,
        ) == 0
        outs.append((out / "report.tsv").read_bytes())
    assert outs[0] == outs[1]


def test_simulate_threads_do_not_change_outputs(tmp_path):
    digests = []
    for threads in (1, 2):
        out = tmp_path / f"t{threads}"
        assert run_cli(
            "simulate", "--model-k", 3, "--ref-length", 3000, "--reads", 4,
            "--events-per-read", 60, "--seed", 5, "--threads", threads,
            "--out-dir", out,
        ) == 0
        digests.append(
            ((out / "events.jsonl").read_bytes(), (out / "truth.tsv").read_bytes())
        )
    assert digests[0] == digests[1]


def test_missing_input_fails_with_diagnostic(tmp_path, capsys):
    rc = run_cli(
        "train", "--source", "truth",
        "--true-paths", tmp_path / "nope.jsonl", "--out-dir", tmp_path / "out",
    )
    assert rc == 2
    err = capsys.readouterr().err
    assert "ensembleseed train" in err


def test_malformed_truth_fails_cleanly(pipeline, tmp_path, capsys):
    _, sim, _, calls = pipeline
    bad = tmp_path / "truth.tsv"
    bad.write_text("not\ta\theader\n")
    rc = run_cli(
        "eval", "--model-k", 3, "--reference", sim / "reference.fasta",
        "--basecalls", calls / "basecalls.fasta", "--spans", calls / "spans.jsonl",
        "--truth", bad, "--true-paths", sim / "true_paths.jsonl",
        "--out-dir", tmp_path / "out",
    )
    assert rc == 2
    assert "ensembleseed eval" in capsys.readouterr().err


def test_invalid_model_configuration_rejected(tmp_path, capsys):
    rc = run_cli(
        "simulate", "--model-k", 1, "--max-shift", 2,
        "--ref-length", 1000, "--reads", 1, "--events-per-read", 10,
        "--out-dir", tmp_path / "out",
    )
    assert rc == 2
    assert "ensembleseed simulate" in capsys.readouterr().err


def test_train_viterbi_source(pipeline, tmp_path):
    _, sim, _, _ = pipeline
    out = tmp_path / "trained"
    assert run_cli(
        "train", "--model-k", 3, "--source", "viterbi",
        "--events", sim / "events.jsonl", "--pore-model", sim / "pore_model.tsv",
        "--mode", "per-transition", "--out-dir", out,
    ) == 0
    text = (out / "transitions.tsv").read_text().splitlines()
    assert text[0].startswith("# k=3 max_shift=2 mode=per-transition")
    assert text[1] == "source_kmer\ttarget_kmer\tprob"


def test_train_viterbi_source_requires_events(tmp_path, capsys):
    rc = run_cli("train", "--source", "viterbi", "--out-dir", tmp_path / "x")
    assert rc == 2
    assert "ensembleseed train" in capsys.readouterr().err
