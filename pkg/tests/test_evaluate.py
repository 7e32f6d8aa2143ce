import numpy as np
import pytest

from _oracles import edit_distance
from ensembleseed.decode import BaseCall, ReadEnsemble, StatePath, path_to_sequence
from ensembleseed.evaluate import (
    CHAIN_10,
    SINGLE_13,
    SINGLE_13_VITERBI,
    EvalRow,
    StrategyConfig,
    alignment_identity,
    build_windows,
    evaluate,
    greedy_dedup,
    is_valid_hit,
    levenshtein,
    load_report,
    sweep,
    window_points,
    window_truth_set,
    write_points,
    write_report,
)
from ensembleseed.kmers import reverse_complement
from ensembleseed.pore_model import make_hmm
from ensembleseed.seeding import SeedHit, build_index
from ensembleseed.simulate import simulate_corpus, synthetic_pore_model


def tiny_ensemble():
    """Three k=1 events with a two-base second event in the sample call."""
    viterbi = BaseCall("ACG", [(0, 1), (1, 1), (2, 1)])
    sample = BaseCall("ATTG", [(0, 1), (1, 2), (3, 1)])
    ensemble = ReadEnsemble("r0", viterbi, [sample])
    true_path = StatePath(np.array([0, 1, 2]), 0.0)
    return ensemble, true_path


class TestBuildWindows:
    def test_padding_and_offsets(self):
        ensemble, true_path = tiny_ensemble()
        (win,) = build_windows(ensemble, ("ref", 50, 53, "+"), true_path, 1, window_size=3)
        assert win.viterbi_row == "AC-G"
        assert win.sample_rows == ["ATTG"]
        np.testing.assert_array_equal(win.event_offsets, [0, 1, 3, 4])
        assert win.truth == (50, 53, "+")
        assert win.window_id == "r0:0"
        assert win.event_range == (0, 3)

    def test_partial_trailing_window_is_dropped(self):
        ensemble, true_path = tiny_ensemble()
        wins = build_windows(ensemble, ("ref", 50, 53, "+"), true_path, 1, window_size=2)
        assert len(wins) == 1
        assert wins[0].event_range == (0, 2)

    def test_span_count_mismatch_rejected(self):
        ensemble, true_path = tiny_ensemble()
        ensemble.samples[0] = BaseCall("AT", [(0, 1), (1, 1)])
        with pytest.raises(ValueError, match="event spans"):
            build_windows(ensemble, ("ref", 50, 53, "+"), true_path, 1, window_size=3)

    @pytest.mark.parametrize("strand", ["+", "-"])
    def test_truth_intervals_cover_window_kmers(self, strand):
        """Window truth must quote exactly the reference bases of its events."""
        hmm = make_hmm(synthetic_pore_model(3, seed=19))
        ref, reads = simulate_corpus(
            hmm, reference_length=5000, read_count=6, events_per_read=90, seed=61
        )
        reads = [r for r in reads if r.truth[3] == strand]
        assert reads, "corpus should carry both strands"
        for read in reads:
            call = path_to_sequence(read.true_path, 3)
            # An event's 3-mer ends where its contribution ends (splits
            # contribute nothing and re-read the 3-mer already in place).
            ends = [off + ln for off, ln in call.event_spans]
            ens = ReadEnsemble(read.read_id, call, [])
            for win in build_windows(ens, read.truth, read.true_path, 3, window_size=30):
                a, b = win.event_range
                ws, we, s = win.truth
                assert s == strand
                piece = read.true_sequence[ends[a] - 3 : ends[b - 1]]
                if strand == "+":
                    assert ref[ws:we] == piece
                else:
                    assert reverse_complement(ref[ws:we]) == piece


def test_window_truth_set():
    ensemble, true_path = tiny_ensemble()
    wins = build_windows(ensemble, ("ref", 50, 53, "+"), true_path, 1, window_size=3)
    assert window_truth_set(wins) == {"r0:0": (50, 53, "+")}


def test_is_valid_hit():
    truth = (100, 110, "+")
    assert is_valid_hit(SeedHit(0, 100, "+"), truth)
    assert is_valid_hit(SeedHit(0, 109, "+"), truth)
    assert not is_valid_hit(SeedHit(0, 110, "+"), truth)  # half-open end
    assert not is_valid_hit(SeedHit(0, 99, "+"), truth)
    assert not is_valid_hit(SeedHit(0, 105, "-"), truth)  # wrong strand


class TestGreedyDedup:
    def test_collinear_cluster(self):
        kept = greedy_dedup([(0, 0), (5, 5), (20, 20)], radius=10)
        assert kept == [(0, 0), (20, 20)]

    def test_both_coordinates_must_be_close(self):
        # second coordinate far apart: no suppression
        assert len(greedy_dedup([(0, 0), (5, 500)], radius=10)) == 2

    def test_input_order_does_not_matter(self):
        pts = [(20, 20), (0, 0), (5, 5)]
        assert greedy_dedup(pts, radius=10) == [(0, 0), (20, 20)]

    def test_accepts_seed_hits(self):
        pts = [SeedHit(0, 0, "+"), SeedHit(5, 5, "-"), SeedHit(20, 20, "+")]
        kept = greedy_dedup(pts, radius=10)
        assert len(kept) == 2  # strand plays no role in clustering

    def test_zero_radius(self):
        pts = [(1, 1), (1, 1), (2, 1)]
        assert len(greedy_dedup(pts, radius=0)) == 2

    def test_negative_radius(self):
        with pytest.raises(ValueError):
            greedy_dedup([], radius=-1)


def test_eval_row_validation():
    with pytest.raises(ValueError):
        EvalRow("s", 13, 1, 1, 0, 10, 1.5, 0)
    with pytest.raises(ValueError):
        EvalRow("s", 13, 1, 1, 0, 10, 0.0, -2)


def test_strategy_labels():
    assert SINGLE_13.label == "single-kmer"
    assert CHAIN_10.label == "chain"
    assert SINGLE_13_VITERBI.label == "single-kmer-viterbi"
    assert StrategyConfig(kind="chain", seed_k=10, use_viterbi=True).label == "chain-viterbi"
    with pytest.raises(ValueError):
        StrategyConfig(kind="top", seed_k=5)


@pytest.fixture(scope="module")
def scored_corpus():
    """A small end-to-end corpus where the true path itself is the only call."""
    hmm = make_hmm(synthetic_pore_model(3, seed=29))
    ref, reads = simulate_corpus(
        hmm, reference_length=6000, read_count=8, events_per_read=80, seed=77
    )
    windows = []
    for read in reads:
        call = path_to_sequence(read.true_path, 3)
        ens = ReadEnsemble(read.read_id, call, [call, call])
        windows += build_windows(ens, read.truth, read.true_path, 3, window_size=40)
    return ref, windows


def test_perfect_calls_score_full_sensitivity(scored_corpus):
    ref, windows = scored_corpus
    index = build_index(ref, 13)
    config = StrategyConfig(kind="single", seed_k=13)
    row = evaluate(windows, index, config, t=2, n=2)
    assert row.tp == row.windows == len(windows)
    assert row.sn == 1.0


def test_window_points_viterbi_mode_ignores_samples(scored_corpus):
    ref, windows = scored_corpus
    index = build_index(ref, 13)
    win = windows[0]
    pts = window_points(win, index, SINGLE_13_VITERBI, t=1, n=1)
    assert pts, "true-path viterbi row must hit its own reference"
    for p in pts:
        assert isinstance(p, SeedHit)


def test_sweep_grid_shape_and_degenerate_rows(scored_corpus):
    ref, windows = scored_corpus
    index = build_index(ref, 13)
    config = StrategyConfig(kind="single", seed_k=13)
    rows = sweep(windows, index, config, [1, 2, 3], [0, 1, 2])
    assert len(rows) == 9
    by_key = {(r.t, r.n): r for r in rows}
    for t in (1, 2, 3):
        z = by_key[(t, 0)]
        assert (z.tp, z.sn, z.fp) == (0, 0.0, 0)
    unreachable = by_key[(3, 2)]
    assert (unreachable.tp, unreachable.sn, unreachable.fp) == (0, 0.0, 0)
    assert by_key[(2, 2)].tp > 0


def test_sweep_viterbi_strategy_is_constant_across_grid(scored_corpus):
    ref, windows = scored_corpus
    index = build_index(ref, 13)
    rows = sweep(windows, index, SINGLE_13_VITERBI, [1, 2], [1, 4])
    assert len(rows) == 4
    assert len({(r.tp, r.fp) for r in rows}) == 1
    assert {(r.t, r.n) for r in rows} == {(1, 1), (1, 4), (2, 1), (2, 4)}


def test_report_round_trip(tmp_path):
    rows = [
        EvalRow("single-kmer", 13, 1, 4, 57, 60, 57 / 60, 123),
        EvalRow("chain", 10, 2, 8, 48, 60, 48 / 60, 7),
    ]
    path = tmp_path / "report.tsv"
    write_report(path, rows)
    text = path.read_text().splitlines()
    assert text[0] == "strategy\tk\tt\tn\tTP\twindows\tSn\tFP"
    assert text[1].split("\t")[6] == "0.950"
    back = load_report(path)
    assert back[0].tp == 57 and back[0].sn == 0.950
    assert back[1].strategy == "chain"


def test_write_points(tmp_path):
    rows = [
        EvalRow("single-kmer", 13, 1, 8, 59, 60, 59 / 60, 40),
        EvalRow("single-kmer", 13, 1, 2, 50, 60, 50 / 60, 11),
    ]
    path = tmp_path / "points.tsv"
    write_points(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "FP\tTP"
    assert lines[1] == "11\t50"  # sorted by n
    assert lines[2] == "40\t59"


@pytest.mark.parametrize("seed", range(4))
def test_levenshtein_matches_classic_dp(seed):
    rng = np.random.default_rng(seed)
    a = "".join(rng.choice(list("ACGT"), rng.integers(0, 60)))
    b = "".join(rng.choice(list("ACGT"), rng.integers(0, 60)))
    assert levenshtein(a, b) == edit_distance(a, b)


def test_levenshtein_examples():
    assert levenshtein("kitten", "sitting") == 3
    assert levenshtein("", "abc") == 3
    assert levenshtein("same", "same") == 0


def test_alignment_identity():
    assert alignment_identity("", "") == 1.0
    assert alignment_identity("ACGT", "ACGT") == 1.0
    assert alignment_identity("AAAA", "AAAT") == 0.75
    assert alignment_identity("", "ACGT") == 0.0
