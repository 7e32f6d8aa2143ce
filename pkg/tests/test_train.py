import numpy as np
import pytest

from ensembleseed.decode import IllegalPathError, StatePath
from ensembleseed.kmers import encode_kmer
from ensembleseed.train import (
    TransitionCounts,
    count_transitions,
    estimate_transitions,
    infer_orders,
    load_transition_model,
    save_transition_model,
)


def kpath(*kmers):
    return np.array([encode_kmer(s) for s in kmers], dtype=np.int64)


def test_infer_orders():
    states = kpath("ACG", "ACG", "CGT", "GTA", "ACC")
    np.testing.assert_array_equal(infer_orders(states, 3, 2), [0, 1, 1, 2])


def test_infer_orders_flags_unreachable():
    states = kpath("AAA", "TTT")
    np.testing.assert_array_equal(infer_orders(states, 3, 2), [-1])


class TestCountTransitions:
    def test_per_order(self):
        paths = [
            kpath("ACG", "ACG", "CGT", "TAC"),
            StatePath(kpath("AAA", "AAC"), 0.0),
        ]
        counts = count_transitions(paths, 3, max_shift=2, mode="per-order")
        assert counts.counts == {0: 1, 1: 2, 2: 1}
        assert counts.total == 4

    def test_per_transition(self):
        paths = [kpath("AC", "CT", "CT", "AC", "CT")]
        counts = count_transitions(paths, 2, max_shift=2, mode="per-transition")
        ac, ct = encode_kmer("AC"), encode_kmer("CT")
        assert counts.counts == {(ac, ct): 2, (ct, ct): 1, (ct, ac): 1}

    def test_illegal_pair_is_reported_with_position(self):
        paths = [kpath("AAA", "AAA", "TTT")]
        with pytest.raises(IllegalPathError, match=r"path 0, events 1\.\.2"):
            count_transitions(paths, 3, max_shift=2)

    def test_out_of_range_codes(self):
        with pytest.raises(IllegalPathError, match="out of range"):
            count_transitions([np.array([0, 99])], 2)

    def test_single_event_paths_contribute_nothing(self):
        counts = count_transitions([np.array([5])], 2, max_shift=1)
        assert counts.total == 0


def test_counts_add():
    a = TransitionCounts(3, 2, "per-order", {0: 1, 1: 4})
    b = TransitionCounts(3, 2, "per-order", {1: 1, 2: 2})
    merged = a + b
    assert merged.counts == {0: 1, 1: 5, 2: 2}
    with pytest.raises(ValueError, match="matching"):
        a + TransitionCounts(3, 1, "per-order", {})
    with pytest.raises(ValueError, match="matching"):
        a + TransitionCounts(3, 2, "per-transition", {})


def test_counts_validation():
    with pytest.raises(ValueError, match="non-negative"):
        TransitionCounts(2, 1, "per-order", {0: -1})
    with pytest.raises(ValueError, match="unknown mode"):
        TransitionCounts(2, 1, "sideways")
    with pytest.raises(ValueError, match="max_shift"):
        TransitionCounts(2, 3, "per-order")


class TestEstimate:
    def test_per_order_formula(self):
        counts = TransitionCounts(3, 2, "per-order", {0: 2, 1: 6, 2: 0})
        model = estimate_transitions(counts, pseudocount=1)
        # 21 out-edges per state: 1 split + 4 moves + 16 skips
        np.testing.assert_allclose(model.order_probs, [3 / 29, 10 / 29, 16 / 29])

    def test_zero_data_gives_uniform_edges(self):
        model = estimate_transitions(TransitionCounts(2, 2, "per-order"), pseudocount=1)
        np.testing.assert_allclose(model.order_probs, [1 / 21, 4 / 21, 16 / 21])
        flat = estimate_transitions(
            count_transitions([], 2, max_shift=2, mode="per-transition"), pseudocount=1
        )
        np.testing.assert_allclose(flat.tables[0], 1 / 21)
        np.testing.assert_allclose(flat.tables[1], 1 / 21)
        np.testing.assert_allclose(flat.tables[2], 1 / 21)

    def test_per_transition_rows(self):
        ac, ct = encode_kmer("AC"), encode_kmer("CT")
        counts = TransitionCounts(2, 1, "per-transition", {(ac, ct): 3, (ac, ac): 1})
        model = estimate_transitions(counts, pseudocount=1)
        # AC row: 5 edges (1 split + 4 moves), 4 observations, denominator 9
        assert model.tables[0][ac] == pytest.approx(2 / 9)
        assert model.tables[1][ac, ct & 3] == pytest.approx(4 / 9)
        np.testing.assert_allclose(model.row_sums(), 1.0)

    def test_zero_pseudocount_requires_support_everywhere(self):
        ac, ct = encode_kmer("AC"), encode_kmer("CT")
        counts = TransitionCounts(2, 1, "per-transition", {(ac, ct): 3})
        with pytest.raises(ValueError, match="zero row"):
            estimate_transitions(counts, pseudocount=0)

    def test_zero_pseudocount_zero_data_per_order(self):
        with pytest.raises(ValueError, match="pseudocount 0"):
            estimate_transitions(TransitionCounts(2, 1, "per-order"), pseudocount=0)

    def test_negative_pseudocount(self):
        with pytest.raises(ValueError, match=">= 0"):
            estimate_transitions(TransitionCounts(2, 1, "per-order"), pseudocount=-1)


class TestModelFiles:
    def test_per_order_round_trip(self, tmp_path):
        counts = TransitionCounts(3, 2, "per-order", {0: 17, 1: 160, 2: 23})
        model = estimate_transitions(counts, pseudocount=1)
        path = tmp_path / "trans.tsv"
        save_transition_model(path, model, pseudocount=1)
        first = path.read_text().splitlines()[0]
        assert first == "# k=3 max_shift=2 mode=per-order pseudocount=1"
        back = load_transition_model(path)
        assert back.mode == "per-order"
        np.testing.assert_array_equal(back.order_probs, model.order_probs)

    def test_per_transition_round_trip_preserves_aggregates(self, tmp_path):
        rng = np.random.default_rng(4)
        pairs = {}
        for _ in range(50):
            src = int(rng.integers(0, 16))
            j = int(rng.integers(0, 3))
            tgt = (src % 4 ** (2 - j)) * 4**j + int(rng.integers(0, 4**j))
            pairs[(src, tgt)] = pairs.get((src, tgt), 0) + int(rng.integers(1, 9))
        model = estimate_transitions(
            TransitionCounts(2, 2, "per-transition", pairs), pseudocount=1
        )
        path = tmp_path / "trans.tsv"
        save_transition_model(path, model, pseudocount=1)
        back = load_transition_model(path)
        assert back.mode == "per-transition"
        # state-to-state totals survive even though order bookkeeping may not
        np.testing.assert_allclose(
            back.aggregate_matrix().toarray(),
            model.aggregate_matrix().toarray(),
            rtol=0,
            atol=1e-17,
        )

    def test_load_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("order\tprob\n0\t0.5\n1\t0.5\n")
        with pytest.raises(ValueError, match="metadata"):
            load_transition_model(path)

    def test_load_rejects_missing_order(self, tmp_path):
        path = tmp_path / "gap.tsv"
        path.write_text(
            "# k=2 max_shift=1 mode=per-order pseudocount=1\norder\tprob\n0\t1.0\n"
        )
        with pytest.raises(ValueError):
            load_transition_model(path)
