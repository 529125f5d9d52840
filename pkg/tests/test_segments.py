import numpy as np
import pytest

from dyscut.segments import (
    BoundaryConfig,
    Segment,
    extract_segments,
    label_segments,
    read_segment_records,
    write_segment_records,
)
from dyscut.windows import WindowConfig

WCFG = WindowConfig(0.75, 0.1)


def labels_from_indices(n, dysfluent):
    out = np.zeros(n, dtype=bool)
    out[list(dysfluent)] = True
    return out


class TestExtraction:
    def test_single_run_hand_case(self):
        labels = labels_from_indices(20, [4, 5, 6, 7])
        segs = extract_segments(labels, WCFG, BoundaryConfig(eta_s=0.2))
        assert len(segs) == 1
        assert segs[0].start_s == pytest.approx(0.4)
        assert segs[0].end_s == pytest.approx(1.45)

    def test_no_dysfluent_windows(self):
        assert extract_segments(np.zeros(30, dtype=bool), WCFG) == []

    def test_gap_merge_then_short_removal(self):
        # runs: [4..7] span [0.40, 1.45]; [16..15? nothing]; window 16 alone
        # spans [1.60, 2.35]; gap 1.45->1.60 = 0.15 <= 0.2 so they merge.
        labels = labels_from_indices(40, [4, 5, 6, 7, 16])
        segs = extract_segments(labels, WCFG, BoundaryConfig(eta_s=0.2))
        assert len(segs) == 1
        assert segs[0].start_s == pytest.approx(0.4)
        assert segs[0].end_s == pytest.approx(2.35)

    def test_short_segment_removed(self):
        cfg = WindowConfig(0.15, 0.15)  # non-overlapping short windows
        labels = labels_from_indices(30, [2, 3, 4, 5, 20])
        segs = extract_segments(labels, cfg, BoundaryConfig(eta_s=0.2))
        # run [2..5] spans 0.6s (kept); lone window 20 spans 0.15s <= eta (dropped)
        assert len(segs) == 1
        assert segs[0].duration_s == pytest.approx(0.6)

    def test_filter_before_merge_order_flag(self):
        cfg = WindowConfig(0.15, 0.15)
        labels = labels_from_indices(30, [2, 3, 4, 5, 7, 8, 9, 10])
        # runs [2..5] and [7..10], gap = 0.15 <= eta 0.2
        merged_first = extract_segments(labels, cfg, BoundaryConfig(0.2, merge_before_filter=True))
        assert len(merged_first) == 1
        # same config, one lone window between long runs
        labels2 = labels_from_indices(30, [2, 3, 4, 5, 7])
        a = extract_segments(labels2, cfg, BoundaryConfig(0.2, merge_before_filter=True))
        b = extract_segments(labels2, cfg, BoundaryConfig(0.2, merge_before_filter=False))
        # merge-first keeps the lone window by absorbing it; filter-first drops it
        assert a[0].end_s > b[0].end_s

    def test_output_sorted_disjoint_with_gap_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            labels = rng.random(60) < 0.3
            eta = float(rng.choice([0.0, 0.1, 0.2, 0.3]))
            segs = extract_segments(labels, WCFG, BoundaryConfig(eta_s=eta))
            for s in segs:
                assert s.duration_s > eta
            for a, b in zip(segs, segs[1:]):
                assert b.start_s - a.end_s > eta

    def test_idempotence(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            labels = rng.random(50) < 0.25
            bcfg = BoundaryConfig(eta_s=0.2)
            segs = extract_segments(labels, WCFG, bcfg)
            # windows implied by the output
            implied = np.zeros(50, dtype=bool)
            starts = np.arange(50) * WCFG.stride_s
            ends = starts + WCFG.length_s
            for s in segs:
                implied |= (starts >= s.start_s - 1e-9) & (ends <= s.end_s + 1e-9)
            again = extract_segments(implied, WCFG, bcfg)
            assert [(a.start_s, a.end_s) for a in again] == pytest.approx(
                [(s.start_s, s.end_s) for s in segs]
            )

    def test_monotonicity_of_coverage(self):
        rng = np.random.default_rng(2)
        bcfg = BoundaryConfig(eta_s=0.0)  # no filtering, pure merge arithmetic
        for _ in range(50):
            labels = rng.random(40) < 0.2
            base = sum(s.duration_s for s in extract_segments(labels, WCFG, bcfg))
            grown = labels.copy()
            grown[int(rng.integers(40))] = True
            more = sum(s.duration_s for s in extract_segments(grown, WCFG, bcfg))
            assert more >= base - 1e-12


class TestLabeling:
    def test_majority_vote(self):
        labels = labels_from_indices(12, [2, 3, 4])
        segs = extract_segments(labels, WCFG, BoundaryConfig(eta_s=0.0))
        top = np.array([0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0])
        typed = label_segments(segs, labels, top, ["prolongation", "repetition"], WCFG)
        assert typed[0].label == "repetition"

    def test_tie_takes_lower_class_index(self):
        labels = labels_from_indices(10, [2, 3])
        segs = extract_segments(labels, WCFG, BoundaryConfig(eta_s=0.0))
        top = np.array([0, 0, 1, 0, 0, 0, 0, 0, 0, 0])
        typed = label_segments(segs, labels, top, ["prolongation", "repetition"], WCFG)
        assert typed[0].label == "prolongation"


class TestSegmentType:
    def test_validation(self):
        with pytest.raises(ValueError):
            Segment(2.0, 1.0)
        with pytest.raises(ValueError):
            Segment(-0.1, 1.0)
        with pytest.raises(ValueError):
            Segment(0.0, np.nan)

    def test_duration(self):
        assert Segment(1.0, 2.5).duration_s == pytest.approx(1.5)


class TestRecordsFile:
    def test_round_trip_three_decimals(self, tmp_path):
        path = tmp_path / "segments.tsv"
        records = [
            ("clip_a", Segment(0.4, 1.45, "repetition")),
            ("clip_a", Segment(2.0, 3.5, "block")),
            ("clip_b", Segment(0.123456, 1.0, "prolongation")),
        ]
        write_segment_records(path, records)
        text = path.read_text()
        assert "clip_a\t0.400\t1.450\trepetition" in text
        assert "0.123\t1.000" in text
        back = read_segment_records(path)
        assert set(back) == {"clip_a", "clip_b"}
        assert len(back["clip_a"]) == 2
        assert back["clip_b"][0].label == "prolongation"

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "segments.tsv"
        path.write_text("clip_a\t1.0\t2.0\n")
        with pytest.raises(ValueError, match="4 tab-separated"):
            read_segment_records(path)
