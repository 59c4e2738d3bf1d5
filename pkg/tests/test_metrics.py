import pytest

from avcoord.agents import VehicleStats
from avcoord.config import ConfigLabel
from avcoord.errors import ComparisonError, ParameterError
from avcoord.metrics import (
    CSV_COLUMNS,
    LoopDiagnostic,
    ScenarioDescriptor,
    ScenarioResult,
    aggregate,
    build_result,
    compare,
    compare_means,
    detect_loops,
    metrics_csv,
    percent_delta,
    round_half_away,
    summary_table,
)

DESC = ScenarioDescriptor(55, 20, "LR", 123, 0)


def stats(travel, wait=0.0, recalcs=0, arrived=True):
    return VehicleStats(travel, wait, recalcs, arrived)


def result(cfg, travel, wait=0.0, recalcs=0, desc=DESC):
    label = [l for l in ConfigLabel if l.number == cfg][0]
    return build_result([stats(travel, wait, recalcs)], label, desc)


def test_means():
    agg = aggregate([stats(10.0, 0.0), stats(20.0, 4.0)], 2)
    assert (agg.avg_travel_time, agg.avg_wait_time) == (15.0, 2.0)
    assert agg.avg_recalculations == 0.0 and agg.success_rate == 1.0


def test_timed_out_vehicle_counts_at_cutoff():
    agg = aggregate([stats(300.0, arrived=False), stats(20.0)], 2)
    assert agg.avg_travel_time == 160.0 and agg.success_rate == 0.5


def test_aggregate_rejects_empty_or_mismatched():
    with pytest.raises(ParameterError):
        aggregate([], 0)
    with pytest.raises(ParameterError):
        aggregate([stats(1.0)], 2)


# Reference (base, other) means and their expected one-decimal percentage changes.
REFERENCE_DELTAS = [
    ((36.16, 104.99), 190.3),
    ((16.59, 64.91), 291.3),
    ((36.16, 32.55), -10.0),
    ((16.59, 7.81), -52.9),
    ((104.99, 32.55), -69.0),
    ((64.91, 7.81), -88.0),
    ((9.83, 1.67), -83.0),
]


@pytest.mark.parametrize("pair, expected", REFERENCE_DELTAS)
def test_percent_delta_reference_values(pair, expected):
    assert percent_delta(*pair) == expected


def test_rounding_is_half_away_from_zero():
    assert round_half_away(0.25) == 0.3
    assert round_half_away(-0.25) == -0.3
    assert round_half_away(2.675, 2) == 2.68


def test_zero_base_is_undefined():
    assert percent_delta(0.0, 5.0) is None
    c = compare(result(1, 18.0), result(2, 36.0, 16.0))
    assert c.travel == 100.0 and c.wait is None and c.recalculations is None


def test_self_comparison_is_zero():
    r = result(4, 50.0, 10.0, 3)
    assert compare(r, r) == compare_means((50.0, 10.0, 3.0), (50.0, 10.0, 3.0))
    assert (compare(r, r).travel, compare(r, r).wait, compare(r, r).recalculations) == (0.0, 0.0, 0.0)


def test_compare_rejects_different_scenarios():
    other = ScenarioDescriptor(55, 20, "LR", 124, 0)
    with pytest.raises(ComparisonError):
        compare(result(2, 1.0), result(4, 2.0, desc=other))


def test_loops_counts_and_order():
    found = detect_loops([["A", "B", "A", "B", "A"]])
    assert [(d.node, d.revisit_count) for d in found] == [("A", 3), ("B", 2)]
    assert found[0].first_interval == (0.0, 2.0)


def test_loops_with_times_and_threshold():
    logs = {2: [(5, 0.0), (6, 1.0), (5, 3.5), (5, 7.0)], 1: [(9, 0.0), (9, 2.0)]}
    assert detect_loops(logs, threshold=3) == [LoopDiagnostic(2, 5, 3, (0.0, 3.5))]
    assert [d.vehicle for d in detect_loops(logs)] == [2, 1]


def test_monotone_log_has_no_loops():
    assert detect_loops([[1, 2, 3, 4]]) == []


def test_csv_layout_and_failed_rows():
    ok = result(2, 36.123456, 16.5, 0)
    failed = ScenarioResult([], 0, 0, 0, 0, ConfigLabel.REROUTE_OMM,
                            ScenarioDescriptor(15, 6, "Rand", 7, 1), error="boom")
    text = metrics_csv([failed, ok])
    rows = [r.split(",") for r in text.strip().split("\n")]
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1] == ["15", "6", "Rand", "6", "1", "7", "", "", "", ""]
    assert rows[2] == ["55", "20", "LR", "2", "0", "123", "36.1235", "16.5000", "0.0000", "1.0000"]


def test_summary_table_shape():
    rows = [result(1, 19.35), result(2, 36.16, 16.59), result(3, 36.79, 14.56, 3.08),
            result(5, 32.19, 9.43, 1.58), result(4, 104.99, 64.91, 9.83),
            result(6, 32.55, 7.81, 1.67)]
    text = summary_table(rows)
    assert "Config 4 vs. Config 2" in text and "+190.3%" in text and "+291.3%" in text
    six_two = [l for l in text.splitlines() if l.startswith("Config 6 vs. Config 2")][0]
    assert six_two.split()[-3:] == ["-10.0%", "-52.9%", "-"]
    six_four = [l for l in text.splitlines() if l.startswith("Config 6 vs. Config 4")][0]
    assert six_four.split()[-3:] == ["-69.0%", "-88.0%", "-83.0%"]
    order = [l.split(".")[0] for l in text.splitlines() if l[:1].isdigit()]
    assert order == ["1", "2", "3", "5", "4", "6"]


def test_threshold_one_reports_single_visits():
    found = detect_loops({0: [(4, 1.5)]}, threshold=1)
    assert found == [LoopDiagnostic(0, 4, 1, (1.5, 1.5))]
    with pytest.raises(ParameterError):
        detect_loops({0: []}, threshold=0)
