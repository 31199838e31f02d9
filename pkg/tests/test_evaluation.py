import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rampcast.evaluation import (
    TABLE5_COLUMNS,
    EvalReport,
    HorizonCategory,
    Metrics,
    ReportError,
    build_report,
    conditioned_metrics,
    format_mmss,
    horizon_category,
    parse_reports_json,
    point_metrics,
    reports_csv,
    reports_json,
    sample_rate_label,
)


class TestPointMetrics:
    def test_hand_computed(self):
        # errors 1, -2, 3 -> MAE 2, RMSE sqrt(14/3)
        m = point_metrics([2.0, 0.0, 6.0], [1.0, 2.0, 3.0])
        assert m.mae == 2.0
        assert m.rmse == math.sqrt(14 / 3)
        assert (m.n, m.excluded) == (3, 0)

    def test_contract_example(self):
        m = point_metrics([1.0, 2.0, 3.0], [2.0, 2.0, 5.0])
        assert m.mae == 1.0
        assert m.rmse == pytest.approx(1.2910, abs=5e-5)
        assert m.rmse == math.sqrt(5 / 3)

    def test_absent_pairs_excluded(self):
        m = point_metrics([1.0, np.nan, 3.0], [1.0, 2.0, np.nan])
        assert (m.mae, m.n, m.excluded) == (0.0, 1, 2)

    def test_errors(self):
        with pytest.raises(ReportError, match="lengths differ"):
            point_metrics([1.0], [1.0, 2.0])
        with pytest.raises(ReportError, match="no scoreable"):
            point_metrics([np.nan], [1.0])

    # squares of errors below ~1e-154 underflow, far beneath any power reading
    @given(st.lists(st.floats(-1e6, 1e6).filter(lambda v: v == 0 or abs(v) > 1e-100), min_size=1, max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_rmse_dominates_mae(self, errs):
        e = np.asarray(errs)
        m = point_metrics(e, np.zeros_like(e))
        assert m.rmse >= m.mae * (1 - 1e-12)


class TestConditioned:
    def test_classes_split(self):
        pred = np.array([1.0, 2.0, 3.0, 4.0])
        act = np.array([0.0, 0.0, 0.0, 0.0])
        cm = conditioned_metrics(pred, act, np.array([1, 1, 0, -1]))
        assert cm.up.mae == 1.5 and cm.none.mae == 3.0 and cm.down.mae == 4.0

    def test_partition_by_hand(self):
        # labels N, U, D with |errors| 1, 4, 2
        cm = conditioned_metrics([1.0, -4.0, 2.0], [0.0, 0.0, 0.0], np.array([0, 1, -1]))
        assert (cm.none.mae, cm.up.mae, cm.down.mae) == (1.0, 4.0, 2.0)

    def test_empty_class_is_none(self):
        cm = conditioned_metrics([1.0, 2.0], [1.0, 1.0], np.array([0, 0]))
        assert cm.up is None and cm.down is None

    def test_misaligned(self):
        with pytest.raises(ReportError):
            conditioned_metrics([1.0], [1.0], np.array([0, 0]))


class TestHorizon:
    @pytest.mark.parametrize(
        "hours, cat",
        [
            (1, None),
            (2, HorizonCategory.VERY_SHORT),
            (6, HorizonCategory.VERY_SHORT),
            (24, HorizonCategory.SHORT),
            (72, HorizonCategory.SHORT),
            (100, HorizonCategory.MEDIUM),
            (200, None),
        ],
    )
    def test_bands(self, hours, cat):
        assert horizon_category(hours * 3600) is cat


@pytest.mark.parametrize("secs, text", [(0, "00:00"), (95, "01:35"), (7.4, "00:07"), (2642, "44:02"), (6000, "100:00")])
def test_format_mmss(secs, text):
    assert format_mmss(secs) == text


def test_sample_rate_label():
    assert sample_rate_label(600) == "10 min"
    assert sample_rate_label(3600) == "Hourly"


def _report(model="ARMA", train=True):
    gen = np.random.default_rng(0)
    act = gen.normal(1000, 100, 50)
    pred = act + gen.normal(0, 10, 50)
    labels = gen.choice([-1, 0, 1], 50).astype(np.int8)
    return build_report(
        model, 600, "univariate", 3, 95.0, 7.0, pred, act, labels,
        train_pred=pred if train else None, train_actual=act if train else None, config={"p": 3},
    )  # fmt: skip


class TestReports:
    def test_table_row_shape(self):
        row = _report().table_row()
        assert len(row) == len(TABLE5_COLUMNS) == 16
        assert row[:6] == ["ARMA", "10 min", "Univariate", "3", "01:35", "00:07"]

    def test_missing_train_renders_dash(self):
        row = _report(train=False).table_row()
        assert row[6] == "-" and row[8] == "-"

    def test_csv_two_decimals(self):
        text = reports_csv([_report(), _report("ARIMA")])
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == TABLE5_COLUMNS
        assert all(len(c.split(".")[1]) == 2 for c in rows[1][6:])

    def test_json_roundtrip_full_precision(self):
        reps = [_report(), _report("LSTM-RNN", train=False)]
        again = parse_reports_json(reports_json(reps))
        assert again == reps
        assert again[0].test.mae == reps[0].test.mae

    def test_emission_is_deterministic(self):
        assert reports_csv([_report()]) == reports_csv([_report()])
        assert reports_json([_report()]) == reports_json([_report()])

    def test_fingerprint_tracks_config(self):
        a = _report()
        assert a.fingerprint == _report().fingerprint
        b = EvalReport.from_dict({**a.to_dict(), "config": {"p": 4}})
        assert b.fingerprint != a.fingerprint

    def test_validation(self):
        with pytest.raises(ReportError):
            EvalReport.from_dict({"model": "x"})
        m = Metrics(1.0, 1.0, 1)
        with pytest.raises(ReportError):
            EvalReport("x", 600, "both", None, 0.0, 0.0, None, m, conditioned_metrics([1.0], [1.0], np.array([0])))
