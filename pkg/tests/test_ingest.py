from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from rampcast.ingest import (
    ColumnMapping,
    FarmConfig,
    IngestError,
    circular_mean_deg,
    forward_fill,
    ingest,
    parse_scada,
    parse_timestamp,
)

HEADER = "Wind_turbine_name,Date_time,P_avg,Ws_avg,Wa_avg,Ot_avg\n"


def _write(tmp_path, body, name="scada.csv", header=HEADER):
    p = tmp_path / name
    p.write_text(header + body, encoding="utf-8")
    return p


def _rows(turbine, n, power=1000.0, start_min=0):
    return "".join(
        f"{turbine},2017-01-01T{(start_min + 10 * i) // 60:02d}:{(start_min + 10 * i) % 60:02d}:00+01:00,{power},8,200,9\n"
        for i in range(n)
    )


class TestParse:
    def test_rejection_reasons(self, tmp_path):
        body = (
            "A,2017-01-01T00:00:00,10,1,1,1\n"
            "\n"
            "A,2017-01-01T00:10:00,10\n"
            "A,not-a-date,10,1,1,1\n"
            "A,2017-01-01T00:20:00,ten,1,1,1\n"
            ",2017-01-01T00:30:00,10,1,1,1\n"
            "A,2017-01-01T00:00:00,11,1,1,1\n"
            "A,2017-01-01T00:40:00,,1,1,1\n"
        )
        recs, rep = parse_scada(_write(tmp_path, body))
        assert rep.rows_read == 8 and rep.rows_accepted == 2
        assert dict(rep.rejected) == {
            "empty row": 1, "wrong field count": 1, "bad timestamp": 1,
            "bad number": 1, "missing turbine id": 1, "duplicate": 1,
        }  # fmt: skip
        assert recs["A"][1].values["P_avg"] is None

    def test_missing_mandatory_header(self, tmp_path):
        with pytest.raises(IngestError, match="mandatory"):
            parse_scada(_write(tmp_path, "", header="Wind_turbine_name,time,P_avg\n"))

    def test_header_only(self, tmp_path):
        with pytest.raises(IngestError, match="no data rows"):
            parse_scada(_write(tmp_path, ""))

    def test_custom_mapping(self, tmp_path):
        p = _write(tmp_path, "07/01/2013 00:10;1,5\n", header="when;power\n")
        m = ColumnMapping(
            timestamp="when", P_avg="power", turbine_id=None, Ws_avg=None, Wa_avg=None, Ot_avg=None,
            delimiter=";", timestamp_format="%d/%m/%Y %H:%M", decimal_separator=",",
        )  # fmt: skip
        recs, rep = parse_scada(p, m)
        (rec,) = recs["farm"]
        assert rec.values["P_avg"] == 1.5
        assert rec.timestamp == datetime(2013, 1, 7, 0, 10, tzinfo=timezone.utc)

    def test_timestamp_offsets_normalised(self):
        assert parse_timestamp("2017-01-01T01:00:00+01:00", "iso") == datetime(2017, 1, 1, tzinfo=timezone.utc)
        assert parse_timestamp("2017-01-01T00:00:00Z", "iso").tzinfo is timezone.utc


@given(
    st.lists(
        st.one_of(
            st.just(""),
            st.text(alphabet="AB,0123456789.:-T", max_size=40),
            st.builds(lambda m, p: f"T1,2017-01-01T00:{m:02d}:00,{p},5,180,10", st.integers(0, 59), st.integers(0, 2000)),
        ),
        min_size=1,
        max_size=40,
    )
)
@settings(max_examples=80, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
def test_row_accounting_on_arbitrary_files(tmp_path, lines):
    p = _write(tmp_path, "\n".join(lines) + "\n", name="h.csv")
    _, rep = parse_scada(p)
    assert rep.rows_read == len(lines)
    assert rep.rows_accepted + rep.rows_rejected == len(lines)


def test_forward_fill_limit():
    v = np.array([np.nan, 1.0, np.nan, np.nan, 2.0, np.nan, np.nan, np.nan, np.nan, 3.0])
    out, filled = forward_fill(v, 3)
    np.testing.assert_array_equal(out[:5], [np.nan, 1.0, 1.0, 1.0, 2.0])
    assert np.isnan(out[5:9]).all() and filled == 2


def test_circular_mean_wraps():
    s, c = circular_mean_deg(np.array([[350.0, 10.0], [90.0, np.nan]]))
    np.testing.assert_allclose([s[0], c[0]], [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose([s[1], c[1]], [1.0, 0.0], atol=1e-12)


class TestFarm:
    def test_aggregation_and_percent_rated(self, tmp_path):
        p = _write(tmp_path, _rows("A", 4, 2000.0) + _rows("B", 4, 2100.0))
        frame, rep = ingest(p)
        np.testing.assert_array_equal(frame["P_tot"].values, [4100.0] * 4)
        np.testing.assert_array_equal(frame["pct_rated"].values, [50.0] * 4)
        assert frame.start == datetime(2016, 12, 31, 23, 0, tzinfo=timezone.utc)
        assert rep.coverage == {"A": 100.0, "B": 100.0}

    def test_strict_policy_and_gap_fill(self, tmp_path):
        # B misses slots 1..4: a run of 4 exceeds the fill limit of 3
        body = _rows("A", 8) + _rows("B", 1) + _rows("B", 3, start_min=50)
        frame, rep = ingest(_write(tmp_path, body))
        p = frame["P_tot"].values
        assert np.isnan(p[1:5]).all() and p[0] == 2000.0 and p[5] == 2000.0
        frame2, _ = ingest(_write(tmp_path, body, "b.csv"), config=FarmConfig(policy="available"))
        assert frame2["P_tot"].values[2] == 1000.0
        assert rep.gaps_missing == 4

    def test_expected_turbine_absent_makes_strict_empty(self, tmp_path):
        frame, _ = ingest(_write(tmp_path, _rows("A", 3)), config=FarmConfig(expected_turbines=("A", "B")))
        assert np.isnan(frame["P_tot"].values).all()

    def test_over_rated_is_counted_not_clipped(self, tmp_path):
        frame, rep = ingest(_write(tmp_path, _rows("A", 2, 9000.0)))
        assert rep.over_rated_slots == 2 and frame["P_tot"].values[0] == 9000.0

    def test_cross_file_duplicates(self, tmp_path):
        a = _write(tmp_path, _rows("A", 3, 100.0), "a.csv")
        b = _write(tmp_path, _rows("A", 3, 200.0), "b.csv")
        frame, rep = ingest([a, b])
        assert rep.rows_read == 6 and rep.rows_accepted == 3 and rep.rejected["duplicate"] == 3
        assert frame["P_tot"].values[0] == 100.0
