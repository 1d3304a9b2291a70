from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demandcast.timeseries import (
    CALENDAR_MAXIMA,
    CadenceError,
    CsvParseError,
    LoadSeries,
    ProductionSeries,
    SeriesError,
    encode_calendar,
    energy_kwh,
    load_csv,
    load_production_csv,
    max_demand,
    resample_15min,
    write_csv,
    write_production_csv,
)

T0 = datetime(2007, 10, 1)
KNOWN_MONDAY = date(2007, 1, 1)


def calendar_oracle(t: datetime):
    """Calendar fields by counting, independent of datetime.weekday()."""
    dow = (t.date() - KNOWN_MONDAY).days % 7
    week = 0
    day = t.day
    while day > 7:
        day -= 7
        week += 1
    return (t.month - 1, week, dow, t.hour, sum(1 for m in (15, 30, 45) if t.minute >= m))


def brute_max_window(values):
    best = -np.inf
    for i in range(len(values) - 2):
        best = max(best, (values[i] + values[i + 1] + values[i + 2]) / 3.0)
    return best


class TestCalendar:
    def test_mid_october_monday(self):
        assert encode_calendar(datetime(2007, 10, 15, 8, 30)) == (9, 2, 0, 8, 2)

    def test_new_year_2007(self):
        assert encode_calendar(datetime(2007, 1, 1, 0, 0)) == (0, 0, 0, 0, 0)

    def test_minute_zero_is_quarter_zero(self):
        assert encode_calendar(datetime(2010, 5, 17, 13, 0)).quarter == 0

    def test_off_quarter_minute_floors(self):
        assert encode_calendar(datetime(2007, 10, 1, 0, 44)).quarter == 2

    def test_random_timestamps_in_range_and_match_oracle(self):
        rng = np.random.default_rng(0)
        base = datetime(1990, 1, 1)
        for minutes in rng.integers(0, 60 * 24 * 365 * 40, size=10_000):
            t = base + timedelta(minutes=int(minutes))
            cal = encode_calendar(t)
            assert all(0 <= v <= hi for v, hi in zip(cal, CALENDAR_MAXIMA))
            assert tuple(cal) == calendar_oracle(t)


class TestSeries:
    def test_rejects_bad_cadence(self):
        with pytest.raises(SeriesError):
            LoadSeries(T0, 10, [1.0])

    @pytest.mark.parametrize("bad", [[-1.0], [np.nan], [np.inf]])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(SeriesError):
            LoadSeries(T0, 15, bad)

    def test_values_are_read_only(self):
        s = LoadSeries(T0, 15, [1.0, 2.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0

    def test_implicit_timestamps(self):
        s = LoadSeries(T0, 5, [1.0, 2.0, 3.0])
        assert s.timestamp(2) == T0 + timedelta(minutes=10)
        assert s.end == T0 + timedelta(minutes=15)

    def test_production_lengths_must_match(self):
        with pytest.raises(SeriesError):
            ProductionSeries(date(2007, 10, 1), [1.0, 2.0], [1.0], [1.0, 2.0])


class TestEnergy:
    def test_constant_four_kw(self):
        assert energy_kwh(LoadSeries(T0, 15, [4.0] * 4)) == 4.0

    def test_zeros(self):
        assert energy_kwh(LoadSeries(T0, 15, [0.0] * 10)) == 0.0

    def test_hand_sum(self):
        assert energy_kwh(LoadSeries(T0, 15, [10.0, 20.0, 30.0])) == pytest.approx(15.0)

    def test_empty(self):
        with pytest.raises(SeriesError, match="empty series"):
            energy_kwh(LoadSeries(T0, 15, []))

    @given(
        st.lists(st.floats(0, 1e5), min_size=1, max_size=50),
        st.floats(0, 100),
        st.sampled_from([5, 15]),
    )
    def test_linear(self, values, alpha, cadence):
        s = LoadSeries(T0, cadence, values)
        scaled = s.with_values(alpha * s.values)
        assert energy_kwh(scaled) == pytest.approx(alpha * energy_kwh(s), rel=1e-12, abs=1e-9)


class TestMaxDemand:
    def test_sliding_windows(self):
        # window means 20, 30, 33.33, 30
        s = LoadSeries(T0, 5, [10.0, 20.0, 30.0, 40.0, 30.0, 20.0])
        assert max_demand(s) == pytest.approx(100.0 / 3.0)

    @pytest.mark.parametrize("cadence", [5, 15])
    def test_constant(self, cadence):
        assert max_demand(LoadSeries(T0, cadence, [42.0] * 9)) == pytest.approx(42.0)

    def test_quarter_hour_is_max_sample(self):
        assert max_demand(LoadSeries(T0, 15, [5.0, 7.0, 6.0])) == 7.0

    def test_window_underflow(self):
        with pytest.raises(SeriesError, match="window underflow"):
            max_demand(LoadSeries(T0, 5, [1.0, 2.0]))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            v = rng.uniform(0, 5e4, rng.integers(3, 300))
            assert max_demand(LoadSeries(T0, 5, v)) == pytest.approx(brute_max_window(v), rel=1e-12)


class TestResample:
    def test_single_block(self):
        assert list(resample_15min(LoadSeries(T0, 5, [10.0, 20.0, 30.0])).values) == [20.0]

    def test_constant_blocks(self):
        out = resample_15min(LoadSeries(T0, 5, [3.0] * 3 + [8.0] * 3))
        assert out.cadence_minutes == 15 and list(out.values) == [3.0, 8.0]

    @pytest.mark.parametrize(
        "s", [LoadSeries(T0, 15, [1.0, 2.0, 3.0]), LoadSeries(T0, 5, [1.0, 2.0])]
    )
    def test_rejects(self, s):
        with pytest.raises(SeriesError):
            resample_15min(s)

    @settings(max_examples=200)
    @given(st.lists(st.floats(0, 1e5), min_size=1, max_size=40).map(lambda v: v * 3))
    def test_preserves_energy(self, values):
        s = LoadSeries(T0, 5, values)
        assert energy_kwh(resample_15min(s)) == pytest.approx(energy_kwh(s), rel=1e-9, abs=1e-9)


def _write(tmp_path, text, name="load.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestCsv:
    def test_two_rows(self, tmp_path):
        s = load_csv(_write(tmp_path, "timestamp,kw\n2007-10-01T00:00,41250.5\n2007-10-01T00:15,41000\n"))
        assert len(s) == 2 and s.cadence_minutes == 15 and s.start == T0
        assert list(s.values) == [41250.5, 41000.0]

    def test_five_minute_cadence(self, tmp_path):
        s = load_csv(_write(tmp_path, "timestamp,kw\n2007-10-01T00:00,1\n2007-10-01T00:05,2\n2007-10-01T00:10,3\n"))
        assert s.cadence_minutes == 5

    def test_gap_is_cadence_violation(self, tmp_path):
        text = "timestamp,kw\n2007-10-01T00:00,1\n2007-10-01T00:15,1\n2007-10-01T00:45,1\n"
        with pytest.raises(CadenceError, match="cadence violation at row 4"):
            load_csv(_write(tmp_path, text))

    def test_unsupported_step(self, tmp_path):
        with pytest.raises(CadenceError):
            load_csv(_write(tmp_path, "timestamp,kw\n2007-10-01T00:00,1\n2007-10-01T01:00,1\n"))

    def test_negative_value(self, tmp_path):
        with pytest.raises(CsvParseError, match="row 3"):
            load_csv(_write(tmp_path, "timestamp,kw\n2007-10-01T00:00,1\n2007-10-01T00:15,-5\n"))

    def test_non_numeric_value(self, tmp_path):
        with pytest.raises(CsvParseError, match="row 2"):
            load_csv(_write(tmp_path, "timestamp,kw\n2007-10-01T00:00,abc\n"))

    def test_bad_header(self, tmp_path):
        with pytest.raises(CsvParseError, match="header"):
            load_csv(_write(tmp_path, "time,power\n2007-10-01T00:00,1\n"))

    def test_round_trip(self, tmp_path):
        s = LoadSeries(T0, 5, np.random.default_rng(2).uniform(0, 5e4, 30))
        write_csv(s, tmp_path / "s.csv")
        assert load_csv(tmp_path / "s.csv") == s

    def test_production(self, tmp_path):
        p = load_production_csv(
            _write(tmp_path, "date,anodes_tmh,acid_tmh,oxygen_tmh\n2007-10-01,35.2,110.4,48.9\n2007-10-02,0,0,0\n", "p.csv")
        )
        assert len(p) == 2 and p.start_date == date(2007, 10, 1)
        assert list(p.rates_on(date(2007, 10, 1))) == [35.2, 110.4, 48.9]
        write_production_csv(p, tmp_path / "p2.csv")
        assert load_production_csv(tmp_path / "p2.csv") == p

    def test_production_missing_day(self, tmp_path):
        text = "date,anodes_tmh,acid_tmh,oxygen_tmh\n2007-10-01,1,1,1\n2007-10-03,1,1,1\n"
        with pytest.raises(CadenceError, match="row 3"):
            load_production_csv(_write(tmp_path, text, "p.csv"))
