import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from departcast.errors import ConfigError, CsvFormatError, DuplicateRecordError, SessionCollisionError
from departcast.ingest import (
    Dataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    parse_csv,
    prefix_sessions,
    superimpose,
    to_csv_text,
    trim_range,
)
from departcast.timeutil import DEFAULT_WINDOW, DepartureRecord, TimeOfDay

HEADER = b"vehicle_id,session_id,start_tm\n"


def _dataset(times, session="austin"):
    return Dataset.from_records(
        DepartureRecord(f"V{i}", session, TimeOfDay.parse(t)) for i, t in enumerate(times)
    )


def test_parse_single_row():
    d = parse_csv(HEADER + b"V1,austin,06:07:00\n")
    assert len(d) == 1
    assert d.records[0] == DepartureRecord("V1", "austin", TimeOfDay.of(6, 7))
    assert d.sessions == ("austin",)


def test_parse_accepts_crlf_and_keeps_order():
    d = parse_csv(b"vehicle_id,session_id,start_tm\r\nV2,b,07:00:00\r\nV1,a,06:00:00\r\n")
    assert [r.vehicle_id for r in d.records] == ["V2", "V1"]
    assert d.sessions == ("b", "a")


def test_parse_bad_hour_reports_line_and_field():
    with pytest.raises(CsvFormatError) as excinfo:
        parse_csv(HEADER + b"V1,austin,06:00:00\nV2,austin,25:00:00\n")
    assert excinfo.value.line == 3
    assert excinfo.value.field == "start_tm"
    assert "25:00:00" in str(excinfo.value)


def test_parse_duplicate_pair():
    with pytest.raises(DuplicateRecordError) as excinfo:
        parse_csv(HEADER + b"V1,austin,06:00:00\nV1,austin,07:00:00\n")
    assert (excinfo.value.vehicle_id, excinfo.value.session_id) == ("V1", "austin")
    assert excinfo.value.line == 3


def test_same_vehicle_in_two_sessions_is_fine():
    d = parse_csv(HEADER + b"V1,austin,06:00:00\nV1,houston,07:00:00\n")
    assert len(d) == 2


@pytest.mark.parametrize(
    "body,field",
    [
        (b"V1,austin\n", "row"),
        (b"V1,austin,06:00:00,extra\n", "row"),
        (b",austin,06:00:00\n", "vehicle_id"),
    ],
)
def test_parse_malformed_rows(body, field):
    with pytest.raises(CsvFormatError) as excinfo:
        parse_csv(HEADER + body)
    assert excinfo.value.field == field


def test_parse_wrong_header():
    with pytest.raises(CsvFormatError):
        parse_csv(b"id,session,time\nV1,austin,06:00:00\n")


def test_canonical_round_trip_is_byte_exact():
    text = HEADER + b"V1,austin,06:07:00\nV2,austin,08:59:59\nV1,houston,05:00:00\n"
    assert to_csv_text(parse_csv(text)).encode("utf-8") == text


def test_load_dataset_prefixes_path(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(HEADER + b"V1,austin,6am\n")
    with pytest.raises(CsvFormatError) as excinfo:
        load_dataset(p)
    assert str(p) in str(excinfo.value)
    assert excinfo.value.line == 2


def test_trim_range_half_open():
    d = _dataset(["05:59:00", "06:00:00", "08:59:00", "09:00:00"])
    kept = trim_range(d, DEFAULT_WINDOW)
    assert [str(r.departure) for r in kept.records] == ["06:00:00", "08:59:00"]


def test_trim_range_drops_empty_sessions():
    d = superimpose([_dataset(["05:00:00"], "early"), _dataset(["07:00:00"], "late")])
    assert trim_range(d, DEFAULT_WINDOW).sessions == ("late",)


def test_trim_range_empty_and_identity():
    assert len(trim_range(Dataset(), DEFAULT_WINDOW)) == 0
    d = _dataset(["06:30:00", "07:30:00"])
    assert trim_range(d, DEFAULT_WINDOW) == d


@given(st.lists(st.integers(min_value=0, max_value=86399), max_size=60))
def test_trim_range_idempotent(seconds):
    d = Dataset.from_records(DepartureRecord(f"V{i}", f"S{i % 3}", TimeOfDay(s)) for i, s in enumerate(seconds))
    once = trim_range(d, DEFAULT_WINDOW)
    assert trim_range(once, DEFAULT_WINDOW) == once


def test_superimpose_counts_add_up():
    a = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800, 2, 250, rng_seed=1, session_prefix="austin"))
    b = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800, 2, 129, rng_seed=2, session_prefix="houston"))
    merged = superimpose([a, b])
    assert len(merged) == 758
    assert merged.sessions == a.sessions + b.sessions


def test_superimpose_identity_and_collision():
    d = _dataset(["06:30:00"])
    assert superimpose([d]) == d
    with pytest.raises(SessionCollisionError) as excinfo:
        superimpose([d, _dataset(["07:00:00"])])
    assert excinfo.value.session_ids == ("austin",)


def test_superimpose_order_insensitive_as_multiset():
    a, b, c = _dataset(["06:10:00"], "a"), _dataset(["06:20:00"], "b"), _dataset(["06:30:00"], "c")
    left = superimpose([superimpose([a, b]), c])
    right = superimpose([c, superimpose([b, a])])
    assert sorted(left.records, key=repr) == sorted(right.records, key=repr)


def test_prefix_sessions_avoids_collision():
    d = _dataset(["06:30:00"], "s1")
    merged = superimpose([prefix_sessions(d, "austin"), prefix_sessions(d, "houston")])
    assert merged.sessions == ("austin/s1", "houston/s1")


def test_synthetic_deterministic_and_sized():
    spec = SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800, 3, 10, rng_seed=42)
    d1, d2 = generate_synthetic(spec), generate_synthetic(spec)
    assert d1 == d2
    assert len(d1) == 30
    assert d1.sessions == ("S01", "S02", "S03")
    assert all(DEFAULT_WINDOW.contains(r.departure) for r in d1.records)


def test_synthetic_other_seed_differs():
    a = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800, 1, 50, rng_seed=1))
    b = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800, 1, 50, rng_seed=2))
    assert a != b


@settings(deadline=None, max_examples=5)
@given(st.integers(min_value=0, max_value=10_000))
def test_synthetic_sample_mean_close_to_truth(seed):
    # 10000 draws, stddev 1800 s: standard error 18 s, truncation to 6-9 am is symmetric about 7:30
    d = generate_synthetic(SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7, 30), 1800, 10, 1000, rng_seed=seed))
    assert abs(float(np.mean(d.seconds())) - TimeOfDay.of(7, 30).seconds) < 60


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(10), 1800, 1, 1)
    with pytest.raises(ConfigError):
        SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7), 0, 1, 1)
    with pytest.raises(ConfigError):
        SyntheticSpec(DEFAULT_WINDOW, TimeOfDay.of(7), 60, 0, 1)
