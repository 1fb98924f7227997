import datetime
import math

import pytest

from utils.date_helpers import format_timestamp, parse_date
from utils.units import convert, dimension_of, split_unit

TODAY = datetime.date(2024, 5, 15)


@pytest.mark.parametrize(
    "key, expected",
    [
        ("duration_fwhm_fs", ("duration_fwhm", "fs")),
        ("time_window_ps", ("time_window", "ps")),
        ("beta2_ps2_per_km", ("beta2", "ps2_per_km")),
        ("loss_db_per_km", ("loss", "db_per_km")),
        ("gamma_per_w_km", ("gamma", "per_w_km")),
        ("repetition_rate_MHz", ("repetition_rate", "mhz")),
        ("n_samples", ("n_samples", None)),
        ("raman_fraction", ("raman_fraction", None)),
        ("self_steepening", ("self_steepening", None)),
    ],
)
def test_split_unit(key, expected):
    assert split_unit(key) == expected


def test_convert():
    assert convert(200, "fs") == pytest.approx(200e-15)
    assert convert(1560, "nm") == pytest.approx(1.56e-6)
    assert convert(-22, "ps2_per_km") == pytest.approx(-22e-27)
    assert convert(1.8, "per_w_km") == pytest.approx(1.8e-3)
    assert convert(10, "db_per_km") == pytest.approx(math.log(10) / 1e3)
    assert convert([0, 50, 100], "mw") == pytest.approx([0.0, 0.05, 0.1])


def test_dimension_of():
    assert dimension_of("ghz") == "frequency"
    assert dimension_of("db") == "decibel"
    assert dimension_of(None) is None


@pytest.mark.parametrize(
    "text, expected",
    [
        ("today", TODAY),
        ("yesterday", datetime.date(2024, 5, 14)),
        ("last week", datetime.date(2024, 5, 8)),
        ("3 days ago", datetime.date(2024, 5, 12)),
        ("2 weeks ago", datetime.date(2024, 5, 1)),
        ("1 month ago", datetime.date(2024, 4, 15)),
        ("2024-05-01", datetime.date(2024, 5, 1)),
        ("May 3 2024", datetime.date(2024, 5, 3)),
    ],
)
def test_parse_date(text, expected):
    assert parse_date(text, today=TODAY) == expected


def test_parse_date_failures_and_defaults():
    assert parse_date("not a date at all", today=TODAY) is None
    assert parse_date(None, today=TODAY) == TODAY


def test_format_timestamp():
    assert format_timestamp(datetime.datetime(2024, 5, 1, 8, 5, 59)) == "2024-05-01 08:05"
