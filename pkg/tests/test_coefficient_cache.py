"""Unit tests for Coefficient Cache Module"""

from fractions import Fraction

import pytest

from src import coefficient_cache
from src.coefficient_cache import (
    CacheCorruption,
    CoefficientCache,
    ParseError,
    format_cache_text,
    parse_cache_text,
    parse_rational,
    parse_series,
    serialize_series,
)
from src.logging_config import ErrorTracker
from src.series_engine import (
    EnergySeries,
    published_series,
    rs_recursion,
    third_order_closed_form,
)


class TestRationalGrammar:
    """Test suite for the strict rational grammar"""

    def test_parse_negative(self):
        """Test a negative rational parses and reduces"""
        assert parse_rational("-42/16") == Fraction(-21, 8)

    def test_unicode_minus_rejected(self):
        """Test a unicode minus sign fails at column 1"""
        with pytest.raises(ParseError) as excinfo:
            parse_rational("−21/8", line=3)

        assert excinfo.value.line == 3
        assert excinfo.value.column == 1

    def test_inner_whitespace_rejected(self):
        """Test whitespace inside a rational is located"""
        with pytest.raises(ParseError) as excinfo:
            parse_rational("21 /8")

        assert excinfo.value.column == 3

    def test_missing_denominator(self):
        """Test a bare integer is not a rational"""
        with pytest.raises(ParseError, match="invalid rational"):
            parse_rational("7")

    def test_trailing_garbage(self):
        """Test characters after the denominator are rejected"""
        with pytest.raises(ParseError) as excinfo:
            parse_rational("3/4x")

        assert excinfo.value.column == 4

    def test_zero_denominator(self):
        """Test a zero denominator is rejected"""
        with pytest.raises(ParseError, match="zero denominator"):
            parse_rational("1/0")


class TestSeriesText:
    """Test suite for series serialization"""

    def test_serialize(self):
        """Test one p/q per line"""
        series = EnergySeries(0, (Fraction(1, 2), Fraction(3, 4)))

        assert serialize_series(series) == "1/2\n3/4\n"

    def test_parse_recovers_published_row(self):
        """Test the published ground-state row survives a file round trip"""
        series = published_series(0)

        assert parse_series(serialize_series(series), level=0) == series

    def test_integers_carry_unit_denominator(self):
        """Test integral coefficients are written as p/1"""
        series = EnergySeries(1, (Fraction(3),))

        assert serialize_series(series) == "3/1\n"

    def test_parse_error_reports_line(self):
        """Test a bad line is reported by number"""
        with pytest.raises(ParseError) as excinfo:
            parse_series("1/2\n3/4\n−21/8\n")

        assert excinfo.value.line == 3


class TestCacheText:
    """Test suite for the cache file format"""

    def test_format(self):
        """Test header, energy and wavefunction lines"""
        series, table = rs_recursion(0, 1)

        text = format_cache_text(series, table)

        assert text.splitlines()[0] == "level=0 order=1 convention=table1-v1"
        assert "E 0 1/2" in text
        assert "E 1 3/4" in text
        assert "c 0 0 1/1" in text
        assert "c 4 1 -1/16" in text

    def test_parse_with_wavefunction(self):
        """Test parsing restores energies and table entries"""
        series, table = rs_recursion(1, 3)

        parsed_series, parsed_table = parse_cache_text(format_cache_text(series, table))

        assert parsed_series == series
        assert parsed_table.entries == table.entries
        assert parsed_table.max_order == 3

    def test_parse_without_wavefunction(self):
        """Test an energy-only file has no table"""
        _, parsed_table = parse_cache_text(format_cache_text(published_series(2)))

        assert parsed_table is None

    def test_convention_mismatch(self):
        """Test a file from another convention is rejected"""
        text = format_cache_text(published_series(0), convention="old-v0")

        with pytest.raises(CacheCorruption, match="convention"):
            parse_cache_text(text)

    def test_malformed_header(self):
        """Test a broken header is reported at line 1"""
        with pytest.raises(CacheCorruption) as excinfo:
            parse_cache_text("level 0\nE 0 1/2\n")

        assert excinfo.value.line == 1

    def test_bad_rational_reports_line(self):
        """Test a corrupted coefficient is reported with its line"""
        text = "level=0 order=1 convention=table1-v1\nE 0 1/2\nE 1 3/x\n"

        with pytest.raises(CacheCorruption) as excinfo:
            parse_cache_text(text)

        assert excinfo.value.line == 3
        assert "column" in excinfo.value.reason

    def test_truncated_file(self):
        """Test a file shorter than its header promises is rejected"""
        text = "level=0 order=3 convention=table1-v1\nE 0 1/2\nE 1 3/4\n"

        with pytest.raises(CacheCorruption, match="order 3"):
            parse_cache_text(text)

    def test_out_of_sequence_energy(self):
        """Test energy lines must be consecutive"""
        text = "level=0 order=1 convention=table1-v1\nE 0 1/2\nE 2 3/4\n"

        with pytest.raises(CacheCorruption, match="out of sequence"):
            parse_cache_text(text)


class TestCoefficientCache:
    """Test suite for CoefficientCache"""

    def test_path_layout(self, tmp_cache_dir):
        """Test files are keyed by convention and level"""
        cache = CoefficientCache(str(tmp_cache_dir))

        assert cache.path_for(4) == tmp_cache_dir / "table1-v1" / "level_4.txt"

    def test_load_absent(self, tmp_cache_dir):
        """Test a missing level loads as None"""
        assert CoefficientCache(str(tmp_cache_dir)).load(0) is None

    def test_store_then_load(self, tmp_cache_dir):
        """Test a stored level is read back exactly"""
        cache = CoefficientCache(str(tmp_cache_dir))
        cache.store(published_series(3))

        series, table = cache.load(3)

        assert series == published_series(3)
        assert table is None

    def test_wrong_level_in_file(self, tmp_cache_dir):
        """Test a file holding another level is corruption"""
        cache = CoefficientCache(str(tmp_cache_dir))
        path = cache.store(published_series(2))
        path.rename(cache.path_for(5))

        with pytest.raises(CacheCorruption, match="expected 5"):
            cache.load(5)

    def test_get_or_compute_miss_then_hit(self, tmp_cache_dir, mocker):
        """Test the second request is served from disk"""
        cache = CoefficientCache(str(tmp_cache_dir))
        spy = mocker.spy(coefficient_cache, "rs_recursion")

        first = cache.get_or_compute(0, 6)
        second = cache.get_or_compute(0, 6)

        assert first == second == published_series(0)
        assert spy.call_count == 1

    def test_get_or_compute_serves_lower_order(self, tmp_cache_dir, mocker):
        """Test a longer cached series serves a shorter request"""
        cache = CoefficientCache(str(tmp_cache_dir))
        cache.get_or_compute(0, 10)
        spy = mocker.spy(coefficient_cache, "rs_recursion")

        series = cache.get_or_compute(0, 6)

        assert series.order == 6
        assert spy.call_count == 0

    def test_get_or_compute_extends_shorter_entry(self, tmp_cache_dir, mocker):
        """Test a request beyond the cached order recomputes"""
        cache = CoefficientCache(str(tmp_cache_dir))
        cache.get_or_compute(1, 3)
        spy = mocker.spy(coefficient_cache, "rs_recursion")

        series = cache.get_or_compute(1, 6)

        assert series.truncated(2) == published_series(1).truncated(2)
        assert series[3] == third_order_closed_form(1)
        assert spy.call_count == 1
        assert cache.load(1)[0].order == 6

    def test_get_or_compute_wavefunction_request(self, tmp_cache_dir):
        """Test an energy-only file does not satisfy a wavefunction request"""
        cache = CoefficientCache(str(tmp_cache_dir))
        cache.get_or_compute(0, 4)

        cache.get_or_compute(0, 4, include_wavefunction=True)

        assert cache.load(0)[1] is not None

    def test_corruption_raises_by_default(self, tmp_cache_dir):
        """Test a corrupted file surfaces with its path"""
        cache = CoefficientCache(str(tmp_cache_dir))
        path = cache.store(published_series(0))
        path.write_text("garbage\n")

        with pytest.raises(CacheCorruption) as excinfo:
            cache.get_or_compute(0, 6)

        assert excinfo.value.path == path

    def test_corruption_recovered_into_quarantine(self, tmp_cache_dir):
        """Test recovery quarantines the bad file and recomputes"""
        tracker = ErrorTracker(quarantine_dir=str(tmp_cache_dir / "quarantine"))
        cache = CoefficientCache(str(tmp_cache_dir), tracker=tracker)
        path = cache.store(published_series(0))
        path.write_text("garbage\n")

        series = cache.get_or_compute(0, 6, recover=True)

        assert series == published_series(0)
        assert tracker.get_error_summary()["error_types"] == {"CacheCorruption": 1}
        assert len(list((tmp_cache_dir / "quarantine").glob("*level_0.txt"))) == 1

    def test_reconcile_replaces_disagreeing_file(self, tmp_cache_dir):
        """Test a poisoned coefficient is replaced by the fresh series"""
        cache = CoefficientCache(str(tmp_cache_dir))
        coeffs = list(published_series(0).coeffs)
        coeffs[2] = Fraction(-21, 9)
        cache.store(EnergySeries(0, tuple(coeffs)))

        assert cache.reconcile(published_series(0)) is True
        assert cache.load(0)[0] == published_series(0)

    def test_reconcile_keeps_agreeing_file(self, tmp_cache_dir):
        """Test an agreeing longer file is left in place"""
        cache = CoefficientCache(str(tmp_cache_dir))
        cache.get_or_compute(0, 9)

        assert cache.reconcile(published_series(0)) is False
        assert cache.load(0)[0].order == 9

    def test_reconcile_unreadable_file(self, tmp_cache_dir):
        """Test an unreadable file is discarded and rewritten"""
        cache = CoefficientCache(str(tmp_cache_dir))
        cache.path_for(4).parent.mkdir(parents=True)
        cache.path_for(4).write_bytes(b"\xff\xfe")

        assert cache.reconcile(published_series(4)) is True
        assert cache.load(4)[0] == published_series(4)
