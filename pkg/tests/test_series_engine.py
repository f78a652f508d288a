"""Unit tests for Perturbative Series Module"""

from fractions import Fraction

import pytest

from src.series_engine import (
    PUBLISHED_ERRATA,
    PUBLISHED_TABLE,
    EnergySeries,
    InsufficientOrder,
    MissingLevel,
    denominators_are_powers_of_two,
    eigen_residual,
    first_order_closed_form,
    fits_parity_polynomial,
    generate_levels,
    rs_recursion,
    sign_pattern_holds,
    published_series,
    second_order_closed_form,
    third_order_closed_form,
    verify_table,
)


class TestRsRecursion:
    """Test suite for the Rayleigh-Schroedinger recursion"""

    def test_ground_state_row(self):
        """Test level 0 reproduces the published row"""
        series, _ = rs_recursion(0, 6)

        assert [str(c) for c in series.coeffs] == list(PUBLISHED_TABLE[0])

    def test_level_six_sixth_order(self):
        """Test the largest table coefficient against its corrected value"""
        series, _ = rs_recursion(6, 6)

        assert series[6] == Fraction(-7647282005415, 1024)
        assert series[6] != published_series(6)[6]

    def test_first_order_closed_form(self):
        """Test E^(1) = (3/4)(2n^2 + 2n + 1)"""
        for n in range(11):
            series, _ = rs_recursion(n, 1)
            assert series[1] == first_order_closed_form(n)

    def test_second_and_third_order_closed_forms(self):
        """Test E^(2) and E^(3) against their polynomials in n for n <= 50"""
        for n in range(51):
            series, _ = rs_recursion(n, 3)
            assert series[2] == second_order_closed_form(n)
            assert series[3] == third_order_closed_form(n)

    def test_closed_form_values(self):
        """Test sample closed-form values, including misprinted cells"""
        assert second_order_closed_form(0) == Fraction(-21, 8)
        assert second_order_closed_form(2) == Fraction(-615, 8)
        assert third_order_closed_form(0) == Fraction(333, 16)
        assert third_order_closed_form(1) == Fraction(3915, 16)

    def test_first_order_column_of_table(self):
        """Test the closed form against the published first-order column"""
        assert [str(first_order_closed_form(n)) for n in range(7)] == \
            [PUBLISHED_TABLE[n][1] for n in range(7)]

    def test_order_zero(self):
        """Test K = 0 returns only the harmonic energy"""
        series, table = rs_recursion(3, 0)

        assert series.coeffs == (Fraction(7, 2),)
        assert table.coefficient(3, 0) == 1

    def test_negative_input_rejected(self):
        """Test negative level or order is rejected"""
        with pytest.raises(ValueError, match="non-negative"):
            rs_recursion(-1, 3)
        with pytest.raises(ValueError, match="non-negative"):
            rs_recursion(0, -2)

    def test_intermediate_normalization(self):
        """Test c_n^(k) = delta_k0"""
        _, table = rs_recursion(2, 8)

        assert table.coefficient(2, 0) == 1
        for k in range(1, 9):
            assert table.coefficient(2, k) == 0

    def test_support_bound(self):
        """Test nonzero c_m^(k) have |m - n| <= 4k and matching parity"""
        n = 3
        _, table = rs_recursion(n, 8)

        for (m, k), c in table.entries.items():
            assert c != 0
            assert abs(m - n) <= 4 * k
            assert (m - n) % 2 == 0

    def test_eigen_residual_vanishes(self):
        """Test the order-k equation holds exactly"""
        for n in (0, 1, 4):
            series, table = rs_recursion(n, 10)
            for k in range(11):
                assert eigen_residual(series, table, k).is_zero()

    def test_table_cap(self):
        """Test orders above the cap keep energies only"""
        series, table = rs_recursion(0, 10, table_cap=4)

        assert series.order == 10
        assert table.max_order == 4
        with pytest.raises(InsufficientOrder):
            table.sector(5)

    def test_truncated(self, ground_series):
        """Test truncation keeps the leading coefficients"""
        short = ground_series.truncated(6)

        assert short == published_series(0)


class TestSeriesProperties:
    """Test suite for observed properties of the generated series"""

    def test_sign_alternation(self, ground_series):
        """Test sign(E^(k)) = (-1)^(k+1) for k >= 1"""
        assert sign_pattern_holds(ground_series)

    @pytest.mark.slow
    def test_sign_alternation_high_order(self):
        """Test sign alternation through order 120"""
        series, table = rs_recursion(0, 120, table_cap=0)

        assert sign_pattern_holds(series, 1, 120)
        assert table.max_order == 0

    def test_sign_pattern_detects_violation(self):
        """Test a wrong sign is detected"""
        series = EnergySeries(0, (Fraction(1, 2), Fraction(3, 4), Fraction(21, 8)))

        assert not sign_pattern_holds(series)

    def test_denominators_powers_of_two(self):
        """Test published denominators are powers of two"""
        for n in range(7):
            assert denominators_are_powers_of_two(published_series(n).coeffs)
        assert not denominators_are_powers_of_two([Fraction(1, 3)])


class TestVerifyTable:
    """Test suite for table verification"""

    def test_full_pass(self, table_series):
        """Test generated levels match 20 printed cells and confirm the 29 errata"""
        report = verify_table(table_series)

        assert report.passed
        assert report.matched == 20
        assert report.mismatches == sorted(PUBLISHED_ERRATA)
        assert report.errata == sorted(PUBLISHED_ERRATA)
        assert report.failures == []
        assert report.summary() == "20/49 match, 29 known errata, PASS"

    def test_errata_cover_printed_misprints(self, table_series):
        """Test the erratum set is level 1 from k = 3 and levels 2..6 from k = 2"""
        assert len(PUBLISHED_ERRATA) == 29
        assert (1, 2) not in PUBLISHED_ERRATA
        assert (1, 3) in PUBLISHED_ERRATA
        assert (2, 2) in PUBLISHED_ERRATA
        assert all(k >= 2 and n >= 1 for n, k in PUBLISHED_ERRATA)

        by_level = {s.level: s for s in table_series}
        assert by_level[2][2] == Fraction(-615, 8)
        assert published_series(2)[2] == Fraction(-567, 8)
        assert by_level[1][3] == Fraction(3915, 16)
        assert published_series(1)[3] == Fraction(3585, 16)

    def test_detects_perturbed_cell(self, table_series):
        """Test a wrong coefficient in a printed cell is named"""
        series = list(table_series)
        coeffs = list(series[0].coeffs)
        coeffs[2] = Fraction(-21, 9)
        series[0] = EnergySeries(0, tuple(coeffs))

        report = verify_table(series)

        assert not report.passed
        assert report.failures == [(0, 2)]
        assert report.summary() == "19/49 match, 29 known errata, FAIL"

    def test_detects_perturbed_erratum_cell(self, table_series):
        """Test a wrong low-order erratum value fails its closed form"""
        series = list(table_series)
        coeffs = list(series[3].coeffs)
        coeffs[3] += 1
        series[3] = EnergySeries(3, tuple(coeffs))

        report = verify_table(series)

        assert report.failures == [(3, 3)]
        assert len(report.errata) == 28

    def test_detects_perturbed_high_order_column(self, table_series):
        """Test a wrong high-order erratum value breaks its column fit"""
        series = list(table_series)
        coeffs = list(series[5].coeffs)
        coeffs[5] += Fraction(1, 256)
        series[5] = EnergySeries(5, tuple(coeffs))

        report = verify_table(series)

        assert not report.passed
        assert (5, 5) in report.failures
        assert all(k == 5 for _, k in report.failures)

    def test_printed_table_fails_its_own_errata(self):
        """Test feeding the printed rows back fails on every erratum cell"""
        report = verify_table([published_series(n) for n in range(7)])

        assert report.matched == 49
        assert not report.passed
        low_order = {cell for cell in PUBLISHED_ERRATA if cell[1] <= 3}
        assert low_order <= set(report.failures)

    def test_parity_polynomial_fit(self, table_series):
        """Test computed columns fit a polynomial in n + 1/2 and a broken one does not"""
        for k in range(7):
            column = {s.level: s[k] for s in table_series}
            assert fits_parity_polynomial(column, k)

        column = {n: second_order_closed_form(n) for n in range(7)}
        column[6] += 1
        assert not fits_parity_polynomial(column, 2)

    def test_parity_polynomial_needs_spare_levels(self):
        """Test a column with no level beyond the interpolation nodes is rejected"""
        column = {n: third_order_closed_form(n) for n in range(3)}

        with pytest.raises(InsufficientOrder):
            fits_parity_polynomial(column, 3)

    def test_missing_level(self):
        """Test MissingLevel names the absent levels"""
        with pytest.raises(MissingLevel, match=r"\[5, 6\]"):
            verify_table([published_series(n) for n in range(5)])

    def test_insufficient_order(self):
        """Test series shorter than order 6 are rejected"""
        series = [published_series(n).truncated(4) for n in range(7)]

        with pytest.raises(InsufficientOrder):
            verify_table(series)


class TestGenerateLevels:
    """Test suite for multi-level generation"""

    def test_preserves_order(self):
        """Test results follow the requested level order"""
        result = generate_levels([3, 0, 1], 4)

        assert [s.level for s in result] == [3, 0, 1]

    def test_workers_match_inline(self):
        """Test worker processes give the same exact series"""
        inline = generate_levels(range(3), 8, workers=1)
        pooled = generate_levels(range(3), 8, workers=2)

        assert inline == pooled
