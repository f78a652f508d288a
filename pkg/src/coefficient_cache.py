"""Coefficient Cache Module

Text serialization of exact series coefficients and an on-disk cache of
generated levels keyed by (convention tag, level). The grammar is strict
ASCII: a rational is '-'? digits '/' digits, with no whitespace inside.
"""

import logging
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.logging_config import ErrorTracker
from src.series_engine import EnergySeries, WavefunctionTable, rs_recursion


logger = logging.getLogger(__name__)

DEFAULT_CONVENTION = "table1-v1"
_DIGITS = frozenset("0123456789")


class CacheError(Exception):
    """Base class for serialization and cache errors"""
    pass


class ParseError(CacheError):
    """Raised on malformed coefficient text"""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class CacheCorruption(CacheError):
    """Raised when a cache file cannot be trusted"""

    def __init__(self, path: Path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = Path(path)
        self.line = line
        self.reason = reason


def serialize_rational(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _first_bad_column(token: str) -> Optional[int]:
    """1-based column of the first character breaking the rational grammar"""
    i = 0
    if i < len(token) and token[i] == "-":
        i += 1
    start = i
    while i < len(token) and token[i] in _DIGITS:
        i += 1
    if i == start:
        return i + 1
    if i >= len(token) or token[i] != "/":
        return i + 1
    i += 1
    start = i
    while i < len(token) and token[i] in _DIGITS:
        i += 1
    if i == start or i != len(token):
        return i + 1
    return None


def parse_rational(token: str, line: int = 1, column: int = 1) -> Fraction:
    """Parse one 'p/q' token

    Args:
        token: Text of the rational
        line: Line number for error reporting
        column: Column where the token starts

    Returns:
        The reduced rational
    """
    bad = _first_bad_column(token)
    if bad is not None:
        shown = token[bad - 1] if bad <= len(token) else "end of token"
        raise ParseError(f"invalid rational {token!r} at {shown!r}", line, column + bad - 1)
    numerator, denominator = token.split("/")
    if int(denominator) == 0:
        raise ParseError(f"zero denominator in {token!r}", line, column + token.index("/") + 1)
    return Fraction(int(numerator), int(denominator))


def serialize_series(series: EnergySeries) -> str:
    """One 'p/q' line per coefficient, each line newline-terminated"""
    return "".join(serialize_rational(c) + "\n" for c in series.coeffs)


def parse_series(text: str, level: int = 0) -> EnergySeries:
    """Inverse of serialize_series

    Args:
        text: Coefficient text
        level: Level recorded in the returned series

    Returns:
        EnergySeries with one coefficient per line
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    coeffs = [parse_rational(token, line=number) for number, token in enumerate(lines, start=1)]
    return EnergySeries(level, tuple(coeffs))


def format_cache_text(series: EnergySeries, table: Optional[WavefunctionTable] = None,
                      convention: str = DEFAULT_CONVENTION) -> str:
    """Cache file body: header, energy lines, optional wavefunction lines"""
    lines = [f"level={series.level} order={series.order} convention={convention}"]
    lines.extend(f"E {k} {serialize_rational(c)}" for k, c in enumerate(series.coeffs))
    if table is not None:
        for (m, k), c in sorted(table.entries.items(), key=lambda item: (item[0][1], item[0][0])):
            lines.append(f"c {m} {k} {serialize_rational(c)}")
    return "\n".join(lines) + "\n"


def _parse_header(text: str, path: Path) -> Tuple[int, int, str]:
    fields: Dict[str, str] = {}
    for part in text.split(" "):
        key, sep, value = part.partition("=")
        if not sep:
            raise CacheCorruption(path, 1, f"malformed header field {part!r}")
        fields[key] = value
    if set(fields) != {"level", "order", "convention"}:
        raise CacheCorruption(path, 1, f"unexpected header fields {sorted(fields)}")
    try:
        return int(fields["level"]), int(fields["order"]), fields["convention"]
    except ValueError:
        raise CacheCorruption(path, 1, "non-integer level or order")


def parse_cache_text(text: str, path: Path = Path("<memory>"),
                     convention: str = DEFAULT_CONVENTION
                     ) -> Tuple[EnergySeries, Optional[WavefunctionTable]]:
    """Parse a cache file body, rejecting anything that does not fit exactly

    Returns:
        Tuple (EnergySeries, WavefunctionTable or None when no c lines)
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise CacheCorruption(path, 1, "empty cache file")

    level, order, tag = _parse_header(lines[0], path)
    if tag != convention:
        raise CacheCorruption(path, 1, f"convention {tag!r} does not match {convention!r}")

    energies: List[Fraction] = []
    entries: Dict[Tuple[int, int], Fraction] = {}
    max_order = -1
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        try:
            if parts[0] == "E" and len(parts) == 3:
                if int(parts[1]) != len(energies):
                    raise CacheCorruption(path, number, f"energy index {parts[1]} out of sequence")
                column = len(parts[0]) + len(parts[1]) + 3
                energies.append(parse_rational(parts[2], line=number, column=column))
            elif parts[0] == "c" and len(parts) == 4:
                m, k = int(parts[1]), int(parts[2])
                column = len(parts[0]) + len(parts[1]) + len(parts[2]) + 4
                entries[(m, k)] = parse_rational(parts[3], line=number, column=column)
                max_order = max(max_order, k)
            else:
                raise CacheCorruption(path, number, f"unrecognised line {line!r}")
        except ParseError as e:
            raise CacheCorruption(path, number, str(e))
        except ValueError:
            raise CacheCorruption(path, number, f"non-integer index in {line!r}")

    if len(energies) != order + 1:
        raise CacheCorruption(path, len(lines),
                              f"header promises order {order}, found {len(energies) - 1}")

    series = EnergySeries(level, tuple(energies))
    table = WavefunctionTable(level, max_order, entries) if entries else None
    return series, table


class CoefficientCache:
    """Directory of exact coefficient files, one per (convention, level)"""

    def __init__(self, directory: str, convention: str = DEFAULT_CONVENTION,
                 tracker: Optional[ErrorTracker] = None):
        self.directory = Path(directory)
        self.convention = convention
        self.tracker = tracker

    def path_for(self, level: int) -> Path:
        return self.directory / self.convention / f"level_{level}.txt"

    def load(self, level: int) -> Optional[Tuple[EnergySeries, Optional[WavefunctionTable]]]:
        """Read a cached level, None when absent; CacheCorruption when unreadable"""
        path = self.path_for(level)
        if not path.exists():
            return None
        text = path.read_bytes().decode("ascii", errors="replace")
        series, table = parse_cache_text(text, path, self.convention)
        if series.level != level:
            raise CacheCorruption(path, 1, f"file holds level {series.level}, expected {level}")
        return series, table

    def store(self, series: EnergySeries, table: Optional[WavefunctionTable] = None) -> Path:
        path = self.path_for(series.level)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_cache_text(series, table, self.convention), encoding="ascii")
        logger.debug(f"Cached level {series.level} through order {series.order} at {path}")
        return path

    def _discard(self, path: Path, reason: str, error: Exception) -> None:
        if self.tracker is not None:
            self.tracker.log_error(error, "coefficient cache")
            self.tracker.quarantine_file(path, reason)
        else:
            logger.warning(f"Discarding cache file {path}: {reason}")
            path.unlink()

    def get_or_compute(self, level: int, order: int, table_cap: int = 200,
                       include_wavefunction: bool = False,
                       recover: bool = False) -> EnergySeries:
        """Serve a level from cache when it reaches the order, else compute and store

        Args:
            level: Level n
            order: Required order K
            table_cap: Passed to rs_recursion
            include_wavefunction: Store c lines as well
            recover: Quarantine a corrupted file and recompute instead of raising

        Returns:
            EnergySeries truncated to the requested order
        """
        try:
            cached = self.load(level)
        except CacheCorruption as e:
            if not recover:
                raise
            self._discard(e.path, e.reason, e)
            cached = None

        if cached is not None:
            series, table = cached
            if series.order >= order and (table is not None or not include_wavefunction):
                logger.info(f"Cache hit: level {level}, order {series.order} >= {order}")
                return series.truncated(order)

        logger.info(f"Cache miss: computing level {level} through order {order}")
        series, table = rs_recursion(level, order, table_cap=table_cap)
        self.store(series, table if include_wavefunction else None)
        return series

    def reconcile(self, series: EnergySeries) -> bool:
        """Align the cache with a freshly computed series

        A cached file that cannot be read, or whose coefficients disagree with
        the series on their common orders, is quarantined and replaced.

        Returns:
            True when the series was written to the cache
        """
        path = self.path_for(series.level)
        try:
            cached = self.load(series.level)
        except CacheCorruption as e:
            self._discard(e.path, e.reason, e)
            cached = None

        if cached is not None:
            stored = cached[0]
            common = min(stored.order, series.order) + 1
            if stored.coeffs[:common] == series.coeffs[:common]:
                return False
            reason = f"level {series.level} disagrees with fresh computation"
            self._discard(path, reason, CacheCorruption(path, 1, reason))

        self.store(series)
        return True
