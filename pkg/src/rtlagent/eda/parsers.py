"""Extract delay, area and power from synthesis/STA reports.

Each parser tries an ordered list of patterns; the first pattern with any
hit decides, and among its hits the last one wins (tools restate totals
after later optimization passes). Parsers return a positive value or raise
:class:`ParseError`, never a default.
"""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation
from typing import Sequence

NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


class ParseError(ValueError):
    def __init__(self, report_kind: str, tried: Sequence[str], detail: str = "no pattern matched"):
        self.report_kind = report_kind
        self.tried = list(tried)
        super().__init__(f"{report_kind}: {detail} (patterns tried: {'; '.join(self.tried)})")


# Direct delay patterns, each with one capture group holding the value in ns.
DEFAULT_DELAY_PATTERNS = [
    rf"(?i)critical[ _]path[ _]delay[ \t]*[:=]?[ \t]*({NUM})",
    rf"(?i)data arrival time[ \t]*[:=]?[ \t]*({NUM})",
    rf"(?im)^[ \t]*({NUM})[ \t]+data arrival time",
    rf"(?i)period_min[ \t]*=[ \t]*({NUM})",
]
WORST_SLACK_PATTERNS = [
    rf"(?i)worst slack[ \t]*[:=]?[ \t]*({NUM})",
    rf"(?im)^[ \t]*({NUM})[ \t]+slack \((?:MET|VIOLATED)\)",
]
CLOCK_PERIOD_PATTERNS = [
    rf"(?i)clock period[ \t]*[:=]?[ \t]*({NUM})",
]
DEFAULT_AREA_PATTERNS = [
    rf"(?i)Chip area for (?:top )?module[ \t]+[^\n]*?:[ \t]*({NUM})",
    rf"(?i)Design area[ \t]+({NUM})",
]
TOTAL_ROW = re.compile(r"(?im)^[ \t]*Total\b(.*)$")
_POWER_VALUE = re.compile(rf"({NUM})\s*(%|[munpµ]?W\b|[munpµ]?Watts?\b)?")
_UNIT_SCALE = {"": 1.0, "m": 1e-3, "u": 1e-6, "µ": 1e-6, "n": 1e-9, "p": 1e-12}
_HEADER_UNIT = re.compile(r"\((?P<unit>[munpµ]?)(?:W|Watts?)\)")


def _last_hit(patterns: Sequence[str], text: str) -> str | None:
    for pattern in patterns:
        hits = re.findall(pattern, text)
        if hits:
            return hits[-1]
    return None


def _positive(kind: str, tried: Sequence[str], raw: str) -> float:
    value = float(raw)
    if not value > 0:
        raise ParseError(kind, tried, f"non-positive value {raw}")
    return value


def parse_worst_slack(timing_report: str) -> float | None:
    """Worst slack in ns when the report states one, else ``None``."""
    hit = _last_hit(WORST_SLACK_PATTERNS, timing_report)
    return float(hit) if hit is not None else None


def parse_delay(timing_report: str, clock_period_ns: float | None = None, patterns: Sequence[str] | None = None) -> float:
    """Critical-path delay in ns.

    Tries the direct patterns first, then ``clock period - worst slack``
    (clock period from the report, else ``clock_period_ns``).
    """
    direct = list(patterns) if patterns is not None else DEFAULT_DELAY_PATTERNS
    tried = direct + ["clock period - worst slack"]
    for pattern in direct:
        hits = re.findall(pattern, timing_report)
        if hits:
            # STA summaries print arrival time negated in the slack arithmetic block.
            raw = hits[-1].lstrip("+-") if "arrival" in pattern else hits[-1]
            return _positive("timing_report", tried, raw)

    slack = _last_hit(WORST_SLACK_PATTERNS, timing_report)
    period = _last_hit(CLOCK_PERIOD_PATTERNS, timing_report)
    if period is None and clock_period_ns is not None:
        period = repr(float(clock_period_ns))
    if slack is None or period is None:
        raise ParseError("timing_report", tried)
    try:
        delay = Decimal(period) - Decimal(slack)
    except InvalidOperation:
        raise ParseError("timing_report", tried, "unreadable slack arithmetic") from None
    return _positive("timing_report", tried, str(delay))


def parse_area(synthesis_log: str, patterns: Sequence[str] | None = None) -> float:
    """Cell area in um^2."""
    patterns = list(patterns) if patterns is not None else DEFAULT_AREA_PATTERNS
    hit = _last_hit(patterns, synthesis_log)
    if hit is None:
        raise ParseError("synthesis_log", patterns)
    return _positive("synthesis_log", patterns, hit)


def parse_power(power_report: str) -> float:
    """Total power in W, normalized from W/mW/uW/nW/pW."""
    tried = ["Total row with optional unit suffix"]
    rows = [m.group(1) for m in TOTAL_ROW.finditer(power_report)]
    header = _HEADER_UNIT.search(power_report)
    default_scale = _UNIT_SCALE[header.group("unit")] if header else 1.0
    for row in reversed(rows):
        values = [(num, unit or "") for num, unit in _POWER_VALUE.findall(row) if unit != "%"]
        if not values:
            continue
        num, unit = values[-1]
        scale = _UNIT_SCALE[unit[0]] if unit and unit[0] in "munpµ" else (1.0 if unit else default_scale)
        value = float(Decimal(num) * Decimal(repr(scale))) if scale != 1.0 else float(num)
        if not value > 0:
            raise ParseError("power_report", tried, f"non-positive value {num}")
        return value
    raise ParseError("power_report", tried)
