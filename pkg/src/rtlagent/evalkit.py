"""Benchmark scoring: pass@k, Syn@k/Func@k, PPA score, geometric means,
relative PPA score, pairwise win rate and Table-2-style report emission."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

from .domain import PpaMetrics

NaPolicy = Literal["skip", "strict", "baseline"]
Triple = tuple[float, float, float]
CSV_COLUMNS = ["task_id", "delay_ns", "area_um2", "power_w", "ppa_score", "status"]
NA = "N/A"


class EmptyAfterFilter(ValueError):
    pass


class CsvFormatError(ValueError):
    def __init__(self, path: str, row: int, column: str | None, message: str):
        where = f"{path}: row {row}" + (f", column {column}" if column else "")
        super().__init__(f"{where}: {message}")
        self.row = row
        self.column = column


# ------------------------------------------------------------------- pass@k


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased estimator 1 - C(n-c, k)/C(n, k), in product form."""
    for name, v in (("n", n), ("c", c), ("k", k)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise TypeError(f"{name} must be an integer")
    if not 0 <= c <= n:
        raise ValueError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n - c < k:
        return 1.0
    miss = 1.0
    for i in range(n - c + 1, n + 1):
        miss *= 1.0 - k / i
    return 1.0 - miss


@dataclass(frozen=True)
class TaskSampleRecord:
    task_id: str
    n: int
    c_func: int
    c_syn: int
    best_metrics: PpaMetrics | None = None

    def __post_init__(self):
        if not 0 <= self.c_syn <= self.c_func <= self.n:
            raise ValueError(f"{self.task_id}: need 0 <= c_syn <= c_func <= n")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "n": self.n,
            "c_func": self.c_func,
            "c_syn": self.c_syn,
            "best_metrics": self.best_metrics.to_dict() if self.best_metrics else None,
        }


def _mean_at_k(records: Sequence[TaskSampleRecord], k: int, attr: str) -> float:
    if not records:
        raise ValueError("no records to score")
    return statistics.fmean(pass_at_k(r.n, getattr(r, attr), k) for r in records)


def func_at_k(records: Sequence[TaskSampleRecord], k: int) -> float:
    return _mean_at_k(records, k, "c_func")


def syn_at_k(records: Sequence[TaskSampleRecord], k: int) -> float:
    return _mean_at_k(records, k, "c_syn")


# ---------------------------------------------------------------------- ppa


def ppa_score(m: PpaMetrics) -> float:
    return 1.0 / (m.delay_ns * m.area_um2 * m.power_w)


def relative_ppa_score(method_geo: Triple, baseline_geo: Triple) -> float:
    """Baseline product over method product; the baseline maps to 1.0."""
    if min(*method_geo, *baseline_geo) <= 0:
        raise ValueError("geometric-mean components must be positive")
    return math.prod(baseline_geo) / math.prod(method_geo)


def geometric_mean(values: Sequence[float | None], policy: NaPolicy = "skip", fallback: Sequence[float | None] | None = None) -> float:
    """Geometric mean with explicit N/A handling.

    ``skip`` drops ``None`` entries, ``strict`` rejects them, ``baseline``
    substitutes the entry at the same position of ``fallback``.
    """
    if policy == "strict" and any(v is None for v in values):
        raise EmptyAfterFilter("N/A entry under the strict policy")
    if policy == "baseline":
        if fallback is None or len(fallback) != len(values):
            raise ValueError("the baseline policy needs a fallback of equal length")
        values = [fb if v is None else v for v, fb in zip(values, fallback)]
    elif policy not in ("skip", "strict"):
        raise ValueError(f"unknown N/A policy {policy!r}")
    kept = [v for v in values if v is not None]
    if not kept:
        raise EmptyAfterFilter("no values left after N/A filtering")
    if any(v <= 0 for v in kept):
        raise ValueError("geometric mean needs positive values")
    return statistics.geometric_mean(kept)


def geomean_triple(
    metrics: Sequence[PpaMetrics | None], policy: NaPolicy = "skip", fallback: Sequence[PpaMetrics | None] | None = None
) -> Triple:
    cols = []
    for i in range(3):
        vals = [m.as_tuple()[i] if m else None for m in metrics]
        fb = [m.as_tuple()[i] if m else None for m in fallback] if fallback is not None else None
        cols.append(geometric_mean(vals, policy, fb))
    return (cols[0], cols[1], cols[2])


def relative_ppa_per_task(
    method: Mapping[str, PpaMetrics | None], baseline: Mapping[str, PpaMetrics], policy: NaPolicy = "baseline"
) -> float:
    """Geometric mean over tasks of per-task score ratios (alternative reading)."""
    ratios: list[float | None] = []
    for task_id, base in baseline.items():
        m = method.get(task_id)
        ratios.append(ppa_score(m) / ppa_score(base) if m else None)
    return geometric_mean(ratios, policy, [1.0] * len(ratios) if policy == "baseline" else None)


# ------------------------------------------------------------------ win rate


@dataclass(frozen=True)
class WinRate:
    wins_a: int
    wins_b: int
    ties: int
    common: int

    @property
    def rate_a(self) -> float:
        return self.wins_a / self.common if self.common else 0.0

    @property
    def rate_b(self) -> float:
        return self.wins_b / self.common if self.common else 0.0


def win_rate(a: Mapping[str, float], b: Mapping[str, float]) -> WinRate:
    common = [t for t in a if t in b]
    wins_a = sum(1 for t in common if a[t] > b[t])
    wins_b = sum(1 for t in common if b[t] > a[t])
    return WinRate(wins_a, wins_b, len(common) - wins_a - wins_b, len(common))


# -------------------------------------------------------------------- report


@dataclass
class BenchmarkReport:
    records: list[TaskSampleRecord]
    baselines: dict[str, PpaMetrics] = field(default_factory=dict)
    ks: tuple[int, ...] = (1,)
    na_policy: NaPolicy = "baseline"
    relative_mode: Literal["geomean", "per_task"] = "geomean"

    @property
    def method_metrics(self) -> dict[str, PpaMetrics | None]:
        return {r.task_id: r.best_metrics for r in self.records}

    def aggregate(self) -> dict:
        agg: dict = {"pass_at_k": {}, "func_at_k": {}, "syn_at_k": {}}
        if self.records:
            max_k = min(r.n for r in self.records)
            for k in self.ks:
                if 1 <= k <= max_k:
                    agg["func_at_k"][k] = func_at_k(self.records, k)
                    agg["pass_at_k"][k] = agg["func_at_k"][k]
                    agg["syn_at_k"][k] = syn_at_k(self.records, k)
        agg.update(method_and_baseline_geomeans(self.method_metrics, self.baselines, self.na_policy))
        agg["relative_ppa_score"] = None
        if agg["method_geo"] and agg["baseline_geo"]:
            if self.relative_mode == "per_task":
                agg["relative_ppa_score"] = relative_ppa_per_task(self.method_metrics, self.baselines, self.na_policy)
            else:
                agg["relative_ppa_score"] = relative_ppa_score(agg["method_geo"], agg["baseline_geo"])
        return agg

    def to_dict(self) -> dict:
        agg = self.aggregate()
        for key in ("pass_at_k", "func_at_k", "syn_at_k"):
            agg[key] = {str(k): v for k, v in agg[key].items()}
        for key in ("method_geo", "baseline_geo"):
            agg[key] = list(agg[key]) if agg[key] else None
        return {"records": [r.to_dict() for r in self.records], "aggregate": agg}


def method_and_baseline_geomeans(
    method: Mapping[str, PpaMetrics | None], baselines: Mapping[str, PpaMetrics], policy: NaPolicy = "baseline"
) -> dict:
    """Geomean triples of the method and the baseline.

    Under ``baseline`` the method is scored over the baseline's task set
    with N/A cells replaced by the baseline triple; otherwise over its own
    tasks with the given policy.
    """
    out: dict = {"method_geo": None, "baseline_geo": None}
    if baselines:
        out["baseline_geo"] = geomean_triple(list(baselines.values()))
    try:
        if policy == "baseline" and baselines:
            ids = list(baselines)
            out["method_geo"] = geomean_triple([method.get(t) for t in ids], "baseline", [baselines[t] for t in ids])
        else:
            out["method_geo"] = geomean_triple(list(method.values()), "skip" if policy == "baseline" else policy)
    except EmptyAfterFilter:
        out["method_geo"] = None
    return out


def fmt_triple(t: Iterable[float] | None) -> str:
    if t is None:
        return NA
    d, a, p = t
    return f"{d:.3g} / {_fmt_area(a)} / {p:.3g}"


def _fmt_area(a: float) -> str:
    return f"{a:.3f}".rstrip("0").rstrip(".")


def emit_table(report: BenchmarkReport, baselines: Mapping[str, PpaMetrics] | None = None, fmt: Literal["csv", "markdown"] = "markdown", method_name: str = "Method") -> str:
    baselines = dict(report.baselines if baselines is None else baselines)
    report = BenchmarkReport(report.records, baselines, report.ks, report.na_policy, report.relative_mode)
    agg = report.aggregate()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.records:
            m = r.best_metrics
            if m:
                w.writerow([r.task_id, repr(m.delay_ns), repr(m.area_um2), repr(m.power_w), f"{ppa_score(m):.6g}", "ok"])
            else:
                w.writerow([r.task_id, NA, NA, NA, NA, NA])
        geo = agg["method_geo"]
        w.writerow(["Geometric Mean", *(f"{v:.6g}" for v in geo), f"{1 / math.prod(geo):.6g}", "aggregate"] if geo else ["Geometric Mean", NA, NA, NA, NA, "aggregate"])
        rel = agg["relative_ppa_score"]
        w.writerow(["Relative PPA Score", "", "", "", f"{rel:.6g}" if rel is not None else NA, "aggregate"])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown table format {fmt!r}")

    lines = [
        f"| Design | Original | {method_name} |",
        "|---|---|---|",
    ]
    for r in report.records:
        base = baselines.get(r.task_id)
        lines.append(f"| {r.task_id} | {fmt_triple(base.as_tuple() if base else None)} | {fmt_triple(r.best_metrics.as_tuple() if r.best_metrics else None)} |")
    lines.append(f"| **Geometric Mean** | {fmt_triple(agg['baseline_geo'])} | {fmt_triple(agg['method_geo'])} |")
    rel = agg["relative_ppa_score"]
    lines.append(f"| **Relative PPA Score** | {'1.000' if agg['baseline_geo'] else NA} | {f'{rel:.3f}' if rel is not None else NA} |")
    if agg["pass_at_k"]:
        lines += ["", "| Metric | Value |", "|---|---|"]
        for k, v in agg["pass_at_k"].items():
            lines.append(f"| pass@{k} | {v:.4f} |")
        for k, v in agg["syn_at_k"].items():
            lines.append(f"| Syn@{k} | {v:.4f} |")
        for k, v in agg["func_at_k"].items():
            lines.append(f"| Func@{k} | {v:.4f} |")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- csv files


def read_metrics_csv(path: str | Path) -> dict[str, PpaMetrics | None]:
    """task_id -> metrics (``None`` for N/A rows); aggregate rows are skipped."""
    path = str(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("task_id", "delay_ns", "area_um2", "power_w"):
            if col not in header:
                raise CsvFormatError(path, 1, col, "missing column")
        out: dict[str, PpaMetrics | None] = {}
        for lineno, row in enumerate(reader, start=2):
            if (row.get("status") or "").strip() == "aggregate":
                continue
            task = (row["task_id"] or "").strip()
            if not task:
                raise CsvFormatError(path, lineno, "task_id", "empty task id")
            if task in out:
                raise CsvFormatError(path, lineno, "task_id", f"duplicate task {task!r}")
            cells = [(row[c] or "").strip() for c in ("delay_ns", "area_um2", "power_w")]
            if all(c.upper() in ("", NA) for c in cells):
                out[task] = None
                continue
            values = []
            for col, cell in zip(("delay_ns", "area_um2", "power_w"), cells):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvFormatError(path, lineno, col, f"not a number: {cell!r}") from None
            try:
                out[task] = PpaMetrics(*values)
            except ValueError as exc:
                raise CsvFormatError(path, lineno, None, str(exc)) from None
    return out


def write_metrics_csv(path: str | Path, metrics: Mapping[str, PpaMetrics | None]) -> None:
    records = [TaskSampleRecord(t, 1, int(m is not None), int(m is not None), m) for t, m in metrics.items()]
    Path(path).write_text(emit_table(BenchmarkReport(records), {}, "csv"), encoding="utf-8")
