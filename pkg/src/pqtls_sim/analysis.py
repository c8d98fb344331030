"""Location parameters over raw result files, the analyzed tree, and plot data."""

from __future__ import annotations

import math
import shutil
from dataclasses import astuple, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptySeries, MalformedResultFile, MissingInput, UnknownAlgorithm
from .kem import Catalog, default_catalog
from .runner import EXTENDED_COLUMNS, RAW_HEADER, SCENARIO_COPY, ScenarioRow, parse_scenario

ANALYZED_HEADER = "average,std_dev,median,q75,q95,n_success,n_failure"
PLOT_HEADER = "x_value,x_name,algorithm,level,hybrid_flag,statistic,value"
STATISTICS = ("average", "std_dev", "median", "q75", "q95")
GROUPINGS = ("by-level", "hybrid-vs-pqonly", "per-algorithm")


def _nonempty(xs) -> list[float]:
    xs = list(xs)
    if not xs:
        raise EmptySeries("statistic of an empty series")
    return xs


def mean(xs: Iterable[float]) -> float:
    xs = _nonempty(xs)
    return math.fsum(xs) / len(xs)


def std_dev(xs: Iterable[float]) -> float:
    """Population standard deviation (divisor n)."""
    xs = _nonempty(xs)
    m = mean(xs)
    return math.sqrt(math.fsum((x - m) ** 2 for x in xs) / len(xs))


def median(xs: Iterable[float]) -> float:
    v = sorted(_nonempty(xs))
    n = len(v)
    if n % 2:
        return v[(n - 1) // 2]
    return (v[(n - 2) // 2] + v[n // 2]) / 2


def quantile(xs: Iterable[float], q: float) -> float:
    """Linear interpolation between order statistics at h = (n - 1) q."""
    if not 0 < q < 1:
        raise ValueError("q must lie strictly between 0 and 1")
    v = sorted(_nonempty(xs))
    h = (len(v) - 1) * q
    lo = math.floor(h)
    if lo + 1 >= len(v):
        return v[lo]
    return v[lo] + (h - lo) * (v[lo + 1] - v[lo])


@dataclass(frozen=True)
class SummaryStats:
    average: float
    std_dev: float
    median: float
    q75: float
    q95: float
    n_success: int
    n_failure: int

    def line(self) -> str:
        return ",".join(_fmt_stat(v) for v in astuple(self))


def _fmt_stat(v) -> str:
    if isinstance(v, int):
        return str(v)
    return "nan" if v != v else repr(round(v, 6))


def summarize(successes: Sequence[float], n_failure: int = 0) -> SummaryStats:
    if not successes:
        nan = float("nan")
        return SummaryStats(nan, nan, nan, nan, nan, 0, n_failure)
    return SummaryStats(mean(successes), std_dev(successes), median(successes),
                        quantile(successes, 0.75), quantile(successes, 0.95),
                        len(successes), n_failure)


def read_raw(path: str | Path) -> dict[int, tuple[list[float], int]]:
    """Raw result file -> {row: (successful durations, failure count)}."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != RAW_HEADER:
        raise MalformedResultFile(path, 1, "missing header")
    out: dict[int, tuple[list[float], int]] = {}
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedResultFile(path, lineno, "expected 3 fields")
        try:
            row = int(parts[0])
            int(parts[1])
        except ValueError:
            raise MalformedResultFile(path, lineno, "non-integer index") from None
        ok, fails = out.setdefault(row, ([], 0))
        token = parts[2].strip()
        try:
            value = float(token)
        except ValueError:
            if not token.isalpha():
                raise MalformedResultFile(path, lineno, f"bad value {token!r}") from None
            out[row] = (ok, fails + 1)
            continue
        if value != value or value < 0:
            raise MalformedResultFile(path, lineno, f"bad duration {token!r}")
        ok.append(value)
    return out


def _raw_files(root: Path) -> list[Path]:
    return sorted(p for p in root.rglob("*.csv") if not p.name.startswith("_"))


def analyze_tree(results_root: str | Path, analyzed_root: str | Path | None = None) -> Path:
    """Write one summary file per raw file at the mirrored path under ``analyzed_root``."""
    src = Path(results_root)
    if not src.is_dir():
        raise MissingInput(f"results tree {src} not found")
    dst = Path(analyzed_root) if analyzed_root else src.with_name(src.name + "_analyzed")
    for meta in sorted(src.rglob("_*")):
        if meta.is_file():
            target = dst / meta.relative_to(src)
            target.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(meta, target)
    for raw in _raw_files(src):
        per_row = read_raw(raw)
        lines = [ANALYZED_HEADER]
        lines += [summarize(ok, fails).line() for _, (ok, fails) in sorted(per_row.items())]
        target = dst / raw.relative_to(src)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    dst.mkdir(parents=True, exist_ok=True)
    return dst


def read_analyzed(path: str | Path) -> list[SummaryStats]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != ANALYZED_HEADER:
        raise MalformedResultFile(path, 1, "missing header")
    out = []
    for lineno, line in enumerate(lines[1:], 2):
        parts = line.split(",")
        if len(parts) != 7:
            raise MalformedResultFile(path, lineno, "expected 7 fields")
        try:
            out.append(SummaryStats(*(float(p) for p in parts[:5]), int(parts[5]), int(parts[6])))
        except ValueError:
            raise MalformedResultFile(path, lineno, "non-numeric field") from None
    return out


# -- plot data ----------------------------------------------------------------

def varied_axis(rows: Sequence[ScenarioRow]) -> tuple[str, list[float]]:
    """Name and values of the column a scenario sweeps.

    When the srv_ and cli_ variants of a parameter move together the shared
    suffix is used (``delay``). If nothing varies the row index is the axis.
    """
    if not rows:
        return "row", []
    table = [r.values(extended=True) for r in rows]
    varied = [c for c in EXTENDED_COLUMNS[1:] if len({t[c] for t in table}) > 1]
    if not varied:
        return "row", [float(i) for i in range(len(rows))]
    first = varied[0]
    suffix = first.split("_", 1)[1]
    pair = {f"srv_{suffix}", f"cli_{suffix}"}
    if set(varied) >= pair and all(t[f"srv_{suffix}"] == t[f"cli_{suffix}"] for t in table):
        name = suffix
    else:
        name = first
    return name, [float(t[first]) for t in table]


def _scenario_rows(scen_dir: Path) -> list[ScenarioRow]:
    path = scen_dir / SCENARIO_COPY
    if not path.is_file():
        raise MissingInput(f"{path} not found")
    text = path.read_text(encoding="utf-8")
    header = text.split("\n", 1)[0].strip().split(",")
    return parse_scenario(text, extended=len(header) == len(EXTENDED_COLUMNS))


@dataclass(frozen=True)
class PlotRow:
    x_value: float
    x_name: str
    algorithm: str
    level: int
    hybrid_flag: bool
    statistic: str
    value: float

    def line(self) -> str:
        return ",".join([repr(self.x_value), self.x_name, self.algorithm, str(self.level),
                         "1" if self.hybrid_flag else "0", self.statistic, _fmt_stat(self.value)])


def plot_rows(analyzed_root: str | Path, grouping: str = "per-algorithm",
              statistics: Sequence[str] = STATISTICS, scenario: str | None = None,
              catalog: Catalog | None = None) -> list[PlotRow]:
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}")
    root = Path(analyzed_root)
    if not root.is_dir():
        raise MissingInput(f"analyzed tree {root} not found")
    cat = catalog or default_catalog()
    per_alg: dict[str, list[PlotRow]] = {}
    meta: dict[str, tuple[int, bool]] = {}
    for path in _raw_files(root):
        scen_name = path.relative_to(root).parts[0]
        if scenario is not None and scen_name != scenario:
            continue
        x_name, xs = varied_axis(_scenario_rows(root / scen_name))
        alg = path.stem
        try:
            spec = cat.lookup(alg)
            level, hybrid = spec.nist_level, spec.is_hybrid
        except UnknownAlgorithm:
            level = next((int(p[5:]) for p in path.parts if p.startswith("level") and p[5:].isdigit()), 0)
            hybrid = "hybrid" in path.parts
        meta[alg] = (level, hybrid)
        for x, stats in zip(xs, read_analyzed(path)):
            for st in statistics:
                per_alg.setdefault(alg, []).append(
                    PlotRow(x, x_name, alg, level, hybrid, st, getattr(stats, st)))

    if grouping == "per-algorithm":
        order = sorted(per_alg)
    elif grouping == "by-level":
        order = sorted(per_alg, key=lambda a: (meta[a][0], meta[a][1], a))
    else:
        order = []
        for alg in sorted(a for a in per_alg if not meta[a][1]):
            partners = [h for h in per_alg if meta[h][1] and h.split("_", 1)[1] == alg]
            if partners:
                order += [alg] + sorted(partners)
    return [row for alg in order for row in per_alg[alg]]


def plot_data(analyzed_root: str | Path, grouping: str = "per-algorithm",
              statistics: Sequence[str] = STATISTICS, scenario: str | None = None,
              catalog: Catalog | None = None) -> str:
    """Long-format CSV text with one line per (x value, algorithm, statistic)."""
    rows = plot_rows(analyzed_root, grouping, statistics, scenario, catalog)
    return "\n".join([PLOT_HEADER] + [r.line() for r in rows]) + "\n"


def medians_by_algorithm(analyzed_root: str | Path, scenario: str) -> dict[str, tuple[str, list[float], list[float]]]:
    """{algorithm: (x_name, xs, medians)} for one scenario; rows without successes are skipped."""
    out: dict[str, tuple[str, list[float], list[float]]] = {}
    for r in plot_rows(analyzed_root, "per-algorithm", ("median",), scenario):
        name, xs, ys = out.setdefault(r.algorithm, (r.x_name, [], []))
        if r.value == r.value:
            xs.append(r.x_value)
            ys.append(r.value)
    return out


__all__ = [
    "ANALYZED_HEADER", "PLOT_HEADER", "SummaryStats", "analyze_tree", "mean", "median",
    "plot_data", "plot_rows", "quantile", "read_analyzed", "read_raw", "std_dev", "summarize",
    "varied_axis",
]
