"""Scenario and algorithm files, the measurement matrix, and the results tree.

A scenario CSV holds one network configuration per row in this exact column
order::

    title, srv_pkt_loss, srv_delay, srv_jitter, srv_duplicate, srv_corrupt,
    srv_reorder, srv_rate, cli_delay, cli_jitter, cli_duplicate, cli_corrupt,
    cli_reorder, cli_rate

``srv_*`` columns shape traffic directed at the server (the client->server
link), ``cli_*`` columns traffic directed at the client. Rates are Mbit/s,
delays milliseconds, the rest percentages. The extended format inserts
``cli_pkt_loss`` before ``cli_delay``.

Raw results land at ``<out>/<scenario>/<class label>/<algorithm>.csv`` with
one ``row,measurement,duration_ms`` line per handshake; failed handshakes
carry their tag (``Timeout``, ``CorruptAbort``, ``ConnectFail``) in place of
the duration.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import HandshakeFailure, SchemaError
from .handshake import FlightProfile, LinkPair, Transcript, build_transcript, simulate_handshake
from .kem import Catalog, CostModel, Role, default_catalog, load_catalog, load_cost_model, shipped_cost_file
from .link import LinkProfile
from .sim_core import US_PER_S, RunRng
from .transport import TcpConfig

log = logging.getLogger(__name__)

SRV_FIELDS = ("pkt_loss", "delay", "jitter", "duplicate", "corrupt", "reorder", "rate")
CLI_FIELDS = ("delay", "jitter", "duplicate", "corrupt", "reorder", "rate")
COLUMNS = ("title",) + tuple(f"srv_{f}" for f in SRV_FIELDS) + tuple(f"cli_{f}" for f in CLI_FIELDS)
EXTENDED_COLUMNS = COLUMNS[:8] + ("cli_pkt_loss",) + COLUMNS[8:]

BASELINE_DELAY_MS = 2.684
BASELINE_RATE_MBPS = 500.0
RAW_HEADER = "row,measurement,duration_ms"
SCENARIO_COPY = "_scenario.csv"
CONFIG_COPY = "_run_config.txt"


@dataclass(frozen=True)
class SideParams:
    pkt_loss: float = 0.0
    delay: float = BASELINE_DELAY_MS
    jitter: float = 0.0
    duplicate: float = 0.0
    corrupt: float = 0.0
    reorder: float = 0.0
    rate: float = BASELINE_RATE_MBPS

    def profile(self, jitter_correlation: float = 0.25, queue_limit: int = 1000) -> LinkProfile:
        return LinkProfile(
            delay_ms=self.delay, jitter_ms=self.jitter, jitter_correlation=jitter_correlation,
            loss_pct=self.pkt_loss, corrupt_pct=self.corrupt, duplicate_pct=self.duplicate,
            reorder_pct=self.reorder, rate_mbps=self.rate, queue_limit_packets=queue_limit,
        )


@dataclass(frozen=True)
class ScenarioRow:
    title: str
    srv: SideParams = SideParams()
    cli: SideParams = SideParams()

    def links(self, jitter_correlation: float = 0.25, queue_limit: int = 1000) -> LinkPair:
        return LinkPair(self.srv.profile(jitter_correlation, queue_limit),
                        self.cli.profile(jitter_correlation, queue_limit))

    def values(self, extended: bool = False) -> dict[str, object]:
        out: dict[str, object] = {"title": self.title}
        for f in SRV_FIELDS:
            out[f"srv_{f}"] = getattr(self.srv, f)
        for f in ("pkt_loss",) + CLI_FIELDS if extended else CLI_FIELDS:
            out[f"cli_{f}"] = getattr(self.cli, f)
        return {c: out[c] for c in (EXTENDED_COLUMNS if extended else COLUMNS)}


def _parse_number(token: str, row: int, column: str) -> float:
    try:
        v = float(token)
    except ValueError:
        raise SchemaError(row, column, token, "not a number") from None
    if v != v:
        raise SchemaError(row, column, token, "not a number")
    field_name = column.split("_", 1)[1]
    if field_name == "rate":
        if not v > 0:
            raise SchemaError(row, column, token, "rate must be positive")
    elif field_name in ("delay", "jitter"):
        if v < 0:
            raise SchemaError(row, column, token, "must be non-negative")
    elif not 0 <= v <= 100:
        raise SchemaError(row, column, token, "percentage outside [0, 100]")
    return v


def parse_scenario(csv_text: str, extended: bool = False) -> list[ScenarioRow]:
    """Parse scenario CSV text; a header line is optional."""
    columns = EXTENDED_COLUMNS if extended else COLUMNS
    rows: list[ScenarioRow] = []
    reader = csv.reader(io.StringIO(csv_text))
    data_index = 0
    for lineno, fields_ in enumerate(reader):
        if not fields_ or all(not f.strip() for f in fields_):
            continue
        fields_ = [f.strip() for f in fields_]
        if lineno == 0 and fields_[0].lower() == "title":
            if tuple(f.lower() for f in fields_) != columns:
                raise SchemaError(0, "header", ",".join(fields_), "unexpected header")
            continue
        if len(fields_) != len(columns):
            raise SchemaError(data_index, f"#{len(fields_)}", ",".join(fields_),
                              f"expected {len(columns)} fields")
        vals = {c: _parse_number(tok, data_index, c) for c, tok in zip(columns[1:], fields_[1:])}
        srv = SideParams(**{f: vals[f"srv_{f}"] for f in SRV_FIELDS})
        cli_fields = ("pkt_loss",) + CLI_FIELDS if extended else CLI_FIELDS
        cli = SideParams(**{f: vals[f"cli_{f}"] for f in cli_fields})
        if srv.reorder > 0 and srv.delay <= 0:
            raise SchemaError(data_index, "srv_reorder", fields_[6], "reordering needs a delay")
        if cli.reorder > 0 and cli.delay <= 0:
            raise SchemaError(data_index, "cli_reorder", str(cli.reorder), "reordering needs a delay")
        rows.append(ScenarioRow(fields_[0], srv, cli))
        data_index += 1
    return rows


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def emit_scenario(rows: Iterable[ScenarioRow], extended: bool = False, header: bool = True) -> str:
    columns = EXTENDED_COLUMNS if extended else COLUMNS
    lines = [",".join(columns)] if header else []
    for r in rows:
        if not extended and r.cli.pkt_loss:
            raise ValueError(f"row {r.title!r} needs the extended format for cli_pkt_loss")
        lines.append(",".join(_fmt(v) for v in r.values(extended).values()))
    return "\n".join(lines) + "\n"


# -- presets ----------------------------------------------------------------

DELAY_SET = [0, 1, 2.5, 5, 7.5, 10, 15, 20, 25, 30, 40, 50, 60, 80, 100, 120]
JITTER_SET = [0, 0.1, 0.25, 0.5, 0.75, 1, 1.5, 2, 2.5, 3, 5, 7, 9, 12, 15, 20]
JITTER_BASE_DELAY_MS = 20.0
RATE_SET = [0.1, 0.25, 0.5, 1, 1.5, 2, 3, 4, 5, 7.5, 10, 15, 20, 30, 45, 60, 75, 100, 150, 250,
            500, 1000, 2000]
LOSS_SET = [0, 0.25, 0.5, 1, 1.5, 2] + list(range(3, 21))

PRESET_FILES = {
    "D": "scenario_delay",
    "J": "scenario_jitter_delay20ms",
    "R_cli": "scenario_rate_cli",
    "R_srv": "scenario_rate_srv",
    "R_both": "scenario_rate_both",
    "PL": "scenario_packetloss",
    "RO": "scenario_reorder",
    "DU": "scenario_duplicate",
    "C": "scenario_corrupt",
}


def _sweep(prefix: str, values, srv_change, cli_change) -> list[ScenarioRow]:
    rows = []
    base = SideParams()
    for v in values:
        srv = replace(base, **srv_change(v)) if srv_change else base
        cli = replace(base, **cli_change(v)) if cli_change else base
        rows.append(ScenarioRow(f"{prefix}_{_fmt(v)}", srv, cli))
    return rows


def generate_presets() -> dict[str, list[ScenarioRow]]:
    """Scenario sweeps keyed by preset name; unvaried fields stay at the baseline.

    ``R_cli`` throttles the client's outgoing traffic (the srv_rate column),
    ``R_srv`` the server's outgoing traffic (cli_rate). The reorder,
    duplicate and corrupt sweeps impair the same direction as the loss sweep
    so the four curves are directly comparable.
    """
    def both(key):
        change = lambda v: {key: v}  # noqa: E731
        return change, change

    def j20(v):
        return {"delay": JITTER_BASE_DELAY_MS, "jitter": v}

    return {
        "D": _sweep("delay", DELAY_SET, *both("delay")),
        "J": _sweep("jitter", JITTER_SET, j20, j20),
        "R_cli": _sweep("rate", RATE_SET, lambda v: {"rate": v}, None),
        "R_srv": _sweep("rate", RATE_SET, None, lambda v: {"rate": v}),
        "R_both": _sweep("rate", RATE_SET, *both("rate")),
        "PL": _sweep("loss", LOSS_SET, lambda v: {"pkt_loss": v}, None),
        "RO": _sweep("reorder", LOSS_SET, lambda v: {"reorder": v}, None),
        "DU": _sweep("duplicate", LOSS_SET, lambda v: {"duplicate": v}, None),
        "C": _sweep("corrupt", LOSS_SET, lambda v: {"corrupt": v}, None),
    }


def write_presets(out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for name, rows in generate_presets().items():
        path = out / f"{PRESET_FILES[name]}.csv"
        path.write_text(emit_scenario(rows), encoding="utf-8", newline="\n")
        written[name] = path
    return written


# -- algorithms file ----------------------------------------------------------

def parse_algorithms(csv_text: str, catalog: Catalog | None = None) -> list[tuple[str, list[str]]]:
    """Rows of ``class_label,id[,id...]``; every id must resolve in ``catalog``."""
    cat = catalog or default_catalog()
    out = []
    for lineno, fields_ in enumerate(csv.reader(io.StringIO(csv_text))):
        fields_ = [f.strip() for f in fields_ if f.strip()]
        if not fields_ or fields_[0].startswith("#"):
            continue
        label, ids = fields_[0], fields_[1:]
        if not ids:
            raise SchemaError(lineno, "algorithms", label, "class label without algorithms")
        for alg_id in ids:
            cat.lookup(alg_id)
        out.append((label, ids))
    return out


def class_label(alg_id: str, catalog: Catalog | None = None) -> str:
    """Canonical results subpath, e.g. ``level1/candidates/pq-only``."""
    spec = (catalog or default_catalog()).lookup(alg_id)
    if spec.role is Role.CLASSICAL_BASELINE:
        return f"level{spec.nist_level}/baseline/classical"
    group = "candidates" if spec.role is Role.CANDIDATE else "alternatives"
    kind = "hybrid" if spec.is_hybrid else "pq-only"
    return f"level{spec.nist_level}/{group}/{kind}"


def default_algorithms(catalog: Catalog | None = None) -> list[tuple[str, list[str]]]:
    """Every shipped variant that fits a key_share, plus its hybrid where one exists."""
    from .errors import NoClassicalPartner
    from .kem import KEY_SHARE_LIMIT

    cat = catalog or default_catalog()
    groups: dict[str, list[str]] = {}
    for spec in cat:
        if max(spec.pk_bytes, spec.ct_bytes) > KEY_SHARE_LIMIT:
            continue
        ids = [spec.id]
        if spec.role is not Role.CLASSICAL_BASELINE:
            try:
                ids.append(cat.make_hybrid(spec.id).id)
            except NoClassicalPartner:
                pass
        for alg_id in ids:
            groups.setdefault(class_label(alg_id, cat), []).append(alg_id)
    return sorted(groups.items())


def emit_algorithms(groups: Sequence[tuple[str, Sequence[str]]]) -> str:
    return "".join(",".join([label, *ids]) + "\n" for label, ids in groups)


# -- run configuration ----------------------------------------------------------

@dataclass
class RunnerConfig:
    timers: int = 10
    measurements_per_timer: int = 20
    pool_size: int = 7
    master_seed: int = 0
    output_root: Path = Path("results")
    tcp: TcpConfig = TcpConfig()
    flights: FlightProfile = FlightProfile()
    deadline_s: float = 60.0
    retry_failures: bool = False
    retry_cap: int = 10
    jitter_correlation: float = 0.25
    queue_limit_packets: int = 1000
    extended_format: bool = False
    cost_file: Path | None = None
    catalog_file: Path | None = None

    @property
    def n_measurements(self) -> int:
        return self.timers * self.measurements_per_timer

    @property
    def deadline_us(self) -> int:
        return int(round(self.deadline_s * US_PER_S))


_TCP_KEYS = {
    "min_rto_ms": ("min_rto_ms", float),
    "max_rto_ms": ("max_rto_ms", float),
    "initial_rto_ms": ("initial_rto_ms", float),
    "initcwnd": ("initcwnd_segments", int),
    "mss": ("mss_bytes", int),
    "connect_included": ("connect_included", "bool"),
    "passthrough_prob": ("passthrough_prob", float),
    "dupack_threshold": ("dupack_threshold", int),
}
_FLIGHT_KEYS = {f.name: f.name for f in fields(FlightProfile)}
_RUNNER_KEYS = {
    "timers": int, "measurements_per_timer": int, "pool_size": int, "master_seed": int,
    "deadline_s": float, "retry_failures": "bool", "retry_cap": int,
    "jitter_correlation": float, "queue_limit_packets": int, "extended_format": "bool",
    "cost_file": Path, "catalog_file": Path, "output_root": Path,
}


def _convert(value: str, kind, key: str):
    if kind == "bool":
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {value!r}")
    return kind(value)


def parse_run_config(text: str, base_dir: Path | None = None) -> RunnerConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    runner_kw, tcp_kw, flight_kw = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value")
        if key in _TCP_KEYS:
            name, kind = _TCP_KEYS[key]
            tcp_kw[name] = _convert(value, kind, key)
        elif key in _FLIGHT_KEYS:
            flight_kw[key] = int(value)
        elif key in _RUNNER_KEYS:
            v = _convert(value, _RUNNER_KEYS[key], key)
            if isinstance(v, Path) and base_dir is not None and not v.is_absolute():
                v = base_dir / v
            runner_kw[key] = v
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    return RunnerConfig(tcp=TcpConfig(**tcp_kw), flights=FlightProfile(**flight_kw), **runner_kw)


def load_run_config(path: str | Path) -> RunnerConfig:
    path = Path(path)
    return parse_run_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


def emit_run_config(cfg: RunnerConfig) -> str:
    """Settings that shape results; pool size and paths are left out so copies stay comparable."""
    lines = [f"{k} = {_fmt_cfg(getattr(cfg, k))}" for k in _RUNNER_KEYS
             if k not in ("cost_file", "catalog_file", "output_root", "pool_size")]
    for key, (name, _) in _TCP_KEYS.items():
        lines.append(f"{key} = {_fmt_cfg(getattr(cfg.tcp, name))}")
    for key in _FLIGHT_KEYS:
        lines.append(f"{key} = {getattr(cfg.flights, key)}")
    return "\n".join(lines) + "\n"


def _fmt_cfg(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return _fmt(v)


# -- measurement --------------------------------------------------------------

@dataclass(frozen=True)
class MeasurementRecord:
    row: int
    algorithm: str
    measurement: int
    duration_ms: float | None = None
    failure: str | None = None

    def line(self) -> str:
        value = self.failure if self.failure else f"{self.duration_ms:.3f}"
        return f"{self.row},{self.measurement},{value}"


@dataclass(frozen=True)
class _Cell:
    row_index: int
    links: LinkPair
    alg_id: str
    transcript: Transcript
    tcp: TcpConfig
    n: int
    master_seed: int
    deadline_us: int
    retry_failures: bool
    retry_cap: int


def measure_once(transcript: Transcript, links: LinkPair, tcp: TcpConfig, master_seed: int,
                 key: tuple, deadline_us: int) -> tuple[float | None, str | None]:
    try:
        run = simulate_handshake(transcript, links, tcp, RunRng(master_seed, key), deadline_us)
    except HandshakeFailure as exc:
        return None, exc.tag
    return run.duration_ms, None


def _run_cell(cell: _Cell) -> list[str]:
    lines = []
    for m in range(cell.n):
        key = (cell.row_index, cell.alg_id, m)
        duration, failure = measure_once(cell.transcript, cell.links, cell.tcp,
                                         cell.master_seed, key, cell.deadline_us)
        attempt = 0
        while failure and cell.retry_failures and attempt < cell.retry_cap:
            attempt += 1
            duration, failure = measure_once(cell.transcript, cell.links, cell.tcp,
                                             cell.master_seed, key + (attempt,), cell.deadline_us)
        lines.append(MeasurementRecord(cell.row_index, cell.alg_id, m, duration, failure).line())
    return lines


def run_cell(row_index: int, row: ScenarioRow, alg_id: str, cfg: RunnerConfig,
             catalog: Catalog | None = None, costs: CostModel | None = None) -> list[MeasurementRecord]:
    """All measurements of one (scenario row, algorithm) pair."""
    cat = catalog or default_catalog()
    costs = costs or CostModel.zeros(cat)
    transcript = build_transcript(cat.lookup(alg_id), costs, cfg.flights)
    cell = _make_cell(row_index, row, alg_id, transcript, cfg)
    out = []
    for line in _run_cell(cell):
        r, m, v = line.split(",")
        if v[0].isdigit():
            out.append(MeasurementRecord(int(r), alg_id, int(m), float(v)))
        else:
            out.append(MeasurementRecord(int(r), alg_id, int(m), failure=v))
    return out


def _make_cell(row_index, row, alg_id, transcript, cfg: RunnerConfig) -> _Cell:
    return _Cell(row_index, row.links(cfg.jitter_correlation, cfg.queue_limit_packets), alg_id,
                 transcript, cfg.tcp, cfg.n_measurements, cfg.master_seed, cfg.deadline_us,
                 cfg.retry_failures, cfg.retry_cap)


def run_matrix(scenarios: dict[str, Sequence[ScenarioRow]],
               algorithms: Sequence[tuple[str, Sequence[str]]],
               cfg: RunnerConfig, catalog: Catalog | None = None,
               costs: CostModel | None = None) -> Path:
    """Run every (scenario row, algorithm) cell and write the raw results tree.

    Output bytes depend only on the inputs and ``master_seed``, never on
    ``pool_size`` or completion order.
    """
    cat = catalog or (load_catalog(cfg.catalog_file) if cfg.catalog_file else default_catalog())
    all_ids = [a for _, ids in algorithms for a in ids]
    if costs is None:
        cost_path = cfg.cost_file or shipped_cost_file()
        costs = load_cost_model(cost_path, required_ids=all_ids, catalog=cat)
    transcripts = {a: build_transcript(cat.lookup(a), costs, cfg.flights) for a in all_ids}

    root = Path(cfg.output_root)
    jobs: list[tuple[Path, int, _Cell]] = []
    for scen_name, rows in scenarios.items():
        scen_dir = root / scen_name
        scen_dir.mkdir(parents=True, exist_ok=True)
        (scen_dir / SCENARIO_COPY).write_text(emit_scenario(rows, cfg.extended_format),
                                             encoding="utf-8", newline="\n")
        for label, ids in algorithms:
            for alg_id in ids:
                target = scen_dir.joinpath(*label.split("/")) / f"{alg_id}.csv"
                for i, row in enumerate(rows):
                    jobs.append((target, i, _make_cell(i, row, alg_id, transcripts[alg_id], cfg)))
    (root / CONFIG_COPY).parent.mkdir(parents=True, exist_ok=True)
    (root / CONFIG_COPY).write_text(emit_run_config(cfg), encoding="utf-8", newline="\n")

    cells = [c for _, _, c in jobs]
    if cfg.pool_size <= 1 or len(cells) <= 1:
        results = map(_run_cell, cells)
    else:
        pool = ProcessPoolExecutor(max_workers=min(cfg.pool_size, os.cpu_count() or 1))
        results = pool.map(_run_cell, cells, chunksize=1)
    files: dict[Path, list[str]] = {}
    try:
        for (target, _, _), lines in zip(jobs, results):
            files.setdefault(target, []).extend(lines)
    finally:
        if cfg.pool_size > 1 and len(cells) > 1:
            pool.shutdown()
    for target, lines in files.items():
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(RAW_HEADER + "\n" + "\n".join(lines) + "\n", encoding="utf-8", newline="\n")
        log.debug("wrote %s (%d records)", target, len(lines))
    return root


def read_scenario_file(path: str | Path, extended: bool = False) -> list[ScenarioRow]:
    return parse_scenario(Path(path).read_text(encoding="utf-8"), extended)
