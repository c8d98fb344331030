"""Least-squares fits of the delay and rate laws, and the checks built on them.

Delay law: median = slope * delay + intercept, where the slope counts the
one-way trips on the critical path (4 with the TCP connect in the bracket).
Rate law: median = m_eff / rate + c. With rates in Mbit/s and medians in
milliseconds, m_eff comes out in kilobits; ``m_eff_bits`` rescales it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateInput
from .handshake import FlightProfile
from .kem import Catalog, KEY_SHARE_LIMIT, default_catalog
from .runner import CONFIG_COPY, parse_run_config


class Model(enum.Enum):
    AFFINE_IN_DELAY = "AffineInDelay"
    HYPERBOLIC_IN_RATE = "HyperbolicInRate"


@dataclass(frozen=True)
class FitReport:
    model: Model
    params: dict
    r_squared: float
    n: int


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and R^2 of y on x."""
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-24 * max(1.0, float(y @ y)) else 0.0
    else:
        r2 = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return float(slope), float(intercept), r2


def _points(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(list(points), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3 or arr.shape[1] != 2:
        raise DegenerateInput("need at least three (x, y) points")
    if not np.all(np.isfinite(arr)):
        raise DegenerateInput("points must be finite")
    return arr[:, 0], arr[:, 1]


def fit_affine(points: Sequence[tuple[float, float]]) -> FitReport:
    x, y = _points(points)
    if len(np.unique(x)) != len(x):
        raise DegenerateInput("x values must be distinct")
    slope, intercept, r2 = _ols(x, y)
    return FitReport(Model.AFFINE_IN_DELAY, {"slope": slope, "intercept": intercept}, r2, len(x))


def fit_hyperbola(points: Sequence[tuple[float, float]]) -> FitReport:
    """Fit y = m_eff / x + c by least squares on 1/x.

    With x in Mbit/s and y in milliseconds, ``m_eff`` is in kilobits; the
    report also carries ``m_eff_bits``.
    """
    x, y = _points(points)
    if np.any(x <= 0):
        raise DegenerateInput("rates must be positive")
    if len(np.unique(x)) != len(x):
        raise DegenerateInput("x values must be distinct")
    m, c, r2 = _ols(1.0 / x, y)
    return FitReport(Model.HYPERBOLIC_IN_RATE, {"m_eff": m, "c": c, "m_eff_bits": m * 1000.0}, r2, len(x))


# -- checks over an analyzed tree ------------------------------------------------

AFFINE_MIN_R2 = 0.999
AFFINE_SLOPE_TOL = 0.1
HYPERBOLA_MIN_R2 = 0.99


@dataclass(frozen=True)
class CheckRow:
    scenario: str
    algorithm: str
    report: FitReport | None
    status: str  # "pass", "fail" or "skip"
    note: str = ""

    def line(self) -> str:
        if self.report is None:
            params = "-"
            r2 = "-"
        else:
            params = " ".join(f"{k}={v:.4g}" for k, v in self.report.params.items())
            r2 = f"{self.report.r_squared:.5f}"
        return f"{self.status.upper():4} {self.scenario:28} {self.algorithm:28} R2={r2:8} {params} {self.note}".rstrip()


def fits_initcwnd(alg_id: str, catalog: Catalog, flights: FlightProfile, mss: int, initcwnd: int) -> bool:
    spec = catalog.lookup(alg_id)
    if max(spec.pk_bytes, spec.ct_bytes) > KEY_SHARE_LIMIT:
        return False
    window = mss * initcwnd
    return (flights.client_hello_base_bytes + spec.pk_bytes <= window
            and flights.server_flight_base_bytes + spec.ct_bytes <= window)


def check_models(analyzed_root: str | Path, catalog: Catalog | None = None) -> list[CheckRow]:
    """Fit every delay sweep affinely and every rate sweep hyperbolically.

    Delay fits pass with R^2 > 0.999 and a slope within 0.1 of 4 (2 when the
    connect is outside the bracket); algorithms whose flights overflow the
    initial window are skipped since the law does not apply to them. Rate fits
    pass with R^2 > 0.99.
    """
    from .analysis import medians_by_algorithm

    root = Path(analyzed_root)
    cat = catalog or default_catalog()
    cfg_path = root / CONFIG_COPY
    cfg = parse_run_config(cfg_path.read_text(encoding="utf-8")) if cfg_path.is_file() else None
    connect = cfg.tcp.connect_included if cfg else True
    flights = cfg.flights if cfg else FlightProfile()
    mss = cfg.tcp.mss_bytes if cfg else 1460
    initcwnd = cfg.tcp.initcwnd_segments if cfg else 10
    expected_slope = 4.0 if connect else 2.0

    out: list[CheckRow] = []
    for scen in sorted(p.name for p in root.iterdir() if p.is_dir()):
        for alg, (x_name, xs, ys) in sorted(medians_by_algorithm(root, scen).items()):
            pts = list(zip(xs, ys))
            if x_name == "delay":
                if alg in cat and not fits_initcwnd(alg, cat, flights, mss, initcwnd):
                    out.append(CheckRow(scen, alg, None, "skip", "flights exceed initial window"))
                    continue
                try:
                    rep = fit_affine(pts)
                except DegenerateInput as exc:
                    out.append(CheckRow(scen, alg, None, "fail", str(exc)))
                    continue
                ok = rep.r_squared > AFFINE_MIN_R2 and abs(rep.params["slope"] - expected_slope) <= AFFINE_SLOPE_TOL
                out.append(CheckRow(scen, alg, rep, "pass" if ok else "fail", f"expected slope {expected_slope:g}"))
            elif x_name.endswith("rate"):
                try:
                    rep = fit_hyperbola(pts)
                except DegenerateInput as exc:
                    out.append(CheckRow(scen, alg, None, "fail", str(exc)))
                    continue
                out.append(CheckRow(scen, alg, rep, "pass" if rep.r_squared > HYPERBOLA_MIN_R2 else "fail"))
    return out
