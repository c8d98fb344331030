"""Statistics against brute-force oracles, the analyzed tree and plot data."""

import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pqtls_sim.analysis import (ANALYZED_HEADER, PLOT_HEADER, analyze_tree, mean, median, plot_data,
                                quantile, read_analyzed, read_raw, std_dev, summarize, varied_axis)
from pqtls_sim.errors import EmptySeries, MalformedResultFile, MissingInput
from pqtls_sim.runner import RAW_HEADER, RunnerConfig, generate_presets, run_matrix


def oracle(xs, q=None):
    """Brute force: full sort, direct formulas, numpy for the interpolated quantile."""
    v = sorted(xs)
    n = len(v)
    m = sum(v) / n
    sd = (sum((x - m) ** 2 for x in v) / n) ** 0.5
    med = v[n // 2] if n % 2 else (v[n // 2 - 1] + v[n // 2]) / 2
    return m, sd, med, float(np.quantile(v, 0.75, method="linear")), float(np.quantile(v, 0.95, method="linear"))


def close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def test_examples():
    assert mean([2, 4]) == 3
    assert std_dev([2, 4]) == 1
    assert (mean([5]), std_dev([5])) == (5, 0)
    assert median([3, 1, 2]) == 2
    assert median([1, 2, 3, 4]) == 2.5
    assert median([7]) == 7
    assert quantile([1, 2, 3, 4], 0.75) == 3.25


@pytest.mark.parametrize("f", [mean, std_dev, median])
def test_empty_series(f):
    with pytest.raises(EmptySeries):
        f([])
    with pytest.raises(EmptySeries):
        quantile([], 0.5)


def test_oracle_on_1000_series():
    rnd = random.Random(2024)
    for _ in range(1000):
        n = rnd.randint(1, 500)
        xs = [rnd.lognormvariate(2.5, 1.0) for _ in range(n)]
        got = (mean(xs), std_dev(xs), median(xs), quantile(xs, 0.75), quantile(xs, 0.95))
        assert all(close(a, b) for a, b in zip(got, oracle(xs)))


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(finite, min_size=1, max_size=100), st.randoms())
def test_permutation_invariance(xs, rnd):
    ys = list(xs)
    rnd.shuffle(ys)
    a, b = summarize(xs), summarize(ys)
    assert a.median == b.median and a.q75 == b.q75 and a.q95 == b.q95
    assert math.isclose(a.average, b.average, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(a.std_dev, b.std_dev, rel_tol=1e-9, abs_tol=1e-6)


@given(st.lists(st.floats(0.1, 1e4), min_size=3, max_size=100))
def test_median_robust_to_outlier(xs):
    ys = sorted(xs)
    ys[-1] *= 1e6
    assert median(ys) == median(xs)


@given(st.lists(finite, min_size=1, max_size=100))
def test_half_quantile_is_median(xs):
    assert math.isclose(quantile(xs, 0.5), median(xs), rel_tol=1e-12, abs_tol=1e-9)


@given(st.floats(-1e3, 1e3), st.integers(1, 50), st.floats(0.01, 0.99))
def test_constant_series(c, n, q):
    assert quantile([c] * n, q) == c


@given(st.lists(finite, min_size=1, max_size=100))
def test_summary_invariants(xs):
    s = summarize(xs)
    assert min(xs) <= s.median <= max(xs)
    assert s.q75 <= s.q95 and s.std_dev >= 0


def _write_raw(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(RAW_HEADER + "\n" + "\n".join(rows) + "\n")


def test_identical_values_and_failures(tmp_path):
    raw = tmp_path / "res" / "s" / "level1" / "candidates" / "pq-only" / "kyber512.csv"
    rows = [f"0,{m},12.5" for m in range(200)]
    rows += [f"1,{m},{'Timeout' if m % 10 == 0 else '3.000'}" for m in range(200)]
    _write_raw(raw, rows)
    out = analyze_tree(tmp_path / "res", tmp_path / "an")
    stats = read_analyzed(out / raw.relative_to(tmp_path / "res"))
    assert (stats[0].average, stats[0].median, stats[0].q75, stats[0].q95, stats[0].std_dev) == (12.5, 12.5, 12.5, 12.5, 0)
    assert (stats[1].n_success, stats[1].n_failure) == (180, 20)


def test_mirrored_tree(tmp_path):
    names = ["a/l1/x.csv", "a/l1/y.csv", "b/l3/z.csv"]
    for n in names:
        _write_raw(tmp_path / "res" / n, ["0,0,1.0"])
    out = analyze_tree(tmp_path / "res", tmp_path / "an")
    found = sorted(str(p.relative_to(out)) for p in out.rglob("*.csv"))
    assert found == names
    assert (out / names[0]).read_text().splitlines()[0] == ANALYZED_HEADER


def test_all_failures_give_nan(tmp_path):
    _write_raw(tmp_path / "res" / "s" / "x.csv", ["0,0,Timeout"])
    out = analyze_tree(tmp_path / "res", tmp_path / "an")
    (s,) = read_analyzed(out / "s" / "x.csv")
    assert math.isnan(s.median) and s.n_failure == 1


def test_missing_and_malformed(tmp_path):
    with pytest.raises(MissingInput):
        analyze_tree(tmp_path / "nope")
    bad = tmp_path / "res" / "s" / "x.csv"
    _write_raw(bad, ["0,0,1.0", "0,1"])
    with pytest.raises(MalformedResultFile) as ei:
        read_raw(bad)
    assert ei.value.line == 3


def _pipeline(tmp_path, preset, algs, n=2):
    cfg = RunnerConfig(timers=1, measurements_per_timer=n, pool_size=1, output_root=tmp_path / "res")
    run_matrix({preset: generate_presets()[preset]}, algs, cfg)
    return analyze_tree(tmp_path / "res", tmp_path / "an")


def test_plot_data_pl_medians(tmp_path):
    an = _pipeline(tmp_path, "PL", [("level1/candidates/pq-only", ["kyber512"]),
                                     ("level1/candidates/hybrid", ["p256_kyber512"])])
    lines = plot_data(an, "per-algorithm", ["median"]).splitlines()
    assert lines[0] == PLOT_HEADER
    body = [l.split(",") for l in lines[1:]]
    assert sum(r[2] == "kyber512" for r in body) == 24
    assert {r[1] for r in body} == {"srv_pkt_loss"}
    assert body[0][:5] == ["0.0", "srv_pkt_loss", "kyber512", "1", "0"]


def test_plot_data_pairs_hybrids(tmp_path):
    an = _pipeline(tmp_path, "D", [("level1/candidates/hybrid", ["p256_kyber512"]),
                                    ("level1/candidates/pq-only", ["kyber512", "lightsaber"])])
    body = [l.split(",") for l in plot_data(an, "hybrid-vs-pqonly", ["median"]).splitlines()[1:]]
    order = list(dict.fromkeys(r[2] for r in body))
    assert order == ["kyber512", "p256_kyber512"]
    assert {r[4] for r in body if r[2] == "p256_kyber512"} == {"1"}
    by_level = [l.split(",")[2] for l in plot_data(an, "by-level").splitlines()[1:]]
    assert set(by_level) == {"kyber512", "lightsaber", "p256_kyber512"}


def test_plot_data_empty_tree(tmp_path):
    (tmp_path / "an").mkdir()
    assert plot_data(tmp_path / "an", "by-level") == PLOT_HEADER + "\n"
    with pytest.raises(MissingInput):
        plot_data(tmp_path / "missing")


def test_varied_axis_names():
    p = generate_presets()
    assert varied_axis(p["D"])[0] == "delay"
    assert varied_axis(p["J"])[0] == "jitter"
    assert varied_axis(p["R_cli"])[0] == "srv_rate"
    assert varied_axis(p["R_srv"])[0] == "cli_rate"
    assert varied_axis(p["C"])[0] == "srv_corrupt"
