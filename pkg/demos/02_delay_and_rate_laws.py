"""Delay and rate sweeps through the full pipeline, then the fitted laws.

Runs the D and R_cli presets for four algorithms, summarizes the raw tree and
fits median = slope * delay + c and median = m / rate + c. Takes about 10 s.
"""

import tempfile
from pathlib import Path

from pqtls_sim import RunnerConfig, analyze_tree, fit_affine, fit_hyperbola, generate_presets, run_matrix
from pqtls_sim.analysis import medians_by_algorithm

presets = generate_presets()
algorithms = [("level1/candidates/pq-only", ["kyber512"]),
              ("level1/alternatives/pq-only", ["hqc128", "frodo640shake"]),
              ("level1/baseline/classical", ["prime256v1"])]

with tempfile.TemporaryDirectory() as tmp:
    cfg = RunnerConfig(master_seed=7, measurements_per_timer=5, output_root=Path(tmp) / "results")
    run_matrix({"D": presets["D"], "R_cli": presets["R_cli"]}, algorithms, cfg)
    analyzed = analyze_tree(cfg.output_root, Path(tmp) / "analyzed")

    # %% Delay: four one-way trips per handshake while flights fit the window
    print("delay sweep, median vs one-way delay")
    for alg, (_, xs, ys) in sorted(medians_by_algorithm(analyzed, "D").items()):
        fit = fit_affine(list(zip(xs, ys)))
        print(f"  {alg:16} slope {fit.params['slope']:.3f}  intercept {fit.params['intercept']:.3f} ms"
              f"  R2 {fit.r_squared:.5f}")

    # %% Rate: the uplink carries the public key, so m tracks its size
    print("client rate sweep, median vs 1/rate")
    for alg, (_, xs, ys) in sorted(medians_by_algorithm(analyzed, "R_cli").items()):
        fit = fit_hyperbola(list(zip(xs, ys)))
        print(f"  {alg:16} m {fit.params['m_eff_bits']:9.0f} bit  R2 {fit.r_squared:.5f}")
