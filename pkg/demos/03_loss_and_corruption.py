"""Packet loss and corruption against handshake time.

Compares median durations for a small and a large key exchange as the
server-bound loss rate grows, and shows that corruption, which the receiver
discards, behaves like loss. Takes a few seconds.
"""

from pqtls_sim import CostModel, RunnerConfig, default_catalog, generate_presets
from pqtls_sim.analysis import median
from pqtls_sim.runner import run_cell

catalog = default_catalog()
costs = CostModel.zeros(catalog)
presets = generate_presets()
cfg = RunnerConfig(master_seed=3)


def medians(rows, alg):
    out = []
    for i, row in enumerate(rows):
        recs = run_cell(i, row, alg, cfg, catalog, costs)
        ok = [r.duration_ms for r in recs if r.failure is None]
        out.append((median(ok) if ok else float("nan"), len(recs) - len(ok)))
    return out


# %% Loss sweep
pick = [0, 2, 4, 8, 12, 16, 20]
loss_rows = [r for r in presets["PL"] if r.srv.pkt_loss in pick]
corrupt_rows = [r for r in presets["C"] if r.srv.corrupt in pick]
kyber_loss, frodo_loss = medians(loss_rows, "kyber512"), medians(loss_rows, "frodo640shake")
kyber_corrupt = medians(corrupt_rows, "kyber512")

print(f"{'pct':>4} {'kyber512 loss':>14} {'kyber512 corrupt':>17} {'frodo640shake loss':>19}")
for p, (kl, _), (kc, _), (fl, ff) in zip(pick, kyber_loss, kyber_corrupt, frodo_loss):
    print(f"{p:>4} {kl:>11.3f} ms {kc:>14.3f} ms {fl:>16.3f} ms" + (f"  ({ff} failed)" if ff else ""))
