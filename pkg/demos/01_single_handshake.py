"""A single simulated handshake, start to finish.

Looks up a few key exchanges, shows the bytes each flight carries, then runs
seeded handshakes over the unimpaired baseline link and over a slow uplink.
Run with ``python3 demos/01_single_handshake.py``.
"""

from pqtls_sim import (CostModel, LinkPair, LinkProfile, RunRng, TcpConfig, build_transcript,
                       default_catalog, simulate_handshake)
from pqtls_sim.analysis import median

catalog = default_catalog()
costs = CostModel.zeros(catalog)  # network effects only

# %% Flight sizes
# The ClientHello carries the public key, the server flight the ciphertext.
for alg in ("prime256v1", "kyber512", "p256_kyber512", "hqc128", "frodo640shake"):
    t = build_transcript(catalog.lookup(alg), costs)
    sizes = "  ".join(f"{f.name}={f.payload_bytes:>6} B" for f in t.flights)
    print(f"{alg:16} {sizes}")

# %% Baseline link: 2.684 ms one way, 500 Mbit/s
baseline = LinkPair.symmetric(LinkProfile(delay_ms=2.684, rate_mbps=500.0))
t = build_transcript(catalog.lookup("kyber512"), costs)
run = simulate_handshake(t, baseline, TcpConfig(), RunRng(1, "demo"))
print(f"\nkyber512 on the baseline: {run.duration_ms:.3f} ms "
      f"(connect done after {run.established_us / 1000:.3f} ms)")

# %% A 1 Mbit/s uplink makes the public key size visible
slow_up = LinkPair(c2s=LinkProfile(delay_ms=2.684, rate_mbps=1.0), s2c=LinkProfile(delay_ms=2.684, rate_mbps=500.0))
for alg in ("prime256v1", "kyber512", "frodo640shake"):
    t = build_transcript(catalog.lookup(alg), costs)
    runs = [simulate_handshake(t, slow_up, TcpConfig(), RunRng(1, (alg, m))).duration_ms for m in range(50)]
    print(f"{alg:16} 1 Mbit/s uplink median {median(runs):8.3f} ms")
