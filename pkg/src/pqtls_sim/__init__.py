"""Discrete-event simulation of TLS 1.3 key exchange over impaired links.

The handshake is modeled at flight granularity on top of a Reno-style TCP
and netem-style links; an experiment runner sweeps network scenarios over KEM
variants and an analysis layer reduces the raw timings.
"""

from .analysis import analyze_tree, mean, median, plot_data, quantile, std_dev, summarize
from .errors import (HandshakeCorruptAbort, HandshakeFailure, HandshakeTimeout, KeyShareTooLarge,
                     NoClassicalPartner, PqtlsSimError, UnknownAlgorithm)
from .handshake import FlightProfile, LinkPair, build_transcript, handshake_duration, simulate_handshake
from .kem import CostModel, OpCosts, default_catalog, load_cost_model, lookup, make_hybrid
from .link import LinkProfile
from .model_fit import check_models, fit_affine, fit_hyperbola
from .runner import RunnerConfig, ScenarioRow, generate_presets, parse_scenario, run_matrix
from .sim_core import RunRng
from .transport import TcpConfig

__version__ = "0.1.0"
