"""Distributed LT-code storage over random walks in sensor networks."""

from .decoder import decoding_curve, decoding_probability, gf2_rank, peel_decode
from .graph_gen import Graph, generate_connected_rgg, generate_rgg, is_connected
from .simulator import SimConfig, run_dissemination, run_update_phase, walk_length
from .soliton import degree_from_alpha, ideal_soliton, robust_soliton, tv_distance

__version__ = "0.1.0"
