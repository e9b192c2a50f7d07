"""Simulator for GET-logging defenses against data flooding in path-identifier ICNs."""

from .analysis import PassModel, dpid_closed_form, expected_reach_fraction, pr_attack, storage_curve
from .bloom import BloomFilter, RotatingFilterPair, fp_probability, fp_probability_approx, size_for
from .config import ScenarioConfig, parse_config
from .engine import run_dpid, run_scenario, setup_run
from .strategies import DynamicParams, StrategyKind
from .topology import Topology, generate_synthetic, load_edge_list, shortest_path

__version__ = "0.1.0"
