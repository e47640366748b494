"""Location-aware hierarchical consensus: crypto, geography, nodes, simulator, hierarchy, experiments."""

from .crypto import (
    IdentityDigest,
    OneTimeSignature,
    SigningKey,
    ThresholdPolicy,
    VerificationReport,
    VerifierKey,
    bench_phases,
    default_suite,
    generate_keypair,
    hash_identity,
    sign,
    verify_single,
    verify_threshold,
)
from .geo import GeoPoint, LocationHistory, Region, Reputation, cgf_score, distance, drift_exceeded, encode_csc
from .hierarchy import HierarchyConfig, HierarchyCoordinator, LayerTree, NodeRecord, SubChain, partition
from .node import Mode, Node, ProtocolParams, Role
from .sim import FaultSpec, MetricsReport, SimConfig, Simulation, SimTrace, run

__version__ = "0.1.0"
