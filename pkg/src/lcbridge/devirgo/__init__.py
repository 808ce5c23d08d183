"""Distributed prover: coordinator, workers and transports."""

from .cluster import Cluster, ClusterConfig, DistributedBackend, assign_copies
from .prover import (
    Compressor,
    DistOpening,
    IdentityCompressor,
    ProveStats,
    aggregate_evaluations,
    devirgo_prove,
    devirgo_verify,
    dist_pc_commit,
    dist_pc_open,
    dist_pc_verify,
    dist_sumcheck,
)
from .transport import TransportError
from .worker import Worker, serve, serve_tcp

__all__ = [
    "Cluster",
    "ClusterConfig",
    "Compressor",
    "DistOpening",
    "DistributedBackend",
    "IdentityCompressor",
    "ProveStats",
    "TransportError",
    "Worker",
    "aggregate_evaluations",
    "assign_copies",
    "devirgo_prove",
    "devirgo_verify",
    "dist_pc_commit",
    "dist_pc_open",
    "dist_pc_verify",
    "dist_sumcheck",
    "serve",
    "serve_tcp",
]
