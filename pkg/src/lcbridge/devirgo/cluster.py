"""
Coordinator-side view of a worker cluster, and the distributed backend that
plugs it into the shared prover logic.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import queue
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..circuit import AnyCircuit, as_data_parallel, dump_circuit
from ..field import P, is_power_of_two
from ..merkle import MerkleTree
from ..pc import ColumnOpening, PcParams
from . import transport as tp
from .worker import Worker, serve, serve_tcp


@dataclass
class ClusterConfig:
    workers: int
    endpoints: Tuple[str, ...] = ()
    identity: bytes = b""

    def __post_init__(self):
        if not is_power_of_two(self.workers):
            raise ValueError("the number of workers must be a power of two")
        if self.endpoints and len(self.endpoints) != self.workers:
            raise ValueError("one endpoint per worker is required")

    def digest(self, extra: Any = None) -> str:
        doc = {"workers": self.workers, "endpoints": list(self.endpoints),
               "identity": self.identity.hex(), "extra": extra}
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


class Cluster:
    """Star topology: the coordinator talks to each worker over its own channel."""

    def __init__(self, channels: Sequence[tp.Channel], threads: Sequence[threading.Thread] = (),
                 timeout: Optional[float] = 120.0):
        if not channels or not is_power_of_two(len(channels)):
            raise ValueError("a cluster needs a power-of-two number of workers")
        self.channels = list(channels)
        self.threads = list(threads)
        self.timeout = timeout
        self.broadcasts = 0
        self.broadcasts_by_tag: Dict[str, int] = {}
        self.closed = False

    @property
    def size(self) -> int:
        return len(self.channels)

    @classmethod
    def local(cls, workers: int) -> "Cluster":
        """Workers as threads in this process, linked by queue channels."""
        chans, threads = [], []
        for j in range(workers):
            mine, theirs = tp.channel_pair()
            th = threading.Thread(target=serve, args=(theirs, Worker()), name=f"worker-{j}", daemon=True)
            th.start()
            chans.append(mine)
            threads.append(th)
        return cls(chans, threads)

    @classmethod
    def processes(cls, workers: int, host: str = "127.0.0.1") -> "Cluster":
        """Workers as separate OS processes reached over loopback TCP, so they run in parallel."""
        ctx = multiprocessing.get_context()
        ports = ctx.Queue()
        procs = []
        for _ in range(workers):
            pr = ctx.Process(target=_process_worker, args=(host, ports), daemon=True)
            pr.start()
            procs.append(pr)
        try:
            endpoints = [f"{host}:{ports.get(timeout=30)}" for _ in range(workers)]
        except queue.Empty:
            for pr in procs:
                pr.terminate()
            raise tp.TransportError("worker processes did not start") from None
        cluster = cls.connect(endpoints)
        cluster.processes_ = procs
        return cluster

    @classmethod
    def connect(cls, endpoints: Sequence[str], timeout: float = 10.0) -> "Cluster":
        chans = []
        try:
            for ep in endpoints:
                host, port = tp.parse_endpoint(ep)
                chans.append(tp.TcpChannel.connect(host, port, timeout))
        except Exception:
            for ch in chans:
                ch.close()
            raise
        return cls(chans)

    def _expect(self, j: int, tag: int, payload):
        if tag == tp.ERROR:
            raise tp.TransportError(str((payload or {}).get("message", "unknown error")), worker=j)
        if tag != tp.REPLY or not isinstance(payload, dict):
            raise tp.TransportError(f"malformed reply (tag {tag})", worker=j)
        return payload

    def _recv(self, j: int):
        try:
            tag, payload = self.channels[j].recv(timeout=self.timeout)
        except tp.TransportError as exc:
            raise tp.TransportError(str(exc), worker=j) from None
        return self._expect(j, tag, payload)

    def request(self, j: int, tag: int, payload=None):
        try:
            self.channels[j].send(tag, payload)
        except tp.TransportError as exc:
            raise tp.TransportError(str(exc), worker=j) from None
        return self._recv(j)

    def broadcast(self, tag: int, payload=None, per_worker: Optional[Sequence[Any]] = None) -> List[dict]:
        self.broadcasts += 1
        name = tp.TAG_NAMES.get(tag, str(tag))
        self.broadcasts_by_tag[name] = self.broadcasts_by_tag.get(name, 0) + 1
        for j, ch in enumerate(self.channels):
            try:
                ch.send(tag, per_worker[j] if per_worker is not None else payload)
            except tp.TransportError as exc:
                raise tp.TransportError(str(exc), worker=j) from None
        return [self._recv(j) for j in range(self.size)]

    def handshake(self, config_hash: str):
        replies = self.broadcast(tp.HELLO, {"version": tp.PROTOCOL_VERSION, "config_hash": config_hash})
        for j, r in enumerate(replies):
            if r.get("version") != tp.PROTOCOL_VERSION or r.get("config_hash") != config_hash:
                raise tp.TransportError("handshake mismatch", worker=j)

    def frame_counts(self) -> dict:
        sent = sum(ch.counter.sent for ch in self.channels)
        recv = sum(ch.counter.received for ch in self.channels)
        by_tag: Dict[str, int] = {}
        for ch in self.channels:
            for k, v in ch.counter.by_tag.items():
                by_tag[k] = by_tag.get(k, 0) + v
        return {
            "sent": sent,
            "received": recv,
            "bytes_sent": sum(ch.counter.bytes_sent for ch in self.channels),
            "bytes_received": sum(ch.counter.bytes_received for ch in self.channels),
            "broadcasts": self.broadcasts,
            "sent_by_tag": by_tag,
            "broadcasts_by_tag": dict(self.broadcasts_by_tag),
        }

    def reset_counters(self):
        for ch in self.channels:
            ch.counter = tp.FrameCounter()
        self.broadcasts = 0
        self.broadcasts_by_tag = {}

    def stats(self) -> List[dict]:
        return [self.request(j, tp.STATS, {}) for j in range(self.size)]

    def close(self, shutdown: bool = False):
        if self.closed:
            return
        self.closed = True
        tag = tp.SHUTDOWN if shutdown else tp.CLOSE
        for j, ch in enumerate(self.channels):
            try:
                ch.send(tag, {})
                ch.recv(timeout=5.0)
            except tp.TransportError:
                pass
            ch.close()
        for th in self.threads:
            th.join(timeout=5.0)
        for pr in getattr(self, "processes_", ()):
            pr.join(timeout=5.0)
            if pr.is_alive():
                pr.terminate()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _process_worker(host: str, ports):
    serve_tcp(host, 0, ready=lambda addr: ports.put(addr[1]), max_sessions=1)


def assign_copies(copies: int, workers: int) -> List[List[int]]:
    if workers > copies or copies % workers:
        raise ValueError(f"{copies} copies cannot be split evenly over {workers} workers")
    per = copies // workers
    return [list(range(j * per, (j + 1) * per)) for j in range(workers)]


class DistributedBackend:
    """Implements the prover backend interface by messaging the cluster."""

    def __init__(self, cluster: Cluster, copies: int, pc_params: Optional[PcParams],
                 circuit: Optional[AnyCircuit] = None, inputs: Optional[Sequence[int]] = None,
                 tables: Optional[Sequence[Sequence[int]]] = None, config_hash: str = ""):
        self.cluster = cluster
        self.copies = copies
        self.pc_params = pc_params
        self.assignment = assign_copies(copies, cluster.size)
        self.trees: Dict[str, MerkleTree] = {}
        self._outputs: Dict[int, List[int]] = {}
        self.gates_per_worker: List[int] = []
        payloads = []
        text = dump_circuit(as_data_parallel(circuit).sub) if circuit is not None else None
        m = as_data_parallel(circuit).sub.input_size if circuit is not None else 0
        pcp = None if pc_params is None else {"num_vars": pc_params.num_vars, "rho": pc_params.rho,
                                              "queries": pc_params.queries}
        for j, ids in enumerate(self.assignment):
            payloads.append({
                "config_hash": config_hash,
                "index": j,
                "workers": cluster.size,
                "copies": copies,
                "copy_ids": ids,
                "circuit": text,
                "inputs": [list(inputs[c * m:(c + 1) * m]) for c in ids] if circuit is not None else None,
                "tables": [list(tables[c]) for c in ids] if tables is not None else None,
                "pc": pcp,
            })
        replies = cluster.broadcast(tp.SETUP, per_worker=payloads)
        for r in replies:
            for cid, out in r["outputs"]:
                self._outputs[cid] = out
            self.gates_per_worker.append(r["gates"])

    def outputs(self) -> List[int]:
        return sum((self._outputs[c] for c in range(self.copies)), [])

    # -- GKR --------------------------------------------------------------
    def _merge(self, replies):
        kinds = {r["kind"] for r in replies}
        if len(kinds) != 1:
            raise tp.TransportError("workers disagree on the protocol phase")
        if kinds == {"round"}:
            acc = None
            for r in replies:
                poly = r["data"]
                acc = list(poly) if acc is None else [(a + b) % P for a, b in zip(acc, poly)]
            return "round", acc
        by_copy = {}
        for r in replies:
            for row in r["data"]:
                by_copy[row[0]] = row[1:]
        return "finals", [tuple(by_copy[c]) for c in range(self.copies)]

    def gkr_begin(self, i, a1, a2, u, v):
        return self._merge(self.cluster.broadcast(tp.GKR_BEGIN, {"i": i, "a1": a1, "a2": a2,
                                                                 "u": list(u), "v": list(v)}))

    def gkr_bind(self, r):
        return self._merge(self.cluster.broadcast(tp.GKR_BIND, {"r": r}))

    # -- polynomial commitment -------------------------------------------------
    def _route(self, replies, name: str, pair: bool) -> bytes:
        w = self.cluster.size
        per_owner: List[Dict[int, List[int]]] = [dict() for _ in range(w)]
        for r in replies:  # replies arrive in worker order, i.e. copy order
            for owner, cols in r["shares"].items():
                dest = per_owner[int(owner)]
                for k, vals in cols:
                    dest.setdefault(k, []).extend(vals)
        payloads = [{"layer": name, "pair": pair, "columns": sorted(d.items())} for d in per_owner]
        roots: Dict[int, bytes] = {}
        for r in self.cluster.broadcast(tp.PC_SHARES, per_worker=payloads):
            for k, hexroot in r["roots"]:
                roots[k] = bytes.fromhex(hexroot)
        tree = MerkleTree([roots[k] for k in range(len(roots))])
        self.trees[name] = tree
        return tree.root.digest

    def pc_commit(self) -> bytes:
        return self._route(self.cluster.broadcast(tp.PC_COMMIT, {}), "f", False)

    def pc_evaluate(self, points):
        by_copy = {}
        for r in self.cluster.broadcast(tp.PC_EVAL, {"points": [list(p) for p in points]}):
            for cid, ys in r["evals"]:
                by_copy[cid] = ys
        return [by_copy[c] for c in range(self.copies)]

    def pc_commit_quotient(self, points, mu, evals) -> bytes:
        replies = self.cluster.broadcast(tp.PC_QUOTIENT, {"points": [list(p) for p in points], "mu": mu})
        return self._route(replies, "h", False)

    def pc_fold(self, j, beta, etas=None):
        replies = self.cluster.broadcast(tp.PC_FOLD, {"j": j, "beta": beta, "etas": list(etas)})
        if "final" in replies[0]:
            by_copy = {}
            for r in replies:
                for cid, vals in r["final"]:
                    by_copy[cid] = vals
            return "final", [by_copy[c] for c in range(self.copies)]
        name = f"fold{j + 1}"
        return "commit", self._route(replies, name, True)

    def pc_open(self, requests):
        # one broadcast; each worker answers for the columns it owns (possibly none)
        w = self.cluster.size
        grouped: List[List[int]] = [[] for _ in range(w)]
        for idx, (name, k) in enumerate(requests):
            grouped[k % w].append(idx)
        payloads = [{"requests": [list(requests[i]) for i in idxs]} for idxs in grouped]
        values: Dict[int, List[int]] = {}
        for idxs, reply in zip(grouped, self.cluster.broadcast(tp.PC_OPEN, per_worker=payloads)):
            for i, vals in zip(idxs, reply["values"]):
                values[i] = vals
        return [ColumnOpening(values[i], [self.trees[name].path(k)])
                for i, (name, k) in enumerate(requests)]

    def worker_stats(self) -> List[dict]:
        return self.cluster.stats()
