"""
Worker side of the distributed prover.

A worker owns a contiguous block of circuit copies and, for commitments, the
columns k with k mod W == its index. It never samples randomness: every
challenge arrives from the coordinator.
"""

from __future__ import annotations

import logging
import socket
import time
from typing import Dict, List, Optional

from ..circuit import as_data_parallel, evaluate_sub, parse_circuit
from ..field import P
from ..gkr import CopySetProver
from ..pc import CopyPolynomial, PcParams, bundle_from_values, column_root, combined_claim, weight_coeffs
from ..sumcheck import SumOfProducts
from . import transport as tp

log = logging.getLogger(__name__)


def _kind_reply(kind, data, copy_ids):
    if kind == "round":
        return {"kind": "round", "data": data}
    return {"kind": "finals", "data": [[cid] + list(vals) for cid, vals in zip(copy_ids, data)]}


class Worker:
    def __init__(self):
        self.index = 0
        self.workers = 1
        self.copies = 1
        self.copy_ids: List[int] = []
        self.config_hash = ""
        self.gates = 0
        self.busy = 0.0
        self.prover: Optional[CopySetProver] = None
        self.polys: List[CopyPolynomial] = []
        self.pc_params: Optional[PcParams] = None
        self.columns: Dict[str, Dict[int, List[int]]] = {}
        self.evals: List[List[int]] = []
        self.sc: List[SumOfProducts] = []
        self.sc_left = 0
        self.sc_degree = 2

    # -- dispatch -------------------------------------------------------
    def handle(self, tag: int, payload):
        start = time.perf_counter()
        try:
            fn = self._handlers().get(tag)
            if fn is None:
                raise ValueError(f"unexpected message tag {tag}")
            return fn(payload or {})
        finally:
            self.busy += time.perf_counter() - start

    def _handlers(self):
        return {
            tp.HELLO: self.on_hello,
            tp.SETUP: self.on_setup,
            tp.GKR_BEGIN: self.on_gkr_begin,
            tp.GKR_BIND: self.on_gkr_bind,
            tp.PC_COMMIT: self.on_pc_commit,
            tp.PC_EVAL: self.on_pc_eval,
            tp.PC_QUOTIENT: self.on_pc_quotient,
            tp.PC_FOLD: self.on_pc_fold,
            tp.PC_SHARES: self.on_pc_shares,
            tp.PC_OPEN: self.on_pc_open,
            tp.SC_LOAD: self.on_sc_load,
            tp.SC_BEGIN: self.on_sc_begin,
            tp.SC_BIND: self.on_sc_bind,
            tp.STATS: self.on_stats,
            tp.SHUTDOWN: lambda p: {"bye": True},
            tp.CLOSE: lambda p: {"bye": True},
        }

    def on_hello(self, p):
        if p.get("version") != tp.PROTOCOL_VERSION:
            raise ValueError(f"protocol version mismatch: coordinator {p.get('version')}, worker {tp.PROTOCOL_VERSION}")
        self.config_hash = p.get("config_hash", "")
        return {"version": tp.PROTOCOL_VERSION, "config_hash": self.config_hash}

    def on_setup(self, p):
        if self.config_hash and p.get("config_hash") != self.config_hash:
            raise ValueError("cluster configuration hash differs from the handshake")
        self.index, self.workers, self.copies = p["index"], p["workers"], p["copies"]
        self.copy_ids = list(p["copy_ids"])
        self.columns, self.evals, self.sc = {}, [], []
        self.prover, self.polys = None, []
        self.gates, self.busy = 0, 0.0
        pcp = p.get("pc")
        self.pc_params = PcParams(pcp["num_vars"], pcp["rho"], pcp["queries"]) if pcp else None
        outputs = []
        tables = p.get("tables")
        if p.get("circuit") is not None:
            sub = as_data_parallel(parse_circuit(p["circuit"])).sub
            inputs = p["inputs"]
            values = [evaluate_sub(sub, inputs[k]) for k in range(len(self.copy_ids))]
            self.gates = sum(v.gate_evaluations for v in values)
            self.prover = CopySetProver(sub, self.copy_ids, values, (self.copies - 1).bit_length())
            outputs = [[cid, v.values[0]] for cid, v in zip(self.copy_ids, values)]
            if tables is None and self.pc_params is not None:
                half = sub.input_size // 2 if sub.num_public else 0
                tables = [vec[half:] for vec in inputs]
        if tables is not None and self.pc_params is not None:
            self.polys = [CopyPolynomial(t, self.pc_params) for t in tables]
        return {"outputs": outputs, "gates": self.gates}

    # -- GKR --------------------------------------------------------------
    def on_gkr_begin(self, p):
        kind, data = self.prover.begin(p["i"], p["a1"], p["a2"], p["u"], p["v"])
        return _kind_reply(kind, data, self.copy_ids)

    def on_gkr_bind(self, p):
        kind, data = self.prover.bind(p["r"])
        return _kind_reply(kind, data, self.copy_ids)

    # -- polynomial commitment ----------------------------------------------
    def _shares(self, vectors: List[List[int]], pair: bool):
        size = len(vectors[0])
        npos = size // 2 if pair else size
        half = size // 2
        out: Dict[str, list] = {}
        for k in range(npos):
            vals = []
            for v in vectors:
                vals.append(v[k])
                if pair:
                    vals.append(v[k + half])
            out.setdefault(str(k % self.workers), []).append([k, vals])
        return {"shares": out}

    def on_pc_commit(self, p):
        return self._shares([poly.f_L for poly in self.polys], False)

    def on_pc_eval(self, p):
        self.evals = [[poly.evaluate(pt) for pt in p["points"]] for poly in self.polys]
        return {"evals": [[cid, ys] for cid, ys in zip(self.copy_ids, self.evals)]}

    def on_pc_quotient(self, p):
        mu = p["mu"]
        wc = weight_coeffs(p["points"], mu, self.pc_params)
        for poly, ys in zip(self.polys, self.evals):
            poly.quotient(wc, combined_claim(ys, mu))
        return self._shares([poly.h_L for poly in self.polys], False)

    def on_pc_fold(self, p):
        j = p["j"]
        if j == 0:
            for poly in self.polys:
                poly.start_fold(p["etas"])
        layers = [poly.fold(j, p["beta"]) for poly in self.polys]
        if j + 1 == self.pc_params.num_vars:
            return {"final": [[cid, vals] for cid, vals in zip(self.copy_ids, layers)]}
        return self._shares(layers, True)

    def on_pc_shares(self, p):
        pair = p["pair"]
        store = self.columns.setdefault(p["layer"], {})
        roots = []
        for k, vals in p["columns"]:
            store[k] = vals
            roots.append([k, column_root(bundle_from_values(vals, pair)).hex()])
        return {"roots": roots}

    def on_pc_open(self, p):
        return {"values": [self.columns[name][k] for name, k in p["requests"]]}

    # -- generic sumcheck -------------------------------------------------------
    def on_sc_load(self, p):
        self.sc = [SumOfProducts([(c, tabs) for c, tabs in terms]) for terms in p["terms"]]
        return {"loaded": len(self.sc)}

    def _sc_next(self):
        if self.sc_left == 0:
            return {"kind": "finals", "data": [[cid, inst.factor_values()] for cid, inst in zip(self.copy_ids, self.sc)]}
        acc = [0] * (self.sc_degree + 1)
        for inst in self.sc:
            for k, c in enumerate(inst.round_poly(self.sc_degree)):
                acc[k] = (acc[k] + c) % P
        return {"kind": "round", "data": acc}

    def on_sc_begin(self, p):
        self.sc_degree = p["degree"]
        self.sc_left = self.sc[0].num_vars if self.sc else 0
        out = self._sc_next()
        out["total"] = sum(inst.total() for inst in self.sc) % P
        return out

    def on_sc_bind(self, p):
        for inst in self.sc:
            inst.bind(p["r"])
        self.sc_left -= 1
        return self._sc_next()

    def on_stats(self, p):
        return {"index": self.index, "gates": self.gates, "busy": self.busy, "copies": self.copy_ids}


def serve(channel: tp.Channel, worker: Optional[Worker] = None) -> bool:
    """Answer frames until CLOSE or SHUTDOWN; returns True on SHUTDOWN."""
    worker = worker or Worker()
    while True:
        try:
            tag, payload = channel.recv()
        except tp.TransportError as exc:
            log.info("worker connection ended: %s", exc)
            return False
        try:
            channel.send(tp.REPLY, worker.handle(tag, payload))
        except tp.TransportError:
            return False
        except Exception as exc:  # report to the coordinator instead of dying silently
            log.exception("worker failed on tag %s", tag)
            channel.send(tp.ERROR, {"message": f"{type(exc).__name__}: {exc}"})
        if tag == tp.SHUTDOWN:
            return True
        if tag == tp.CLOSE:
            return False


def serve_tcp(host: str, port: int, ready=None, max_sessions: Optional[int] = None):
    """Listen for coordinator sessions; each connection gets a fresh worker."""
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen(1)
    if ready is not None:
        ready(srv.getsockname())
    sessions = 0
    try:
        while max_sessions is None or sessions < max_sessions:
            conn, addr = srv.accept()
            log.info("coordinator connected from %s", addr)
            ch = tp.TcpChannel(conn)
            try:
                stop = serve(ch)
            finally:
                ch.close()
            sessions += 1
            if stop:
                break
    finally:
        srv.close()
