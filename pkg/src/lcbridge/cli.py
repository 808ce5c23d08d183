"""
Command-line entry points.

Exit codes: 0 success, 1 protocol failure (proof rejected, worker failure,
failed scenario expectation), 2 usage error or missing/unparsable input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .circuit import as_data_parallel, dump_circuit, parse_circuit, read_vector, split_public, write_vector
from .codec import DecodeError
from .devirgo.cluster import Cluster
from .devirgo.prover import devirgo_prove
from .devirgo.transport import TransportError, parse_endpoint
from .devirgo.worker import serve_tcp
from .field import is_power_of_two
from .sigcircuit import DEFAULT_ROUNDS, build_light_client_circuit, expected_output, keygen, sign, statement_inputs
from .virgo import ProofParams, virgo_verify

log = logging.getLogger("lcbridge")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Config:
    rho: int = 8
    queries: int = 16
    workers: int = 1
    endpoints: List[str] = field(default_factory=list)
    identity: str = "relay"
    seed: int = 0
    n_sig: int = 4
    message_length: int = 1
    rounds: int = DEFAULT_ROUNDS
    committee: int = 4
    quorum: Fraction = Fraction(2, 3)
    batch: int = 1
    confirmations: int = 2
    full_nodes: int = 3

    def validate(self):
        for name in ("rho", "workers", "n_sig", "batch"):
            v = getattr(self, name)
            if v < 1 or not is_power_of_two(v):
                raise UsageError(f"config: {name} must be a power of two (got {v})")
        if self.rho < 2:
            raise UsageError("config: rho must be at least 2")
        if self.endpoints and len(self.endpoints) != self.workers:
            raise UsageError("config: one endpoint per worker is required")
        if self.queries < 1 or self.rounds < 1 or self.committee < 1 or self.full_nodes < 1:
            raise UsageError("config: queries, rounds, committee and full_nodes must be positive")
        if not 0 < self.quorum <= 1:
            raise UsageError("config: quorum must lie in (0, 1]")
        if 32 % self.message_length:
            raise UsageError("config: message_length must divide 32")
        for ep in self.endpoints:
            try:
                parse_endpoint(ep)
            except ValueError as exc:
                raise UsageError(f"config: {exc}") from None
        return self

    @property
    def proof_params(self) -> ProofParams:
        return ProofParams(self.rho, self.queries)


def load_config(path: Optional[str]) -> Config:
    """key = value lines; `#` starts a comment."""
    cfg = Config()
    if path is None:
        return cfg
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    for no, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep or not hasattr(cfg, key):
            raise UsageError(f"{path}:{no}: unknown or malformed setting {line!r}")
        try:
            if key == "endpoints":
                cfg.endpoints = [e.strip() for e in value.split(",") if e.strip()]
            elif key == "identity":
                cfg.identity = value
            elif key == "quorum":
                cfg.quorum = Fraction(value)
            else:
                setattr(cfg, key, int(value))
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"{path}:{no}: bad value for {key}") from None
    return cfg


def _read_file(path: str, what: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p.read_bytes()


def _load_circuit(path: str):
    try:
        return parse_circuit(_read_file(path, "circuit file").decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot parse circuit {path}: {exc}") from None


def _load_vector(path: str, what: str) -> List[int]:
    _read_file(path, what)
    try:
        return read_vector(path)
    except (ValueError, DecodeError) as exc:
        raise UsageError(f"cannot parse {what} {path}: {exc}") from None


def _parse_list(text: str, what: str) -> List[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of integers") from None
    if not vals:
        raise UsageError(f"{what} must not be empty")
    if any(v < 1 or not is_power_of_two(v) for v in vals):
        raise UsageError(f"every entry of {what} must be a power of two")
    return vals


def _make_cluster(cfg: Config, endpoints: Optional[str], transport: str = "local") -> Cluster:
    if endpoints:
        eps = [e.strip() for e in endpoints.split(",") if e.strip()]
    else:
        eps = cfg.endpoints
    if eps:
        if not is_power_of_two(len(eps)):
            raise UsageError("the number of workers must be a power of two")
        return Cluster.connect(eps)
    if transport == "process":
        return Cluster.processes(cfg.workers)
    return Cluster.local(cfg.workers)


def honest_statement(n_sig: int, seed: int, message_length: int = 1, rounds: int = DEFAULT_ROUNDS):
    """A toy light-client statement: n_sig keys signing one header digest."""
    keys = [keygen(f"{seed}/{i}".encode(), rounds) for i in range(n_sig)]
    digest = hashlib.sha256(f"header/{seed}".encode()).digest()
    entries = [(digest, pk, sign(sk, digest, message_length, rounds)) for sk, pk in keys]
    return statement_inputs(entries, [sk for sk, _ in keys], message_length)


# -- commands ------------------------------------------------------------------

def cmd_build_circuit(args, cfg: Config) -> int:
    n_sig = args.n_sig or cfg.n_sig
    if not is_power_of_two(n_sig):
        raise UsageError("--n-sig must be a power of two")
    c = build_light_client_circuit(n_sig, cfg.message_length, cfg.rounds)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_circuit(c))
    print(f"circuit: {c.copies} copies, depth {c.depth}, {c.sub.gate_count()} gates per copy -> {out}")
    if args.witness_out:
        inputs = honest_statement(n_sig, args.seed if args.seed is not None else cfg.seed, cfg.message_length, cfg.rounds)
        write_vector(args.witness_out, inputs)
        print(f"inputs: {len(inputs)} field elements -> {args.witness_out}")
        if args.public_out:
            public, _ = split_public(c, inputs)
            write_vector(args.public_out, public)
            print(f"public inputs: {len(public)} field elements -> {args.public_out}")
    return EXIT_OK


def cmd_prove(args, cfg: Config) -> int:
    c = _load_circuit(args.circuit)
    inputs = _load_vector(args.witness, "witness file")
    dp = as_data_parallel(c)
    if len(inputs) != dp.input_size:
        raise UsageError(f"witness has {len(inputs)} values, circuit expects {dp.input_size}")
    identity = (args.identity or cfg.identity).encode()
    eps = [e for e in (getattr(args, "workers", None) or "").split(",") if e.strip()] or cfg.endpoints
    n_workers = len(eps) or cfg.workers
    if n_workers > dp.copies or dp.copies % n_workers:
        raise UsageError(f"{dp.copies} copies cannot be split evenly over {n_workers} workers")
    cluster = _make_cluster(cfg, getattr(args, "workers", None), getattr(args, "transport", "local"))
    try:
        proof, stats = devirgo_prove(cluster, dp, inputs, identity, cfg.proof_params)
    finally:
        cluster.close()
    data = proof.to_bytes()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    sidecar = stats.as_dict()
    sidecar.update({"schema": 1, "identity": identity.decode(errors="replace"), "output": proof.output,
                    "size_breakdown": proof.size_breakdown()})
    Path(str(out) + ".stats.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    print(f"proof: {len(data)} bytes, {stats.workers} worker(s), {stats.wall_time:.3f} s -> {out}")
    return EXIT_OK


def cmd_verify(args, cfg: Config) -> int:
    c = _load_circuit(args.circuit)
    dp = as_data_parallel(c)
    public = _load_vector(args.public, "public input file") if args.public else []
    proof = _read_file(args.proof, "proof file")
    claimed = _load_vector(args.output, "output file") if args.output else expected_output(dp.copies)
    identity = (args.identity or cfg.identity).encode()
    ok = virgo_verify(dp, public, claimed, proof, identity, cfg.proof_params)
    print("accept" if ok else "reject")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_worker(args, cfg: Config) -> int:
    try:
        host, port = parse_endpoint(args.listen)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"worker listening on {host}:{port}", flush=True)
    serve_tcp(host, port, max_sessions=args.max_sessions)
    return EXIT_OK


def cmd_bench_scaling(args, cfg: Config) -> int:
    copies_list = _parse_list(args.copies, "--copies")
    workers_list = _parse_list(args.workers, "--workers")
    rows = bench_scaling(copies_list, workers_list, cfg, args.transport, args.repeat)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["copies", "workers", "wall_s", "per_worker_gates", "total_gates", "proof_bytes", "frames"]
    with open(out / "bench_scaling.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([r[k] for k in header])
    print(f"{'copies':>6} {'workers':>7} {'wall_s':>9} {'gates/worker':>12} {'proof_B':>8} {'frames':>7}")
    for r in rows:
        print(f"{r['copies']:>6} {r['workers']:>7} {r['wall_s']:>9.4f} {r['per_worker_gates']:>12} "
              f"{r['proof_bytes']:>8} {r['frames']:>7}")
    plot_scaling(rows, out / "bench_scaling.png")
    print(f"wrote {out / 'bench_scaling.csv'} and {out / 'bench_scaling.png'}")
    return EXIT_OK


def bench_scaling(copies_list: Sequence[int], workers_list: Sequence[int], cfg: Config,
                  transport: str = "local", repeat: int = 1) -> List[Dict]:
    rows = []
    for n in copies_list:
        c = build_light_client_circuit(n, cfg.message_length, cfg.rounds)
        inputs = honest_statement(n, cfg.seed, cfg.message_length, cfg.rounds)
        for wk in workers_list:
            if wk > n:
                continue
            cluster = Cluster.processes(wk) if transport == "process" else Cluster.local(wk)
            try:
                best = None
                for _ in range(max(1, repeat)):
                    _, st = devirgo_prove(cluster, c, inputs, cfg.identity.encode(), cfg.proof_params)
                    best = st if best is None or st.wall_time < best.wall_time else best
            finally:
                cluster.close(shutdown=True)
            gates = best.per_worker_gates
            rows.append({
                "copies": n, "workers": wk, "wall_s": round(best.wall_time, 6),
                "per_worker_gates": max(gates), "min_worker_gates": min(gates), "total_gates": sum(gates),
                "proof_bytes": best.proof_size, "frames": best.frames["sent"],
            })
    return rows


def plot_scaling(rows: List[Dict], path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for wk in sorted({r["workers"] for r in rows}):
        pts = sorted((r["copies"], r["wall_s"], r["per_worker_gates"]) for r in rows if r["workers"] == wk)
        ax1.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{wk} worker(s)")
        ax2.plot([p[0] for p in pts], [p[2] for p in pts], marker="o", label=f"{wk} worker(s)")
    ax1.set_xlabel("copies")
    ax1.set_ylabel("prover wall time (s)")
    ax2.set_xlabel("copies")
    ax2.set_ylabel("gate evaluations per worker")
    for ax in (ax1, ax2):
        ax.set_xscale("log", base=2)
        ax.legend()
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_scenario(report, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kinds = sorted({s.kind for s in report.submissions})
    acc = [sum(1 for s in report.submissions if s.kind == k and s.accepted) for k in kinds]
    rej = [sum(1 for s in report.submissions if s.kind == k and not s.accepted) for k in kinds]
    fig, ax = plt.subplots(figsize=(7, 4))
    xs = range(len(kinds))
    ax.bar(xs, acc, label="accepted", color="tab:green")
    ax.bar(xs, rej, bottom=acc, label="rejected", color="tab:red")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(kinds, rotation=30, ha="right")
    ax.set_ylabel("envelopes")
    ax.set_title(f"main chain length {len(report.main_chain)}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def cmd_scenario(args, cfg: Config) -> int:
    from .bridge.scenario import ScenarioError, parse_scenario, run_scenario

    text = _read_file(args.file, "scenario file").decode(errors="replace")
    try:
        sc = parse_scenario(text)
        if args.seed is not None:
            sc.settings["seed"] = str(args.seed)
        report = run_scenario(sc)
    except ScenarioError as exc:
        raise UsageError(f"scenario: {exc}") from None
    print(report.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scenario.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(report.rows())
        (out / "scenario.txt").write_text(report.to_text() + "\n")
        plot_scenario(report, out / "scenario.png")
        print(f"wrote {out / 'scenario.csv'}, {out / 'scenario.txt'} and {out / 'scenario.png'}")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_lock_mint(args, cfg: Config) -> int:
    from .bridge.app import lock_mint_demo
    from .bridge.updater import BridgeParams

    params = BridgeParams(cfg.committee, cfg.quorum, cfg.message_length, cfg.rounds, cfg.rho, cfg.queries,
                          cfg.confirmations)
    seed = args.seed if args.seed is not None else cfg.seed
    r = lock_mint_demo(seed, args.user, args.amount, params)
    for kind, msg in r.log:
        print(f"{kind}: {msg}")
    print(f"locked {r.locked}, credited {r.credited}, premature mint rejected {r.premature_rejected}, "
          f"replay rejected {r.replay_rejected}")
    print(f"state sha256: {r.state_digest}")
    return EXIT_OK if r.ok else EXIT_FAIL


# -- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcbridge", description="Light-client bridge proving toolkit")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-circuit", help="write the light-client statement circuit (and honest inputs)")
    p.add_argument("--n-sig", type=int, help="signatures per statement (power of two)")
    p.add_argument("--out", required=True, help="circuit file to write")
    p.add_argument("--witness-out", help="also write honest inputs for the circuit")
    p.add_argument("--public-out", help="with --witness-out, also write the public half")
    p.set_defaults(fn=cmd_build_circuit)

    for name, helptext in (("prove", "prove a circuit on a local or remote cluster"),
                           ("coordinate", "prove using remote workers given by --workers")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--circuit", required=True)
        p.add_argument("--witness", required=True, help="input vector file (public and witness halves)")
        p.add_argument("--out", required=True, help="proof file; stats go to <out>.stats.json")
        p.add_argument("--identity")
        p.add_argument("--workers", required=(name == "coordinate"), help="comma-separated host:port list")
        p.add_argument("--transport", choices=["local", "process"], default="local",
                       help="in-process threads or worker processes when no endpoints are given")
        p.set_defaults(fn=cmd_prove)

    p = sub.add_parser("verify", help="verify a proof file")
    p.add_argument("--circuit", required=True)
    p.add_argument("--proof", required=True)
    p.add_argument("--public", help="public input vector file")
    p.add_argument("--output", help="claimed output vector file (default: all ones)")
    p.add_argument("--identity")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("worker", help="serve as a prover worker")
    p.add_argument("--listen", required=True, help="host:port")
    p.add_argument("--max-sessions", type=int)
    p.set_defaults(fn=cmd_worker)

    p = sub.add_parser("bench-scaling", help="prover time and per-worker work against copies and workers")
    p.add_argument("--copies", default="1,2,4,8")
    p.add_argument("--workers", default="1,2,4,8")
    p.add_argument("--transport", choices=["local", "process"], default="local")
    p.add_argument("--repeat", type=int, default=1, help="keep the fastest of this many runs")
    p.add_argument("--out", default="bench_out", help="directory for CSV and PNG")
    p.set_defaults(fn=cmd_bench_scaling)

    p = sub.add_parser("scenario", help="replay a bridge scenario file")
    p.add_argument("file")
    p.add_argument("--out", help="directory for CSV, text report and PNG")
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("lock-mint", help="run the lock/mint transfer demo")
    p.add_argument("--user", default="alice")
    p.add_argument("--amount", type=int, default=5)
    p.set_defaults(fn=cmd_lock_mint)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        cfg.validate()
        return args.fn(args, cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except KeyboardInterrupt:
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
