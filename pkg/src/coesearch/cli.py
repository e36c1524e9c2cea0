"""Command-line entry point.

    coesearch keygen --out client.key [--config settings.conf]
    coesearch serve --listen 127.0.0.1:7700 --db ./server-db
    coesearch upload --connect 127.0.0.1:7700 --key client.key --db-id demo --values values.txt
    coesearch search --connect 127.0.0.1:7700 --key client.key --db-id demo --values values.txt \\
                     --scheme bf-coie --query eq:1
    coesearch bench --spec experiment.conf
    coesearch verify [--only 1,2,13]

``values.txt`` holds one non-negative integer per line. The client keeps its
own copy of the values because the match step runs on the client.
Set ``COESEARCH_LOG=INFO`` (or DEBUG) for progress logs.
"""

from __future__ import annotations

import argparse
import json
import logging
import secrets
import sys
from dataclasses import dataclass
from pathlib import Path

from .backend import Backend, BackendKeys, BackendParams, LatticeBackend, PlaintextBackend, keygen
from .config import Settings, configure_logging, load_settings
from .errors import CoeError

log = logging.getLogger("coesearch")


@dataclass
class KeyBundle:
    """Client-side secrets: the homomorphic key (lattice only) and the
    record-sealing key."""

    backend: str
    modulus: int
    vault_key: bytes
    lattice: BackendKeys | None = None

    def to_json(self) -> str:
        return json.dumps({"backend": self.backend, "modulus": self.modulus, "vault_key": self.vault_key.hex(),
                           "lattice": self.lattice.to_bytes().hex() if self.lattice else None}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "KeyBundle":
        d = json.loads(text)
        lattice = BackendKeys.from_bytes(bytes.fromhex(d["lattice"])) if d.get("lattice") else None
        return cls(d["backend"], int(d["modulus"]), bytes.fromhex(d["vault_key"]), lattice)

    def make_backend(self) -> Backend:
        if self.backend == "lattice":
            return LatticeBackend(self.lattice)
        return PlaintextBackend(self.modulus)


def generate_bundle(settings: Settings, max_additions: int = 2**20) -> KeyBundle:
    vault_key = secrets.token_bytes(16)
    if settings.backend == "lattice":
        params = BackendParams.provision(settings.modulus, settings.lwe_dimension, settings.noise_bound,
                                         max_additions=max_additions)
        return KeyBundle("lattice", settings.modulus, vault_key, keygen(params, settings.key_seed))
    if settings.backend != "oracle":
        raise CoeError(f"unknown backend {settings.backend!r}")
    return KeyBundle("oracle", settings.modulus, vault_key)


def read_values(path: str) -> list[int]:
    vals = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if line:
            try:
                vals.append(int(line, 0))
            except ValueError:
                raise CoeError(f"{path}:{lineno}: not an integer: {line!r}") from None
    return vals


def _client(args, settings: Settings):
    from .pir import RecordVault
    from .protocol import SchemeConfig, SearchClient, SocketTransport
    from .protocol.transport import parse_address

    bundle = KeyBundle.from_json(Path(args.key).read_text())
    config = SchemeConfig(eta=settings.eta, f_p=settings.f_p, lam=settings.lam, mu=settings.mu,
                          tau=settings.tau, seed=settings.hash_seed, salted=settings.salted)
    transport = SocketTransport.connect(*parse_address(args.connect))
    return SearchClient(transport, bundle.make_backend(), RecordVault(bundle.vault_key), config,
                        first_session=secrets.randbits(48) + 1)


def cmd_keygen(args, settings: Settings) -> int:
    bundle = generate_bundle(settings)
    out = Path(args.out)
    out.write_text(bundle.to_json())
    out.chmod(0o600)
    print(f"wrote {bundle.backend} key bundle to {out}")
    return 0


def cmd_serve(args, settings: Settings) -> int:
    from .protocol import SearchServer, TcpHost
    from .protocol.transport import parse_address

    host, port = parse_address(args.listen)
    server = SearchServer(args.db)
    tcp = TcpHost(server, host, port)
    print(f"serving {len(server.databases)} database(s) on {tcp.address[0]}:{tcp.address[1]}", flush=True)
    try:
        tcp.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        tcp.stop()
    return 0


def cmd_upload(args, settings: Settings) -> int:
    client = _client(args, settings)
    try:
        db = client.upload(args.db_id, read_values(args.values))
    finally:
        client.transport.close()
    print(f"uploaded {args.db_id}: n={db.n}, server multiplies: {db.server_multiplies}")
    return 0


def cmd_search(args, settings: Settings) -> int:
    client = _client(args, settings)
    try:
        client.attach(args.db_id, read_values(args.values))
        result = client.search(args.db_id, args.scheme, args.query)
    finally:
        client.transport.close()
    if result.aborted:
        print(f"aborted: {result.false_positives} false positives exceed the budget")
        return 3
    t = result.transcript
    print(f"matches: {result.s}  rounds: {t.rounds}  fetch ciphertexts: {t.fetch_ciphertexts()}  "
          f"PIR instances: {result.pir_instances}")
    if result.indices:
        for i, v in zip(result.indices, result.values):
            print(f"{i}\t{v}")
    else:
        for v in sorted(result.values):
            print(f"-\t{v}")
    return 0


def cmd_bench(args, settings: Settings) -> int:
    from .bench import BenchAssertionError, ExperimentSpec, communication_table, reports_table, run_experiment

    spec = ExperimentSpec.from_file(args.spec)
    try:
        reports = run_experiment(spec)
    except BenchAssertionError as exc:
        print(f"bench: {exc}", file=sys.stderr)
        return 1
    print(reports_table(reports), end="")
    if args.table:
        print()
        print(communication_table(f_p=settings.f_p, eta=settings.eta, lam=settings.lam), end="")
    if spec.output:
        print(f"wrote {spec.output}")
    return 0


def cmd_verify(args, settings: Settings) -> int:
    from .acceptance import run_all

    only = [int(x) for x in args.only.split(",")] if args.only else None
    results = run_all(only=only, scale=args.scale)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coesearch", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", help="flat key = value settings file")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keygen", help="create a client key bundle")
    k.add_argument("--out", required=True)

    s = sub.add_parser("serve", help="run a search server")
    s.add_argument("--listen", default="127.0.0.1:7700")
    s.add_argument("--db", required=True, help="directory for uploaded databases")

    for name, helptext in (("upload", "upload a database"), ("search", "run one search")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--connect", default="127.0.0.1:7700")
        c.add_argument("--key", required=True)
        c.add_argument("--db-id", required=True)
        c.add_argument("--values", required=True, help="file with one integer per line")
        if name == "search":
            c.add_argument("--scheme", required=True, choices=["bf-coie", "ps-coie", "bfs-code"])
            c.add_argument("--query", required=True, help="eq:V | in:A,B | range:LO:HI | mod:M:R")

    b = sub.add_parser("bench", help="run a benchmark spec")
    b.add_argument("--spec", required=True)
    b.add_argument("--table", action="store_true", help="also print the communication table")

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--only", help="comma-separated criterion numbers")
    v.add_argument("--scale", type=float, default=1.0,
                   help="trial-count multiplier; values below 1 give a quick smoke run")
    return p


COMMANDS = {"keygen": cmd_keygen, "serve": cmd_serve, "upload": cmd_upload, "search": cmd_search,
            "bench": cmd_bench, "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings(args.config)
        return COMMANDS[args.command](args, settings)
    except (CoeError, ValueError, OSError) as exc:
        print(f"coesearch {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
