"""
One database, three search protocols
====================================

A client uploads 2000 small integers, then searches for the value 1 with each
scheme over an in-process loopback connection. The transcript counts show
where the schemes differ: BF-COIE sends a larger encoding and a few spare PIR
queries, PS-COIE sends exactly s power sums, and BFS-CODE skips PIR entirely.
"""

import random

from coesearch.backend import PlaintextBackend
from coesearch.protocol import SearchClient, SearchServer, spawn_loopback

rng = random.Random(7)
values = [rng.randrange(2, 1 << 16) for _ in range(2000)]
for i in rng.sample(range(2000), 12):
    values[i] = 1

server = SearchServer()
client = SearchClient(spawn_loopback(server), PlaintextBackend(), dummy_seed=1)
client.upload("people", values)

print(f"{'scheme':10}{'matches':>8}{'rounds':>8}{'encoding ct':>13}{'PIR':>6}{'server hadd':>13}")
for scheme in ("bf-coie", "ps-coie", "bfs-code"):
    r = client.search("people", scheme, "eq:1")
    costs = server.costs[r.session.session_id]
    print(f"{scheme:10}{r.s:>8}{r.transcript.rounds:>8}{costs.encoding_ciphertexts:>13}"
          f"{r.pir_instances:>6}{costs.encode.hadd:>13}")

print("\nmatching indices:", r.indices)
client.transport.close()
