"""
The same search under real LWE encryption
==========================================

The oracle backend stores plaintexts and is fast enough for statistics. Here
the client switches to the lattice backend. The server only ever sees an
evaluator that can add and scale ciphertexts, so the client prepares the
masked record vector for BFS-CODE itself.
"""

import random
import time

from coesearch.backend import BackendParams, LatticeBackend, keygen
from coesearch.protocol import SearchClient, SearchServer, TcpHost, SocketTransport

params = BackendParams.provision(lwe_dimension=32, max_additions=2**16)
be = LatticeBackend(keygen(params, seed=11))
print(f"q = p * 2^{params.delta.bit_length() - 1}, dimension {params.lwe_dimension}, "
      f"{be.ciphertext_size} bytes per ciphertext")

rng = random.Random(3)
values = [rng.randrange(2, 1000) for _ in range(400)]
hot = sorted(rng.sample(range(1, 401), 5))
for i in hot:
    values[i - 1] = 1

with TcpHost(SearchServer()) as host:
    client = SearchClient(SocketTransport.connect(*host.address), be, dummy_seed=0)
    client.upload("lwe", values)
    for scheme in ("bf-coie", "ps-coie", "bfs-code"):
        t0 = time.perf_counter()
        r = client.search("lwe", scheme, "eq:1")
        print(f"{scheme:9} found {r.indices} in {time.perf_counter() - t0:.2f}s "
              f"({r.transcript.bytes() / 1024:.0f} KiB on the wire)")
    client.transport.close()

print("planted:", hot)
