"""
Decoding a BF-COIE encoding level by level
==========================================

A 32-entry indicator with ones at 1, 15 and 16 is compressed into a stack of
Bloom filters, one per level. Level k holds ceil(i / 2^k) for every nonzero
i, so the client can walk down from the top level and only ever check the
two children of a surviving candidate.
"""

from coesearch.backend import PlaintextBackend
from coesearch.coie import CoieParams, DecodeStats, bfcoie_decode, bfcoie_encode, level_index

be = PlaintextBackend()
hot = [1, 15, 16]
bits = be.enc_many([1 if i in hot else 0 for i in range(1, 33)])

# With one expected match the tree has five levels (t = 4); the parents shrink
# to a single node at the top.
for k in range(5):
    print(f"level {k}: {sorted({level_index(i, k) for i in hot})}")

# The declared sparsity must cover the real count, so encode with s = 4.
params = CoieParams(32, 4, seed=0)
print(f"\ns=4: t={params.t}, {params.level_ell} cells per level, {params.total_cells} in total")
enc = bfcoie_encode(be, bits, params)

stats = DecodeStats()
found = bfcoie_decode(enc.decrypt(be), params, stats)
print("candidates checked per level (top first):", stats.candidates_per_level)
print("decoded indices:", found)
