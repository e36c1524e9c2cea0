"""
Communication at n = 10^4, s = 16 and the speed-up model
=======================================================

Our closed-form ciphertext counts sit next to the published figures. The
LEAF+ column is a cost model, not a measurement. The speed-up estimate
compares s matches and s fetches against one match and a much faster fetch.
"""

from coesearch.bench import communication_table, leaf_cost_model, speedup_estimate

print(communication_table())

leaf = leaf_cost_model(10_000, 16)
print(f"LEAF+ model: {leaf.rounds} rounds, {leaf.hmult} hmult, {leaf.hadd} hadd")

# match time / fetch time in LEAF+ is about 1.5; our fetch is 1800 times faster
for m in (0.5, 1.0, 1.5, 2.0):
    print(f"match/fetch ratio {m}: speed-up {speedup_estimate(16, m, 1800):.2f}")
