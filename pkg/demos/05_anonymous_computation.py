"""
Anonymous computation, broadcast and ranking
============================================

The voting machinery publishes any set of values without linking them to
their owners. Each input becomes a virtual voter.
"""

from sqav import amc

# %%
# Three parties with inputs 2, 3 and 6. Everyone learns the multiset, so any
# symmetric function, such as the sum, follows.
inputs = amc.AmcInputs(((2,), (3,), (6,)), 7)
res = amc.run_amc(inputs, amc.AmcConfig(seed=0))
print(res.output, sum(res.output), res.verified)

# %%
# Each party ranks its own value against the public list.
print(amc.anonymous_ranking(inputs))

# %%
# Parties may hold several values.
inputs = amc.AmcInputs.from_flat([2, 1, 2], [4, 1, 0, 4, 2], 5)
print(amc.run_amc(inputs, amc.AmcConfig(seed=1)).output)

# %%
# Anonymous broadcast: symbol m-1 marks an abstention.
print(amc.anonymous_broadcast([2, None, 1], 4))

# %%
# Past seven inputs the singlet is too large to simulate exactly; the ideal
# mode samples the ballots and the permutation classically.
inputs = amc.AmcInputs(tuple((v,) for v in [5, 1, 4, 1, 5, 9, 2, 6, 5, 3]), 10)
print(amc.run_amc(inputs, amc.AmcConfig(mode="ideal", seed=2)).output)
