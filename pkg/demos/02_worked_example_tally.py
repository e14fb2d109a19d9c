"""
Self-tallying a small election
==============================

Four voters choose among three candidates. We first replay a fixed example
with known ballots and indices, then run the full protocol from a seed.
"""

import numpy as np

from sqav import protocol as p

# %%
# Each ballot row sums to 0 mod 3, so the shares cancel in the tally.
ballots = np.array([[0, 1, 2, 0], [2, 2, 1, 1], [1, 0, 2, 0], [0, 1, 1, 1]])
indices = [1, 0, 3, 2]
votes = [1, 2, 1, 0]
print("row sums mod 3:", ballots.sum(axis=1) % 3)

# %%
# Voter k adds their vote to box indices[k] of their own column.
cols = [p.cast_vote(ballots[:, k], indices[k], votes[k], 3) for k in range(4)]
vote_matrix = p.broadcast_votes(dict(enumerate(cols)))
print(vote_matrix)

# %%
# Anyone can tally from the public matrix alone.
result = p.tally(vote_matrix, 3)
print("R =", result.R, " N =", result.N)
print("self-checks:", [p.verify_own_vote(result, indices[k], votes[k]) for k in range(4)])

# %%
# The same run through the protocol driver, with the fixtures injected.
tr = p.run_full_protocol(p.ProtocolConfig(4, 3), votes, ballots=ballots, indices=indices)
print(tr.tally)

# %%
# A seeded quantum run: ballots and indices now come from measuring the
# resource states after every voter's spot check.
tr = p.run_full_protocol(p.ProtocolConfig(5, 4, delta0=2, delta1=2, seed=42), [3, 0, 1, 1, 2])
print("ballots:\n", np.array(tr.ballots))
print("indices:", tr.indices)
print("tally:", tr.tally, "aborted:", tr.aborted)
print("events:", [e["event"] for e in tr.events])

# %%
# Replaying the transcript reproduces it byte for byte.
print(p.replay(tr).to_json() == tr.to_json())
