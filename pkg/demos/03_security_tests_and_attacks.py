"""
Spot checks against eavesdropping and forged states
===================================================

Before ballots are generated every voter measures a few random copies in a
random basis. Here we compare exact escape probabilities with Monte Carlo.
"""

from sqav import adversary as adv
from sqav import protocol as p
from sqav import qstate
from sqav.attacks import DoubleVote, InterceptSubset
from sqav.rng import make_rng

# %%
# An eavesdropper touching x copies escapes only if none of them is tested.
cfg = p.ProtocolConfig(4, 2, delta0=2)
for x in (1, 2, 3):
    rep = adv.simulate_intercept(cfg, x, 50_000, make_rng(1, x))
    print(f"x={x}: exact {rep.predicted_pass:.4f}  simulated {rep.measured_pass:.4f} +- {rep.stderr:.4f}")
    print(f"      with measure-and-resend, escape {rep.extra['measured_escape']:.4f}"
          f" (exact {rep.extra['predicted_escape']:.4f})")

# %%
# A forged copy |000> always passes the sum test but passes the Fourier test
# only a quarter of the time.
zero = qstate.basis_state([0, 0, 0], 2)
print(adv.replacement_pass_probabilities(zero))
rep = adv.detection_stats_replacement(zero, 3, 2, 1, 5000, make_rng(2))
print(f"per-test pass {rep.measured_pass:.3f} vs {rep.predicted_pass:.3f}")

# %%
# Two escape predictions as the security strength grows: every test probing
# the forged copy, and the forged copy tested at most once.
for row in adv.escape_sweep(zero, range(1, 6)):
    print(row["delta0"], round(row["every_test_escape"], 4), round(row["faithful_escape"], 4))

# %%
# Inside a full run, intercepting every copy of one voter is caught.
tr = p.run_full_protocol(p.ProtocolConfig(3, 2, delta0=3, seed=5), [0, 1, 1], InterceptSubset(x=12))
print(tr.abort_reason)

# %%
# Voting twice is caught by the self-checks of the voter whose box was hit.
# Voter 2 adds an extra vote to the box of voter 0.
honest = p.run_full_protocol(p.ProtocolConfig(3, 3, seed=0), [1, 2, 0])
victim_box = honest.indices[0]
tr = p.run_full_protocol(p.ProtocolConfig(3, 3, seed=0), [1, 2, 0], DoubleVote(attacker=2, box=victim_box, extra=1))
print(tr.verifications, tr.abort_reason)
print("undetected double votes, n=4 m=3:", len(adv.undetected_double_votes(4, 3)))

# %%
# Colluding voters entangled with the honest particles learn the sum of the
# honest ballots and nothing finer.
state = adv.build_ballot_collusion_state(3, 2, honest=[0, 1])
leak = adv.analyze_ballot_leakage(state, [0, 1])
print(leak.classification(), leak.within_class_max, leak.across_class_min)
leak = adv.analyze_index_leakage(3, 1)
print(leak.classification(), leak.pass_probability)
