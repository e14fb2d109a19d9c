"""
The two resource states
=======================

Voting needs two multi-particle states. The zero-sum state spreads equal
weight over every digit tuple whose sum is 0 mod m. The singlet state is the
signed superposition of all orderings of 0..n-1.
"""

import numpy as np

from sqav import qstate
from sqav.qstate import Basis
from sqav.rng import make_rng

# %%
# Three qubits: the zero-sum state is supported on the even-parity tuples.
chi = qstate.make_chi_state(3, 2)
for digits, amp in chi.to_dict().items():
    print(digits, np.round(amp, 3))

# %%
# In the Fourier frame the same state is a GHZ state: all digits agree.
print(qstate.to_basis_frame(chi, Basis.FOURIER).to_dict())

# %%
# Sampling confirms both properties. Computational outcomes sum to 0 mod m
# and Fourier outcomes are all equal.
rng = make_rng(0)
chi = qstate.make_chi_state(4, 3)
print([qstate.measure_all(chi, Basis.COMPUTATIONAL, rng)[0] for _ in range(4)])
print([qstate.measure_all(chi, Basis.FOURIER, rng)[0] for _ in range(4)])

# %%
# The singlet: amplitude signs follow the inversion count of each ordering.
s3 = qstate.make_singlet_state(3)
for perm, amp in s3.to_dict().items():
    print(perm, qstate.inverse_number(perm), np.round(amp.real, 3))

# %%
# Either basis gives a permutation of 0..n-1, so every voter ends up with a
# distinct index.
s4 = qstate.make_singlet_state(4)
print([qstate.measure_all(s4, b, rng)[0] for b in (Basis.COMPUTATIONAL, Basis.FOURIER)])

# %%
# States serialise to plain JSON for golden files.
print(qstate.dump_state(qstate.make_chi_state(2, 2)))
