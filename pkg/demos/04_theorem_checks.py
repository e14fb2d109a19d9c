"""
Exact characterisation checks
=============================

The spot checks are sound because only the genuine resource states pass
them with certainty. These checks measure violation mass exactly.
"""

import numpy as np

from sqav import qstate, theorems
from sqav.rng import make_rng

# %%
# The zero-sum state passes both conditions; a product state does not.
print(theorems.check_theorem1(qstate.make_chi_state(4, 3)).as_tuple())
print(theorems.check_theorem1(qstate.basis_state([0, 0, 0], 2)).as_tuple())

# %%
# Same for the singlet against a single ordering.
print(theorems.check_theorem2(qstate.make_singlet_state(4)).as_tuple())
print(theorems.check_theorem2(qstate.basis_state([0, 1, 2], 3)).as_tuple())

# %%
# The singlet picks up det(U) under U applied to every particle.
rng = make_rng(3)
print(max(theorems.check_property1(4, rng=rng) for _ in range(20)))
print(np.linalg.det(qstate.fourier_matrix(2)))

# %%
# The uniqueness argument reduces to a homogeneous linear system whose null
# space is spanned by the all-equal vector.
space = theorems.lemma2_solution_space(4, 4, range(4))
print(space.dimension, space.is_all_equal_span)
print(np.round(space.normalized_coefficients()[:4], 4), 1 / np.sqrt(24))

# %%
# The full grid, as run by ``sqav verify``.
results = theorems.verification_suite(2, 4, 3, unitaries=5)
print(sum(r.passed for r in results), "/", len(results))
