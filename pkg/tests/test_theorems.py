import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqav import qstate, theorems
from sqav.errors import InvalidDimensionError, InvalidPermutationError
from sqav.qstate import SparseState
from sqav.rng import make_rng


def dense_dft_masses(state, bad_fourier):
    """Oracle: Fourier-basis probabilities from one dense n-fold DFT of the amplitude tensor."""
    n, m = state.n, state.m
    # dense index is little-endian, so reshape with particle 0 last and reverse axes
    tensor = state.to_dense().reshape([m] * n)
    tensor = np.transpose(tensor, list(range(n))[::-1])
    # Fourier-frame amplitudes are <j|F^dagger psi>: an ordinary forward DFT over every axis
    ft = np.fft.fftn(tensor) / m ** (n / 2)
    probs = np.abs(ft) ** 2
    return sum(probs[t] for t in itertools.product(range(m), repeat=n) if bad_fourier(t))


# theorem 1 ---------------------------------------------------------------------


@pytest.mark.parametrize("n,m", [(n, m) for n in range(2, 6) for m in range(2, 5)])
def test_theorem1_on_chi(n, m):
    rep = theorems.check_theorem1(qstate.make_chi_state(n, m))
    assert rep.epsilon_c < 1e-10 and rep.epsilon_f < 1e-10
    assert abs(rep.fidelity - 1) < 1e-10
    assert rep.holds()


def test_theorem1_on_zero_product_state():
    rep = theorems.check_theorem1(qstate.basis_state([0, 0, 0], 2))
    assert rep.epsilon_c == pytest.approx(0, abs=1e-12)
    assert rep.epsilon_f == pytest.approx(0.75, abs=1e-12)
    assert rep.fidelity == pytest.approx(0.5, abs=1e-12)


def test_theorem1_sign_flip():
    chi = qstate.make_chi_state(3, 3)
    amps = chi.amps.copy()
    amps[2] *= -1
    rep = theorems.check_theorem1(SparseState(3, 3, chi.keys, amps))
    assert rep.epsilon_c < 1e-12
    assert rep.epsilon_f > 0.01
    assert rep.fidelity < 1 - 0.01


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 3), m=st.integers(2, 3), seed=st.integers(0, 2**32))
def test_theorem1_fourier_mass_matches_dense_dft(n, m, seed):
    psi = theorems.random_state(n, m, np.random.default_rng(seed))
    rep = theorems.check_theorem1(psi)
    oracle = dense_dft_masses(psi, lambda t: len(set(t)) > 1)
    assert rep.epsilon_f == pytest.approx(oracle, abs=1e-10)


def _ghz_form(n, m, coeffs):
    """sum_j c_j F^{(x)n}|j...j>: always passes the Fourier test."""
    F = qstate.fourier_matrix(m)
    terms = {}
    for j, c in enumerate(coeffs):
        ket = qstate.apply_to_particles(qstate.basis_state([j] * n, m), F)
        for k, a in ket.to_dict().items():
            terms[k] = terms.get(k, 0) + c * a
    return SparseState.from_terms(n, m, terms, normalize=True)


def test_theorem1_converse_random_states():
    rng = make_rng(11)
    for _ in range(100):
        rep = theorems.check_theorem1(theorems.random_state(3, 2, rng))
        if rep.epsilon_c < 1e-12 and rep.epsilon_f < 1e-12:
            assert abs(rep.fidelity - 1) < 1e-8


@pytest.mark.parametrize("n,m", [(3, 2), (3, 3), (4, 2)])
def test_theorem1_converse_ghz_family(n, m):
    rng = make_rng(12)
    for trial in range(40):
        if trial % 4 == 0:
            coeffs = np.full(m, np.exp(1j * rng.uniform(0, 2 * np.pi)))  # the target, up to phase
        else:
            coeffs = rng.normal(size=m) + 1j * rng.normal(size=m)
        rep = theorems.check_theorem1(_ghz_form(n, m, coeffs))
        assert rep.epsilon_f < 1e-10
        both_zero = rep.epsilon_c < 1e-10
        assert both_zero == (abs(rep.fidelity - 1) < 1e-8)


# theorem 2 ---------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_theorem2_on_singlet(n):
    assert theorems.check_theorem2(qstate.make_singlet_state(n)).holds()


@pytest.mark.parametrize("n", [2, 3, 4])
def test_theorem2_identity_permutation(n):
    rep = theorems.check_theorem2(qstate.basis_state(range(n), n))
    assert rep.epsilon_c < 1e-12
    assert rep.epsilon_f > 0
    assert rep.fidelity == pytest.approx(1 / math.sqrt(math.factorial(n)), abs=1e-12)
    oracle = dense_dft_masses(qstate.basis_state(range(n), n), lambda t: len(set(t)) < n)
    assert rep.epsilon_f == pytest.approx(oracle, abs=1e-10)


def test_theorem2_requires_square():
    with pytest.raises(InvalidDimensionError):
        theorems.check_theorem2(qstate.make_chi_state(3, 2))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_theorem2_converse_permutation_family(n):
    rng = make_rng(13)
    perms = list(itertools.permutations(range(n)))
    singlet = qstate.make_singlet_state(n)
    for trial in range(30):
        if trial % 3 == 0:
            psi = singlet.scaled(np.exp(1j * rng.uniform(0, 2 * np.pi)))
        else:
            psi = theorems.random_state(n, n, rng, support=perms)
        rep = theorems.check_theorem2(psi)
        assert rep.epsilon_c < 1e-10
        assert (rep.epsilon_f < 1e-10) == (abs(rep.fidelity - 1) < 1e-8)


# property 1 --------------------------------------------------------------------


def test_property1_identity():
    assert theorems.check_property1(3, np.eye(3)) < 1e-14


def test_property1_fourier_n2():
    F = qstate.fourier_matrix(2)
    assert np.isclose(np.linalg.det(F), -1)
    s2 = qstate.make_singlet_state(2)
    out = qstate.apply_to_particles(s2, F)
    assert qstate.distance(out, s2.scaled(-1)) < 1e-10
    assert theorems.check_property1(2, F) < 1e-10


@pytest.mark.parametrize("n", [2, 3, 4])
def test_property1_random_unitaries(n):
    rng = make_rng(14, n)
    for _ in range(20):
        assert theorems.check_property1(n, rng=rng) < 1e-9


def test_property1_rejects_non_unitary():
    with pytest.raises(ValueError):
        theorems.check_property1(2, np.array([[1, 1], [0, 1]]))


def test_random_unitary_is_unitary():
    U = theorems.random_unitary(4, make_rng(15))
    assert np.allclose(U.conj().T @ U, np.eye(4), atol=1e-12)


# lemma 1 -----------------------------------------------------------------------


def test_lemma1_examples():
    assert theorems.lemma1_check(3, (0, 1))
    assert theorems.lemma1_check(4, (0, 1, 2, 3))
    assert theorems.numerical_rank(theorems.vandermonde_matrix(4, (0, 1, 2, 3))) == 4
    with pytest.raises(InvalidPermutationError):
        theorems.lemma1_check(3, (0, 0))


def test_vandermonde_full_square_determinant():
    # closed-form Vandermonde determinant: product of node differences
    n = 5
    nodes = np.exp(2j * np.pi * np.arange(n) / n)
    closed = np.prod([nodes[k] - nodes[j] for j in range(n) for k in range(j + 1, n)])
    A = theorems.vandermonde_matrix(n, range(n))
    assert abs(abs(np.linalg.det(A)) - abs(closed)) < 1e-8


# lemma 2 / corollary 1 ---------------------------------------------------------


def brute_force_system(n, m, w):
    """Oracle: build the constraint rows one tuple at a time."""
    perms = list(itertools.permutations(sorted(w)))
    rows = []
    for t in itertools.product(range(n), repeat=m):
        if len(set(t)) == m:
            continue
        rows.append([
            (-1) ** qstate.inverse_number(S) * np.exp(2j * np.pi * sum(a * b for a, b in zip(t, S)) / n)
            for S in perms
        ])
    return np.array(rows)


@pytest.mark.parametrize("n,m,w", [(3, 2, (0, 1)), (3, 3, (0, 1, 2)), (4, 2, (1, 3)), (4, 3, (0, 2, 3))])
def test_lemma2_system_matches_brute_force(n, m, w):
    A, _ = theorems.lemma2_system(n, m, w)
    assert np.allclose(A, brute_force_system(n, m, w))


def test_lemma2_examples():
    sp = theorems.lemma2_solution_space(3, 2, {0, 1})
    assert sp.dimension == 1 and sp.is_all_equal_span
    assert sp.permutations == [(0, 1), (1, 0)]
    sp = theorems.lemma2_solution_space(3, 3, (0, 1, 2))
    assert sp.dimension == 1 and len(sp.permutations) == 6 and sp.is_all_equal_span
    assert len(theorems.repeated_tuples(3, 3)) == 21
    assert theorems.lemma2_solution_space(4, 2, (1, 3)).dimension == 1


def test_lemma2_rejects_bad_subset():
    with pytest.raises(InvalidDimensionError):
        theorems.lemma2_solution_space(3, 2, (0, 1, 2))
    with pytest.raises(InvalidDimensionError):
        theorems.lemma2_solution_space(2, 3, (0, 1, 2))


def test_corollary1_examples():
    assert theorems.corollary1_check(3, 2, (0, 1), 2)
    assert theorems.corollary1_check(4, 3, (0, 1, 2), 2)
    for w in itertools.combinations(range(4), 2):
        assert theorems.corollary1_check(4, 2, w, 1) == theorems.lemma2_solution_space(4, 2, w).is_all_equal_span


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_normalized_coefficients(n):
    c = theorems.lemma2_solution_space(n, n, range(n)).normalized_coefficients()
    assert np.allclose(c, 1 / math.sqrt(math.factorial(n)), atol=1e-10)


def test_null_space_known_matrix():
    A = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
    ns = theorems.null_space(A)
    assert ns.shape == (3, 1)
    assert np.allclose(np.abs(ns[:, 0]), 1 / np.sqrt(3))


# suite -------------------------------------------------------------------------


def test_verification_suite_small_grid_passes():
    results = theorems.verification_suite(2, 3, 3, seed=0, unitaries=3)
    assert results and all(r.passed for r in results)
    names = {r.name for r in results}
    assert {"theorem1", "theorem2", "property1", "lemma1", "lemma2", "corollary1"} <= names


def test_verification_suite_flags_bad_state():
    bad = qstate.basis_state([0, 0, 0], 2)
    results = theorems.verification_suite(2, 2, 2, unitaries=1, extra_states=[(1, bad)])
    assert not results[-1].passed
    assert results[-1].name == "theorem1_state"
