"""Exact numerical checks of the characterization results for the two resource states.

Everything here works from amplitudes, never from samples: violation masses
are summed probabilities, null spaces come from an SVD with a relative
threshold of :data:`RANK_TOL`.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import qstate
from .errors import InvalidDimensionError, InvalidPermutationError, NormalizationError
from .qstate import Basis, SparseState

RANK_TOL = 1e-8


@dataclass(frozen=True)
class ViolationReport:
    """Probability mass violating each measurement condition, and overlap with the target."""

    epsilon_c: float
    epsilon_f: float
    fidelity: float

    def as_tuple(self):
        return (self.epsilon_c, self.epsilon_f, self.fidelity)

    def holds(self, tol: float = 1e-10) -> bool:
        return self.epsilon_c <= tol and self.epsilon_f <= tol and abs(self.fidelity - 1) <= tol


def _clip01(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def _mass(frame: SparseState, bad: np.ndarray) -> float:
    return _clip01(np.sum(frame.probabilities()[bad]))


def check_theorem1(state: SparseState) -> ViolationReport:
    """Violation masses of the zero-sum and all-equal conditions for ``state``."""
    n, m = state.n, state.m
    if n < 2:
        raise InvalidDimensionError("theorem 1 concerns n >= 2 particles")
    digits = state.digits
    eps_c = _mass(state, digits.sum(axis=1) % m != 0)
    fourier = qstate.to_basis_frame(state, Basis.FOURIER)
    fd = fourier.digits
    eps_f = _mass(fourier, np.any(fd != fd[:, :1], axis=1))
    fid = abs(qstate.inner_product(qstate.make_chi_state(n, m), state))
    return ViolationReport(eps_c, eps_f, _clip01(fid))


def _not_permutation(digits: np.ndarray) -> np.ndarray:
    # digits lie in Z_n with n columns, so "no repeat" is "is a permutation"
    s = np.sort(digits, axis=1)
    return np.any(s[:, 1:] == s[:, :-1], axis=1)


def check_theorem2(state: SparseState) -> ViolationReport:
    """Violation masses of the all-distinct condition in both bases for ``state``."""
    if state.n != state.m:
        raise InvalidDimensionError(
            f"singlet checks need as many levels as particles, got n={state.n}, m={state.m}"
        )
    eps_c = _mass(state, _not_permutation(state.digits))
    fourier = qstate.to_basis_frame(state, Basis.FOURIER)
    eps_f = _mass(fourier, _not_permutation(fourier.digits))
    fid = abs(qstate.inner_product(qstate.make_singlet_state(state.n), state))
    return ViolationReport(eps_c, eps_f, _clip01(fid))


def random_state(n: int, m: int, rng: np.random.Generator, support=None) -> SparseState:
    """Complex-Gaussian amplitudes, normalized; optionally restricted to ``support`` tuples."""
    if support is None:
        keys = np.arange(m**n, dtype=np.int64)
    else:
        keys = qstate.encode(list(support), m)
    amps = rng.normal(size=len(keys)) + 1j * rng.normal(size=len(keys))
    return SparseState(n, m, keys, amps).normalized()


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary: QR of a complex Gaussian matrix with the R-diagonal phases removed."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def check_property1(n: int, U=None, rng: np.random.Generator | None = None) -> float:
    """Residual ``|| U^{(x)n} |S_n> - det(U) |S_n> ||``.

    With ``U=None`` a random unitary is drawn from ``rng``.
    """
    if U is None:
        if rng is None:
            raise ValueError("either U or rng is required")
        U = random_unitary(n, rng)
    U = qstate.as_unitary(U, n, tol=1e-9)
    singlet = qstate.make_singlet_state(n)
    rotated = qstate.apply_to_particles(singlet, U)
    return qstate.distance(rotated, singlet.scaled(np.linalg.det(U)))


def numerical_rank(A: np.ndarray, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space(A: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the null space, one vector per column."""
    _, s, vh = np.linalg.svd(A)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * top)) if top > 0 else 0
    return vh[rank:].conj().T


def vandermonde_matrix(n: int, s_list) -> np.ndarray:
    s = np.asarray(s_list)
    return np.exp(2j * np.pi * np.outer(np.arange(n), s) / n)


def lemma1_check(n: int, s_list) -> bool:
    """True iff the ``n x q`` phase matrix for distinct ``s_list`` has full column rank."""
    s_list = [int(s) for s in s_list]
    if len(set(s_list)) != len(s_list):
        raise InvalidPermutationError(f"entries of {s_list} must be distinct")
    if not 1 <= len(s_list) <= n or any(not 0 <= s < n for s in s_list):
        raise InvalidDimensionError(f"need 1 <= q <= n and entries in Z_{n}")
    return numerical_rank(vandermonde_matrix(n, s_list)) == len(s_list)


@dataclass
class SolutionSpace:
    dimension: int
    basis_vectors: list  # each a complex coefficient vector over ``permutations``
    permutations: list = field(default_factory=list)

    @property
    def is_all_equal_span(self) -> bool:
        """Dimension one and spanned by a vector with all coefficients equal."""
        if self.dimension != 1:
            return False
        v = np.asarray(self.basis_vectors[0])
        return bool(np.max(np.abs(v - v[0])) < RANK_TOL * max(1.0, np.max(np.abs(v))))

    def normalized_coefficients(self) -> np.ndarray:
        """Unit-norm spanning vector with the phase of its first entry removed."""
        if self.dimension != 1:
            raise ValueError("solution space is not one-dimensional")
        v = np.asarray(self.basis_vectors[0])
        v = v / np.linalg.norm(v)
        return v * np.exp(-1j * np.angle(v[0]))


def repeated_tuples(n: int, m: int):
    """Tuples of length ``m`` over ``Z_n`` with at least one repeated entry."""
    return [t for t in itertools.product(range(n), repeat=m) if len(set(t)) < m]


def lemma2_system(n: int, m: int, w_subset):
    """Coefficient matrix of the homogeneous system over repeated tuples."""
    w = sorted(int(x) for x in w_subset)
    if not 2 <= m <= n:
        raise InvalidDimensionError(f"need 2 <= m <= n, got m={m}, n={n}")
    if len(w) != m or len(set(w)) != m or any(not 0 <= x < n for x in w):
        raise InvalidDimensionError(f"w_subset must be {m} distinct elements of Z_{n}")
    perms = list(itertools.permutations(w))
    signs = np.array([qstate.permutation_sign(p) for p in perms])
    rows = np.array(repeated_tuples(n, m))
    P = np.array(perms)
    phase = np.exp(2j * np.pi * (rows @ P.T) / n)
    return phase * signs[None, :], perms


def lemma2_solution_space(n: int, m: int, w_subset) -> SolutionSpace:
    A, perms = lemma2_system(n, m, w_subset)
    ns = null_space(A)
    return SolutionSpace(ns.shape[1], [ns[:, i] for i in range(ns.shape[1])], perms)


def corollary1_check(n: int, m: int, w_subset, vector_dim: int) -> bool:
    """Vector-valued unknowns: the joint null space must force all vectors equal.

    The system for ``vector_dim``-dimensional coefficients is ``A (x) I``; its
    null space must have dimension ``vector_dim`` and every null vector, read
    as one vector per permutation, must have identical rows.
    """
    if vector_dim < 1:
        raise ValueError("vector_dim must be positive")
    A, perms = lemma2_system(n, m, w_subset)
    big = np.kron(A, np.eye(vector_dim))
    ns = null_space(big)
    if ns.shape[1] != vector_dim:
        return False
    for col in ns.T:
        vecs = col.reshape(len(perms), vector_dim)
        if np.max(np.abs(vecs - vecs[0])) > RANK_TOL:
            return False
    # per-coordinate route agrees
    return lemma2_solution_space(n, m, w_subset).is_all_equal_span


# verification suite --------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    params: dict
    value: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def verification_suite(
    n_min: int = 2,
    n_max: int = 5,
    m_max: int = 4,
    seed: int = 0,
    unitaries: int = 20,
    extra_states=(),
) -> list[CheckResult]:
    """Run every characterization check over the parameter grid.

    ``extra_states`` holds ``(theorem, state)`` pairs that are each expected to
    satisfy the given theorem's conditions exactly.
    """
    from .rng import make_rng

    if n_min < 2 or n_max < n_min or m_max < 2:
        raise InvalidDimensionError(f"bad grid n in [{n_min},{n_max}], m <= {m_max}")
    out: list[CheckResult] = []
    for n in range(n_min, n_max + 1):
        for m in range(2, m_max + 1):
            rep = check_theorem1(qstate.make_chi_state(n, m))
            worst = max(rep.epsilon_c, rep.epsilon_f, 1 - rep.fidelity)
            out.append(CheckResult("theorem1", {"n": n, "m": m}, worst, worst < 1e-10))
        rep = check_theorem2(qstate.make_singlet_state(n))
        worst = max(rep.epsilon_c, rep.epsilon_f, 1 - rep.fidelity)
        out.append(CheckResult("theorem2", {"n": n}, worst, worst < 1e-10))
    rng = make_rng(seed)
    for n in range(n_min, min(n_max, 4) + 1):
        worst = max(check_property1(n, rng=rng) for _ in range(unitaries))
        out.append(CheckResult("property1", {"n": n, "unitaries": unitaries}, worst, worst < 1e-9))
    for n in range(n_min, n_max + 1):
        for q in range(1, n + 1):
            ok = all(lemma1_check(n, s) for s in itertools.combinations(range(n), q))
            out.append(CheckResult("lemma1", {"n": n, "q": q}, float(ok), ok))
        for m in range(2, n + 1):
            dims = []
            for w in itertools.combinations(range(n), m):
                space = lemma2_solution_space(n, m, w)
                dims.append(space.dimension if space.is_all_equal_span else -1)
            ok = all(d == 1 for d in dims)
            out.append(CheckResult("lemma2", {"n": n, "m": m, "subsets": len(dims)}, float(min(dims)), ok))
            ok = corollary1_check(n, m, tuple(range(m)), 2)
            out.append(CheckResult("corollary1", {"n": n, "m": m, "vector_dim": 2}, float(ok), ok))
        coeffs = lemma2_solution_space(n, n, range(n)).normalized_coefficients()
        err = float(np.max(np.abs(coeffs - 1 / math.sqrt(math.factorial(n)))))
        out.append(CheckResult("singlet_normalization", {"n": n}, err, err < 1e-10))
    for i, (which, state) in enumerate(extra_states):
        check = check_theorem1 if int(which) == 1 else check_theorem2
        rep = check(state)
        worst = max(rep.epsilon_c, rep.epsilon_f, 1 - rep.fidelity)
        out.append(CheckResult(f"theorem{which}_state", {"index": i, "n": state.n, "m": state.m}, worst, worst < 1e-10))
    return out


def report_json(results, **meta) -> str:
    payload = dict(meta)
    payload["checks"] = [r.to_dict() for r in results]
    payload["passed"] = all(r.passed for r in results)
    return json.dumps(payload, indent=2, sort_keys=True)
