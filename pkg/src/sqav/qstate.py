"""Sparse state-vector engine for n-particle, m-level pure states.

A :class:`SparseState` stores only the nonzero amplitudes of a state. Basis
tuples ``(j_0, ..., j_{n-1})`` are packed into integer keys in little-endian
order (particle 0 is the least significant digit), and the term list is kept
sorted by key so that equal states have identical storage.

The Fourier basis follows the ``+2*pi*i`` convention: the Fourier basis ket
``|j'>`` is column ``j`` of :func:`fourier_matrix`. Measuring in that basis
means rotating by ``F^dagger`` and sampling computationally.
"""
from __future__ import annotations

import enum
import itertools
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InvalidDimensionError,
    InvalidPermutationError,
    NormalizationError,
    ResourceBudgetError,
)

PRUNE_THRESHOLD = 1e-12
NORM_TOL = 1e-10
UNITARY_TOL = 1e-10

# maximum number of stored terms for any intermediate state
MEMORY_BUDGET = 2_000_000


class Basis(str, enum.Enum):
    COMPUTATIONAL = "computational"
    FOURIER = "fourier"

    @classmethod
    def parse(cls, value) -> "Basis":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        if text in ("c", "computational", "z"):
            return cls.COMPUTATIONAL
        if text in ("f", "fourier"):
            return cls.FOURIER
        raise ValueError(f"unknown basis {value!r}")


def set_memory_budget(terms: int) -> int:
    """Set the global term budget; returns the previous value."""
    global MEMORY_BUDGET
    if terms < 1:
        raise ValueError("budget must be positive")
    old, MEMORY_BUDGET = MEMORY_BUDGET, int(terms)
    return old


def _check_budget(terms: int, what: str) -> None:
    if terms > MEMORY_BUDGET:
        raise ResourceBudgetError(
            f"{what} needs {terms} terms, over the budget of {MEMORY_BUDGET}"
        )


def _check_shape(n: int, m: int) -> None:
    if n < 1 or m < 2:
        raise InvalidDimensionError(f"need n >= 1 and m >= 2, got n={n}, m={m}")
    if m**n >= 2**62:
        raise InvalidDimensionError(f"m**n = {m}**{n} does not fit in a 64-bit key")


def _radix(n: int, m: int) -> np.ndarray:
    return m ** np.arange(n, dtype=np.int64)


def encode(digits, m: int) -> np.ndarray:
    digits = np.atleast_2d(np.asarray(digits, dtype=np.int64))
    return digits @ _radix(digits.shape[1], m)


def decode(keys, n: int, m: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    return (keys[:, None] // _radix(n, m)[None, :]) % m


def _merge(keys: np.ndarray, amps: np.ndarray, renormalize: bool = True):
    """Sum duplicate keys, drop amplitudes below the pruning threshold."""
    uniq, inverse = np.unique(keys, return_inverse=True)
    re = np.bincount(inverse, weights=amps.real, minlength=len(uniq))
    im = np.bincount(inverse, weights=amps.imag, minlength=len(uniq))
    total = re + 1j * im
    keep = np.abs(total) >= PRUNE_THRESHOLD
    uniq, total = uniq[keep], total[keep]
    if renormalize and len(total):
        total = total / np.sqrt(np.sum(np.abs(total) ** 2))
    return uniq, total


class SparseState:
    """Normalized pure state of ``n`` particles with ``m`` levels each.

    Instances are treated as immutable; every operation returns a new state.
    """

    __slots__ = ("n", "m", "keys", "amps")

    def __init__(self, n: int, m: int, keys, amps, *, check: bool = True):
        _check_shape(n, m)
        self.n = int(n)
        self.m = int(m)
        keys = np.asarray(keys, dtype=np.int64).reshape(-1)
        amps = np.asarray(amps, dtype=np.complex128).reshape(-1)
        if keys.shape != amps.shape:
            raise ValueError("keys and amplitudes differ in length")
        if check:
            if not np.all(np.isfinite(amps)):
                raise NormalizationError("amplitudes must be finite")
            if keys.size and (keys.min() < 0 or keys.max() >= m**n):
                raise InvalidDimensionError("basis key out of range")
            keys, amps = _merge(keys, amps, renormalize=False)
        self.keys = keys
        self.amps = amps
        self.keys.flags.writeable = False
        self.amps.flags.writeable = False

    # construction -------------------------------------------------------

    @classmethod
    def from_terms(cls, n: int, m: int, terms, *, normalize: bool = False) -> "SparseState":
        """Build from a mapping or iterable of ``(digits, amplitude)`` pairs."""
        if isinstance(terms, Mapping):
            terms = terms.items()
        digits, amps = [], []
        for d, a in terms:
            d = tuple(int(x) for x in d)
            if len(d) != n or any(not 0 <= x < m for x in d):
                raise InvalidDimensionError(f"basis tuple {d} invalid for n={n}, m={m}")
            digits.append(d)
            amps.append(complex(a))
        keys = encode(digits, m) if digits else np.zeros(0, dtype=np.int64)
        state = cls(n, m, keys, amps)
        return state.normalized() if normalize else state

    @classmethod
    def from_dense(cls, vector, n: int, m: int, *, normalize: bool = False) -> "SparseState":
        vector = np.asarray(vector, dtype=np.complex128).reshape(-1)
        if vector.size != m**n:
            raise InvalidDimensionError(f"dense vector of size {vector.size} is not {m}**{n}")
        keys = np.flatnonzero(np.abs(vector) >= PRUNE_THRESHOLD)
        state = cls(n, m, keys, vector[keys])
        return state.normalized() if normalize else state

    # views --------------------------------------------------------------

    @property
    def digits(self) -> np.ndarray:
        """``(K, n)`` array of the stored basis tuples."""
        return decode(self.keys, self.n, self.m)

    def __len__(self) -> int:
        return int(self.keys.size)

    def __repr__(self) -> str:
        return f"SparseState(n={self.n}, m={self.m}, terms={len(self)})"

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amps) ** 2)))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(float(np.sum(np.abs(self.amps) ** 2)) - 1.0) <= tol

    def normalized(self) -> "SparseState":
        nrm = self.norm()
        if nrm == 0:
            raise NormalizationError("cannot normalize the zero vector")
        return SparseState(self.n, self.m, self.keys, self.amps / nrm, check=False)

    def amplitude(self, digits: Sequence[int]) -> complex:
        key = int(encode([digits], self.m)[0])
        pos = np.searchsorted(self.keys, key)
        if pos < len(self.keys) and self.keys[pos] == key:
            return complex(self.amps[pos])
        return 0j

    def to_dict(self) -> dict[tuple[int, ...], complex]:
        return {tuple(int(x) for x in d): complex(a) for d, a in zip(self.digits, self.amps)}

    def to_dense(self) -> np.ndarray:
        _check_budget(self.m**self.n, "dense vector")
        out = np.zeros(self.m**self.n, dtype=np.complex128)
        out[self.keys] = self.amps
        return out

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def allclose(self, other: "SparseState", tol: float = NORM_TOL) -> bool:
        """Phase-sensitive equality within ``tol`` in 2-norm."""
        return distance(self, other) < tol

    def scaled(self, factor: complex) -> "SparseState":
        return SparseState(self.n, self.m, self.keys, self.amps * factor, check=False)

    # serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "terms": [
                {"digits": [int(x) for x in d], "re": float(a.real), "im": float(a.imag)}
                for d, a in zip(self.digits, self.amps)
            ],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SparseState":
        try:
            n, m = int(data["n"]), int(data["m"])
            terms = [(t["digits"], complex(t["re"], t["im"])) for t in data["terms"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed state dump: {exc}") from None
        return cls.from_terms(n, m, terms)


def _require_normalized(state: SparseState) -> None:
    if not state.is_normalized():
        raise NormalizationError(f"state norm^2 {state.norm() ** 2!r} differs from 1")


def distance(a: SparseState, b: SparseState) -> float:
    """Euclidean distance ``||a - b||`` between two states of equal shape."""
    _same_shape(a, b)
    keys = np.concatenate([a.keys, b.keys])
    amps = np.concatenate([a.amps, -b.amps])
    uniq, inverse = np.unique(keys, return_inverse=True)
    re = np.bincount(inverse, weights=amps.real, minlength=len(uniq))
    im = np.bincount(inverse, weights=amps.imag, minlength=len(uniq))
    return float(np.sqrt(np.sum(re**2 + im**2)))


def _same_shape(a: SparseState, b: SparseState) -> None:
    if (a.n, a.m) != (b.n, b.m):
        raise InvalidDimensionError(f"shape mismatch: ({a.n},{a.m}) vs ({b.n},{b.m})")


def inner_product(a: SparseState, b: SparseState) -> complex:
    """``<a|b>`` computed over the intersection of the two supports."""
    _same_shape(a, b)
    _, ia, ib = np.intersect1d(a.keys, b.keys, assume_unique=True, return_indices=True)
    return complex(np.sum(np.conj(a.amps[ia]) * b.amps[ib]))


# local unitaries ---------------------------------------------------------------


def fourier_matrix(m: int) -> np.ndarray:
    """Discrete Fourier transform with ``entries[k, j] = exp(2 pi i j k / m) / sqrt(m)``."""
    if m < 2:
        raise InvalidDimensionError(f"Fourier matrix needs m >= 2, got {m}")
    k = np.arange(m)
    return np.exp(2j * np.pi * np.outer(k, k) / m) / np.sqrt(m)


def as_unitary(U, m: int | None = None, tol: float = UNITARY_TOL) -> np.ndarray:
    U = np.asarray(U, dtype=np.complex128)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise InvalidDimensionError(f"unitary must be square, got shape {U.shape}")
    if m is not None and U.shape[0] != m:
        raise InvalidDimensionError(f"unitary of size {U.shape[0]} applied to {m}-level particle")
    if not np.all(np.isfinite(U)):
        raise NormalizationError("unitary has non-finite entries")
    err = np.max(np.abs(U @ U.conj().T - np.eye(U.shape[0])))
    if err > tol:
        raise NormalizationError(f"matrix is not unitary (max |UU^+ - I| = {err:.3g})")
    return U


def apply_local_unitary(state: SparseState, U, particle: int) -> SparseState:
    """Apply the single-particle unitary ``U`` to tensor factor ``particle``."""
    n, m = state.n, state.m
    if not 0 <= particle < n:
        raise InvalidDimensionError(f"particle {particle} out of range for n={n}")
    U = as_unitary(U, m)
    _check_budget(len(state) * m, "unitary expansion")
    weight = m**particle
    old = (state.keys // weight) % m
    base = state.keys - old * weight
    new_keys = (base[:, None] + np.arange(m, dtype=np.int64)[None, :] * weight).ravel()
    new_amps = (U[:, old].T * state.amps[:, None]).ravel()
    keys, amps = _merge(new_keys, new_amps)
    return SparseState(n, m, keys, amps, check=False)


def apply_to_particles(state: SparseState, U, particles: Iterable[int] | None = None) -> SparseState:
    """Apply ``U`` to each listed particle (all particles by default)."""
    if particles is None:
        particles = range(state.n)
    for p in particles:
        state = apply_local_unitary(state, U, p)
    return state


def to_basis_frame(state: SparseState, basis: Basis, particles=None) -> SparseState:
    """Amplitudes ``<j|psi>`` in the requested basis, keyed by outcome labels."""
    if Basis.parse(basis) is Basis.COMPUTATIONAL:
        return state
    return apply_to_particles(state, fourier_matrix(state.m).conj().T, particles)


# measurement -------------------------------------------------------------------


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    probs = probs / probs.sum()
    return int(rng.choice(len(probs), p=probs))


def measure_all(state: SparseState, basis, rng: np.random.Generator):
    """Measure every particle in ``basis``.

    Returns the outcome tuple and the collapsed product state, written in the
    computational frame.
    """
    basis = Basis.parse(basis)
    _require_normalized(state)
    frame = to_basis_frame(state, basis)
    idx = _sample(rng, frame.probabilities())
    outcome = tuple(int(x) for x in decode(frame.keys[idx : idx + 1], state.n, state.m)[0])
    collapsed = basis_state(outcome, state.m)
    if basis is Basis.FOURIER:
        collapsed = apply_to_particles(collapsed, fourier_matrix(state.m))
    return outcome, collapsed


def measure_particle(state: SparseState, particle: int, basis, rng: np.random.Generator):
    """Measure one particle; returns ``(outcome, collapsed_state)``."""
    basis = Basis.parse(basis)
    _require_normalized(state)
    if not 0 <= particle < state.n:
        raise InvalidDimensionError(f"particle {particle} out of range for n={state.n}")
    m = state.m
    frame = to_basis_frame(state, basis, [particle])
    digit = (frame.keys // m**particle) % m
    marginal = np.bincount(digit, weights=frame.probabilities(), minlength=m)
    outcome = _sample(rng, marginal)
    keep = digit == outcome
    amps = frame.amps[keep]
    amps = amps / np.sqrt(np.sum(np.abs(amps) ** 2))
    collapsed = SparseState(state.n, m, frame.keys[keep], amps, check=False)
    if basis is Basis.FOURIER:
        collapsed = apply_local_unitary(collapsed, fourier_matrix(m), particle)
    return outcome, collapsed


# named states ------------------------------------------------------------------


def basis_state(digits: Sequence[int], m: int) -> SparseState:
    digits = [int(d) for d in digits]
    return SparseState.from_terms(len(digits), m, [(digits, 1.0)])


def ghz_state(n: int, m: int) -> SparseState:
    """``(1/sqrt m) sum_j |j...j>`` in the computational frame."""
    _check_shape(n, m)
    keys = encode([[j] * n for j in range(m)], m)
    return SparseState(n, m, keys, np.full(m, 1 / np.sqrt(m)))


def make_chi_state(n: int, m: int) -> SparseState:
    """Uniform superposition over the tuples whose digit sum is 0 mod ``m``."""
    if n < 2 or m < 2:
        raise InvalidDimensionError(f"chi state needs n >= 2 and m >= 2, got n={n}, m={m}")
    _check_shape(n, m)
    size = m ** (n - 1)
    _check_budget(size, f"chi state (n={n}, m={m})")
    free = decode(np.arange(size, dtype=np.int64), n - 1, m)
    last = (-free.sum(axis=1)) % m
    keys = encode(np.column_stack([free, last]), m)
    order = np.argsort(keys)
    return SparseState(n, m, keys[order], np.full(size, m ** (-(n - 1) / 2)), check=False)


def inverse_number(seq: Sequence[int]) -> int:
    """Number of pairs ``i < j`` with ``seq[i] > seq[j]``."""
    seq = [int(s) for s in seq]
    if len(set(seq)) != len(seq):
        raise InvalidPermutationError(f"sequence {seq} has repeated entries")
    return sum(1 for i, j in itertools.combinations(range(len(seq)), 2) if seq[i] > seq[j])


def permutation_sign(seq: Sequence[int]) -> int:
    return -1 if inverse_number(seq) % 2 else 1


def is_permutation(seq: Sequence[int], n: int | None = None) -> bool:
    n = len(seq) if n is None else n
    return sorted(int(s) for s in seq) == list(range(n))


def make_singlet_state(n: int) -> SparseState:
    """Totally antisymmetric state of ``n`` particles with ``n`` levels."""
    if n < 2:
        raise InvalidDimensionError(f"singlet state needs n >= 2, got {n}")
    _check_shape(n, n)
    _check_budget(math.factorial(n), f"singlet state (n={n})")
    perms = list(itertools.permutations(range(n)))
    signs = np.array([permutation_sign(p) for p in perms], dtype=float)
    return SparseState(n, n, encode(perms, n), signs / math.sqrt(math.factorial(n)))


# serialization helpers ---------------------------------------------------------


def dump_state(state: SparseState) -> dict:
    return state.to_json_dict()


def load_state(data: Mapping) -> SparseState:
    return SparseState.from_json_dict(data)
