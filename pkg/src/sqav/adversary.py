"""Attack injection, detection statistics and coalition-leakage analysis.

Three families are covered:

* an outside eavesdropper who disturbs ``x`` particles of one voter's sequence
  (escape requires every disturbed copy to dodge the spot checks),
* a single distributed copy replaced by an arbitrary state ``phi_e``,
* dishonest-voter coalitions entangling an ancilla with the honest particles,
  analysed exactly at small ``n`` by comparing conditional ancilla states.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qstate
from .errors import ConfigurationError, InvalidDimensionError
from .protocol import (
    ProtocolConfig,
    cast_vote,
    distribute_chi,
    security_test_chi,
    select_test_rows,
    tally,
    verify_own_vote,
)
from .qstate import Basis, SparseState
from .rng import as_rng
from .theorems import check_theorem1

CSV_COLUMNS = ("attack", "n", "m", "delta", "x", "predicted", "measured", "stderr", "trials")


@dataclass
class DetectionReport:
    predicted_pass: float
    measured_pass: float
    stderr: float
    trials: int
    per_basis: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def z_score(self) -> float:
        diff = self.measured_pass - self.predicted_pass
        if self.stderr == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / self.stderr

    def agrees(self, sigmas: float = 3.0) -> bool:
        return abs(self.z_score()) <= sigmas


def _binomial_stderr(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials) if trials else math.inf


# outside eavesdropper ------------------------------------------------------------


def pass_probability_intercept(n: int, delta0: int, x: int) -> Fraction:
    """Chance that all ``x`` disturbed copies land among the ``n`` untested ones."""
    total = n + n * delta0
    if not 1 <= x <= total:
        raise ValueError(f"x must lie in [1, {total}], got {x}")
    return Fraction(math.comb(n, x), math.comb(total, x))


def intercept_pass_probabilities(n: int, m: int, voter: int = 0, model: str = "measure_resend") -> dict:
    """Exact pass probability of each test basis on a copy Eve has measured and resent.

    Averages over Eve's measurement outcome.
    """
    basis = Basis.COMPUTATIONAL if model == "measure_resend" else Basis.FOURIER
    chi = qstate.make_chi_state(n, m)
    frame = qstate.to_basis_frame(chi, basis, [voter])
    digit = (frame.keys // m**voter) % m
    probs = np.bincount(digit, weights=frame.probabilities(), minlength=m)
    p_c = p_f = 0.0
    for j in range(m):
        if probs[j] <= 0:
            continue
        keep = digit == j
        post = SparseState(n, m, frame.keys[keep], frame.amps[keep], check=False).normalized()
        if basis is Basis.FOURIER:
            post = qstate.apply_local_unitary(post, qstate.fourier_matrix(m), voter)
        rep = check_theorem1(post)
        p_c += probs[j] * (1 - rep.epsilon_c)
        p_f += probs[j] * (1 - rep.epsilon_f)
    return {"p_c": float(p_c), "p_f": float(p_f)}


def predicted_intercept_escape(n: int, delta0: int, x: int, per_test_pass: float) -> float:
    """Exact escape probability: hypergeometric number of tested disturbed copies."""
    total, tested = n + n * delta0, n * delta0
    if x == 0:
        return 1.0
    out = 0.0
    for h in range(0, min(x, tested) + 1):
        ways = math.comb(x, h) * math.comb(total - x, tested - h)
        out += ways / math.comb(total, tested) * per_test_pass**h
    return out


def _tested_disturbed_counts(n, delta0, x, trials, rng, method):
    total, tested = n + n * delta0, n * delta0
    if method == "vectorized":
        # Sequential uniform draws without replacement by each checker give a
        # uniformly random ordered subset, i.e. a prefix of a random permutation.
        order = rng.permuted(np.tile(np.arange(total), (trials, 1)), axis=1)
        eve = rng.permuted(np.tile(np.arange(total), (trials, 1)), axis=1)[:, :x]
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, np.arange(total)[None, :].repeat(trials, 0), axis=1)
        return (np.take_along_axis(rank, eve, axis=1) < tested).sum(axis=1)
    if method == "sequential":
        counts = np.empty(trials, dtype=np.int64)
        for t in range(trials):
            disturbed = set(int(r) for r in rng.choice(total, size=x, replace=False))
            untested = list(range(total))
            hit = 0
            for _checker in range(n):
                rows = select_test_rows(untested, delta0, rng)
                hit += len(disturbed.intersection(rows))
                untested = [r for r in untested if r not in rows]
            counts[t] = hit
        return counts
    raise ValueError(f"unknown method {method!r}")


def simulate_intercept(
    config: ProtocolConfig,
    x: int,
    trials: int,
    rng=None,
    *,
    voter: int = 1,
    model: str = "measure_resend",
    method: str = "vectorized",
) -> DetectionReport:
    """Monte Carlo of Eve disturbing ``x`` copies in one voter's column.

    ``measured_pass`` is the frequency of the all-disturbed-copies-untested
    event, compared with :func:`pass_probability_intercept`. A disturbed copy
    that is tested passes with the exact per-basis probability of the
    disturbance model; the resulting escape rate is in ``extra``.
    """
    rng = as_rng(rng)
    n, m, delta0 = config.n, config.m, config.delta0
    per_basis = intercept_pass_probabilities(n, m, voter % n, model)
    q = 0.5 * (per_basis["p_c"] + per_basis["p_f"])
    if x == 0:
        return DetectionReport(1.0, 1.0, 0.0, trials, per_basis,
                               {"predicted_escape": 1.0, "measured_escape": 1.0, "escape_stderr": 0.0})
    predicted = float(pass_probability_intercept(n, delta0, x))
    hits = _tested_disturbed_counts(n, delta0, x, trials, rng, method)
    measured = float(np.mean(hits == 0))
    # each tested disturbed copy: fair-coin basis, then pass with that basis' probability
    max_h = int(hits.max()) if len(hits) else 0
    fourier = rng.random((trials, max(max_h, 1))) < 0.5
    ok = rng.random((trials, max(max_h, 1))) < np.where(fourier, per_basis["p_f"], per_basis["p_c"])
    live = np.arange(max(max_h, 1))[None, :] < hits[:, None]
    escaped = np.all(ok | ~live, axis=1)
    pred_escape = predicted_intercept_escape(n, delta0, x, q)
    return DetectionReport(
        predicted,
        measured,
        _binomial_stderr(predicted, trials),
        trials,
        per_basis,
        {
            "predicted_escape": pred_escape,
            "measured_escape": float(np.mean(escaped)),
            "escape_stderr": _binomial_stderr(pred_escape, trials),
        },
    )


# replaced copy -------------------------------------------------------------------


def replacement_pass_probabilities(phi_e: SparseState) -> tuple[float, float]:
    """``(P_C, P_F)``: zero-sum mass, and summed overlap with the Fourier GHZ kets."""
    n, m = phi_e.n, phi_e.m
    p_c = float(np.sum(phi_e.probabilities()[phi_e.digits.sum(axis=1) % m == 0]))
    F = qstate.fourier_matrix(m)
    p_f = 0.0
    for j in range(m):
        ket = qstate.apply_to_particles(qstate.basis_state([j] * n, m), F)
        p_f += abs(qstate.inner_product(phi_e, ket)) ** 2
    return min(p_c, 1.0), min(p_f, 1.0)


def detection_stats_replacement(
    phi_e: SparseState,
    n: int,
    m: int,
    delta0: int,
    trials: int = 10_000,
    rng=None,
    *,
    row: int = 0,
) -> DetectionReport:
    """Exact pass probabilities for a replaced copy plus a protocol Monte Carlo.

    ``predicted_pass`` is the per-test pass probability ``(P_C + P_F)/2``;
    ``measured_pass`` is its frequency over the runs in which the replaced copy
    was actually tested. ``extra`` carries two escape predictions: the
    closed form that treats all ``n*delta0`` tests as probing the bad copy,
    and the protocol-faithful one where that copy is tested at most once.
    """
    if (phi_e.n, phi_e.m) != (n, m):
        raise InvalidDimensionError(f"phi_e has shape ({phi_e.n},{phi_e.m}), expected ({n},{m})")
    if not phi_e.is_normalized():
        raise qstate.NormalizationError("phi_e must be normalized")
    config = ProtocolConfig(n, m, delta0=delta0)
    total, tested_rows = n + n * delta0, n * delta0
    if not 0 <= row < total:
        raise ConfigurationError(f"row {row} outside the {total} copies")
    p_c, p_f = replacement_pass_probabilities(phi_e)
    q = 0.5 * (p_c + p_f)
    extra = {
        "every_test_escape": q ** tested_rows,
        "faithful_escape": 1 - tested_rows / total * (1 - q),
    }
    rng = as_rng(rng)
    tested = passed = escaped = 0
    for _ in range(trials):
        matrix = distribute_chi(config)
        matrix.rows[row] = phi_e
        ok_run = True
        for checker in range(n):
            rec = security_test_chi(matrix, checker, rng)
            if row in rec.rows:
                tested += 1
                passed += row not in rec.failed_rows
            if not rec.passed:
                ok_run = False
                break
        escaped += ok_run
    measured = passed / tested if tested else float("nan")
    if trials:
        extra.update(
            measured_escape=escaped / trials,
            escape_stderr=_binomial_stderr(extra["faithful_escape"], trials),
            runs=trials,
        )
    return DetectionReport(q, measured, _binomial_stderr(q, tested), tested, {"p_c": p_c, "p_f": p_f}, extra)


def escape_sweep(phi_e: SparseState, deltas, trials: int = 0, rng=None) -> list[dict]:
    """Escape probabilities for each ``delta0`` in ``deltas``."""
    rng = as_rng(rng)
    rows = []
    for d in deltas:
        rep = detection_stats_replacement(phi_e, phi_e.n, phi_e.m, d, trials, rng)
        rows.append({"delta0": d, **rep.extra, "per_test": rep.predicted_pass})
    return rows


def sweep_csv(rows) -> str:
    """Format sweep rows (dicts keyed by :data:`CSV_COLUMNS`) as CSV text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: r[k] for k in CSV_COLUMNS})
    return buf.getvalue()


# non-reusability ------------------------------------------------------------------


def undetected_double_votes(n: int, m: int, ballots=None) -> list[tuple]:
    """Every double-vote attempt that no honest voter's self-check catches.

    Exhaustive over index permutations, honest vote vectors, attacker, target
    box other than the attacker's own, and extra vote ``v_e != 0``. Returns the
    list of undetected cases (empty when the protocol is non-reusable).
    """
    if ballots is None:
        ballots = np.zeros((n, n), dtype=np.int64)
    ballots = np.asarray(ballots)
    missed = []
    for d in itertools.permutations(range(n)):
        for votes in itertools.product(range(m), repeat=n):
            cols = [cast_vote(ballots[:, k], d[k], votes[k], m) for k in range(n)]
            for attacker in range(n):
                for box in range(n):
                    if box == d[attacker]:
                        continue
                    for extra in range(1, m):
                        tampered = list(cols)
                        tampered[attacker] = cast_vote(cols[attacker], box, extra, m)
                        result = tally(np.column_stack(tampered), m)
                        honest = [k for k in range(n) if k != attacker]
                        if all(verify_own_vote(result, d[k], votes[k]) for k in honest):
                            missed.append((d, votes, attacker, box, extra))
    return missed


# coalition leakage ----------------------------------------------------------------


def _split(n: int, honest) -> tuple[list[int], list[int]]:
    honest = sorted(int(h) for h in honest)
    if len(set(honest)) != len(honest) or any(not 0 <= h < n for h in honest):
        raise InvalidDimensionError(f"honest positions {honest} invalid for n={n}")
    return honest, [p for p in range(n) if p not in honest]


def _assemble(n, levels, honest, attacker, amp_fn) -> SparseState:
    """Enumerate honest tuples x attacker tuples, placing digits at their positions."""
    if levels**n > qstate.MEMORY_BUDGET:
        raise qstate.ResourceBudgetError(f"collusion state needs {levels}**{n} terms")
    terms = {}
    for t in itertools.product(range(levels), repeat=len(honest)):
        for a in itertools.product(range(levels), repeat=len(attacker)):
            amp = amp_fn(t, a)
            if abs(amp) >= qstate.PRUNE_THRESHOLD:
                digits = [0] * n
                for p, v in zip(honest, t):
                    digits[p] = v
                for p, v in zip(attacker, a):
                    digits[p] = v
                terms[tuple(digits)] = amp
    return SparseState.from_terms(n, levels, terms, normalize=True)


def _attacker_index(a, levels: int) -> int:
    return sum(int(v) * levels**i for i, v in enumerate(a))


def build_ballot_collusion_state(n: int, m: int, honest, phis=None, ancilla_dim: int | None = None) -> SparseState:
    """Honest particles Fourier-correlated with attacker kets ``phis[j]``.

    The attacker system (dishonest particles plus auxiliary) is modelled as the
    ``l = n - len(honest)`` dishonest positions, each an ``m``-level particle,
    so its dimension is ``m**l``. ``phis`` has shape ``(m, m**l)``; by default
    ``phis[j]`` is the attacker basis state with index ``j``.
    """
    honest, attacker = _split(n, honest)
    l = len(attacker)
    if not 1 <= l <= n - 2:
        raise InvalidDimensionError(f"need 1 <= dishonest <= n-2, got {l} of n={n}")
    if n > 4:
        raise InvalidDimensionError("collusion states are limited to n <= 4")
    dim = m**l
    if ancilla_dim is not None and ancilla_dim != dim:
        raise InvalidDimensionError(f"ancilla dimension must equal m**l = {dim}")
    if phis is None:
        phis = np.eye(m, dim, dtype=complex)
    phis = np.asarray(phis, dtype=complex)
    if phis.shape != (m, dim):
        raise InvalidDimensionError(f"phis must have shape ({m}, {dim})")
    F = qstate.fourier_matrix(m)

    def amp(t, a):
        idx = _attacker_index(a, m)
        return sum(np.prod([F[k, j] for k in t]) * phis[j, idx] for j in range(m)) / np.sqrt(m)

    return _assemble(n, m, honest, attacker, amp)


def conditional_attacker_states(state: SparseState, honest) -> dict:
    """Unnormalized attacker vector for every honest computational outcome tuple."""
    honest, attacker = _split(state.n, honest)
    levels = state.m
    out = {}
    for t in itertools.product(range(levels), repeat=len(honest)):
        out[t] = np.zeros(levels ** len(attacker), dtype=complex)
    for d, a in zip(state.digits, state.amps):
        t = tuple(int(d[p]) for p in honest)
        out[t][_attacker_index([d[p] for p in attacker], levels)] += a
    return out


def ray_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_theta || a - e^{i theta} b ||``, computed without cancellation."""
    overlap = np.vdot(b, a)
    phase = np.exp(1j * np.angle(overlap)) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def _class_distances(vectors: dict, key, within_dist, across_dist=ray_distance):
    groups: dict = {}
    for t, v in vectors.items():
        groups.setdefault(key(t), []).append(t)
    within = 0.0
    for members in groups.values():
        for s, t in itertools.combinations(members, 2):
            within = max(within, within_dist(vectors[s], vectors[t]))
    across = math.inf
    for g1, g2 in itertools.combinations(list(groups), 2):
        for s in groups[g1]:
            for t in groups[g2]:
                across = min(across, across_dist(vectors[s], vectors[t]))
    return groups, within, across


def _honest_mass(state: SparseState, honest, basis: Basis, bad) -> float:
    frame = qstate.to_basis_frame(state, basis, honest)
    digits = frame.digits[:, honest]
    mask = np.array([bad(tuple(row)) for row in digits.tolist()], dtype=bool)
    return float(np.sum(frame.probabilities()[mask])) if len(mask) else 0.0


@dataclass
class LeakageReport:
    classes: dict  # class label -> honest outcome tuples
    within_class_max: float
    across_class_min: float
    pass_probability: dict  # basis -> probability the honest outcomes pass the test
    extra: dict = field(default_factory=dict)

    def classification(self, tol: float = 1e-10) -> str:
        """``"class"``: attacker learns exactly the class label; ``"finer"``: more than that."""
        if self.within_class_max > tol:
            return "finer"
        if self.across_class_min <= tol:
            return "coarser"
        return "class"


def analyze_ballot_leakage(state: SparseState, honest) -> LeakageReport:
    """Compare attacker conditional states inside and across honest digit-sum classes."""
    honest = sorted(honest)
    m = state.m
    vectors = conditional_attacker_states(state, honest)
    exact = lambda a, b: float(np.linalg.norm(a - b))  # noqa: E731
    groups, within, across = _class_distances(vectors, lambda t: sum(t) % m, exact)
    fourier_pass = 1 - _honest_mass(state, honest, Basis.FOURIER, lambda t: len(set(t)) > 1)
    return LeakageReport(groups, within, across, {"fourier": fourier_pass})


def combination_classes(n: int, size: int) -> list[tuple]:
    return list(itertools.combinations(range(n), size))


def default_index_ancilla(n: int, l: int, within_phases=None) -> dict:
    """Orthogonal ancilla per combination class: ``u_S = e_{class(S)}``.

    ``within_phases`` (``S -> phase``) makes the kets inside a class unequal.
    """
    classes = combination_classes(n, n - l)
    dim = n**l
    if len(classes) > dim:
        raise InvalidDimensionError(f"{len(classes)} classes do not fit an ancilla of dimension {dim}")
    u = {}
    for ci, w in enumerate(classes):
        for S in itertools.permutations(w):
            vec = np.zeros(dim, dtype=complex)
            vec[ci] = 1.0
            if within_phases is not None:
                vec = vec * within_phases.get(S, 1.0)
            u[S] = vec
    return u


def build_index_collusion_state(n: int, l: int, honest=None, u_states=None) -> SparseState:
    """Honest singlet-type Fourier state entangled with attacker kets ``u_S``.

    Honest particles (default ``0 .. n-l-1``) carry ``F|s>`` for each
    ``(n-l)``-permutation ``S`` with sign ``(-1)^tau(S)``; the ``l`` dishonest
    positions carry ``u_S`` (dimension ``n**l``).
    """
    if not 2 <= n <= 4 or not 0 <= l <= min(2, n - 1):
        raise InvalidDimensionError(f"index collusion supported for n <= 4, l <= 2 (got n={n}, l={l})")
    honest = list(range(n - l)) if honest is None else honest
    honest, attacker = _split(n, honest)
    if len(attacker) != l:
        raise InvalidDimensionError("honest positions do not match l")
    u = default_index_ancilla(n, l) if u_states is None else u_states
    F = qstate.fourier_matrix(n)
    perms = list(itertools.permutations(range(n), n - l))
    signs = {S: qstate.permutation_sign(S) for S in perms}

    def amp(t, a):
        idx = _attacker_index(a, n)
        return sum(signs[S] * np.prod([F[tk, sk] for tk, sk in zip(t, S)]) * u[S][idx] for S in perms)

    return _assemble(n, n, honest, attacker, amp)


def analyze_index_leakage(n: int, l: int, u_states=None, honest=None) -> LeakageReport:
    """Build the index-collusion state and measure what the attacker can learn.

    Reports the honest repeated-outcome mass in each basis (a failed
    distinctness test), and conditional-state distances inside and across
    combination classes. Conditional states within a class agree up to the
    sign of the relative permutation, so distances are phase-aligned.
    """
    state = build_index_collusion_state(n, l, honest, u_states)
    honest = list(range(n - l)) if honest is None else sorted(honest)
    repeated = lambda t: len(set(t)) < len(t)  # noqa: E731
    q_mass = _honest_mass(state, honest, Basis.COMPUTATIONAL, repeated)
    f_mass = _honest_mass(state, honest, Basis.FOURIER, repeated)
    vectors = {t: v for t, v in conditional_attacker_states(state, honest).items() if not repeated(t)}
    groups, within, across = _class_distances(vectors, lambda t: tuple(sorted(t)), ray_distance)
    extra = {"q_mass": q_mass, "fourier_repeat_mass": f_mass}
    if l == 0:
        extra["singlet_fidelity"] = abs(qstate.inner_product(qstate.make_singlet_state(n), state))
    report = LeakageReport(groups, within, across,
                           {"computational": 1 - q_mass, "fourier": 1 - f_mass}, extra)
    report.extra["state"] = state
    return report
