"""Self-tallying anonymous voting: ballot boxes, index numbers, casting and tallying.

The run is split into the three protocol steps:

1. ``n + n*delta0`` copies of the zero-sum state are distributed column-wise,
   every voter spot-checks ``delta0`` copies, and the ``n`` untouched copies are
   measured to give the ballot matrix ``r[j, k]`` (rows sum to 0 mod m).
2. ``1 + n*delta1`` singlet copies are distributed and spot-checked the same
   way; the last copy gives each voter a distinct index ``d[k]``.
3. Voter ``k`` adds its vote to ``r[d[k], k]``, all columns go through a
   collect-then-release broadcast, and anyone sums rows to get the tally.

Quantum randomness (measurement outcomes) comes from a dedicated "nature"
stream; each voter's own choices (test rows, bases) come from that voter's
stream. All streams derive from the config seed.
"""
from __future__ import annotations

import functools
import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import attacks as atk
from . import qstate
from .errors import BroadcastTimeout, ConfigurationError, SequencingError
from .qstate import Basis, SparseState
from .rng import DISTRIBUTOR, EVE, NATURE, VOTER, check_seed, make_rng

TRANSCRIPT_SCHEMA = "sqav.transcript/1"

chi_state = functools.lru_cache(maxsize=64)(qstate.make_chi_state)
singlet_state = functools.lru_cache(maxsize=16)(qstate.make_singlet_state)


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    m: int
    delta0: int = 1
    delta1: int = 1
    seed: int = 0
    distributor: int | None = 0  # None: drawn at random from the seed

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError(f"need at least 2 voters, got n={self.n}")
        if self.m < 2:
            raise ConfigurationError(f"need at least 2 candidates, got m={self.m}")
        if self.delta0 < 1 or self.delta1 < 1:
            raise ConfigurationError("security strengths delta0, delta1 must be >= 1")
        try:
            check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from None
        if self.distributor is not None and not 0 <= self.distributor < self.n:
            raise ConfigurationError(f"distributor {self.distributor} out of range")


class ParticleMatrix:
    """Copies of a resource state; column ``k`` is the particle sequence of owner ``owners[k]``.

    ``rows[j]`` is the current (possibly collapsed) joint state of copy ``j``.
    Rows used by a security test are marked consumed.
    """

    def __init__(self, copies: Sequence[SparseState], owners: Sequence[int], step: str, delta: int):
        self.rows = list(copies)
        self.owners = list(owners)
        self.step = step
        self.delta = delta
        self.consumed: set[int] = set()
        self.checked_by: list[int] = []
        self.failed = False
        self.finished = False

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        return len(self.owners)

    @property
    def parties(self) -> list[int]:
        return sorted(set(self.owners))

    def untested(self) -> list[int]:
        return [j for j in range(self.n_rows) if j not in self.consumed]

    def column(self, k: int) -> list[tuple[int, int]]:
        """Handles ``(row, column)`` of every particle held in column ``k``."""
        return [(j, k) for j in range(self.n_rows)]

    def columns_of(self, party: int) -> list[int]:
        return [k for k, p in enumerate(self.owners) if p == party]

    def measure_row(self, row: int, basis: Basis, nature: np.random.Generator) -> tuple[int, ...]:
        """Every column holder measures their particle of copy ``row`` in ``basis``."""
        state = self.rows[row]
        outcomes = []
        for k in range(self.n_cols):
            out, state = qstate.measure_particle(state, k, basis, nature)
            outcomes.append(out)
        self.rows[row] = state
        return tuple(outcomes)


@dataclass
class TestRecord:
    step: str
    checker: int
    rows: list
    bases: list
    outcomes: list
    passed: bool
    failed_rows: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bases"] = [Basis.parse(b).value for b in self.bases]
        d["outcomes"] = [list(o) for o in self.outcomes]
        return d


def _distribute(state: SparseState, copies: int, owners: Sequence[int], step: str, delta: int) -> ParticleMatrix:
    return ParticleMatrix([state] * copies, owners, step, delta)


def choose_distributor(config: ProtocolConfig) -> int:
    if config.distributor is not None:
        return config.distributor
    return int(make_rng(config.seed, DISTRIBUTOR).integers(config.n))


def distribute_chi(config: ProtocolConfig, rng=None) -> ParticleMatrix:
    """``n + n*delta0`` zero-sum copies, column ``k`` belonging to voter ``k``."""
    n = config.n
    return _distribute(chi_state(n, config.m), n + n * config.delta0, range(n), "step1", config.delta0)


def distribute_singlet(config: ProtocolConfig, rng=None) -> ParticleMatrix:
    """``1 + n*delta1`` singlet copies, column ``k`` belonging to voter ``k``."""
    n = config.n
    return _distribute(singlet_state(n), 1 + n * config.delta1, range(n), "step2", config.delta1)


def chi_condition(basis: Basis, outcomes: Sequence[int], m: int) -> bool:
    if basis is Basis.COMPUTATIONAL:
        return sum(outcomes) % m == 0
    return len(set(outcomes)) == 1


def singlet_condition(basis: Basis, outcomes: Sequence[int], m: int) -> bool:
    return qstate.is_permutation(outcomes)


def select_test_rows(available: Sequence[int], delta: int, rng: np.random.Generator) -> list[int]:
    """``delta`` rows drawn uniformly without replacement, each with a fair-coin basis."""
    if len(available) < delta:
        raise ConfigurationError(f"only {len(available)} untested rows left, need {delta}")
    picks = rng.choice(len(available), size=delta, replace=False)
    return [int(available[i]) for i in picks]


def run_security_test(
    matrix: ParticleMatrix,
    checker: int,
    rng: np.random.Generator,
    condition: Callable,
    nature: np.random.Generator | None = None,
) -> TestRecord:
    nature = rng if nature is None else nature
    rows = select_test_rows(matrix.untested(), matrix.delta, rng)
    bases = [Basis.FOURIER if rng.random() < 0.5 else Basis.COMPUTATIONAL for _ in rows]
    m = matrix.rows[rows[0]].m if rows else 0
    outcomes, failed = [], []
    for row, basis in zip(rows, bases):
        out = matrix.measure_row(row, basis, nature)
        outcomes.append(out)
        if not condition(basis, out, m):
            failed.append(row)
        matrix.consumed.add(row)
    matrix.checked_by.append(checker)
    passed = not failed
    matrix.failed = matrix.failed or not passed
    return TestRecord(matrix.step, checker, rows, bases, outcomes, passed, failed)


def security_test_chi(matrix: ParticleMatrix, checker: int, rng, nature=None) -> TestRecord:
    """One checker's spot check of the zero-sum copies (sum test or all-equal test)."""
    return run_security_test(matrix, checker, rng, chi_condition, nature)


def security_test_singlet(matrix: ParticleMatrix, checker: int, rng, nature=None) -> TestRecord:
    """One checker's spot check of the singlet copies (outcomes must be all distinct)."""
    return run_security_test(matrix, checker, rng, singlet_condition, nature)


def _ready(matrix: ParticleMatrix, remaining: int) -> list[int]:
    if matrix.failed:
        raise SequencingError(f"{matrix.step}: a security test failed; the run must abort")
    if matrix.finished:
        raise SequencingError(f"{matrix.step}: remaining copies were already measured")
    if sorted(set(matrix.checked_by)) != matrix.parties:
        raise SequencingError(f"{matrix.step}: not every party has run its security test")
    rows = matrix.untested()
    if len(rows) != remaining:
        raise SequencingError(f"{matrix.step}: expected {remaining} untested copies, found {len(rows)}")
    return rows


def generate_ballots(matrix: ParticleMatrix, nature: np.random.Generator) -> np.ndarray:
    """Measure every untested copy computationally; row ``j`` is ballot box ``j``."""
    rows = _ready(matrix, matrix.n_cols)
    ballots = np.array([matrix.measure_row(j, Basis.COMPUTATIONAL, nature) for j in rows], dtype=np.int64)
    matrix.finished = True
    return ballots


def generate_indices(matrix: ParticleMatrix, nature: np.random.Generator) -> np.ndarray:
    """Measure the last singlet copy computationally; ``d[k]`` is column ``k``'s box."""
    (row,) = _ready(matrix, 1)
    matrix.finished = True
    return np.array(matrix.measure_row(row, Basis.COMPUTATIONAL, nature), dtype=np.int64)


def check_ballot_matrix(r, m: int) -> np.ndarray:
    r = np.asarray(r, dtype=np.int64)
    if r.ndim != 2 or np.any(r < 0) or np.any(r >= m):
        raise ConfigurationError(f"ballot matrix must be 2-D with entries in Z_{m}")
    if np.any(r.sum(axis=1) % m):
        raise ConfigurationError("ballot matrix rows must sum to 0 mod m")
    return r


def check_index_array(d, n: int) -> np.ndarray:
    d = np.asarray(d, dtype=np.int64)
    if d.shape != (n,) or not qstate.is_permutation(d.tolist()):
        raise ConfigurationError(f"index array must be a permutation of Z_{n}")
    return d


def cast_vote(column, d: int, v: int, m: int) -> np.ndarray:
    """Add vote ``v`` to entry ``d`` of a voter's ballot column, mod ``m``."""
    if not 0 <= v < m:
        raise ValueError(f"vote {v} outside Z_{m}")
    col = np.array(column, dtype=np.int64)
    col[d] = (col[d] + v) % m
    return col


class SimultaneousBroadcast:
    """Collect-then-release channel: nothing is visible until every party has committed."""

    def __init__(self, parties: Sequence[int], log: Callable[..., None] | None = None):
        self.parties = list(parties)
        self._pending: dict[int, np.ndarray] = {}
        self._log = log or (lambda event, **data: None)
        self.released = False

    def commit(self, party: int, column) -> None:
        if self.released:
            raise SequencingError("broadcast already released")
        if party not in self.parties:
            raise ConfigurationError(f"unknown party {party}")
        self._pending[party] = np.array(column, dtype=np.int64)
        self._log("commit", party=party)

    def missing(self) -> list[int]:
        return [p for p in self.parties if p not in self._pending]

    def release(self) -> np.ndarray:
        missing = self.missing()
        if missing:
            self._log("timeout", missing=missing)
            raise BroadcastTimeout(f"no column from parties {missing}")
        self.released = True
        matrix = np.column_stack([self._pending[p] for p in self.parties])
        self._log("release", vote_matrix=matrix.tolist())
        return matrix


def broadcast_votes(columns: Mapping[int, Sequence[int]], parties: Sequence[int] | None = None, log=None) -> np.ndarray:
    """Push every column through a :class:`SimultaneousBroadcast` and return the vote matrix."""
    parties = sorted(columns) if parties is None else list(parties)
    channel = SimultaneousBroadcast(parties, log)
    for party, col in columns.items():
        channel.commit(party, col)
    return channel.release()


@dataclass(frozen=True)
class Tally:
    R: tuple  # per-box sums mod m
    N: tuple  # per-candidate counts


def tally(votes, m: int) -> Tally:
    """Row sums mod ``m`` of the public vote matrix and the per-candidate counts."""
    votes = np.asarray(votes, dtype=np.int64)
    R = tuple(int(x) for x in votes.sum(axis=1) % m)
    counts = Counter(R)
    return Tally(R, tuple(counts.get(i, 0) for i in range(m)))


def verify_own_vote(result: Tally, d: int, v: int) -> bool:
    return result.R[int(d)] == int(v)


@dataclass
class Transcript:
    """Append-only record of a run; ``to_json`` is byte-stable for a given seed."""

    config: dict
    votes: list
    attack: dict | None = None
    events: list = field(default_factory=list)
    ballots: list | None = None
    indices: list | None = None
    vote_matrix: list | None = None
    tally: dict | None = None
    verifications: list | None = None
    abort_reason: str | None = None

    def record(self, event: str, **data) -> None:
        entry = {"seq": len(self.events), "event": event}
        entry.update(_plain(data))
        self.events.append(entry)

    def abort(self, reason: str) -> "Transcript":
        self.abort_reason = reason
        self.record("abort", reason=reason)
        return self

    @property
    def aborted(self) -> bool:
        return self.abort_reason is not None

    def to_dict(self) -> dict:
        d = {"schema": TRANSCRIPT_SCHEMA}
        d.update(_plain(asdict(self)))
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Basis):
        return obj.value
    return obj


def _apply_quantum_attack(matrix: ParticleMatrix, attack, eve: np.random.Generator, transcript: Transcript):
    if isinstance(attack, atk.InterceptSubset) and attack.target == matrix.step:
        x = min(attack.x, matrix.n_rows)
        rows = sorted(int(r) for r in eve.choice(matrix.n_rows, size=x, replace=False))
        basis = Basis.COMPUTATIONAL if attack.model == "measure_resend" else Basis.FOURIER
        for j in rows:
            _, matrix.rows[j] = qstate.measure_particle(matrix.rows[j], attack.voter, basis, eve)
        transcript.record("attack_intercept", step=matrix.step, voter=attack.voter, rows=rows)
    elif isinstance(attack, atk.ReplaceCopy) and attack.target == matrix.step:
        if attack.row >= matrix.n_rows:
            raise ConfigurationError(f"replacement row {attack.row} >= {matrix.n_rows} copies")
        matrix.rows[attack.row] = attack.state
        transcript.record("attack_replace", step=matrix.step, row=attack.row)


def _run_step(matrix, transcript, test, finish, voter_rngs, nature, attack, eve, order):
    _apply_quantum_attack(matrix, attack, eve, transcript)
    for checker in order:
        rec = test(matrix, checker, voter_rngs[checker], nature)
        transcript.record("security_test", **rec.to_dict())
        if not rec.passed:
            return None, f"{matrix.step} security test failed: checker {checker}, rows {rec.failed_rows}"
    return finish(matrix, nature), None


def run_full_protocol(
    config: ProtocolConfig,
    votes: Sequence[int],
    attack=None,
    *,
    ballots=None,
    indices=None,
) -> Transcript:
    """Execute steps 1-3 and return the transcript.

    ``ballots`` and ``indices`` inject fixed step-1 / step-2 results (their
    quantum steps and tests are then skipped). A failed test, a broadcast
    timeout or a failed self-verification aborts the run; the reason is
    stored in ``Transcript.abort_reason``.
    """
    n, m = config.n, config.m
    votes = [int(v) for v in votes]
    if len(votes) != n:
        raise ConfigurationError(f"expected {n} votes, got {len(votes)}")
    if any(not 0 <= v < m for v in votes):
        raise ConfigurationError(f"votes must lie in Z_{m}")
    if attack is not None:
        atk.validate_attack(attack, n, m)

    transcript = Transcript(asdict(config), votes, atk.attack_to_dict(attack))
    nature = make_rng(config.seed, NATURE)
    eve = make_rng(config.seed, EVE)
    voter_rngs = [make_rng(config.seed, VOTER, k) for k in range(n)]
    order = list(range(n))
    distributor = choose_distributor(config)

    # step 1
    if ballots is None:
        matrix = distribute_chi(config)
        transcript.record("distribute", step="step1", distributor=distributor,
                          copies=matrix.n_rows, voters=n)
        ballots, reason = _run_step(matrix, transcript, security_test_chi, generate_ballots,
                                    voter_rngs, nature, attack, eve, order)
        if reason:
            return transcript.abort(reason)
        transcript.record("ballots_generated", step="step1")
    else:
        ballots = check_ballot_matrix(ballots, m)
        if ballots.shape != (n, n):
            raise ConfigurationError(f"ballot fixture must be {n}x{n}")
        transcript.record("fixture", step="step1")
    transcript.ballots = ballots.tolist()

    # step 2
    if indices is None:
        matrix = distribute_singlet(config)
        transcript.record("distribute", step="step2", distributor=distributor,
                          copies=matrix.n_rows, voters=n)
        indices, reason = _run_step(matrix, transcript, security_test_singlet, generate_indices,
                                    voter_rngs, nature, attack, eve, order)
        if reason:
            return transcript.abort(reason)
        transcript.record("indices_generated", step="step2")
    else:
        indices = check_index_array(indices, n)
        transcript.record("fixture", step="step2")
    transcript.indices = indices.tolist()

    if isinstance(attack, atk.Collusion):
        transcript.record("collusion_knowledge", **coalition_knowledge(ballots, indices, attack.dishonest, m))

    # step 3
    channel = SimultaneousBroadcast(range(n), transcript.record)
    for k in range(n):
        col = cast_vote(ballots[:, k], int(indices[k]), votes[k], m)
        if isinstance(attack, atk.DoubleVote) and attack.attacker == k:
            col = cast_vote(col, attack.box, attack.extra, m)
        transcript.record("cast", voter=k)
        if isinstance(attack, atk.Withhold) and attack.voter == k:
            continue
        channel.commit(k, col)
    try:
        vote_matrix = channel.release()
    except BroadcastTimeout as exc:
        return transcript.abort(f"broadcast timeout: {exc}")
    if isinstance(attack, atk.TamperBroadcast):
        vote_matrix = vote_matrix.copy()
        vote_matrix[attack.row, attack.voter] = (vote_matrix[attack.row, attack.voter] + attack.delta) % m
        transcript.record("attack_tamper", row=attack.row, voter=attack.voter)
    transcript.vote_matrix = vote_matrix.tolist()

    result = tally(vote_matrix, m)
    transcript.tally = {"R": list(result.R), "N": list(result.N)}
    transcript.record("tally", R=list(result.R), N=list(result.N))
    verdicts = [verify_own_vote(result, indices[k], votes[k]) for k in range(n)]
    transcript.verifications = verdicts
    transcript.record("verify", verdicts=verdicts)
    if not all(verdicts):
        bad = [k for k, ok in enumerate(verdicts) if not ok]
        return transcript.abort(f"vote verification failed for voters {bad}")
    return transcript


def coalition_knowledge(ballots, indices, dishonest, m: int) -> dict:
    """What a coalition learns without any eavesdropping.

    Each box's honest shares sum to minus the coalition's shares, and the
    honest voters' indices are the complement of the coalition's.
    """
    ballots = np.asarray(ballots)
    bad = sorted(set(int(v) for v in dishonest))
    honest_sum = (-ballots[:, bad].sum(axis=1)) % m
    honest_indices = sorted(set(range(len(indices))) - {int(indices[k]) for k in bad})
    return {"dishonest": bad, "honest_box_sums": honest_sum.tolist(), "honest_index_set": honest_indices}


def replay(transcript: Transcript | Mapping) -> Transcript:
    """Re-run the scenario recorded in ``transcript`` from its seed."""
    data = transcript.to_dict() if isinstance(transcript, Transcript) else dict(transcript)
    cfg = ProtocolConfig(**data["config"])
    attack = atk.attack_from_dict(data.get("attack"), cfg.n, cfg.m)
    fixture_steps = {e["step"] for e in data["events"] if e["event"] == "fixture"}
    return run_full_protocol(
        cfg,
        data["votes"],
        attack,
        ballots=data["ballots"] if "step1" in fixture_steps else None,
        indices=data["indices"] if "step2" in fixture_steps else None,
    )
