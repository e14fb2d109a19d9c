"""Anonymous multi-party computation on top of the voting machinery.

Party ``k`` holds ``i_k`` values in ``Z_m``. The protocol runs exactly like
voting with ``n_bar = sum(i_k)`` virtual voters: party ``k`` owns a contiguous
block of ``i_k`` columns in both particle matrices, while the spot checks are
done once per party. After the broadcast every party sees the row sums
``R``, which are the multiset of all inputs in an order fixed by the secret
index permutation.

``mode="ideal"`` replaces the quantum resources by direct classical sampling
(uniform zero-sum ballot rows, uniform index permutation). It skips the
security tests entirely and exists only to reach sizes where the singlet
state is too large to hold.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from . import protocol as proto
from .errors import ConfigurationError, ResourceBudgetError
from .rng import NATURE, VOTER, check_seed, make_rng

EXACT_CAP = 7


@dataclass(frozen=True)
class AmcInputs:
    values: tuple  # values[k] = tuple of party k's inputs
    m: int

    def __post_init__(self):
        vals = tuple(tuple(int(y) for y in v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if self.m < 2:
            raise ConfigurationError(f"alphabet size must be >= 2, got {self.m}")
        if any(len(v) == 0 for v in vals):
            raise ConfigurationError("every party needs at least one input")
        if any(not 0 <= y < self.m for v in vals for y in v):
            raise ConfigurationError(f"inputs must lie in Z_{self.m}")
        if self.n_bar < 2:
            raise ConfigurationError("need at least two inputs in total")

    @classmethod
    def from_flat(cls, input_counts, values, m: int) -> "AmcInputs":
        if sum(input_counts) != len(values):
            raise ConfigurationError("input_counts do not add up to the number of values")
        out, pos = [], 0
        for c in input_counts:
            out.append(tuple(values[pos : pos + c]))
            pos += c
        return cls(tuple(out), m)

    @property
    def parties(self) -> int:
        return len(self.values)

    @property
    def input_counts(self) -> tuple:
        return tuple(len(v) for v in self.values)

    @property
    def n_bar(self) -> int:
        return sum(len(v) for v in self.values)

    def owners(self) -> list[int]:
        """Column -> party, contiguous blocks in party order."""
        return [k for k, v in enumerate(self.values) for _ in v]

    def flat(self) -> list[int]:
        return [y for v in self.values for y in v]


@dataclass(frozen=True)
class AmcConfig:
    delta2: int = 1
    delta3: int = 1
    seed: int = 0
    mode: str = "exact"

    def __post_init__(self):
        if self.delta2 < 1 or self.delta3 < 1:
            raise ConfigurationError("security strengths delta2, delta3 must be >= 1")
        if self.mode not in ("exact", "ideal"):
            raise ConfigurationError(f"mode must be 'exact' or 'ideal', got {self.mode!r}")
        try:
            check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc)) from None


@dataclass
class AmcResult:
    output: tuple  # revealed R_j, anonymized order
    verified: list  # per party: all own values found at their indices
    transcript: proto.Transcript
    mode: str = "exact"

    @property
    def aborted(self) -> bool:
        return self.transcript.aborted

    @property
    def multiset(self) -> Counter:
        return Counter(self.output)


def _ideal_resources(inputs: AmcInputs, rng: np.random.Generator):
    nb, m = inputs.n_bar, inputs.m
    free = rng.integers(0, m, size=(nb, nb - 1))
    ballots = np.column_stack([free, (-free.sum(axis=1)) % m])
    return ballots, rng.permutation(nb)


def run_amc(inputs: AmcInputs, config: AmcConfig = AmcConfig()) -> AmcResult:
    """Anonymously publish every party's inputs; returns the revealed sequence."""
    nb, m, n = inputs.n_bar, inputs.m, inputs.parties
    owners = inputs.owners()
    values = inputs.flat()
    transcript = proto.Transcript(
        {"parties": n, "input_counts": list(inputs.input_counts), "m": m, **asdict(config)},
        values,
    )
    nature = make_rng(config.seed, NATURE)
    party_rngs = [make_rng(config.seed, VOTER, k) for k in range(n)]

    if config.mode == "ideal":
        ballots, indices = _ideal_resources(inputs, nature)
        transcript.record("ideal_resource", n_bar=nb)
    else:
        if nb > EXACT_CAP:
            raise ResourceBudgetError(
                f"n_bar={nb} exceeds the exact-simulation cap of {EXACT_CAP}; use mode='ideal'"
            )
        order = list(range(n))
        matrix = proto.ParticleMatrix(
            [proto.chi_state(nb, m)] * (nb + n * config.delta2), owners, "step1", config.delta2
        )
        transcript.record("distribute", step="step1", copies=matrix.n_rows, columns=nb)
        ballots, reason = proto._run_step(matrix, transcript, proto.security_test_chi, proto.generate_ballots,
                                          party_rngs, nature, None, None, order)
        if reason:
            return AmcResult((), [], transcript.abort(reason), config.mode)
        matrix = proto.ParticleMatrix(
            [proto.singlet_state(nb)] * (1 + n * config.delta3), owners, "step2", config.delta3
        )
        transcript.record("distribute", step="step2", copies=matrix.n_rows, columns=nb)
        indices, reason = proto._run_step(matrix, transcript, proto.security_test_singlet, proto.generate_indices,
                                          party_rngs, nature, None, None, order)
        if reason:
            return AmcResult((), [], transcript.abort(reason), config.mode)
    transcript.ballots = np.asarray(ballots).tolist()
    transcript.indices = np.asarray(indices).tolist()

    channel = proto.SimultaneousBroadcast(range(n), transcript.record)
    cols = [proto.cast_vote(ballots[:, c], int(indices[c]), values[c], m) for c in range(nb)]
    for k in range(n):
        channel.commit(k, np.column_stack([cols[c] for c in range(nb) if owners[c] == k]))
    data = channel.release()
    transcript.vote_matrix = data.tolist()
    result = proto.tally(data, m)
    transcript.tally = {"R": list(result.R), "N": list(result.N)}
    verified = [
        all(proto.verify_own_vote(result, indices[c], values[c]) for c in range(nb) if owners[c] == k)
        for k in range(n)
    ]
    transcript.verifications = verified
    transcript.record("verify", verdicts=verified)
    if not all(verified):
        transcript.abort(f"data verification failed for parties {[k for k, ok in enumerate(verified) if not ok]}")
    return AmcResult(result.R, verified, transcript, config.mode)


def anonymous_broadcast(messages, m: int, config: AmcConfig = AmcConfig()) -> list[int]:
    """Each party sends one value in ``0..m-2`` or ``None`` to abstain.

    Abstainers contribute the reserved symbol ``m-1``. The returned list is the
    revealed sequence in anonymized order.
    """
    vals = []
    for msg in messages:
        if msg is None:
            vals.append((m - 1,))
        elif not 0 <= int(msg) <= m - 2:
            raise ConfigurationError(f"message {msg} outside 0..{m - 2}; {m - 1} is reserved for abstaining")
        else:
            vals.append((int(msg),))
    return list(run_amc(AmcInputs(tuple(vals), m), config).output)


@dataclass
class Ranking:
    ranked: tuple  # revealed values, largest first
    ranks: list = field(default_factory=list)  # ranks[k][i]: 1-based rank of party k's i-th value


def anonymous_ranking(inputs: AmcInputs, config: AmcConfig = AmcConfig()) -> Ranking:
    """Publish all values anonymously, then let each party rank its own.

    Equal values share the rank of their first position in the sorted list.
    """
    result = run_amc(inputs, config)
    ranked = tuple(sorted(result.output, reverse=True))
    ranks = [[ranked.index(y) + 1 for y in own] for own in inputs.values]
    return Ranking(ranked, ranks)
