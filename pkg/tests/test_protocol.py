import itertools
import json
import math
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from sqav import protocol as p
from sqav import qstate
from sqav.attacks import Collusion, DoubleVote, InterceptSubset, ReplaceCopy, TamperBroadcast, Withhold
from sqav.errors import BroadcastTimeout, ConfigurationError, SequencingError
from sqav.qstate import Basis
from sqav.rng import make_rng

DATA = Path(__file__).parent / "data"
EXAMPLE_BALLOTS = [[0, 1, 2, 0], [2, 2, 1, 1], [1, 0, 2, 0], [0, 1, 1, 1]]
EXAMPLE_INDICES = [1, 0, 3, 2]
EXAMPLE_VOTES = [1, 2, 1, 0]


def worked_example():
    return p.run_full_protocol(p.ProtocolConfig(4, 3), EXAMPLE_VOTES, ballots=EXAMPLE_BALLOTS, indices=EXAMPLE_INDICES)


def expected_tally(ballots, indices, votes, m):
    """Oracle: each box j holds the vote of the voter whose index is j."""
    R = [0] * len(votes)
    for k, d in enumerate(indices):
        R[d] = votes[k]
    # ballot rows cancel, so the shares contribute nothing
    assert all(sum(row) % m == 0 for row in ballots)
    return tuple(R), tuple(R.count(i) for i in range(m))


# config ------------------------------------------------------------------------


@pytest.mark.parametrize("kwargs", [dict(n=1, m=3), dict(n=3, m=1), dict(n=3, m=2, delta0=0),
                                    dict(n=3, m=2, seed=-1), dict(n=3, m=2, distributor=3)])
def test_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        p.ProtocolConfig(**kwargs)


# distribution ------------------------------------------------------------------


def test_distribute_shapes():
    assert p.distribute_chi(p.ProtocolConfig(4, 2, delta0=2)).n_rows == 12
    assert p.distribute_chi(p.ProtocolConfig(4, 2, delta0=2)).n_cols == 4
    assert p.distribute_chi(p.ProtocolConfig(2, 2)).n_rows == 4
    assert p.distribute_singlet(p.ProtocolConfig(4, 2, delta1=2)).n_rows == 9
    assert p.distribute_singlet(p.ProtocolConfig(3, 2)).n_rows == 4


def test_distributed_rows_are_exact_resources():
    cfg = p.ProtocolConfig(3, 3, delta0=2)
    chi, singlet = qstate.make_chi_state(3, 3), qstate.make_singlet_state(3)
    assert all(r.allclose(chi) for r in p.distribute_chi(cfg).rows)
    assert all(r.allclose(singlet) for r in p.distribute_singlet(cfg).rows)


# security tests ----------------------------------------------------------------


def test_untampered_tests_always_pass():
    for seed in range(30):
        cfg = p.ProtocolConfig(3, 3, delta0=2, delta1=2, seed=seed)
        rng = make_rng(seed)
        mat = p.distribute_chi(cfg)
        assert all(p.security_test_chi(mat, k, rng).passed for k in range(3))
        mat = p.distribute_singlet(cfg)
        assert all(p.security_test_singlet(mat, k, rng).passed for k in range(3))


def test_security_test_consumes_delta_rows():
    mat = p.distribute_chi(p.ProtocolConfig(4, 2, delta0=2))
    rec = p.security_test_chi(mat, 0, make_rng(0))
    assert len(rec.rows) == 2 and len(set(rec.rows)) == 2
    assert mat.consumed == set(rec.rows)
    assert len(mat.untested()) == 10


def test_security_test_runs_out_of_rows():
    mat = p.distribute_chi(p.ProtocolConfig(2, 2))
    rng = make_rng(0)
    for k in range(2):
        p.security_test_chi(mat, k, rng)
    mat.consumed.update(mat.untested())
    with pytest.raises(ConfigurationError):
        p.security_test_chi(mat, 0, rng)


def _tested_replaced_row(state, basis_wanted, test, n, trials=3000):
    """Pass rate of a replaced row 0 restricted to tests that used ``basis_wanted``."""
    passed = total = 0
    rng = make_rng(21)
    for _ in range(trials):
        mat = p.ParticleMatrix([state] + [None] * n, list(range(n)), "step1", 1)
        mat.consumed.update(range(1, n + 1))  # force row 0 to be tested
        rec = test(mat, 0, rng)
        if rec.bases[0] is basis_wanted:
            total += 1
            passed += rec.passed
    return passed, total


def test_zero_replacement_fourier_fail_rate():
    passed, total = _tested_replaced_row(qstate.basis_state([0, 0, 0], 2), Basis.FOURIER, p.security_test_chi, 3)
    fail = 1 - passed / total
    assert abs(fail - 0.75) < 3 * math.sqrt(0.75 * 0.25 / total)


def test_zero_replacement_passes_computational():
    passed, total = _tested_replaced_row(qstate.basis_state([0, 0, 0], 2), Basis.COMPUTATIONAL, p.security_test_chi, 3, 400)
    assert passed == total > 0


def test_singlet_test_detects_repeats_and_product_states():
    passed, total = _tested_replaced_row(qstate.basis_state([0, 0, 0], 3), Basis.COMPUTATIONAL, p.security_test_singlet, 3, 400)
    assert total > 0 and passed == 0
    ident = qstate.basis_state([0, 1, 2], 3)
    passed, total = _tested_replaced_row(ident, Basis.COMPUTATIONAL, p.security_test_singlet, 3, 400)
    assert passed == total
    passed, total = _tested_replaced_row(ident, Basis.FOURIER, p.security_test_singlet, 3, 400)
    assert passed < total


def test_conditions():
    assert p.chi_condition(Basis.COMPUTATIONAL, (1, 2, 0), 3)
    assert not p.chi_condition(Basis.COMPUTATIONAL, (1, 1, 0), 3)
    assert p.chi_condition(Basis.FOURIER, (2, 2, 2), 3)
    assert not p.chi_condition(Basis.FOURIER, (2, 2, 1), 3)
    assert p.singlet_condition(Basis.FOURIER, (2, 0, 1), 3)
    assert not p.singlet_condition(Basis.COMPUTATIONAL, (2, 0, 2), 3)


# ballots and indices -----------------------------------------------------------


def _passed_matrix(cfg, singlet=False):
    mat = p.distribute_singlet(cfg) if singlet else p.distribute_chi(cfg)
    test = p.security_test_singlet if singlet else p.security_test_chi
    rng = make_rng(cfg.seed, 99)
    for k in range(cfg.n):
        assert test(mat, k, rng).passed
    return mat


def test_generate_ballots_rows_sum_to_zero():
    for seed in range(20):
        cfg = p.ProtocolConfig(4, 3, delta0=2, seed=seed)
        r = p.generate_ballots(_passed_matrix(cfg), make_rng(seed))
        assert r.shape == (4, 4)
        assert np.all(r.sum(axis=1) % 3 == 0)


def test_generate_ballots_deterministic():
    cfg = p.ProtocolConfig(4, 3, seed=5)
    a = p.generate_ballots(_passed_matrix(cfg), make_rng(5))
    b = p.generate_ballots(_passed_matrix(cfg), make_rng(5))
    assert np.array_equal(a, b)


def test_sequencing_errors():
    cfg = p.ProtocolConfig(3, 2)
    mat = p.distribute_chi(cfg)
    with pytest.raises(SequencingError):
        p.generate_ballots(mat, make_rng(0))  # no tests yet
    mat = _passed_matrix(cfg)
    p.generate_ballots(mat, make_rng(0))
    with pytest.raises(SequencingError):
        p.generate_ballots(mat, make_rng(0))  # already finished
    mat = p.distribute_singlet(cfg)
    mat.failed = True
    mat.checked_by = [0, 1, 2]
    with pytest.raises(SequencingError):
        p.generate_indices(mat, make_rng(0))


def test_worked_example_fixtures_validate():
    assert p.check_ballot_matrix(EXAMPLE_BALLOTS, 3).shape == (4, 4)
    assert p.check_index_array(EXAMPLE_INDICES, 4).tolist() == EXAMPLE_INDICES
    with pytest.raises(ConfigurationError):
        p.check_ballot_matrix([[0, 1], [1, 1]], 3)
    with pytest.raises(ConfigurationError):
        p.check_index_array([0, 0, 1, 2], 4)


def test_generate_indices_uniform_n3():
    counts = Counter()
    rng = make_rng(31)
    trials = 10_000
    singlet = qstate.make_singlet_state(3)
    for _ in range(trials):
        mat = p.ParticleMatrix([singlet], [0, 1, 2], "step2", 1)
        mat.checked_by = [0, 1, 2]
        d = p.generate_indices(mat, rng)
        counts[tuple(d.tolist())] += 1
    cells = list(itertools.permutations(range(3)))
    assert set(counts) == set(cells)
    _, pval = stats.chisquare([counts[c] for c in cells])
    assert pval > 0.0027


# casting, broadcast and tally --------------------------------------------------


def test_cast_vote_examples():
    assert p.cast_vote([1, 2, 0], 1, 0, 3).tolist() == [1, 2, 0]
    assert p.cast_vote([0, 2, 1, 0], 1, 1, 3).tolist() == [0, 0, 1, 0]
    assert p.cast_vote([1, 2, 0, 1], 0, 2, 3).tolist() == [0, 2, 0, 1]
    with pytest.raises(ValueError):
        p.cast_vote([0, 0], 0, 3, 3)


def test_broadcast_release_and_order_independence():
    cols = {0: [1, 2], 1: [0, 1]}
    a = p.broadcast_votes(cols)
    b = p.broadcast_votes(dict(reversed(list(cols.items()))))
    assert np.array_equal(a, b)
    assert a.tolist() == [[1, 0], [2, 1]]


def test_broadcast_hides_columns_until_release():
    log = []
    ch = p.SimultaneousBroadcast([0, 1], lambda ev, **d: log.append((ev, d)))
    ch.commit(0, [1, 2])
    assert log == [("commit", {"party": 0})]
    with pytest.raises(BroadcastTimeout):
        ch.release()
    assert log[-1] == ("timeout", {"missing": [1]})
    ch.commit(1, [0, 0])
    ch.release()
    with pytest.raises(SequencingError):
        ch.commit(0, [0, 0])


def test_tally_examples():
    assert p.tally(np.zeros((3, 3), int), 2) == p.Tally((0, 0, 0), (3, 0))


def test_worked_example_reproduction():
    tr = worked_example()
    assert tuple(tr.tally["R"]) == (2, 1, 0, 1)
    assert tuple(tr.tally["N"]) == (1, 2, 1)
    assert tr.verifications == [True] * 4
    assert (tuple(tr.tally["R"]), tuple(tr.tally["N"])) == expected_tally(
        EXAMPLE_BALLOTS, EXAMPLE_INDICES, EXAMPLE_VOTES, 3)


def test_worked_example_matches_golden():
    assert worked_example().to_json() == (DATA / "worked_example_transcript.json").read_text()


def test_seeded_run_matches_golden():
    tr = p.run_full_protocol(p.ProtocolConfig(3, 3, seed=7), [2, 0, 2])
    assert tr.to_json() == (DATA / "seed7_n3_m3_transcript.json").read_text()


# full runs ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(40))
def test_honest_runs(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 6)), int(rng.integers(2, 5))
    votes = rng.integers(0, m, n).tolist()
    tr = p.run_full_protocol(p.ProtocolConfig(n, m, seed=seed), votes)
    assert not tr.aborted
    assert np.all(np.array(tr.ballots).sum(axis=1) % m == 0)
    assert sorted(tr.indices) == list(range(n))
    assert sorted(tr.tally["R"]) == sorted(votes)
    assert all(tr.verifications)
    assert (tuple(tr.tally["R"]), tuple(tr.tally["N"])) == expected_tally(tr.ballots, tr.indices, votes, m)


def test_same_seed_same_transcript():
    cfg = p.ProtocolConfig(4, 3, delta0=2, seed=123)
    assert p.run_full_protocol(cfg, [0, 1, 2, 1]).to_json() == p.run_full_protocol(cfg, [0, 1, 2, 1]).to_json()


def test_replay_reproduces_transcript():
    tr = p.run_full_protocol(p.ProtocolConfig(4, 2, seed=3), [1, 0, 1, 1], InterceptSubset(x=3))
    assert p.replay(json.loads(tr.to_json())).to_json() == tr.to_json()
    assert p.replay(worked_example()).to_json() == worked_example().to_json()


def test_no_vote_content_before_release():
    tr = p.run_full_protocol(p.ProtocolConfig(4, 3, seed=1), [0, 1, 2, 0])
    events = [e["event"] for e in tr.events]
    release = events.index("release")
    for e in tr.events[:release]:
        assert "vote_matrix" not in e and "column" not in e
    assert events.index("tally") > release


def test_tally_uses_public_data_only():
    tr = worked_example()
    assert p.tally(tr.vote_matrix, 3).R == tuple(tr.tally["R"])


def test_vote_validation():
    with pytest.raises(ConfigurationError):
        p.run_full_protocol(p.ProtocolConfig(3, 2), [0, 1])
    with pytest.raises(ConfigurationError):
        p.run_full_protocol(p.ProtocolConfig(3, 2), [0, 1, 2])


# attacks in a run --------------------------------------------------------------


def test_intercept_all_copies_is_caught():
    copies = 3 + 3 * 4
    aborted = 0
    for seed in range(60):
        tr = p.run_full_protocol(p.ProtocolConfig(3, 2, delta0=4, seed=seed), [0, 1, 1],
                                 InterceptSubset(x=copies, voter=1))
        aborted += tr.aborted
    # every tested copy fails its Fourier check with probability 1/2; 12 are tested
    assert aborted >= 57


def test_replacement_row_in_run():
    zero = qstate.basis_state([0, 0, 0], 2)
    results = [p.run_full_protocol(p.ProtocolConfig(3, 2, seed=s), [0, 0, 1], ReplaceCopy(0, zero)).aborted
               for s in range(200)]
    assert 0 < sum(results) < 200


def test_double_vote_caught():
    tr = p.run_full_protocol(p.ProtocolConfig(3, 3, seed=2), [1, 1, 0], DoubleVote(attacker=2, box=0, extra=1))
    assert tr.aborted and "verification failed" in tr.abort_reason


def test_tamper_caught():
    base = p.run_full_protocol(p.ProtocolConfig(3, 3, seed=4), [1, 2, 0])
    victim_box = base.indices[0]
    tr = p.run_full_protocol(p.ProtocolConfig(3, 3, seed=4), [1, 2, 0], TamperBroadcast(victim_box, 1, 1))
    assert tr.aborted and tr.verifications[0] is False


def test_withhold_times_out():
    tr = p.run_full_protocol(p.ProtocolConfig(3, 2, seed=0), [0, 1, 1], Withhold(1))
    assert tr.aborted and "timeout" in tr.abort_reason
    assert tr.tally is None


def test_collusion_records_trivial_knowledge():
    tr = p.run_full_protocol(p.ProtocolConfig(4, 3, seed=0), [0, 1, 2, 1], Collusion((0, 2)))
    ev = next(e for e in tr.events if e["event"] == "collusion_knowledge")
    b = np.array(tr.ballots)
    assert ev["honest_box_sums"] == (b[:, [1, 3]].sum(axis=1) % 3).tolist()
    assert set(ev["honest_index_set"]) == {tr.indices[1], tr.indices[3]}
