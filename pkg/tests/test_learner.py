"""Tests for active model inference: the voting membership oracle, the
observation table loop, conformance search, and an end-to-end learn of the
simulated cluster on a restricted alphabet."""
from __future__ import annotations

import io
import itertools
import random
from collections import deque

import pytest

from statefuzz.alphabet import (
    ALIVE, DEAD, KNOWN, NO_RESPONSE, UNKNOWN, BREQ, BRES, PREQ, PRES, RCONREQ,
    RCONRES, RCOMREQ, RJREQ, RVREQ, RVRES, REJECTED, TERM_CURRENT,
    DATA_APP, OP_ADD, NodeRef, Symbol,
)
from statefuzz.learner import (
    LearnResult, MembershipOracle, NondeterminismError, ObservationTable,
    PartialResultError, _BudgetExhausted, distinguishing_suffixes, lstar_learn,
    transition_cover, wmethod_counterexample, wmethod_suite,
)
from statefuzz.mealy import MealyMachine, isomorphic, minimize
from statefuzz.proxy import ClusterProxy, InProcessTransport
from statefuzz.sulsim import ClusterConfig, default_alphabet, spawn_cluster

from helpers import (
    T0_HEARTBEAT, T0_JOIN, T0_PROBE, build_t0, random_machine,
)


def counting_backend(machine):
    calls = []

    def query(word):
        calls.append(tuple(word))
        return machine.run_outputs(word)

    return query, calls


def perfect_counterexample(truth):
    """Exact equivalence check by product exploration; test-only shortcut."""

    def check(hyp):
        seen = {(truth.initial, hyp.initial)}
        queue = deque([((), truth.initial, hyp.initial)])
        while queue:
            word, t, h = queue.popleft()
            for a in truth.input_alphabet:
                tn, tout = truth.transitions[(t, a)]
                hn, hout = hyp.transitions[(h, a)]
                extended = word + (a,)
                if tout != hout:
                    return extended
                if (tn, hn) not in seen:
                    seen.add((tn, hn))
                    queue.append((extended, tn, hn))
        return None

    return check


def learn_machine(truth, votes=1, **kw):
    oracle = MembershipOracle(truth.run_outputs, votes=votes)
    return lstar_learn(oracle, truth.input_alphabet,
                       perfect_counterexample(truth), **kw)


# ---------------------------------------------------------------------------
# Membership oracle
# ---------------------------------------------------------------------------

class TestMembershipOracle:
    @pytest.mark.parametrize("votes", [0, -1, 2, 4])
    def test_rejects_even_or_nonpositive_votes(self, votes):
        with pytest.raises(ValueError):
            MembershipOracle(lambda w: (), votes=votes)

    def test_caches_resolved_words(self):
        query, calls = counting_backend(build_t0())
        oracle = MembershipOracle(query, votes=1)
        word = (T0_PROBE, T0_JOIN)
        first = oracle.query(word)
        second = oracle.query(word)
        assert first == second
        assert len(calls) == 1
        assert oracle.cache_hits == 1

    def test_prefixes_come_for_free(self):
        query, calls = counting_backend(build_t0())
        oracle = MembershipOracle(query, votes=1)
        word = (T0_PROBE, T0_JOIN, T0_HEARTBEAT)
        full = oracle.query(word)
        assert oracle.query(word[:2]) == full[:2]
        assert oracle.query(word[:1]) == full[:1]
        assert oracle.query(()) == ()
        assert len(calls) == 1

    def test_majority_beats_one_bad_reading(self):
        machine = build_t0()
        flips = iter([True, False, False])

        def flaky(word):
            good = machine.run_outputs(word)
            if next(flips, False):
                return tuple(reversed(good)) if len(good) > 1 else ((NO_RESPONSE,),)
            return good

        oracle = MembershipOracle(flaky, votes=3)
        assert oracle.query((T0_PROBE, T0_JOIN)) == machine.run_outputs((T0_PROBE, T0_JOIN))
        assert oracle.trials == 3

    def test_agreement_short_circuits(self):
        query, calls = counting_backend(build_t0())
        oracle = MembershipOracle(query, votes=3)
        oracle.query((T0_PROBE,))
        assert len(calls) == 2  # two matching readings reach the majority

    def test_single_vote_accepts_first_reading(self):
        query, calls = counting_backend(build_t0())
        oracle = MembershipOracle(query, votes=1)
        oracle.query((T0_PROBE,))
        assert len(calls) == 1

    def test_no_majority_raises(self):
        counter = itertools.count()

        def chaotic(word):
            return (((Symbol(PRES, (NodeRef(f"x{next(counter)}", UNKNOWN), ALIVE)),),))

        oracle = MembershipOracle(chaotic, votes=3)
        with pytest.raises(NondeterminismError) as err:
            oracle.query((T0_PROBE,))
        assert err.value.word == (T0_PROBE,)
        assert len(err.value.observations) == 3

    def test_hopeless_vote_stops_early(self):
        counter = itertools.count()

        def chaotic(word):
            return (((Symbol(PRES, (NodeRef(f"x{next(counter)}", UNKNOWN), ALIVE)),),))

        oracle = MembershipOracle(chaotic, votes=5)
        with pytest.raises(NondeterminismError):
            oracle.query((T0_PROBE,))
        assert oracle.trials == 4  # 4 distinct readings cannot reach 3 of 5

    def test_prefix_conflict_is_nondeterminism(self):
        good = build_t0().run_outputs

        def backend(word):
            out = list(good(word))
            if len(word) == 2:
                out[0] = (NO_RESPONSE,)  # contradicts the answer for word[:1]
            return tuple(out)

        oracle = MembershipOracle(backend, votes=1)
        oracle.query((T0_PROBE,))
        with pytest.raises(NondeterminismError):
            oracle.query((T0_PROBE, T0_JOIN))

    def test_budget_is_enforced(self):
        oracle = MembershipOracle(build_t0().run_outputs, votes=1, max_trials=2)
        oracle.query((T0_PROBE,))
        oracle.query((T0_JOIN,))
        with pytest.raises(_BudgetExhausted):
            oracle.query((T0_HEARTBEAT,))

    def test_wrong_arity_backend_rejected(self):
        oracle = MembershipOracle(lambda word: ((NO_RESPONSE,),), votes=1)
        with pytest.raises(ValueError):
            oracle.query((T0_PROBE, T0_JOIN))

    def test_stats_shape(self):
        oracle = MembershipOracle(build_t0().run_outputs, votes=1)
        oracle.query((T0_PROBE,))
        oracle.query((T0_PROBE,))
        assert oracle.stats == {"trials": 1, "resolved_queries": 1, "cache_hits": 1}


# ---------------------------------------------------------------------------
# Observation table mechanics
# ---------------------------------------------------------------------------

class TestObservationTable:
    def test_counterexample_installs_all_suffixes(self):
        t0 = build_t0()
        table = ObservationTable(t0.input_alphabet,
                                 MembershipOracle(t0.run_outputs, votes=1))
        cex = (T0_PROBE, T0_JOIN, T0_HEARTBEAT)
        table.add_distinguishing_suffixes(cex)
        for i in range(len(cex)):
            assert cex[i:] in table.suffixes
        before = len(table.suffixes)
        table.add_distinguishing_suffixes(cex)
        assert len(table.suffixes) == before  # idempotent

    def test_empty_alphabet_rejected(self):
        with pytest.raises(ValueError):
            ObservationTable((), MembershipOracle(lambda w: (), votes=1))


# ---------------------------------------------------------------------------
# Full inference loop
# ---------------------------------------------------------------------------

class TestLStar:
    def test_learns_three_state_fixture(self):
        truth = build_t0()
        result = learn_machine(truth)
        assert isinstance(result, LearnResult)
        assert isomorphic(result.machine, truth)
        assert result.rounds >= 1
        assert result.stats["resolved_queries"] > 0

    @pytest.mark.parametrize("seed", range(12))
    def test_learns_random_machines(self, seed):
        truth = random_machine(random.Random(seed))
        result = learn_machine(truth)
        assert isomorphic(result.machine, truth), seed

    def test_budget_exhaustion_carries_partial_result(self):
        truth = build_t0()
        oracle = MembershipOracle(truth.run_outputs, votes=1, max_trials=4)
        with pytest.raises(PartialResultError) as err:
            lstar_learn(oracle, truth.input_alphabet, perfect_counterexample(truth))
        assert err.value.stats["trials"] == 4

    def test_round_limit_carries_partial_result(self):
        truth = build_t0()
        oracle = MembershipOracle(truth.run_outputs, votes=1)
        with pytest.raises(PartialResultError) as err:
            lstar_learn(oracle, truth.input_alphabet,
                        lambda hyp: (T0_PROBE,) * 3, max_rounds=2)
        assert err.value.hypothesis is not None
        assert "2" in str(err.value)

    def test_nondeterministic_target_raises(self):
        rng = random.Random(1)
        truth = build_t0()

        def jittery(word):
            out = list(truth.run_outputs(word))
            out[-1] = ((NO_RESPONSE,) if rng.random() < 0.5
                       else (Symbol(PRES, (NodeRef(f"r{rng.randint(0, 999)}", UNKNOWN), ALIVE)),))
            return tuple(out)

        oracle = MembershipOracle(jittery, votes=3)
        with pytest.raises(NondeterminismError):
            lstar_learn(oracle, truth.input_alphabet, perfect_counterexample(truth))

    def test_transcript_is_deterministic_and_structured(self):
        def run():
            sink = io.StringIO()
            truth = build_t0()
            oracle = MembershipOracle(truth.run_outputs, votes=1, transcript=sink)
            lstar_learn(oracle, truth.input_alphabet,
                        perfect_counterexample(truth), transcript=sink)
            return sink.getvalue()

        first, second = run(), run()
        assert first == second
        import json
        events = [json.loads(line)["event"] for line in first.splitlines()]
        assert events[0] == "start"
        assert "hypothesis" in events
        assert events[-1] == "done"


# ---------------------------------------------------------------------------
# Conformance suite
# ---------------------------------------------------------------------------

class TestConformance:
    def test_no_counterexample_for_equivalent_target(self):
        truth = build_t0()
        oracle = MembershipOracle(truth.run_outputs, votes=1)
        assert wmethod_counterexample(truth, oracle, depth=1) is None

    def test_finds_flipped_output(self):
        truth = build_t0()
        broken_tr = dict(truth.transitions)
        broken_tr[("q1", T0_JOIN)] = ("q2", (NO_RESPONSE,))  # ack dropped
        broken = MealyMachine(states=truth.states, initial=truth.initial,
                              input_alphabet=truth.input_alphabet,
                              transitions=broken_tr)
        oracle = MembershipOracle(truth.run_outputs, votes=1)
        word = wmethod_counterexample(broken, oracle, depth=1)
        assert word is not None
        assert truth.run_outputs(word) != broken.run_outputs(word)

    def test_depth_must_be_positive(self):
        with pytest.raises(ValueError):
            wmethod_suite(build_t0(), depth=0)

    def test_deep_divergence_needs_more_depth(self):
        a = T0_PROBE
        truth = MealyMachine(
            states=("c0", "c1", "c2"), initial="c0", input_alphabet=(a,),
            transitions={
                ("c0", a): ("c1", ((NO_RESPONSE,))),
                ("c1", a): ("c2", ((NO_RESPONSE,))),
                ("c2", a): ("c2", (Symbol(PRES, (NodeRef("n1", KNOWN), ALIVE)),)),
            })
        flat = MealyMachine(states=("h0",), initial="h0", input_alphabet=(a,),
                            transitions={("h0", a): ("h0", (NO_RESPONSE,))})
        oracle = MembershipOracle(truth.run_outputs, votes=1)
        assert wmethod_counterexample(flat, oracle, depth=1) is None
        word = wmethod_counterexample(flat, oracle, depth=2)
        assert word == (a, a, a)

    def test_suite_is_sorted_unique_nonempty(self):
        suite = wmethod_suite(build_t0(), depth=2)
        assert len(suite) == len(set(suite))
        assert all(suite)
        lengths = [len(w) for w in suite]
        assert lengths == sorted(lengths)
        assert suite == wmethod_suite(build_t0(), depth=2)

    @pytest.mark.parametrize("seed", range(8))
    def test_characterization_separates_all_state_pairs(self, seed):
        machine = minimize(random_machine(random.Random(seed)))
        suffixes = distinguishing_suffixes(machine)
        for i, p in enumerate(machine.states):
            for q in machine.states[i + 1:]:
                assert any(
                    _run_from(machine, p, w) != _run_from(machine, q, w)
                    for w in suffixes
                ), (p, q)

    def test_transition_cover_reaches_every_edge(self):
        machine = build_t0()
        cover = set(transition_cover(machine))
        seen_states = {machine.state_after(p) for p in cover}
        assert seen_states == set(machine.states)
        for prefix in list(cover):
            if prefix:
                assert prefix[:-1] in cover  # prefix-closed over the tree


def _run_from(machine, state, word):
    out = []
    for sym in word:
        state, reaction = machine.transitions[(state, sym)]
        out.append(reaction)
    return tuple(out)


# ---------------------------------------------------------------------------
# End-to-end against the simulated cluster (restricted alphabet)
# ---------------------------------------------------------------------------

MEMBERS = ("n1", "n2", "n3", "n4")

L_PROBE = Symbol(PREQ, (NodeRef("n1", KNOWN),))
L_DEATH = Symbol(PRES, (NodeRef("n1", KNOWN), DEAD))
L_BOOT = Symbol(BREQ, (MEMBERS,))
L_JOIN = Symbol(RJREQ, (NodeRef("dummy", UNKNOWN),))
L_CONF = Symbol(RCONREQ, ())
L_VOTE = Symbol(RVREQ, (NodeRef("n1", KNOWN), TERM_CURRENT))
L_CMD = Symbol(RCOMREQ, (DATA_APP, OP_ADD))
LADDER_ALPHABET = (L_PROBE, L_DEATH, L_BOOT, L_JOIN, L_CONF, L_VOTE, L_CMD)

OUT_NONE = (NO_RESPONSE,)
OUT_ALIVE = (Symbol(PRES, (NodeRef("n1", KNOWN), ALIVE)),)
OUT_BOOT = (Symbol(BRES, ((),)),)
OUT_CONF = (Symbol(RCONRES, ()),)
OUT_VOTE = (Symbol(RVRES, (REJECTED,)),)


def expected_ladder_machine() -> MealyMachine:
    """Hand-derived reference model of the hardened session ladder over the
    restricted seven-letter alphabet."""
    rows = {
        # state: (probe, death, boot, join, conf, vote, cmd)
        "V0": (("V0", OUT_ALIVE), ("LK", OUT_NONE), ("V2", OUT_BOOT),
               ("LK", OUT_NONE), ("V0", OUT_NONE), ("V0", OUT_VOTE),
               ("LK", OUT_NONE)),
        "V2": (("V2", OUT_ALIVE), ("LK", OUT_NONE), ("V2", OUT_BOOT),
               ("V3", OUT_NONE), ("V2", OUT_CONF), ("V2", OUT_VOTE),
               ("LK", OUT_NONE)),
        "V3": (("V3", OUT_NONE), ("LK", OUT_NONE), ("V3", OUT_BOOT),
               ("V3", OUT_NONE), ("V3", OUT_CONF), ("V4", OUT_VOTE),
               ("LK", OUT_NONE)),
        "V4": (("V4", OUT_NONE), ("LK", OUT_NONE), ("V4", OUT_BOOT),
               ("V4", OUT_NONE), ("V4", OUT_CONF), ("V4", OUT_NONE),
               ("V5", OUT_NONE)),
        "V5": (("V5", OUT_NONE), ("LK", OUT_NONE), ("V5", OUT_BOOT),
               ("V5", OUT_NONE), ("V5", OUT_CONF), ("V5", OUT_NONE),
               ("LK", OUT_NONE)),
        "LK": (("LK", OUT_NONE),) * 7,
    }
    transitions = {}
    for state, cells in rows.items():
        for sym, (target, out) in zip(LADDER_ALPHABET, cells):
            transitions[(state, sym)] = (target, out)
    return MealyMachine(states=tuple(rows), initial="V0",
                        input_alphabet=LADDER_ALPHABET, transitions=transitions)


def sim_query_fn():
    cfg = ClusterConfig(members=MEMBERS)
    proxy = ClusterProxy(InProcessTransport(spawn_cluster(cfg)), default_alphabet(cfg))
    return proxy.query


class TestLearnSimulatedCluster:
    def test_restricted_alphabet_learn_matches_hand_model(self):
        oracle = MembershipOracle(sim_query_fn(), votes=1)
        result = lstar_learn(
            oracle, LADDER_ALPHABET,
            lambda hyp: wmethod_counterexample(hyp, oracle, depth=1))
        assert len(result.machine.states) == 6
        assert isomorphic(result.machine, expected_ladder_machine())

    def test_majority_voting_against_live_simulator(self):
        oracle = MembershipOracle(sim_query_fn(), votes=3)
        out = oracle.query((L_BOOT, L_JOIN, L_VOTE))
        assert out == (OUT_BOOT, OUT_NONE, OUT_VOTE)
        assert oracle.trials == 2  # deterministic target: majority after two
