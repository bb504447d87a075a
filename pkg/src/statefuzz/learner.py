"""Active inference of a reactive state machine from query access.

The learner builds an observation table from membership queries (each a
reset-isolated word sent through the proxy), closes it, keeps it
consistent, and proposes a hypothesis machine.  A conformance suite over
the hypothesis hunts for counterexamples; every suffix of a counterexample
becomes a new distinguishing experiment.  The loop ends when the suite
finds no disagreement.

Noise handling: every distinct word is asked up to ``votes`` times (odd),
stopping early once one reaction transcript holds a strict majority.  If
no majority emerges, or two resolved queries contradict each other on a
shared prefix, a ``NondeterminismError`` surfaces the evidence instead of
learning a wrong machine.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .alphabet import symbol_sort_key, word_to_obj
from .mealy import MealyMachine, minimize


class NondeterminismError(RuntimeError):
    """The target answered the same word in conflicting ways."""

    def __init__(self, word, observations):
        self.word = tuple(word)
        self.observations = tuple(observations)
        super().__init__(
            f"no majority reaction for word of length {len(self.word)}: "
            f"{len(self.observations)} conflicting transcripts"
        )


class PartialResultError(RuntimeError):
    """Learning stopped early; the best hypothesis so far is attached."""

    def __init__(self, reason, hypothesis, stats):
        self.hypothesis = hypothesis
        self.stats = dict(stats)
        super().__init__(reason)


class _BudgetExhausted(Exception):
    pass


def _emit(sink, obj):
    if sink is not None:
        sink.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


class MembershipOracle:
    """Caching, majority-voting frontend over ``query_fn(word) -> outputs``.

    ``query_fn`` must answer with one reaction word per input position from
    a fresh session.  Results are cached per word, and every prefix of a
    resolved word is filled in for free.  ``max_trials`` bounds the total
    number of reset-isolated sessions spent.
    """

    def __init__(self, query_fn, votes: int = 3, max_trials: int | None = None,
                 transcript=None):
        if votes < 1 or votes % 2 == 0:
            raise ValueError("votes must be a positive odd number")
        self.query_fn = query_fn
        self.votes = votes
        self.max_trials = max_trials
        self.transcript = transcript
        self.cache: dict = {(): ()}
        self.trials = 0
        self.resolved = 0
        self.cache_hits = 0

    def query(self, word) -> tuple:
        word = tuple(word)
        if word in self.cache:
            self.cache_hits += 1
            return self.cache[word]
        counts: dict = {}
        needed = self.votes // 2 + 1
        outcome = None
        attempts = 0
        for _ in range(self.votes):
            if self.max_trials is not None and self.trials >= self.max_trials:
                raise _BudgetExhausted()
            self.trials += 1
            attempts += 1
            result = tuple(self.query_fn(word))
            if len(result) != len(word):
                raise ValueError("query backend returned wrong number of reactions")
            counts[result] = counts.get(result, 0) + 1
            if counts[result] >= needed:
                outcome = result
                break
            remaining = self.votes - attempts
            if max(counts.values()) + remaining < needed:
                break
        if outcome is None:
            raise NondeterminismError(word, tuple(counts))
        self._store(word, outcome)
        self.resolved += 1
        _emit(self.transcript, {
            "event": "query",
            "word": word_to_obj(word),
            "outputs": [word_to_obj(out) for out in outcome],
            "trials": attempts,
        })
        return outcome

    def _store(self, word, outcome):
        for i in range(len(word), 0, -1):
            prefix = word[:i]
            known = self.cache.get(prefix)
            if known is None:
                self.cache[prefix] = outcome[:i]
            elif known != outcome[:i]:
                raise NondeterminismError(prefix, (known, outcome[:i]))

    @property
    def stats(self) -> dict:
        return {
            "trials": self.trials,
            "resolved_queries": self.resolved,
            "cache_hits": self.cache_hits,
        }


class ObservationTable:
    """Classic prefix/suffix table with reaction-word cells."""

    def __init__(self, alphabet, oracle: MembershipOracle):
        self.alphabet = tuple(sorted(alphabet, key=symbol_sort_key))
        if not self.alphabet:
            raise ValueError("alphabet must not be empty")
        self.oracle = oracle
        self.prefixes = [()]
        self.suffixes = [(a,) for a in self.alphabet]

    def cell(self, prefix, suffix) -> tuple:
        outputs = self.oracle.query(prefix + suffix)
        return tuple(outputs[len(prefix):])

    def row(self, prefix) -> tuple:
        return tuple(self.cell(prefix, e) for e in self.suffixes)

    def stabilize(self):
        """Extend until the table is closed and consistent."""
        while True:
            if self._close_step():
                continue
            if self._consistency_step():
                continue
            return

    def _close_step(self) -> bool:
        known = {self.row(s) for s in self.prefixes}
        for s in self.prefixes:
            for a in self.alphabet:
                candidate = s + (a,)
                if self.row(candidate) not in known:
                    self.prefixes.append(candidate)
                    return True
        return False

    def _consistency_step(self) -> bool:
        by_row: dict = {}
        for s in self.prefixes:
            by_row.setdefault(self.row(s), []).append(s)
        for group in by_row.values():
            for i, s1 in enumerate(group):
                for s2 in group[i + 1:]:
                    for a in self.alphabet:
                        for e in self.suffixes:
                            if self.cell(s1 + (a,), e) != self.cell(s2 + (a,), e):
                                self.suffixes.append((a,) + e)
                                return True
        return False

    def add_distinguishing_suffixes(self, word):
        """Install every suffix of a counterexample as an experiment."""
        for i in range(len(word)):
            suffix = tuple(word[i:])
            if suffix and suffix not in self.suffixes:
                self.suffixes.append(suffix)

    def hypothesis(self) -> MealyMachine:
        row_to_state: dict = {}
        order = []
        for s in self.prefixes:
            r = self.row(s)
            if r not in row_to_state:
                row_to_state[r] = f"q{len(order)}"
                order.append((r, s))
        transitions = {}
        for r, s in order:
            state = row_to_state[r]
            for a in self.alphabet:
                target = row_to_state[self.row(s + (a,))]
                output = self.oracle.query(s + (a,))[len(s)]
                transitions[(state, a)] = (target, tuple(output))
        return MealyMachine(
            states=tuple(row_to_state[r] for r, _ in order),
            initial=row_to_state[self.row(())],
            input_alphabet=self.alphabet,
            transitions=transitions,
        )


@dataclass
class LearnResult:
    machine: MealyMachine
    rounds: int
    stats: dict = field(default_factory=dict)


def lstar_learn(oracle: MembershipOracle, alphabet, find_counterexample,
                max_rounds: int = 100, transcript=None) -> LearnResult:
    """Refine hypotheses until ``find_counterexample`` comes up empty.

    ``find_counterexample(machine)`` returns a disagreeing input word or
    ``None``.  On budget exhaustion or round overrun the best hypothesis is
    attached to a ``PartialResultError``.
    """
    table = ObservationTable(alphabet, oracle)
    _emit(transcript, {"event": "start",
                       "alphabet": word_to_obj(table.alphabet),
                       "votes": oracle.votes})
    hypothesis = None
    rounds = 0
    try:
        while True:
            if rounds >= max_rounds:
                raise PartialResultError(
                    f"no stable model after {max_rounds} refinement rounds",
                    hypothesis, oracle.stats)
            rounds += 1
            table.stabilize()
            hypothesis = table.hypothesis()
            _emit(transcript, {"event": "hypothesis", "round": rounds,
                               "states": len(hypothesis.states)})
            cex = find_counterexample(hypothesis)
            if cex is None:
                _emit(transcript, {"event": "done", "rounds": rounds,
                                   "states": len(hypothesis.states)})
                return LearnResult(machine=hypothesis, rounds=rounds,
                                   stats=oracle.stats)
            cex = tuple(cex)
            _emit(transcript, {"event": "counterexample", "round": rounds,
                               "word": word_to_obj(cex)})
            table.add_distinguishing_suffixes(cex)
    except _BudgetExhausted:
        raise PartialResultError(
            f"query budget of {oracle.max_trials} trials exhausted",
            hypothesis, oracle.stats) from None


# ---------------------------------------------------------------------------
# Conformance suite
# ---------------------------------------------------------------------------

def distinguishing_suffixes(machine: MealyMachine) -> tuple:
    """A characterization set: for every pair of states, some suffix whose
    reactions differ.  ``((),)`` for machines with fewer than two states."""
    m = minimize(machine)
    states = list(m.states)
    if len(states) < 2:
        return ((),)
    sep: dict = {}
    pending = {frozenset((p, q)) for i, p in enumerate(states)
               for q in states[i + 1:]}
    for pair in sorted(pending, key=sorted):
        p, q = sorted(pair)
        for a in m.input_alphabet:
            if m.transitions[(p, a)][1] != m.transitions[(q, a)][1]:
                sep[pair] = (a,)
                break
    changed = True
    while changed and len(sep) < len(pending):
        changed = False
        for pair in sorted(pending - set(sep), key=sorted):
            p, q = sorted(pair)
            for a in m.input_alphabet:
                np, nq = m.transitions[(p, a)][0], m.transitions[(q, a)][0]
                follow = frozenset((np, nq))
                if np != nq and follow in sep:
                    sep[pair] = (a,) + sep[follow]
                    changed = True
                    break
    missing = pending - set(sep)
    if missing:
        raise ValueError("machine has equivalent states after minimization")
    suffixes = sorted(set(sep.values()),
                      key=lambda w: (len(w), tuple(symbol_sort_key(s) for s in w)))
    return tuple(suffixes)


def transition_cover(machine: MealyMachine) -> tuple:
    """Shortest access prefix for every state, plus each extended by every
    input letter."""
    access = {machine.initial: ()}
    frontier = [machine.initial]
    while frontier:
        nxt = []
        for state in frontier:
            for a in machine.input_alphabet:
                target = machine.transitions[(state, a)][0]
                if target not in access:
                    access[target] = access[state] + (a,)
                    nxt.append(target)
        frontier = nxt
    cover = set(access.values())
    for prefix in list(cover):
        for a in machine.input_alphabet:
            cover.add(prefix + (a,))
    return tuple(sorted(cover,
                        key=lambda w: (len(w), tuple(symbol_sort_key(s) for s in w))))


def wmethod_suite(machine: MealyMachine, depth: int = 2) -> tuple:
    """Deterministically ordered conformance test words.

    ``depth`` bounds how many extra states the real system may hide beyond
    the hypothesis; every middle section up to that length is appended
    between the transition cover and the characterization suffixes.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    cover = transition_cover(machine)
    suffixes = distinguishing_suffixes(machine)
    middles = [()]
    layer = [()]
    for _ in range(depth):
        layer = [m + (a,) for m in layer for a in machine.input_alphabet]
        middles.extend(layer)
    words = set()
    for p in cover:
        for mid in middles:
            for w in suffixes:
                word = p + mid + w
                if word:
                    words.add(word)
    return tuple(sorted(words,
                        key=lambda w: (len(w), tuple(symbol_sort_key(s) for s in w))))


def wmethod_counterexample(machine: MealyMachine, oracle: MembershipOracle,
                           depth: int = 2):
    """First suite word on which the target and the hypothesis disagree, or
    ``None`` if the whole suite matches position by position."""
    for word in wmethod_suite(machine, depth):
        expected = machine.run_outputs(word)
        actual = oracle.query(word)
        if tuple(actual) != tuple(expected):
            return word
    return None
