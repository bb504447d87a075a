"""Deterministic finite-state transducers (Mealy machines) over message symbols.

A machine is total: every (state, input letter) pair has exactly one
transition, carrying a possibly multi-letter output word.  Pruning hides
self-loops and designated "others" letters from graph traversal without
touching execution, so sequence extraction sees a smaller graph while
``run`` keeps full semantics.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .alphabet import (
    NO_RESPONSE, Symbol, symbol_from_obj, symbol_label, symbol_sort_key,
    symbol_to_obj, word_from_obj, word_to_obj,
)

SCHEMA_VERSION = 1


class ModelError(ValueError):
    """Violation of a machine contract (unknown state, partial table, ...)."""


def input_sort_key(letter):
    if isinstance(letter, Symbol):
        return (0, symbol_sort_key(letter))
    return (1, repr(letter))


@dataclass(frozen=True)
class PrunePolicy:
    """What to hide from traversal: self-loops and keep-alive style letters."""

    drop_self_loops: bool = True
    others_labels: frozenset = frozenset()

    def is_other(self, letter) -> bool:
        if letter in self.others_labels:
            return True
        return isinstance(letter, Symbol) and letter.tag in self.others_labels


@dataclass
class MealyMachine:
    """Immutable-by-convention deterministic transducer.

    ``transitions`` maps (state, input) to (next_state, output_word) and must
    be total over ``states`` x ``input_alphabet``.  ``traversal_mask`` is the
    set of (state, input) edges visible to traversal; ``None`` means all.
    """

    states: tuple
    initial: str
    input_alphabet: tuple
    transitions: dict
    traversal_mask: frozenset | None = None

    def __post_init__(self):
        state_set = set(self.states)
        if len(state_set) != len(self.states):
            raise ModelError("duplicate states")
        if self.initial not in state_set:
            raise ModelError(f"initial state {self.initial!r} not in states")
        if len(set(self.input_alphabet)) != len(self.input_alphabet):
            raise ModelError("duplicate input letters")
        for s in self.states:
            for a in self.input_alphabet:
                if (s, a) not in self.transitions:
                    raise ModelError(f"transition table not total: missing {(s, a)!r}")
        for (s, a), (nxt, out) in self.transitions.items():
            if s not in state_set or nxt not in state_set:
                raise ModelError(f"transition {(s, a)!r} touches unknown state")
            if not isinstance(out, tuple):
                raise ModelError(f"output of {(s, a)!r} must be a tuple word")

    # -- execution ---------------------------------------------------------

    def step(self, state, letter):
        """One transition: (state, input) -> (next_state, output_word)."""
        try:
            return self.transitions[(state, letter)]
        except KeyError:
            raise ModelError(f"no transition for {(state, letter)!r}") from None

    def run(self, word, start=None):
        """Concatenated outputs of executing ``word`` from the initial state."""
        state = self.initial if start is None else start
        out = []
        for letter in word:
            state, piece = self.step(state, letter)
            out.extend(piece)
        return tuple(out)

    def run_outputs(self, word, start=None):
        """Per-position output words (one tuple per input letter)."""
        state = self.initial if start is None else start
        out = []
        for letter in word:
            state, piece = self.step(state, letter)
            out.append(piece)
        return tuple(out)

    def state_after(self, word, start=None):
        state = self.initial if start is None else start
        for letter in word:
            state, _ = self.step(state, letter)
        return state

    # -- traversal view ----------------------------------------------------

    def traversal_edges(self, state):
        """Outgoing edges visible to traversal, in alphabet order."""
        for a in self.input_alphabet:
            if self.traversal_mask is not None and (state, a) not in self.traversal_mask:
                continue
            nxt, out = self.transitions[(state, a)]
            yield a, nxt, out

    def prune(self, policy: PrunePolicy | None = None) -> "MealyMachine":
        """Hide self-loops and "others" letters from traversal.  Idempotent;
        execution through ``run``/``step`` is unaffected."""
        policy = policy or PrunePolicy()
        mask = frozenset(
            (s, a)
            for (s, a), (nxt, _) in self.transitions.items()
            if not (policy.drop_self_loops and nxt == s) and not policy.is_other(a)
        )
        return replace(self, traversal_mask=mask)

    def reachable_states(self):
        """States reachable through traversal-visible edges, discovery order."""
        seen = [self.initial]
        seen_set = {self.initial}
        queue = [self.initial]
        while queue:
            state = queue.pop(0)
            for _, nxt, _ in self.traversal_edges(state):
                if nxt not in seen_set:
                    seen_set.add(nxt)
                    seen.append(nxt)
                    queue.append(nxt)
        return seen

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        edges = []
        for s in self.states:
            for a in self.input_alphabet:
                nxt, out = self.transitions[(s, a)]
                edges.append(
                    {
                        "src": s,
                        "input": _letter_to_obj(a),
                        "dst": nxt,
                        "output": word_to_obj(out),
                    }
                )
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "mealy",
            "states": list(self.states),
            "initial": self.initial,
            "alphabet": [_letter_to_obj(a) for a in self.input_alphabet],
            "transitions": edges,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MealyMachine":
        doc = json.loads(text)
        if not isinstance(doc, dict) or doc.get("kind") != "mealy":
            raise ModelError("not a serialized mealy machine")
        alphabet = tuple(symbol_from_obj(o) for o in doc["alphabet"])
        transitions = {}
        for e in doc["transitions"]:
            transitions[(e["src"], symbol_from_obj(e["input"]))] = (
                e["dst"],
                word_from_obj(e["output"]),
            )
        return cls(
            states=tuple(doc["states"]),
            initial=doc["initial"],
            input_alphabet=alphabet,
            transitions=transitions,
        )

    def to_dot(self) -> str:
        """Byte-stable GraphViz rendering; pruned edges drawn dashed."""
        lines = [
            "digraph mealy {",
            "  rankdir=LR;",
            '  node [shape=circle fontsize=10];',
            '  "__start" [shape=point];',
            f'  "__start" -> "{self.initial}";',
        ]
        for s in self.states:
            shape = ' [shape=doublecircle]' if s == self.initial else ""
            lines.append(f'  "{s}"{shape};')
        for s in self.states:
            for a in self.input_alphabet:
                nxt, out = self.transitions[(s, a)]
                label = f"{_letter_label(a)}/{_word_label(out)}"
                style = ""
                if self.traversal_mask is not None and (s, a) not in self.traversal_mask:
                    style = " style=dashed color=gray"
                lines.append(f'  "{s}" -> "{nxt}" [label="{label}"{style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _letter_to_obj(letter):
    if isinstance(letter, Symbol):
        return symbol_to_obj(letter)
    raise ModelError(f"cannot serialize non-symbol input {letter!r}")


def _letter_label(letter) -> str:
    return symbol_label(letter) if isinstance(letter, Symbol) else str(letter)


def _word_label(word) -> str:
    if not word:
        return "-"
    return ",".join(_letter_label(x) for x in word)


# ---------------------------------------------------------------------------
# Minimization and isomorphism
# ---------------------------------------------------------------------------

def minimize(m: MealyMachine) -> MealyMachine:
    """Reachable, merged-equivalent-states machine with canonical q0..qN names
    assigned in breadth-first order over a sorted alphabet."""
    order = tuple(sorted(m.input_alphabet, key=input_sort_key))

    reachable = [m.initial]
    seen = {m.initial}
    i = 0
    while i < len(reachable):
        s = reachable[i]
        i += 1
        for a in order:
            nxt, _ = m.transitions[(s, a)]
            if nxt not in seen:
                seen.add(nxt)
                reachable.append(nxt)

    block = {}
    sig_index = {}
    for s in reachable:
        sig = tuple(m.transitions[(s, a)][1] for a in order)
        if sig not in sig_index:
            sig_index[sig] = len(sig_index)
        block[s] = sig_index[sig]

    while True:
        key_index = {}
        new_block = {}
        for s in reachable:
            key = (block[s], tuple(block[m.transitions[(s, a)][0]] for a in order))
            if key not in key_index:
                key_index[key] = len(key_index)
            new_block[s] = key_index[key]
        if len(key_index) == len(set(block.values())):
            block = new_block
            break
        block = new_block

    rep = {}
    for s in reachable:
        rep.setdefault(block[s], s)

    name = {}
    bfs = [block[m.initial]]
    name[block[m.initial]] = "q0"
    i = 0
    while i < len(bfs):
        b = bfs[i]
        i += 1
        s = rep[b]
        for a in order:
            nb = block[m.transitions[(s, a)][0]]
            if nb not in name:
                name[nb] = f"q{len(name)}"
                bfs.append(nb)

    transitions = {}
    for b in bfs:
        s = rep[b]
        for a in order:
            nxt, out = m.transitions[(s, a)]
            transitions[(name[b], a)] = (name[block[nxt]], out)
    return MealyMachine(
        states=tuple(name[b] for b in bfs),
        initial="q0",
        input_alphabet=order,
        transitions=transitions,
    )


def isomorphic(a: MealyMachine, b: MealyMachine) -> bool:
    """True iff the reachable, minimized machines are identical up to state
    renaming.  Machines over different input alphabets are never isomorphic."""
    if set(a.input_alphabet) != set(b.input_alphabet):
        return False
    ca, cb = minimize(a), minimize(b)
    if len(ca.states) != len(cb.states):
        return False
    return ca.transitions == cb.transitions
