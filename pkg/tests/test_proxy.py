"""Tests for the symbolic proxy: session state, window canonicalization,
keep-alive keeper behavior, and end-to-end queries against the simulator."""
from __future__ import annotations

import random
from types import SimpleNamespace

import pytest

from statefuzz.alphabet import (
    ALIVE, APPROVED, BREQ, BRES, DEAD, KNOWN, NO_RESPONSE, PREQ, PRES, RAREQ,
    RCOMREQ, RCOMRES, RCONREQ, RCONRES, RJREQ, RJRES, RVREQ, RVRES, REJECTED,
    TERM_CURRENT, TERM_HIGHER, UNKNOWN, AlphabetConfig, ConcreteMessage,
    DecodeError, NodeRef, Symbol, DATA_APP, OP_ADD,
    enumerate_input_alphabet, symbol_label,
)
from statefuzz.proxy import ClusterProxy, InProcessTransport, SessionContext
from statefuzz.sulsim import ClusterConfig, default_alphabet, spawn_cluster

MEMBERS = ("n1", "n2", "n3", "n4")
ACFG = AlphabetConfig(members=MEMBERS, self_id="dummy", cluster_id="sdwan")


def wire(msg_type, payload, ts):
    return (ts, ConcreteMessage(cluster_id="sdwan", sender="n1", logical_ts=ts,
                                msg_type=msg_type, payload=payload))


class ScriptedTransport:
    """Canned reply windows, recorded traffic.  No clock, no cluster."""

    def __init__(self, windows, term=3):
        self.windows = list(windows)
        self.term = term
        self.sent = []
        self.injected = []
        self.resets = 0

    def reset(self):
        self.resets += 1

    def exchange(self, msg):
        self.sent.append(msg)
        return self.windows.pop(0) if self.windows else []

    def inject(self, msg):
        self.injected.append(msg)

    def observe(self):
        return SimpleNamespace(term=self.term)


def scripted_proxy(windows, term=3, **kw):
    transport = ScriptedTransport(windows, term=term)
    return ClusterProxy(transport, ACFG, **kw), transport


PREQ_N1 = Symbol(PREQ, (NodeRef("n1", KNOWN),))
PREQ_SELF = Symbol(PREQ, (NodeRef("dummy", UNKNOWN),))
BREQ_FULL = Symbol(BREQ, (MEMBERS,))
RJREQ_SELF = Symbol(RJREQ, (NodeRef("dummy", UNKNOWN),))
RCONREQ_S = Symbol(RCONREQ, ())
RVREQ_CUR = Symbol(RVREQ, (NodeRef("n1", KNOWN), TERM_CURRENT))
RVREQ_HI = Symbol(RVREQ, (NodeRef("n1", KNOWN), TERM_HIGHER))
RCOM_ADD = Symbol(RCOMREQ, (DATA_APP, OP_ADD))


class TestSessionContext:
    def test_logical_clock_counts_up(self):
        ctx = SessionContext(cluster_id="c", self_id="d")
        assert [ctx.next_ts() for _ in range(4)] == [1, 2, 3, 4]

    def test_current_term_reuses_observation(self):
        ctx = SessionContext(cluster_id="c", self_id="d", observed_leader_term=7)
        assert ctx.vote_term(TERM_CURRENT) == 7
        assert ctx.vote_term(TERM_CURRENT) == 7

    def test_higher_terms_escalate(self):
        ctx = SessionContext(cluster_id="c", self_id="d", observed_leader_term=3)
        assert [ctx.vote_term(TERM_HIGHER) for _ in range(3)] == [4, 5, 6]

    def test_higher_tracks_later_observations(self):
        ctx = SessionContext(cluster_id="c", self_id="d", observed_leader_term=3)
        assert ctx.vote_term(TERM_HIGHER) == 4
        ctx.observed_leader_term = 10
        assert ctx.vote_term(TERM_HIGHER) == 11
        assert ctx.vote_term(TERM_CURRENT) == 10


class TestWindowCanonicalization:
    def test_replies_sorted_by_timestamp(self):
        win = [wire("RaftConfigureResponse", {}, 5),
               wire("ProbeResponse", {"node": "n1", "status": ALIVE}, 2)]
        proxy, _ = scripted_proxy([win])
        out = proxy.send_symbol(RCONREQ_S)
        assert [s.tag for s in out] == [PRES, RCONRES]

    def test_timestamp_ties_break_on_symbol_order(self):
        win = [wire("RaftConfigureResponse", {}, 4),
               wire("ProbeResponse", {"node": "n1", "status": ALIVE}, 4)]
        proxy, _ = scripted_proxy([win])
        out = proxy.send_symbol(RCONREQ_S)
        assert [s.tag for s in out] == [PRES, RCONRES]

    def test_empty_window_is_no_response(self):
        proxy, _ = scripted_proxy([[]])
        assert proxy.send_symbol(PREQ_N1) == (NO_RESPONSE,)

    def test_late_reply_lands_in_next_window(self):
        win2 = [wire("ProbeResponse", {"node": "n1", "status": ALIVE}, 2)]
        proxy, _ = scripted_proxy([[], win2])
        assert proxy.send_symbol(PREQ_N1) == (NO_RESPONSE,)
        out = proxy.send_symbol(RCONREQ_S)
        assert [s.tag for s in out] == [PRES]

    def test_unknown_reply_type_raises(self):
        proxy, _ = scripted_proxy([[wire("Bogus", {}, 1)]])
        with pytest.raises(DecodeError):
            proxy.send_symbol(PREQ_N1)

    def test_query_returns_one_word_per_position(self):
        proxy, transport = scripted_proxy([[], [], []])
        out = proxy.query([PREQ_N1, RCONREQ_S, BREQ_FULL])
        assert out == ((NO_RESPONSE,), (NO_RESPONSE,), (NO_RESPONSE,))
        assert transport.resets == 1 and len(transport.sent) == 3


class TestKeeper:
    KEEPALIVE_WIN = [
        wire("ProbeRequest", {"target": "dummy"}, 1),
        wire("RaftAppendRequest", {"term": 1, "entries": []}, 2),
        wire("RaftCommandResponse", {}, 3),
    ]

    def test_keepalives_filtered_from_output(self):
        proxy, _ = scripted_proxy([list(self.KEEPALIVE_WIN)])
        out = proxy.send_symbol(RCOM_ADD)
        assert [s.tag for s in out] == [RCOMRES]

    def test_keeper_answers_probe_and_heartbeat(self):
        proxy, transport = scripted_proxy([list(self.KEEPALIVE_WIN)])
        proxy.send_symbol(RCOM_ADD)
        assert proxy.keepalives_answered == 2
        types = [m.msg_type for m in transport.injected]
        assert types == ["ProbeResponse", "RaftAppendResponse"]
        assert transport.injected[0].payload == {"node": "dummy", "status": ALIVE}

    def test_keeper_replies_use_the_session_clock(self):
        proxy, transport = scripted_proxy([list(self.KEEPALIVE_WIN)])
        proxy.send_symbol(RCOM_ADD)
        sent_ts = transport.sent[-1].logical_ts
        injected_ts = [m.logical_ts for m in transport.injected]
        assert injected_ts == sorted(injected_ts)
        assert all(ts > sent_ts for ts in injected_ts)

    def test_keeper_can_be_disabled(self):
        proxy, transport = scripted_proxy([list(self.KEEPALIVE_WIN)], auto_keeper=False)
        out = proxy.send_symbol(RCOM_ADD)
        assert [s.tag for s in out] == [RCOMRES]  # still filtered from the word
        assert transport.injected == []

    def test_transport_without_inject_is_fine(self):
        transport = ScriptedTransport([list(self.KEEPALIVE_WIN)])
        slim = SimpleNamespace(reset=transport.reset, exchange=transport.exchange,
                               observe=transport.observe)
        proxy = ClusterProxy(slim, ACFG)
        out = proxy.send_symbol(RCOM_ADD)
        assert [s.tag for s in out] == [RCOMRES]
        assert proxy.keepalives_answered == 0


class TestSessionCoupling:
    def test_current_vote_uses_observed_term(self):
        proxy, transport = scripted_proxy([[]], term=9)
        proxy.send_symbol(RVREQ_CUR)
        payload = transport.sent[0].payload
        assert payload["term"] == 9 and payload["base_term"] == 9

    def test_higher_votes_escalate_per_session(self):
        proxy, transport = scripted_proxy([[], [], []], term=4)
        proxy.query([RVREQ_HI, RVREQ_HI, RVREQ_HI])
        terms = [m.payload["term"] for m in transport.sent]
        assert terms == [5, 6, 7]

    def test_reset_restarts_clock_and_terms(self):
        proxy, transport = scripted_proxy([[], [], [], []], term=4)
        proxy.query([RVREQ_HI])
        proxy.query([RVREQ_HI])
        assert [m.payload["term"] for m in transport.sent] == [5, 5]
        assert [m.logical_ts for m in transport.sent] == [1, 1]

    def test_sent_timestamps_strictly_increase_within_session(self):
        proxy, transport = scripted_proxy([[], [], []])
        proxy.query([PREQ_N1, BREQ_FULL, RCONREQ_S])
        ts = [m.logical_ts for m in transport.sent]
        assert ts == sorted(set(ts))


def sim_proxy(vulns=(), seed=42, **kw):
    cfg = ClusterConfig(members=MEMBERS, vulnerabilities=frozenset(vulns), seed=seed, **kw)
    handle = spawn_cluster(cfg)
    return ClusterProxy(InProcessTransport(handle), default_alphabet(cfg))


class TestAgainstSimulator:
    def test_hardened_ladder_query(self):
        proxy = sim_proxy()
        out = proxy.query([BREQ_FULL, RJREQ_SELF, RVREQ_CUR, RCOM_ADD,
                           RCONREQ_S, RCOM_ADD, RCONREQ_S])
        assert [s.tag for s in out[0]] == [BRES]
        assert out[1] == (NO_RESPONSE,)
        assert [s.tag for s in out[2]] == [RVRES] and out[2][0].params[0] == REJECTED
        assert out[3] == (NO_RESPONSE,)              # first command absorbed
        assert [s.tag for s in out[4]] == [RCONRES]  # session still live
        assert out[5] == (NO_RESPONSE,)              # second command locks
        assert out[6] == (NO_RESPONSE,)

    def test_announce_word_orders_by_timestamp(self):
        out = sim_proxy().query([PREQ_SELF])
        assert [s.tag for s in out[0]] == [PRES, BREQ]

    def test_queries_are_reset_isolated(self):
        proxy = sim_proxy()
        word = [BREQ_FULL, RCONREQ_S]
        first = proxy.query(word)
        proxy.query([Symbol(PRES, (NodeRef("n1", KNOWN), DEAD))])  # lock a session
        assert proxy.query(word) == first

    def test_random_words_replay_identically(self):
        alphabet = enumerate_input_alphabet(ACFG)
        rng = random.Random(7)
        words = [[rng.choice(alphabet) for _ in range(rng.randint(1, 6))]
                 for _ in range(25)]
        a = sim_proxy(["unauth_join", "seize_leader"])
        b = sim_proxy(["unauth_join", "seize_leader"])
        for word in words:
            assert a.query(word) == b.query(word), [symbol_label(s) for s in word]

    def test_keepalive_transparency_for_admitted_peer(self):
        proxy = sim_proxy(["unauth_join"])
        word = [BREQ_FULL, RJREQ_SELF] + [RCOM_ADD] * 6
        out = proxy.query(word)
        assert [s.tag for s in out[1]] == [RJRES]
        for reaction in out[2:]:
            assert [s.tag for s in reaction] == [RCOMRES]
        assert proxy.keepalives_answered > 0

    def test_seize_vote_approved_via_proxy(self):
        proxy = sim_proxy(["seize_leader"])
        out = proxy.query([RVREQ_HI])
        assert [s.tag for s in out[0]] == [RVRES]
        assert out[0][0].params[0] == APPROVED
        assert proxy.observe().leader == "n1"

    def test_stats_counters(self):
        proxy = sim_proxy()
        proxy.query([PREQ_N1, RCONREQ_S])
        proxy.query([PREQ_N1])
        assert proxy.resets == 2
        assert proxy.symbols_sent == 3
        assert proxy.transport.ticks_advanced == 3 * 5
