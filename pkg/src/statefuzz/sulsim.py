"""Deterministic simulated controller cluster driven by a virtual clock.

The simulator is the reference system under learning: a small cluster of
member nodes with leader election, periodic liveness probing, a replicated
app store, and a switch topology with static mastership.  All activity runs
on discrete virtual ticks from a seeded RNG, so cluster state and the
emitted message stream are a pure function of (config, seed, injected trace).

External peer sessions follow a strict handshake ladder:

    fresh -> configured (valid bootstrap info) -> join-wait (RaftJoinRequest)
          -> vote-seen (RaftVoteRequest) -> sync-probed (RaftCommandRequest)

Out-of-order protocol operations, spoofed death claims and append-stream
impersonation put the session into lockdown, where only liveness answers
survive.  Six vulnerability classes can be enabled as feature flags; each
converts one hardened reaction into the corresponding exploitable behavior
(admitting unknown joiners, trusting higher-term votes, per-request session
allocation, store clearing, trusting death gossip, unverified link updates).
"""
from __future__ import annotations

import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field

from .alphabet import (
    ALIVE, BREQ, BRES, DATA_APP, DATA_TOPO, DEAD, OP_ADD, OP_REMOVE, PREQ,
    PRES, RAREQ, RARES, RCOMREQ, RCOMRES, RCONREQ, RCONRES, RJREQ, RJRES,
    RVREQ, RVRES, APPROVED, REJECTED, AlphabetConfig, ConcreteMessage,
    ConfigError, DecodeError, Symbol, WIRE_TYPES, decode,
)

VULN_UNAUTH_JOIN = "unauth_join"
VULN_SEIZE_LEADER = "seize_leader"
VULN_SESSION_FLOOD = "session_flood"
VULN_CLEAR_STORE = "clear_store"
VULN_FAKE_MEMBER = "fake_member"
VULN_FAKE_LINK = "fake_link"

ALL_VULNERABILITIES = frozenset(
    {
        VULN_UNAUTH_JOIN,
        VULN_SEIZE_LEADER,
        VULN_SESSION_FLOOD,
        VULN_CLEAR_STORE,
        VULN_FAKE_MEMBER,
        VULN_FAKE_LINK,
    }
)

BASE_NODE_LOAD = 2
ERROR_TYPE = "__error__"


class SimulationError(RuntimeError):
    """Internal invariant broke (e.g. two leaders in one term)."""


@dataclass(frozen=True)
class ClusterConfig:
    """Static cluster deployment description."""

    members: tuple = ("n1", "n2", "n3", "n4")
    cluster_id: str = "sdwan"
    heartbeat_threshold: int = 5
    election_timeout_range: tuple = (10, 20)
    indirect_probe_fanout: int = 3
    vulnerabilities: frozenset = frozenset()
    seed: int = 42
    apps: tuple = ("fwd", "stats", "acl")
    session_ttl: int = 0          # 0 means 4 x heartbeat_threshold
    session_reap_interval: int = 0  # 0 means 2 x heartbeat_threshold
    fake_link_pair: tuple = ("a2", "b2")
    suppress_keepalives: bool = False  # test support: keep-alive transparency

    def __post_init__(self):
        if len(self.members) < 3:
            raise ConfigError("quorum impossible: need at least 3 members")
        if len(set(self.members)) != len(self.members):
            raise ConfigError("duplicate member ids")
        lo, hi = self.election_timeout_range
        if lo <= self.heartbeat_threshold:
            raise ConfigError("election timeout must exceed heartbeat threshold")
        if hi < lo:
            raise ConfigError("bad election timeout range")
        if hi - lo + 1 < len(self.members):
            raise ConfigError("election timeout range too narrow for distinct deadlines")
        if self.heartbeat_threshold < 2:
            raise ConfigError("heartbeat threshold must be at least 2 ticks")
        if self.indirect_probe_fanout < 1:
            raise ConfigError("indirect probe fanout must be positive")
        bad = set(self.vulnerabilities) - ALL_VULNERABILITIES
        if bad:
            raise ConfigError(f"unknown vulnerability flags: {sorted(bad)}")

    @property
    def ttl(self) -> int:
        return self.session_ttl or 4 * self.heartbeat_threshold

    @property
    def reap_interval(self) -> int:
        return self.session_reap_interval or 2 * self.heartbeat_threshold

    def digest(self) -> str:
        doc = {
            "members": list(self.members),
            "cluster_id": self.cluster_id,
            "heartbeat_threshold": self.heartbeat_threshold,
            "election_timeout_range": list(self.election_timeout_range),
            "vulnerabilities": sorted(self.vulnerabilities),
            "seed": self.seed,
            "apps": list(self.apps),
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]

    def to_dict(self) -> dict:
        return {
            "members": list(self.members),
            "cluster_id": self.cluster_id,
            "heartbeat_threshold": self.heartbeat_threshold,
            "election_timeout_range": list(self.election_timeout_range),
            "indirect_probe_fanout": self.indirect_probe_fanout,
            "vulnerabilities": sorted(self.vulnerabilities),
            "seed": self.seed,
            "apps": list(self.apps),
            "session_ttl": self.session_ttl,
            "session_reap_interval": self.session_reap_interval,
            "fake_link_pair": list(self.fake_link_pair),
            "suppress_keepalives": self.suppress_keepalives,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterConfig":
        kw = dict(doc)
        for key in ("members", "apps", "election_timeout_range", "fake_link_pair"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "vulnerabilities" in kw:
            kw["vulnerabilities"] = frozenset(kw["vulnerabilities"])
        return cls(**kw)


def default_alphabet(cfg: ClusterConfig, self_id: str = "dummy",
                     unknown_id: str = "nz") -> AlphabetConfig:
    """The alphabet induced by a cluster config plus a dummy-node identity."""
    return AlphabetConfig(
        members=tuple(sorted(cfg.members)),
        self_id=self_id,
        cluster_id=cfg.cluster_id,
        unknown_id=unknown_id,
    )


@dataclass
class ClusterObservation:
    """Externally visible cluster health snapshot.  Pure data, no handles."""

    leader: str | None
    term: int
    membership: dict
    apps: tuple
    links: tuple
    reachability: dict
    sessions_open: int
    resource_load: dict
    origin: str

    def to_dict(self) -> dict:
        return {
            "leader": self.leader,
            "term": self.term,
            "membership": dict(sorted(self.membership.items())),
            "apps": list(self.apps),
            "links": [list(l) for l in self.links],
            "reachability": {a: dict(sorted(row.items())) for a, row in sorted(self.reachability.items())},
            "sessions_open": self.sessions_open,
            "resource_load": dict(sorted(self.resource_load.items())),
            "origin": self.origin,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ClusterObservation":
        return cls(
            leader=doc["leader"],
            term=doc["term"],
            membership=dict(doc["membership"]),
            apps=tuple(doc["apps"]),
            links=tuple(tuple(l) for l in doc["links"]),
            reachability={a: dict(row) for a, row in doc["reachability"].items()},
            sessions_open=doc["sessions_open"],
            resource_load=dict(doc["resource_load"]),
            origin=doc["origin"],
        )


@dataclass
class _Node:
    role: str = "follower"
    term: int = 0
    voted_for: str | None = None
    votes: int = 0
    probe_idx: int = 0
    view: dict = field(default_factory=dict)


@dataclass
class _DummyPeer:
    address: str | None = None
    configured: bool = False   # valid member list presented
    join_wait: bool = False    # join request on file
    vote_seen: bool = False    # vote exchange recorded
    sync_probed: bool = False  # first command attempt recorded
    locked: bool = False       # hostile or out-of-order behavior
    admitted: bool = False     # full member (requires unauth_join)
    is_leader: bool = False    # seized leadership (requires seize_leader)


class ClusterHandle:
    """One live simulated cluster.  Use :func:`spawn_cluster` to create."""

    def __init__(self, cfg: ClusterConfig):
        self.cfg = cfg
        self._switches, self._real_links, self._mastership = _topology(cfg)
        self._decode_cfg = AlphabetConfig(
            members=tuple(sorted(cfg.members)),
            self_id="__sim_peer__",
            cluster_id=cfg.cluster_id,
            unknown_id="__sim_nz__",
        )
        self._steady_snapshot = None
        self.reset()

    # -- lifecycle ---------------------------------------------------------

    def reset(self):
        """Back to the initial configuration at tick 0, same seed."""
        cfg = self.cfg
        self.now = 0
        self._seq = 0
        self._events = []
        self._emissions = []
        self._emit_ts = 0
        self._last_in_ts = {}
        self.nodes = {m: _Node(view={p: ALIVE for p in cfg.members if p != m})
                      for m in cfg.members}
        self.leader_id = None
        self.cluster_term = 0
        self.leaders_by_term = {}
        self.apps = list(cfg.apps)
        self.fake_links = set()
        self.sessions = []
        self.dead_marks = {}
        self.flap_count = 0
        self.dummy = _DummyPeer()
        self.delivered = 0
        self.rejected_frames = 0
        rng = random.Random(cfg.seed)
        lo, hi = cfg.election_timeout_range
        deadlines = rng.sample(range(lo, hi + 1), len(cfg.members))
        for member, deadline in zip(cfg.members, deadlines):
            self._schedule(deadline, "election_check", member)
        self._schedule(cfg.heartbeat_threshold, "swim_round", None)
        self._schedule(cfg.reap_interval, "session_reap", None)

    def run_until_steady(self):
        """Advance until one leader exists and liveness rounds are underway.

        The post-convergence state is cached: later calls restore the cached
        snapshot, which is equivalent to re-simulating from the same seed
        (asserted by tests) but far cheaper.
        """
        if self._steady_snapshot is not None:
            self._restore(self._steady_snapshot)
            return
        limit = 3 * self.cfg.election_timeout_range[1]
        while self.leader_id is None:
            if self.now > limit:
                raise SimulationError("cluster failed to elect a leader in time")
            self.tick(1)
        self.tick(2)  # let vote traffic drain
        self._emissions.clear()
        self._steady_snapshot = self._snapshot()

    def _snapshot(self):
        return {
            "now": self.now,
            "seq": self._seq,
            "events": list(self._events),
            "emit_ts": self._emit_ts,
            "nodes": {
                m: (n.role, n.term, n.voted_for, n.votes, n.probe_idx, dict(n.view))
                for m, n in self.nodes.items()
            },
            "leader_id": self.leader_id,
            "cluster_term": self.cluster_term,
            "leaders_by_term": dict(self.leaders_by_term),
            "apps": list(self.apps),
        }

    def _restore(self, snap):
        self.now = snap["now"]
        self._seq = snap["seq"]
        self._events = list(snap["events"])
        self._emissions = []
        self._emit_ts = snap["emit_ts"]
        self._last_in_ts = {}
        self.nodes = {
            m: _Node(role=r, term=t, voted_for=v, votes=vc, probe_idx=pi, view=dict(view))
            for m, (r, t, v, vc, pi, view) in snap["nodes"].items()
        }
        self.leader_id = snap["leader_id"]
        self.cluster_term = snap["cluster_term"]
        self.leaders_by_term = dict(snap["leaders_by_term"])
        self.apps = list(snap["apps"])
        self.fake_links = set()
        self.sessions = []
        self.dead_marks = {}
        self.flap_count = 0
        self.dummy = _DummyPeer()
        self.delivered = 0
        self.rejected_frames = 0

    # -- virtual clock -----------------------------------------------------

    def tick(self, n: int = 1):
        """Advance the clock ``n`` ticks; return [(tick, message)] emitted to
        the external peer during the advance."""
        for _ in range(n):
            self.now += 1
            while self._events and self._events[0][0] <= self.now:
                _, _, kind, data = heapq.heappop(self._events)
                self._handle_event(kind, data)
        out = self._emissions
        self._emissions = []
        return out

    def _schedule(self, at: int, kind: str, data):
        self._seq += 1
        heapq.heappush(self._events, (at, self._seq, kind, data))

    # -- event handlers ----------------------------------------------------

    def _handle_event(self, kind, data):
        if kind == "election_check":
            self._election_check(data)
        elif kind == "vote_request":
            self._vote_request(*data)
        elif kind == "vote_grant":
            self._vote_grant(*data)
        elif kind == "swim_round":
            self._swim_round()
            self._schedule(self.now + self.cfg.heartbeat_threshold, "swim_round", None)
        elif kind == "session_reap":
            self._session_reap()
            self._schedule(self.now + self.cfg.reap_interval, "session_reap", None)
        elif kind == "heal_member":
            node, mark = data
            if self.dead_marks.get(node) == mark:
                del self.dead_marks[node]
                self.flap_count += 1
        elif kind == "reply":
            self._emissions.append((self.now, data))

    def _election_check(self, member):
        if self.leader_id is not None:
            return
        node = self.nodes[member]
        if node.role != "follower":
            return
        node.role = "candidate"
        node.term += 1
        node.voted_for = member
        node.votes = 1
        for peer in self.cfg.members:
            if peer != member:
                self._schedule(self.now + 1, "vote_request", (member, peer, node.term))

    def _vote_request(self, candidate, peer, term):
        node = self.nodes[peer]
        if term > node.term:
            node.term = term
            node.voted_for = candidate
            if node.role == "candidate":
                node.role = "follower"
            self._schedule(self.now + 1, "vote_grant", (candidate, term))

    def _vote_grant(self, candidate, term):
        node = self.nodes[candidate]
        if node.role != "candidate" or node.term != term or self.leader_id is not None:
            return
        node.votes += 1
        if node.votes * 2 > len(self.cfg.members):
            self._set_leader(candidate, term)

    def _set_leader(self, leader, term):
        if term < self.cluster_term:
            raise SimulationError("term went backwards")
        prior = self.leaders_by_term.get(term)
        if prior is not None and prior != leader:
            raise SimulationError(f"two leaders in term {term}: {prior}, {leader}")
        self.leaders_by_term[term] = leader
        self.leader_id = leader
        self.cluster_term = term
        for m, node in self.nodes.items():
            node.term = term
            node.role = "leader" if m == leader else "follower"
            node.votes = 0

    def _swim_round(self):
        # Internal liveness probing is modeled as direct view refresh; it
        # generates external traffic only toward an admitted dummy peer.
        for m, node in self.nodes.items():
            peers = [p for p in self.cfg.members if p != m]
            node.probe_idx = (node.probe_idx + 1) % len(peers)
        d = self.dummy
        if d.admitted and d.address and not self.cfg.suppress_keepalives:
            self._emit(Symbol(PREQ, ()), payload={"target": d.address})
            self._emit(Symbol(RAREQ, ()), payload={"term": self.cluster_term, "entries": []})

    def _session_reap(self):
        if self.sessions and self.now - self.sessions[0] >= self.cfg.ttl:
            self.sessions.pop(0)

    # -- message intake ----------------------------------------------------

    def deliver(self, msg: ConcreteMessage):
        """Inject one external message.  Replies surface via :meth:`tick`.

        Malformed messages are rejected with an error emission, never
        silently dropped and never fatal to the cluster.
        """
        if not isinstance(msg, ConcreteMessage):
            raise TypeError("deliver expects a ConcreteMessage")
        if msg.cluster_id != self.cfg.cluster_id:
            self._reject(f"wrong cluster id {msg.cluster_id!r}")
            return
        if not msg.sender or msg.sender in self.cfg.members:
            self._reject(f"bad sender {msg.sender!r}")
            return
        last = self._last_in_ts.get(msg.sender)
        if last is not None and msg.logical_ts <= last:
            self._reject(f"non-monotonic ts {msg.logical_ts} from {msg.sender}")
            return
        self._last_in_ts[msg.sender] = msg.logical_ts
        try:
            sym = decode(msg, self._decode_cfg)
        except DecodeError as exc:
            self._reject(str(exc))
            return
        self.delivered += 1
        self.dummy.address = msg.sender
        self._react(msg, sym)

    def _reject(self, reason: str):
        self.rejected_frames += 1
        self._emit_raw(ERROR_TYPE, {"reason": reason})

    # -- protocol reaction -------------------------------------------------

    def _react(self, msg: ConcreteMessage, sym: Symbol):
        tag = sym.tag
        vulns = self.cfg.vulnerabilities
        d = self.dummy
        members = set(self.cfg.members)

        if tag == PREQ:
            target = sym.params[0].id
            if target == msg.sender:
                # Contact announcement: liveness ack plus bootstrap invite.
                invite = tuple(sorted(members)) if VULN_UNAUTH_JOIN in vulns else ()
                self._emit(Symbol(PRES, ()), payload={"node": target, "status": ALIVE})
                self._emit(Symbol(BREQ, ()), payload={"nodes": list(invite)})
            elif target in members:
                if not d.locked and not (d.join_wait and not d.admitted):
                    status = DEAD if target in self.dead_marks else ALIVE
                    self._emit(Symbol(PRES, ()), payload={"node": target, "status": status})
            return

        if tag == PRES:
            node, status = sym.params[0].id, sym.params[1]
            if status == DEAD and node in members:
                if VULN_FAKE_MEMBER in vulns:
                    self.dead_marks[node] = self.now
                    self._schedule(
                        self.now + 2 * self.cfg.heartbeat_threshold,
                        "heal_member", (node, self.now),
                    )
                elif not d.locked:
                    # Hardened behavior: indirect probes refute the claim and
                    # the gossiping peer is distrusted.
                    d.locked = True
            return

        if tag in (BREQ, BRES):
            if d.locked:
                return
            presented = set(sym.params[0])
            if members <= presented:
                d.configured = True
            if tag == BREQ:
                content = sorted(members) if VULN_UNAUTH_JOIN in vulns else []
                self._emit(Symbol(BRES, ()), payload={"nodes": content})
            elif VULN_UNAUTH_JOIN in vulns and d.configured and d.join_wait and not d.admitted:
                self._admit_dummy()
                self._emit(Symbol(RJRES, ()), payload={})
            return

        if tag == RJREQ:
            if d.locked or sym.params[0].id != msg.sender:
                return
            if VULN_UNAUTH_JOIN in vulns:
                if d.admitted:
                    self._emit(Symbol(RJRES, ()), payload={})
                elif d.configured:
                    self._admit_dummy()
                    self._emit(Symbol(RJRES, ()), payload={})
                else:
                    d.join_wait = True
            elif d.configured:
                d.join_wait = True  # held for evaluation, never granted
            else:
                d.locked = True  # join before configuration is hostile
            return

        if tag == RCONREQ:
            if not d.locked and (d.configured or d.admitted):
                self._emit(Symbol(RCONRES, ()), payload={})
            return

        if tag == RVREQ:
            if d.locked:
                return
            term = msg.payload.get("term", 0)
            candidate = sym.params[0].id
            if VULN_SEIZE_LEADER in vulns and isinstance(term, int) and term > self.cluster_term:
                new_leader = candidate if candidate in members else msg.sender
                self._set_leader_external(new_leader, term)
                self._emit(Symbol(RVRES, ()), payload={"verdict": APPROVED})
            elif d.join_wait and not d.vote_seen:
                d.vote_seen = True
                self._emit(Symbol(RVRES, ()), payload={"verdict": REJECTED})
            elif d.vote_seen:
                pass  # ballot already recorded for this evaluation
            else:
                self._emit(Symbol(RVRES, ()), payload={"verdict": REJECTED})
            return

        if tag == RCOMREQ:
            if d.locked:
                return
            data, op = sym.params
            consumed = False
            if VULN_SESSION_FLOOD in vulns:
                self.sessions.append(self.now)
                consumed = True
            if VULN_CLEAR_STORE in vulns and (data, op) == (DATA_APP, OP_REMOVE):
                self.apps = []
                consumed = True
            if VULN_FAKE_LINK in vulns and (data, op) == (DATA_TOPO, OP_ADD):
                self.fake_links.add(tuple(self.cfg.fake_link_pair))
                consumed = True
            if consumed or d.admitted:
                self._emit(Symbol(RCOMRES, ()), payload={})
            elif d.join_wait and d.vote_seen and not d.sync_probed:
                d.sync_probed = True
            else:
                d.locked = True
            return

        if tag == RAREQ:
            if d.locked:
                return
            if d.is_leader:
                self._emit(Symbol(RARES, ()), payload={})
            elif not d.admitted:
                d.locked = True  # append-stream impersonation
            return

        # Response-type letters (RJRes, RConRes, RVRes, RComRes, RARes) and
        # alive gossip arriving unsolicited are ignored.

    def _admit_dummy(self):
        self.dummy.admitted = True

    def _set_leader_external(self, leader, term):
        if leader in self.cfg.members:
            self._set_leader(leader, term)
            self.dummy.is_leader = False
        else:
            if term < self.cluster_term:
                raise SimulationError("term went backwards")
            prior = self.leaders_by_term.get(term)
            if prior is not None and prior != leader:
                raise SimulationError(f"two leaders in term {term}")
            self.leaders_by_term[term] = leader
            self.cluster_term = term
            self.leader_id = leader
            self.dummy.is_leader = True
            for node in self.nodes.values():
                node.term = term
                node.role = "follower"

    # -- emission ----------------------------------------------------------

    def _emit(self, sym: Symbol, payload: dict):
        self._emit_raw(WIRE_TYPES[sym.tag], payload)

    def _emit_raw(self, msg_type: str, payload: dict):
        self._emit_ts += 1
        sender = self.leader_id if self.leader_id in self.nodes else self.cfg.members[0]
        msg = ConcreteMessage(
            cluster_id=self.cfg.cluster_id,
            sender=sender,
            logical_ts=self._emit_ts,
            msg_type=msg_type,
            payload=payload,
        )
        self._schedule(self.now + 1, "reply", msg)

    # -- observation -------------------------------------------------------

    def observe(self) -> ClusterObservation:
        """Health snapshot.  Pure read, no clock movement, no side effects."""
        membership = {
            m: (DEAD if m in self.dead_marks else ALIVE) for m in self.cfg.members
        }
        if self.dummy.admitted and self.dummy.address:
            membership[self.dummy.address] = ALIVE
        links = tuple(sorted(self._real_links | self.fake_links))
        load = {}
        session_host = self.leader_id if self.leader_id in self.nodes else self.cfg.members[0]
        for m in self.cfg.members:
            load[m] = BASE_NODE_LOAD + (len(self.sessions) if m == session_host else 0)
        return ClusterObservation(
            leader=self.leader_id,
            term=self.cluster_term,
            membership=membership,
            apps=tuple(self.apps),
            links=links,
            reachability=self._reachability(),
            sessions_open=len(self.sessions),
            resource_load=load,
            origin=self.cfg.digest(),
        )

    def _reachability(self) -> dict:
        poisoned_pairs = set()
        if self.fake_links:
            with_fake = self._real_links | self.fake_links
            for a in self._switches:
                for b in self._switches:
                    if a >= b:
                        continue
                    if _bfs_dist(with_fake, a, b) < _bfs_dist(self._real_links, a, b):
                        na, nb = self._mastership[a], self._mastership[b]
                        if na != nb:
                            poisoned_pairs.add(frozenset((na, nb)))
        out = {}
        for a in self.cfg.members:
            row = {}
            for b in self.cfg.members:
                row[b] = not (a != b and frozenset((a, b)) in poisoned_pairs)
            out[a] = row
        return out

    def session_fingerprint(self) -> tuple:
        """Canonical projection of everything that shapes replies to the
        external peer.  Used by exhaustive model construction in tests."""
        d = self.dummy
        return (
            d.configured, d.join_wait, d.vote_seen, d.sync_probed, d.locked,
            d.admitted, d.is_leader, self.leader_id, self.cluster_term,
            tuple(sorted(self.dead_marks)), tuple(self.apps),
            tuple(sorted(self.fake_links)),
        )


def _topology(cfg: ClusterConfig):
    switches = ("a1", "a2", "b1", "b2")
    real_links = {("a1", "a2"), ("a2", "b1"), ("b1", "b2")}
    mastership = {
        "a1": cfg.members[0],
        "a2": cfg.members[0],
        "b1": cfg.members[1],
        "b2": cfg.members[1],
    }
    return switches, real_links, mastership


def _bfs_dist(links, start, goal) -> int:
    if start == goal:
        return 0
    adj = {}
    for x, y in links:
        adj.setdefault(x, []).append(y)
        adj.setdefault(y, []).append(x)
    frontier = [start]
    seen = {start}
    dist = 0
    while frontier:
        dist += 1
        nxt = []
        for node in frontier:
            for peer in adj.get(node, ()):
                if peer == goal:
                    return dist
                if peer not in seen:
                    seen.add(peer)
                    nxt.append(peer)
        frontier = nxt
    return 10 ** 9


def spawn_cluster(cfg: ClusterConfig) -> ClusterHandle:
    """Create a cluster at virtual tick 0.  Tick it (or call
    ``run_until_steady``) to elect a leader."""
    return ClusterHandle(cfg)
