"""Abstract message alphabet and wire codec for cluster East-West traffic.

The input alphabet is a finite set of abstract symbols covering the fourteen
message kinds exchanged between a cluster and a peer node (probe, bootstrap,
join, configure, vote, command, append), with every parameter drawn from a
small bounded domain so that the whole alphabet stays enumerable.  Outputs use
the same symbol shapes plus the reserved ``NoResponse`` letter, which is only
ever produced by window expiry and never travels on the wire.

Wire format: a 4-byte big-endian length prefix followed by UTF-8 canonical
JSON (stable key order) with the keys ``cluster_id``, ``sender``, ``ts``,
``type`` and ``payload``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

# Symbol tags, in stable enumeration order.
PREQ = "PReq"
PRES = "PRes"
BREQ = "BReq"
BRES = "BRes"
RJREQ = "RJReq"
RJRES = "RJRes"
RCONREQ = "RConReq"
RCONRES = "RConRes"
RVREQ = "RVReq"
RVRES = "RVRes"
RCOMREQ = "RComReq"
RCOMRES = "RComRes"
RAREQ = "RAReq"
RARES = "RARes"
NORESPONSE = "NoResponse"

TAG_ORDER = (
    PREQ, PRES, BREQ, BRES, RJREQ, RJRES, RCONREQ, RCONRES,
    RVREQ, RVRES, RCOMREQ, RCOMRES, RAREQ, RARES, NORESPONSE,
)
_TAG_INDEX = {t: i for i, t in enumerate(TAG_ORDER)}

WIRE_TYPES = {
    PREQ: "ProbeRequest",
    PRES: "ProbeResponse",
    BREQ: "BootstrapRequest",
    BRES: "BootstrapResponse",
    RJREQ: "RaftJoinRequest",
    RJRES: "RaftJoinResponse",
    RCONREQ: "RaftConfigureRequest",
    RCONRES: "RaftConfigureResponse",
    RVREQ: "RaftVoteRequest",
    RVRES: "RaftVoteResponse",
    RCOMREQ: "RaftCommandRequest",
    RCOMRES: "RaftCommandResponse",
    RAREQ: "RaftAppendRequest",
    RARES: "RaftAppendResponse",
}
_WIRE_TO_TAG = {v: k for k, v in WIRE_TYPES.items()}

KNOWN = "known"
UNKNOWN = "unknown"
ALIVE = "alive"
DEAD = "dead"
TERM_HIGHER = "higher"
TERM_CURRENT = "current"
APPROVED = "approved"
REJECTED = "rejected"
DATA_APP = "app"
DATA_TOPO = "topo"
OP_ADD = "add"
OP_MODIFY = "modify"
OP_REMOVE = "remove"

FRAME_KEYS = ("cluster_id", "sender", "ts", "type", "payload")
_LEN_PREFIX = struct.Struct(">I")
MAX_FRAME_BYTES = 1 << 20


class ConfigError(ValueError):
    """Invalid alphabet or cluster configuration."""


class DecodeError(ValueError):
    """A message or frame could not be decoded.  Never silently dropped."""


class FrameError(DecodeError):
    """Byte-level framing violation (bad length prefix, junk bytes)."""


@dataclass(frozen=True)
class NodeRef:
    """A node identity plus whether it belongs to the configured member set."""

    id: str
    kind: str

    def __post_init__(self):
        if self.kind not in (KNOWN, UNKNOWN):
            raise ConfigError(f"bad NodeRef kind: {self.kind!r}")


@dataclass(frozen=True)
class Symbol:
    """An abstract input or output letter: a tag plus bounded parameters."""

    tag: str
    params: tuple = ()

    def __str__(self):
        return symbol_label(self)


NO_RESPONSE = Symbol(NORESPONSE)

OutputWord = tuple  # tuple[Symbol, ...]


@dataclass(frozen=True)
class ConcreteMessage:
    """A single wire-level message prior to framing."""

    cluster_id: str
    sender: str
    logical_ts: int
    msg_type: str
    payload: dict = field(default_factory=dict)

    def to_wire(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "sender": self.sender,
            "ts": self.logical_ts,
            "type": self.msg_type,
            "payload": self.payload,
        }


@dataclass(frozen=True)
class AlphabetConfig:
    """Bounded domains that fix the concrete alphabet for one cluster."""

    members: tuple
    self_id: str
    cluster_id: str
    include_keepalive_as_others: bool = True
    unknown_id: str = "nz"

    def __post_init__(self):
        if not self.members:
            raise ConfigError("member set must not be empty")
        if len(set(self.members)) != len(self.members):
            raise ConfigError("duplicate member ids")
        if self.self_id in self.members:
            raise ConfigError("self_id must not be a configured member")
        if self.unknown_id in self.members or self.unknown_id == self.self_id:
            raise ConfigError("unknown_id collides with a real node id")
        if not self.cluster_id:
            raise ConfigError("cluster_id must be non-empty")

    @property
    def known_ref(self) -> NodeRef:
        return NodeRef(min(self.members), KNOWN)

    @property
    def unknown_ref(self) -> NodeRef:
        return NodeRef(self.unknown_id, UNKNOWN)

    @property
    def self_ref(self) -> NodeRef:
        return NodeRef(self.self_id, UNKNOWN)

    def node_ref(self, node_id: str) -> NodeRef:
        kind = KNOWN if node_id in self.members else UNKNOWN
        return NodeRef(node_id, kind)


def node_set_domain(cfg: AlphabetConfig) -> tuple:
    """The four node-set values used for bootstrap payloads."""
    members = tuple(sorted(cfg.members))
    return (
        (),
        (cfg.self_id,),
        members,
        tuple(sorted(members + (cfg.self_id,))),
    )


def input_domains(cfg: AlphabetConfig) -> dict:
    """Parameter domain per tag, in stable order.  Used by enumeration and
    by the mutation engine's argument swap."""
    any_node = (cfg.known_ref, cfg.unknown_ref, cfg.self_ref)
    sets = node_set_domain(cfg)
    return {
        PREQ: tuple((n,) for n in any_node),
        PRES: tuple((cfg.known_ref, s) for s in (ALIVE, DEAD)),
        BREQ: tuple((ns,) for ns in sets),
        BRES: tuple((ns,) for ns in sets),
        RJREQ: tuple((n,) for n in any_node),
        RJRES: ((),),
        RCONREQ: ((),),
        RCONRES: ((),),
        RVREQ: tuple(
            (n, t)
            for n in (cfg.known_ref, cfg.self_ref)
            for t in (TERM_HIGHER, TERM_CURRENT)
        ),
        RVRES: tuple((v,) for v in (APPROVED, REJECTED)),
        RCOMREQ: tuple(
            (d, o)
            for d in (DATA_APP, DATA_TOPO)
            for o in (OP_ADD, OP_MODIFY, OP_REMOVE)
        ),
        RCOMRES: ((),),
        RAREQ: ((),),
        RARES: ((),),
    }


def enumerate_input_alphabet(cfg: AlphabetConfig) -> list:
    """Every concrete input letter, fully expanded, in stable order."""
    domains = input_domains(cfg)
    out = []
    for tag in TAG_ORDER:
        if tag == NORESPONSE:
            continue
        for params in domains[tag]:
            out.append(Symbol(tag, params))
    return out


def symbol_sort_key(sym: Symbol):
    return (_TAG_INDEX.get(sym.tag, len(TAG_ORDER)), _param_key(sym.params))


def _param_key(params) -> tuple:
    key = []
    for p in params:
        if isinstance(p, NodeRef):
            key.append(("n", p.id, p.kind))
        elif isinstance(p, tuple):
            key.append(("s",) + p)
        else:
            key.append(("v", str(p)))
    return tuple(key)


def symbol_label(sym: Symbol) -> str:
    """Short human-readable label, e.g. ``PReq(n1)`` or ``BReq({n1,n2})``."""
    if sym.tag == NORESPONSE:
        return "-"
    parts = []
    for p in sym.params:
        if isinstance(p, NodeRef):
            parts.append(p.id)
        elif isinstance(p, tuple):
            parts.append("{" + ",".join(p) + "}")
        else:
            parts.append(str(p))
    if not parts:
        return sym.tag
    return f"{sym.tag}({','.join(parts)})"


def is_keepalive(sym: Symbol, cfg: AlphabetConfig) -> bool:
    """Keep-alive traffic: liveness probes aimed at ourselves and bare
    replication heartbeats."""
    if sym.tag == PREQ and sym.params and sym.params[0].id == cfg.self_id:
        return True
    return sym.tag == RAREQ


def canonical_output(events, cfg: AlphabetConfig | None = None) -> OutputWord:
    """Collapse raw (logical_ts, Symbol) events into one canonical word.

    Events are ordered by logical timestamp with a stable symbol ordering as
    the tie-break.  Keep-alive symbols are filtered when the configuration
    marks them as non-semantic.  An empty collection yields ``(NoResponse,)``.
    """
    kept = []
    for ts, sym in events:
        if cfg is not None and cfg.include_keepalive_as_others and is_keepalive(sym, cfg):
            continue
        kept.append((ts, sym))
    kept.sort(key=lambda e: (e[0], symbol_sort_key(e[1])))
    if not kept:
        return (NO_RESPONSE,)
    return tuple(sym for _, sym in kept)


# ---------------------------------------------------------------------------
# Abstract symbol <-> concrete message
# ---------------------------------------------------------------------------

def encode(sym: Symbol, ctx) -> ConcreteMessage:
    """Concretize an input symbol under a session context.

    ``ctx`` supplies identity (cluster_id, self_id), the logical clock and
    term tracking.  Every call consumes one logical timestamp, so timestamps
    strictly increase per sender session.
    """
    if sym.tag == NORESPONSE:
        raise ConfigError("NoResponse is not an input symbol")
    if sym.tag not in WIRE_TYPES:
        raise ConfigError(f"unknown symbol tag: {sym.tag!r}")
    payload = _encode_payload(sym, ctx)
    return ConcreteMessage(
        cluster_id=ctx.cluster_id,
        sender=ctx.self_id,
        logical_ts=ctx.next_ts(),
        msg_type=WIRE_TYPES[sym.tag],
        payload=payload,
    )


def _encode_payload(sym: Symbol, ctx) -> dict:
    tag, params = sym.tag, sym.params
    if tag == PREQ:
        return {"target": params[0].id}
    if tag == PRES:
        return {"node": params[0].id, "status": params[1]}
    if tag in (BREQ, BRES):
        return {"nodes": list(params[0])}
    if tag == RJREQ:
        return {"node": params[0].id}
    if tag == RVREQ:
        base = ctx.observed_leader_term
        term = ctx.vote_term(params[1])
        return {"candidate": params[0].id, "term": term, "base_term": base}
    if tag == RVRES:
        return {"verdict": params[0]}
    if tag == RCOMREQ:
        return {"data": params[0], "op": params[1]}
    if tag == RAREQ:
        return {"term": ctx.observed_leader_term, "entries": []}
    # RJRes, RConReq, RConRes, RComRes, RARes carry no parameters.
    return {}


def decode(msg: ConcreteMessage, cfg: AlphabetConfig) -> Symbol:
    """Map a concrete message back to its abstract symbol.

    Node ids outside the configured member set decode with kind=unknown.
    Unknown message types and malformed payloads raise DecodeError; nothing
    is silently dropped.  ``NoResponse`` is never decoded from the wire.
    """
    tag = _WIRE_TO_TAG.get(msg.msg_type)
    if tag is None:
        raise DecodeError(f"unknown message type: {msg.msg_type!r}")
    p = msg.payload
    if not isinstance(p, dict):
        raise DecodeError("payload must be an object")
    try:
        if tag == PREQ:
            return Symbol(tag, (cfg.node_ref(_req_str(p, "target")),))
        if tag == PRES:
            status = _req_str(p, "status")
            if status not in (ALIVE, DEAD):
                raise DecodeError(f"bad probe status: {status!r}")
            return Symbol(tag, (cfg.node_ref(_req_str(p, "node")), status))
        if tag in (BREQ, BRES):
            nodes = p.get("nodes")
            if not isinstance(nodes, list) or not all(isinstance(n, str) for n in nodes):
                raise DecodeError("bootstrap payload needs a list of node ids")
            return Symbol(tag, (tuple(sorted(nodes)),))
        if tag == RJREQ:
            return Symbol(tag, (cfg.node_ref(_req_str(p, "node")),))
        if tag == RVREQ:
            term = _req_int(p, "term")
            base = _req_int(p, "base_term")
            kind = TERM_HIGHER if term > base else TERM_CURRENT
            return Symbol(tag, (cfg.node_ref(_req_str(p, "candidate")), kind))
        if tag == RVRES:
            verdict = _req_str(p, "verdict")
            if verdict not in (APPROVED, REJECTED):
                raise DecodeError(f"bad vote verdict: {verdict!r}")
            return Symbol(tag, (verdict,))
        if tag == RCOMREQ:
            data = _req_str(p, "data")
            op = _req_str(p, "op")
            if data not in (DATA_APP, DATA_TOPO) or op not in (OP_ADD, OP_MODIFY, OP_REMOVE):
                raise DecodeError(f"bad command parameters: {data!r}/{op!r}")
            return Symbol(tag, (data, op))
    except DecodeError:
        raise
    except (KeyError, TypeError) as exc:  # defensive: malformed payload shapes
        raise DecodeError(f"malformed payload for {msg.msg_type}: {exc}") from exc
    return Symbol(tag)


def _req_str(payload: dict, key: str) -> str:
    val = payload.get(key)
    if not isinstance(val, str):
        raise DecodeError(f"payload field {key!r} must be a string")
    return val


def _req_int(payload: dict, key: str) -> int:
    val = payload.get(key)
    if not isinstance(val, int) or isinstance(val, bool):
        raise DecodeError(f"payload field {key!r} must be an integer")
    return val


# ---------------------------------------------------------------------------
# Framing
# ---------------------------------------------------------------------------

def frame_encode(msg: ConcreteMessage) -> bytes:
    """Length-prefixed canonical JSON frame for one message."""
    body = json.dumps(msg.to_wire(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _LEN_PREFIX.pack(len(body)) + body


def frame_decode(data: bytes) -> ConcreteMessage:
    """Parse exactly one frame.  Trailing bytes are a framing error."""
    msg, rest = split_frame(data)
    if rest:
        raise FrameError(f"{len(rest)} trailing bytes after frame")
    return msg


def split_frame(data: bytes):
    """Parse one frame off the front of ``data``; return (message, rest)."""
    if len(data) < _LEN_PREFIX.size:
        raise FrameError("frame shorter than length prefix")
    (length,) = _LEN_PREFIX.unpack_from(data)
    if length > MAX_FRAME_BYTES:
        raise FrameError(f"declared frame length {length} exceeds cap")
    end = _LEN_PREFIX.size + length
    if len(data) < end:
        raise FrameError("frame body truncated")
    return parse_frame_body(data[_LEN_PREFIX.size:end]), data[end:]


def parse_frame_body(body: bytes) -> ConcreteMessage:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"frame body is not canonical JSON: {exc}") from exc
    return message_from_wire(obj)


def message_from_wire(obj) -> ConcreteMessage:
    """Validate one decoded wire object and build the message."""
    if not isinstance(obj, dict):
        raise FrameError("frame body must be a JSON object")
    missing = [k for k in FRAME_KEYS if k not in obj]
    if missing:
        raise FrameError(f"frame missing keys: {missing}")
    if not isinstance(obj["cluster_id"], str) or not isinstance(obj["sender"], str):
        raise FrameError("cluster_id and sender must be strings")
    if not isinstance(obj["type"], str):
        raise FrameError("type must be a string")
    if not isinstance(obj["ts"], int) or isinstance(obj["ts"], bool):
        raise FrameError("ts must be an integer")
    if not isinstance(obj["payload"], dict):
        raise FrameError("payload must be an object")
    return ConcreteMessage(
        cluster_id=obj["cluster_id"],
        sender=obj["sender"],
        logical_ts=obj["ts"],
        msg_type=obj["type"],
        payload=obj["payload"],
    )


def read_frame(read) -> ConcreteMessage | None:
    """Read one frame through ``read(n) -> bytes`` (a blocking reader that
    returns fewer bytes only at end of stream).  Returns None on a clean end
    of stream at a frame boundary; raises FrameError if the stream ends
    mid-frame or the frame itself is invalid."""
    header = read(_LEN_PREFIX.size)
    if not header:
        return None
    if len(header) < _LEN_PREFIX.size:
        raise FrameError("stream ended inside length prefix")
    (length,) = _LEN_PREFIX.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise FrameError(f"declared frame length {length} exceeds cap")
    body = read(length)
    if len(body) < length:
        raise FrameError("stream ended inside frame body")
    return parse_frame_body(body)


# ---------------------------------------------------------------------------
# JSON-friendly symbol serialization (reports, stored machines, transcripts)
# ---------------------------------------------------------------------------

def symbol_to_obj(sym: Symbol) -> dict:
    params = []
    for p in sym.params:
        if isinstance(p, NodeRef):
            params.append({"node": p.id, "kind": p.kind})
        elif isinstance(p, tuple):
            params.append({"set": list(p)})
        else:
            params.append(p)
    return {"tag": sym.tag, "params": params}


def symbol_from_obj(obj: dict) -> Symbol:
    if not isinstance(obj, dict) or "tag" not in obj:
        raise DecodeError(f"bad symbol object: {obj!r}")
    params = []
    for p in obj.get("params", ()):
        if isinstance(p, dict) and "node" in p:
            params.append(NodeRef(p["node"], p.get("kind", UNKNOWN)))
        elif isinstance(p, dict) and "set" in p:
            params.append(tuple(sorted(p["set"])))
        else:
            params.append(p)
    return Symbol(obj["tag"], tuple(params))


def word_to_obj(word) -> list:
    return [symbol_to_obj(s) for s in word]


def word_from_obj(objs) -> tuple:
    return tuple(symbol_from_obj(o) for o in objs)
