"""Bridge between abstract protocol symbols and a live cluster endpoint.

The proxy owns the sender-side session state (logical clock, vote terms),
turns each input symbol into one concrete message, delivers it through a
transport, collects the reply window, and collapses it into a canonical
output word.  Keep-alive traffic aimed at the controlled identity is
answered politely in the background and never surfaces in output words, so
query results depend only on protocol-relevant reactions.

A transport is any object with:

``reset()``
    Put the cluster back into its converged baseline state.
``exchange(msg) -> list[(logical_ts, ConcreteMessage)]``
    Deliver one message and return everything the cluster emitted during
    the fixed observation window that follows it.
``observe() -> ClusterObservation``
    Read the cluster health snapshot without disturbing it.
``inject(msg)`` (optional)
    Deliver a message without opening an observation window; used for
    keeper replies to keep-alive probes.
"""
from __future__ import annotations

import itertools
import socket
import socketserver
import threading
from dataclasses import dataclass, field

from .alphabet import (
    ALIVE, PREQ, PRES, RAREQ, RARES, AlphabetConfig, ConcreteMessage,
    FrameError, OutputWord, Symbol, TERM_CURRENT, canonical_output, decode,
    encode, frame_encode, is_keepalive, message_from_wire, read_frame,
)
from .sulsim import ClusterHandle, ClusterObservation


@dataclass
class SessionContext:
    """Sender-side protocol session state.

    Keeps the per-session logical clock strictly increasing and derives
    ballot terms for vote requests: "current" reuses the term observed at
    session start, "higher" always outbids both that term and any ballot
    this session has already sent.
    """

    cluster_id: str
    self_id: str
    observed_leader_term: int = 0
    _ts: int = field(default=0, repr=False)
    _last_sent_term: int | None = field(default=None, repr=False)

    def next_ts(self) -> int:
        self._ts += 1
        return self._ts

    def vote_term(self, kind: str) -> int:
        if kind == TERM_CURRENT:
            return self.observed_leader_term
        base = self.observed_leader_term
        if self._last_sent_term is not None and self._last_sent_term > base:
            base = self._last_sent_term
        self._last_sent_term = base + 1
        return self._last_sent_term


class InProcessTransport:
    """Drive a simulated cluster handle directly, no sockets involved.

    When ``frame_log`` is a list, every protocol message crossing the
    transport is appended as ``(direction, frame_bytes)`` with direction
    "send" or "recv", so in-process runs leave the same wire-level record a
    socket run would.
    """

    def __init__(self, handle: ClusterHandle, frame_log: list | None = None):
        self.handle = handle
        self.window_ticks = handle.cfg.heartbeat_threshold
        self.ticks_advanced = 0
        self.frame_log = frame_log

    def reset(self):
        self.handle.reset()
        self.handle.run_until_steady()

    def exchange(self, msg):
        self._log("send", msg)
        self.handle.deliver(msg)
        self.ticks_advanced += self.window_ticks
        events = self.handle.tick(self.window_ticks)
        for _, reply in events:
            self._log("recv", reply)
        return events

    def inject(self, msg):
        self._log("send", msg)
        self.handle.deliver(msg)

    def observe(self):
        return self.handle.observe()

    def _log(self, direction, msg):
        if self.frame_log is not None:
            self.frame_log.append((direction, frame_encode(msg)))


class ClusterProxy:
    """Symbolic query frontend over a transport.

    ``query(word)`` is the membership oracle used by model learning: it
    resets the session, sends the word symbol by symbol, and returns one
    canonical output word per input position.
    """

    def __init__(self, transport, cfg: AlphabetConfig, auto_keeper: bool = True):
        self.transport = transport
        self.cfg = cfg
        self.auto_keeper = auto_keeper
        self.ctx: SessionContext | None = None
        self.resets = 0
        self.symbols_sent = 0
        self.keepalives_answered = 0

    def reset_session(self):
        """Fresh converged cluster, fresh session identity."""
        self.transport.reset()
        self.ctx = SessionContext(cluster_id=self.cfg.cluster_id, self_id=self.cfg.self_id)
        self.ctx.observed_leader_term = self.transport.observe().term
        self.resets += 1

    def send_symbol(self, sym: Symbol) -> OutputWord:
        """Send one input symbol; return the canonical reaction word."""
        if self.ctx is None:
            self.reset_session()
        msg = encode(sym, self.ctx)
        self.symbols_sent += 1
        events = [(ts, decode(m, self.cfg)) for ts, m in self.transport.exchange(msg)]
        if self.auto_keeper:
            for _, reply_sym in events:
                if is_keepalive(reply_sym, self.cfg):
                    self._answer_keepalive(reply_sym)
        return canonical_output(events, self.cfg)

    def query(self, word) -> tuple:
        """Output words for every position of ``word``, from a fresh session."""
        self.reset_session()
        return tuple(self.send_symbol(sym) for sym in word)

    def observe(self):
        return self.transport.observe()

    def _answer_keepalive(self, sym: Symbol):
        inject = getattr(self.transport, "inject", None)
        if inject is None:
            return
        if sym.tag == PREQ:
            reply = Symbol(PRES, (self.cfg.self_ref, ALIVE))
        elif sym.tag == RAREQ:
            reply = Symbol(RARES, ())
        else:
            return
        inject(encode(reply, self.ctx))
        self.keepalives_answered += 1


# ---------------------------------------------------------------------------
# TCP transport mode
# ---------------------------------------------------------------------------
# The same transport contract served over a localhost socket, so the cluster
# can live in another process.  Everything on the wire uses the
# length-prefixed JSON message codec; control verbs are reserved type names
# that can never collide with protocol wire types.

CTRL_RESET = "__reset__"
CTRL_DELIVER = "__deliver__"
CTRL_INJECT = "__inject__"
CTRL_OBSERVE = "__observe__"
CTRL_REPLY = "__reply__"
CTRL_DONE = "__done__"
CTRL_ERROR = "__error__"


class TransportError(RuntimeError):
    """Transport-level failure reported by, or while talking to, the far end."""


def _serve_request(cluster: ClusterHandle, msg: ConcreteMessage, seq) -> list:
    """Process one control frame; return the reply frames, errors included."""

    def ctrl(msg_type: str, payload: dict) -> ConcreteMessage:
        return ConcreteMessage(
            cluster_id=cluster.cfg.cluster_id, sender="__server__",
            logical_ts=next(seq), msg_type=msg_type, payload=payload)

    try:
        kind = msg.msg_type
        if kind == CTRL_RESET:
            cluster.reset()
            cluster.run_until_steady()
            return [ctrl(CTRL_DONE,
                         {"window_ticks": cluster.cfg.heartbeat_threshold})]
        if kind == CTRL_DELIVER:
            cluster.deliver(message_from_wire(msg.payload.get("frame")))
            events = cluster.tick(cluster.cfg.heartbeat_threshold)
            frames = [ctrl(CTRL_REPLY, {"tick": t, "frame": m.to_wire()})
                      for t, m in events]
            frames.append(ctrl(CTRL_DONE, {"count": len(events)}))
            return frames
        if kind == CTRL_INJECT:
            cluster.deliver(message_from_wire(msg.payload.get("frame")))
            return [ctrl(CTRL_DONE, {})]
        if kind == CTRL_OBSERVE:
            return [ctrl(CTRL_DONE, {"observation": cluster.observe().to_dict()})]
        return [ctrl(CTRL_ERROR, {"reason": f"unknown control type: {kind!r}"})]
    except Exception as exc:  # reported in-band; the connection stays usable
        return [ctrl(CTRL_ERROR, {"reason": str(exc)})]


class _RequestHandler(socketserver.StreamRequestHandler):
    def handle(self):
        seq = itertools.count(1)
        with self.server.session_lock:  # one owner session at a time
            while True:
                try:
                    msg = read_frame(self.rfile.read)
                except FrameError:
                    return  # malformed stream: drop this client, accept the next
                if msg is None:
                    return
                try:
                    for reply in _serve_request(self.server.cluster, msg, seq):
                        self.wfile.write(frame_encode(reply))
                    self.wfile.flush()
                except (BrokenPipeError, ConnectionResetError):
                    return


class _Server(socketserver.ThreadingTCPServer):
    # Handlers run in daemon threads so ``shutdown()`` never waits on a
    # client that is still connected; the session lock keeps cluster access
    # strictly serialized regardless.
    allow_reuse_address = True
    daemon_threads = True
    block_on_close = False


class ClusterServer:
    """Serve one cluster handle on a TCP socket.

    Connections are served one at a time, matching the single-owner session
    model; when a client disconnects the next one talks to the same
    (stateful) cluster.  Use ``with ClusterServer(handle) as srv:`` and read
    ``srv.address`` for the bound endpoint.  ``close()`` stops accepting new
    connections immediately; a client that is still connected keeps its
    session until it disconnects or the process exits.
    """

    def __init__(self, cluster: ClusterHandle, host: str = "127.0.0.1",
                 port: int = 0):
        self.cluster = cluster
        self._server = _Server((host, port), _RequestHandler)
        self._server.cluster = cluster
        self._server.session_lock = threading.Lock()
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple:
        return self._server.server_address

    def start(self) -> "ClusterServer":
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.05},
            daemon=True)
        self._thread.start()
        return self

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join()
            self._thread = None

    def __enter__(self) -> "ClusterServer":
        return self.start()

    def __exit__(self, *exc):
        self.close()


class TcpTransport:
    """Socket-backed counterpart of InProcessTransport.

    The server owns the virtual clock and runs the observation window; this
    side only frames messages and orders replies.  ``reset()`` must be
    called before the first ``exchange()`` (the proxy always does).
    """

    def __init__(self, address, timeout: float = 30.0,
                 frame_log: list | None = None):
        self._sock = socket.create_connection(address, timeout=timeout)
        self._rfile = self._sock.makefile("rb")
        self._seq = itertools.count(1)
        self.window_ticks: int | None = None
        self.ticks_advanced = 0
        self.frame_log = frame_log

    def close(self):
        self._rfile.close()
        self._sock.close()

    def __enter__(self) -> "TcpTransport":
        return self

    def __exit__(self, *exc):
        self.close()

    def reset(self):
        self._send(CTRL_RESET, {})
        done = self._read()
        self.window_ticks = done.payload["window_ticks"]

    def exchange(self, msg: ConcreteMessage) -> list:
        if self.window_ticks is None:
            raise TransportError("exchange before the first reset")
        self._log("send", msg)
        self._send(CTRL_DELIVER, {"frame": msg.to_wire()})
        events = []
        while True:
            reply = self._read()
            if reply.msg_type == CTRL_DONE:
                break
            if reply.msg_type != CTRL_REPLY:
                raise TransportError(f"unexpected frame type {reply.msg_type!r}")
            tick = reply.payload.get("tick")
            if not isinstance(tick, int) or isinstance(tick, bool):
                raise TransportError("reply frame carries no integer tick")
            inner = message_from_wire(reply.payload.get("frame"))
            self._log("recv", inner)
            events.append((tick, inner))
        self.ticks_advanced += self.window_ticks
        return events

    def inject(self, msg: ConcreteMessage):
        self._log("send", msg)
        self._send(CTRL_INJECT, {"frame": msg.to_wire()})
        self._read()

    def observe(self) -> ClusterObservation:
        self._send(CTRL_OBSERVE, {})
        done = self._read()
        return ClusterObservation.from_dict(done.payload["observation"])

    def _send(self, msg_type: str, payload: dict):
        frame = ConcreteMessage(
            cluster_id="__transport__", sender="__client__",
            logical_ts=next(self._seq), msg_type=msg_type, payload=payload)
        self._sock.sendall(frame_encode(frame))

    def _read(self) -> ConcreteMessage:
        msg = read_frame(self._rfile.read)
        if msg is None:
            raise TransportError("server closed the connection")
        if msg.msg_type == CTRL_ERROR:
            raise TransportError(msg.payload.get("reason", "unspecified failure"))
        return msg

    def _log(self, direction, msg):
        if self.frame_log is not None:
            self.frame_log.append((direction, frame_encode(msg)))
