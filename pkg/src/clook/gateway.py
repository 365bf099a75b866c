"""Live service gateway: newline-delimited JSON over TCP.

Clients stream {"type":"faces","count":n,"t":ms}; the gateway pushes
{"type":"display","tod_ms":...,"mode":"NORMAL|FAST|FROZEN|REMOTE"} at 10 Hz
plus step and presence events as they occur.  Two gateways can be peered;
the presence protocol then rides the same line-based transport.
"""

from __future__ import annotations

import json
import logging
import socket
import threading
import time
from typing import Optional

from .attention import Debouncer
from .motor import DrivePlanner, RingId, RingState
from .presence import (Hello, PeerConfig, PresenceNode, WireError,
                       decode_message, encode_message, local_civil_tod)
from .scenario import SimConfig
from .timewarp import WarpedClock

log = logging.getLogger("clook.gateway")

STALENESS_MS = 2000   # no faces message for this long -> synthesize 0 faces
TICK_MS = 100         # engine loop cadence; display push is every tick (10 Hz)


def _now_ms() -> int:
    # unix-epoch ms so that peered gateways share a comparable timeline
    return int(time.time() * 1000)


class Gateway:
    def __init__(self, listen=("127.0.0.1", 0), peer: Optional[tuple] = None,
                 tz_offset_minutes: int = 0, config: Optional[SimConfig] = None,
                 local_id: Optional[str] = None, peer_id: Optional[str] = None):
        self.config = config or SimConfig()
        self.tz = tz_offset_minutes
        self._listen_addr = listen
        self._peer_addr = peer
        self._local_id = local_id
        self._peer_id = peer_id
        self._lock = threading.RLock()
        self._clients: list[socket.socket] = []
        self._peer_sock: Optional[socket.socket] = None
        self._server: Optional[socket.socket] = None
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        now = _now_ms()
        self.engine = WarpedClock(policy=self.config.warp_policy,
                                  wall_anchor=now,
                                  displayed_anchor=local_civil_tod(self.tz, now))
        self.debouncer = Debouncer(self.config.hold_ms)
        gear = self.config.gear_train
        self.planner = DrivePlanner(gear)
        self.minute_ring = RingState(RingId.MINUTE, gear.steps_per_ring_rev)
        self.hour_ring = RingState(RingId.HOUR, gear.steps_per_ring_rev)
        self.node: Optional[PresenceNode] = None
        self._last_faces_ms: Optional[int] = None
        self._last_obs_ms = now - 1

    # -- lifecycle -------------------------------------------------------

    @property
    def address(self) -> tuple:
        return self._server.getsockname()

    def start(self):
        self._server = socket.create_server(self._listen_addr)
        self._server.settimeout(0.2)
        if self._peer_addr is not None:
            local = self._local_id or "%s:%d" % self.address
            peer = self._peer_id or "%s:%d" % tuple(self._peer_addr)
            cfg = PeerConfig(local_id=local, peer_id=peer,
                             tz_offset_minutes=self.tz)
            self.node = PresenceNode(cfg, lambda t: local_civil_tod(self.tz, t))
            self._spawn(self._peer_connect_loop)
        self._spawn(self._accept_loop)
        self._spawn(self._engine_loop)
        log.info("gateway listening on %s:%d", *self.address)

    def stop(self):
        self._stop.set()
        for th in self._threads:
            th.join(timeout=2)
        with self._lock:
            socks = list(self._clients)
            if self._peer_sock:
                socks.append(self._peer_sock)
        for s in socks + [self._server]:
            try:
                s.close()
            except OSError:
                pass

    def _spawn(self, fn):
        th = threading.Thread(target=fn, daemon=True)
        th.start()
        self._threads.append(th)

    # -- I/O ---------------------------------------------------------------

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                conn, addr = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            log.info("connection from %s", addr)
            with self._lock:
                self._clients.append(conn)
            self._spawn(lambda c=conn: self._ingest_loop(c))

    def _peer_connect_loop(self):
        while not self._stop.is_set():
            with self._lock:
                have = self._peer_sock is not None
            if have:
                time.sleep(0.2)
                continue
            try:
                s = socket.create_connection(tuple(self._peer_addr), timeout=1)
            except OSError:
                time.sleep(0.3)
                continue
            with self._lock:
                self._peer_sock = s
                out = self.node.start(_now_ms())
            self._dispatch_node_output(out, _now_ms())
            self._spawn(lambda c=s: self._ingest_loop(c, is_peer=True))

    def _ingest_loop(self, conn: socket.socket, is_peer: bool = False):
        buf = b""
        try:
            while not self._stop.is_set():
                data = conn.recv(4096)
                if not data:
                    break
                buf += data
                while b"\n" in buf:
                    line, buf = buf.split(b"\n", 1)
                    if line.strip():
                        is_peer = self._handle_line(conn, line.decode("utf-8",
                                                                      "replace"),
                                                    is_peer) or is_peer
        except OSError:
            pass
        finally:
            with self._lock:
                if conn in self._clients:
                    self._clients.remove(conn)
                if conn is self._peer_sock:
                    self._peer_sock = None

    def _handle_line(self, conn, line: str, is_peer: bool) -> bool:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            self._send(conn, {"type": "error", "error": f"bad json: {e.msg}"})
            return is_peer
        if isinstance(obj, dict) and obj.get("type") == "faces":
            if not isinstance(obj.get("count"), int) or obj["count"] < 0:
                self._send(conn, {"type": "error",
                                  "error": "faces requires count >= 0"})
                return is_peer
            self._on_faces(obj["count"])
            return is_peer
        if isinstance(obj, dict) and "v" in obj and self.node is not None:
            # presence traffic; remember the socket as the peer link
            try:
                msg = decode_message(line)
            except WireError as e:
                self._send(conn, {"type": "error", "error": str(e)})
                return is_peer
            with self._lock:
                if self._peer_sock is None:
                    self._peer_sock = conn
                    if conn in self._clients:
                        self._clients.remove(conn)
                if isinstance(msg, Hello) and not self.node.hello_sent:
                    self._dispatch_node_output(self.node.start(_now_ms()),
                                               _now_ms())
                t = _now_ms()
                out = self.node.on_message(msg, t)
            self._dispatch_node_output(out, t)
            return True
        self._send(conn, {"type": "error", "error": "unknown message type"})
        return is_peer

    def _send(self, conn, obj: dict):
        try:
            conn.sendall((json.dumps(obj, sort_keys=True,
                                     separators=(",", ":")) + "\n").encode())
        except OSError:
            pass

    def _broadcast(self, obj: dict):
        with self._lock:
            clients = list(self._clients)
        for c in clients:
            self._send(c, obj)

    def _send_peer(self, line: str):
        with self._lock:
            s = self._peer_sock
        if s is not None:
            try:
                s.sendall((line + "\n").encode())
            except OSError:
                pass

    # -- engine ------------------------------------------------------------

    def _on_faces(self, count: int):
        with self._lock:
            t = max(_now_ms(), self._last_obs_ms + 1)
            self._last_obs_ms = t
            self._last_faces_ms = t
            transitions = self.debouncer.observe(t, min(count, 64))
            self._apply_transitions(transitions)

    def _apply_transitions(self, transitions):
        # caller holds the lock
        outs = []
        for tt, state in transitions:
            self.engine.set_attention(state, tt)
            if self.node is not None:
                outs.append((self.node.on_local_attention(state, tt), tt))
        for out, tt in outs:
            self._dispatch_node_output(out, tt)

    def _dispatch_node_output(self, out, t: int):
        for msg in out.messages:
            self._send_peer(encode_message(msg))
        for ev_t, name, payload in out.events:
            self._broadcast({"type": "presence", "event": name, **payload})
        if out.override is not None:
            with self._lock:
                self.engine.apply_override(out.override.remote_tod_ms, t,
                                           out.override.duration_ms)

    def _engine_loop(self):
        next_push = _now_ms()
        while not self._stop.is_set():
            time.sleep(TICK_MS / 1000.0)
            t = _now_ms()
            with self._lock:
                self.engine.clear_expired_override(t)
                # dead camera must not pin the state at WATCHING
                if self._last_faces_ms is not None \
                        and t - self._last_faces_ms > STALENESS_MS:
                    self._last_faces_ms = None
                    tt = max(t, self._last_obs_ms + 1)
                    self._last_obs_ms = tt
                    self._apply_transitions(self.debouncer.observe(tt, 0))
                dl = self.debouncer.pending_deadline()
                if dl is not None and dl <= t:
                    self._apply_transitions(self.debouncer.flush(t))
                if self.node is not None:
                    out = self.node.tick(t)
                else:
                    out = None
                tod = self.engine.advance(t)
                mode = self.engine.mode(t)
                steps = []
                if self.config.motors_enabled:
                    for cmd in self.planner.plan(int(round(tod)), t):
                        steps.append({"type": "step",
                                      "ring": cmd.motor_id.value,
                                      "dir": cmd.direction.value,
                                      "steps": cmd.step_count})
            if out is not None:
                self._dispatch_node_output(out, t)
            if t >= next_push:
                push = {"type": "display", "tod_ms": int(tod), "mode": mode}
                if mode == "REMOTE" and self.node is not None \
                        and self.node.peer_hello is not None:
                    push["peer_tz_offset"] = self.node.peer_hello.tz_offset
                self._broadcast(push)
                next_push = t + TICK_MS
            for st in steps:
                self._broadcast(st)


def serve_forever(gateway: Gateway):
    gateway.start()
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        gateway.stop()
