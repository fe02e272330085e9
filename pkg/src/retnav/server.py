"""Socket transport and event-log replay for the session service.

Framing: each message is one UTF-8 JSON object prefixed by its byte length
in ASCII decimal plus a newline ("<len>\\n<payload>"). The first outbound
message is the hello event carrying proto_version, the camera scale, and the
session configuration.

Each accepted connection gets its own isolated Session. A reader thread
parses inbound commands into a queue; the session loop drains the queue
between ticks, so the applied order equals the acknowledged order. The event
log records every applied command and emitted event as JSON lines
({"dir": "in"|"out", "msg": ...}); replaying the "in" entries through a
fresh Session reproduces the "out" entries exactly.

The listen address comes from the --addr flag or the RETNAV_ADDR environment
variable (host:port).
"""

from __future__ import annotations

import json
import queue
import socket
import threading
import time

from .service import Session, SessionConfig, canonical


def build_session(init: dict) -> Session:
    """Construct a session from a recorded init payload (see EventLog)."""
    from .config import cost_params_from_config, oracle_from_config
    from .scenario import default_scenario

    values = init.get("config_values", {})
    session_config = SessionConfig(**init.get("session_config", {}))
    scenario = default_scenario(eye_jitter_mm=float(values.get("sim.eye_jitter_mm", 0.30)))
    cp = cost_params_from_config(values, sclera_point=scenario.sclera_point, eye=None)
    spec, _ = oracle_from_config(values)
    return Session(scenario=scenario, cp=cp, config=session_config, spec=spec)


def send_message(sock: socket.socket, msg: dict) -> None:
    payload = canonical(msg).encode("utf-8")
    sock.sendall(str(len(payload)).encode("ascii") + b"\n" + payload)


def recv_message(sock_file) -> dict | None:
    header = sock_file.readline()
    if not header:
        return None
    length = int(header.decode("ascii").strip())
    payload = sock_file.read(length)
    if payload is None or len(payload) != length:
        return None
    return json.loads(payload.decode("utf-8"))


class EventLog:
    """Append-only JSONL record of one session's traffic."""

    def __init__(self, path=None):
        self._fh = open(path, "a", encoding="utf-8") if path else None

    def record(self, direction: str, msg: dict) -> None:
        if self._fh is not None:
            self._fh.write(canonical({"dir": direction, "msg": msg}) + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


class SessionServer:
    """One session per connection, ticks anchored to wall clock.

    `init_payload` describes how to rebuild the session (recorded at the head
    of the event log so `replay_log` can reconstruct it without out-of-band
    knowledge); when given, it also becomes the session factory.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 7464,
        session_factory=Session,
        log_path=None,
        init_payload: dict | None = None,
    ):
        self.host = host
        self.port = port
        self.init_payload = init_payload
        if init_payload is not None:
            self.session_factory = lambda: build_session(init_payload)
        else:
            self.session_factory = session_factory
        self.log_path = log_path
        self._listener: socket.socket | None = None
        self._stop = threading.Event()

    def __enter__(self) -> "SessionServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def start(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self.host, self.port))
        self.port = self._listener.getsockname()[1]
        self._listener.listen()
        self._thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass

    def serve_forever(self) -> None:
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_connection, args=(conn,), daemon=True).start()

    def _serve_connection(self, conn: socket.socket) -> None:
        session = self.session_factory()
        log = EventLog(self.log_path)
        if self.init_payload is not None:
            log.record("init", self.init_payload)
        inbox: queue.Queue = queue.Queue()
        closed = threading.Event()

        def reader():
            with conn.makefile("rb") as fh:
                while not closed.is_set():
                    try:
                        msg = recv_message(fh)
                    except (ValueError, OSError):
                        break
                    if msg is None:
                        break
                    inbox.put(msg)
            closed.set()

        threading.Thread(target=reader, daemon=True).start()

        def emit(msg: dict) -> bool:
            log.record("out", msg)
            try:
                send_message(conn, msg)
                return True
            except OSError:
                closed.set()
                return False

        try:
            emit(session.hello())
            tick_period = 1.0 / session.config.tick_hz
            next_tick = time.monotonic() + tick_period
            budget_warned = 0
            while not closed.is_set() and not self._stop.is_set():
                while True:
                    try:
                        cmd = inbox.get_nowait()
                    except queue.Empty:
                        break
                    log.record("in", cmd)
                    t_cmd = time.monotonic()
                    for event in session.handle_command(cmd):
                        emit(event)
                    if time.monotonic() - t_cmd > 0.05 and budget_warned < 10:
                        # wall-clock diagnostics stay out of the event log so
                        # replays remain bit-identical
                        budget_warned += 1
                        print(f"[retnav] command exceeded the 50 ms budget: {cmd.get('type')}", flush=True)
                for event in session.tick():
                    emit(event)
                next_tick += tick_period
                delay = next_tick - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_tick = time.monotonic()
        finally:
            closed.set()
            log.close()
            try:
                conn.close()
            except OSError:
                pass


def replay_log(path, session_factory=Session) -> tuple[bool, int, int]:
    """Re-run a recorded session; returns (identical, compared, mismatches).

    The session is rebuilt from the log's init record when present (falling
    back to the supplied factory). The log is then walked in order: "in"
    records re-apply their command, and each recorded state_tick marks one
    tick() call (tick events are regenerated in place since other event types
    are byproducts of those two calls). The regenerated outbound stream is
    compared line-for-line with the recording.
    """
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    init = next((r["msg"] for r in records if r["dir"] == "init"), None)
    session = build_session(init) if init is not None else session_factory()
    expected = [canonical(r["msg"]) for r in records if r["dir"] == "out"]
    regenerated = [canonical(session.hello())]
    for rec in records:
        if rec["dir"] == "in":
            regenerated.extend(canonical(e) for e in session.handle_command(rec["msg"]))
        elif rec["msg"].get("type") == "state_tick":
            regenerated.extend(canonical(e) for e in session.tick())
    mismatches = sum(1 for a, b in zip(expected, regenerated) if a != b)
    mismatches += abs(len(expected) - len(regenerated))
    return mismatches == 0, min(len(expected), len(regenerated)), mismatches
