import json
import socket
import time

import pytest

from retnav.server import SessionServer, recv_message, replay_log, send_message
from retnav.service import Session, SessionConfig


def fast_session():
    # high replan cadence keeps the wall-clock test short
    return Session(config=SessionConfig(seed=0, tick_hz=200.0, replan_hz=10.0))


@pytest.fixture
def server(tmp_path):
    log_path = tmp_path / "events.jsonl"
    srv = SessionServer(host="127.0.0.1", port=0, session_factory=fast_session, log_path=log_path)
    srv.start()
    yield srv, log_path
    srv.stop()


def connect(srv):
    sock = socket.create_connection((srv.host, srv.port), timeout=10.0)
    return sock, sock.makefile("rb")


def collect_until(fh, predicate, timeout=30.0):
    deadline = time.monotonic() + timeout
    seen = []
    while time.monotonic() < deadline:
        msg = recv_message(fh)
        if msg is None:
            break
        seen.append(msg)
        if predicate(msg):
            return seen, msg
    raise AssertionError(f"condition not reached; saw {len(seen)} messages")


class TestTransport:
    def test_hello_first(self, server):
        srv, _ = server
        sock, fh = connect(srv)
        try:
            hello = recv_message(fh)
            assert hello["type"] == "hello"
            assert hello["proto_version"] == 1
            assert hello["camera"]["scale"] == pytest.approx(0.04)
        finally:
            sock.close()

    def test_click_goal_round_trip(self, server):
        srv, _ = server
        sock, fh = connect(srv)
        try:
            recv_message(fh)
            send_message(sock, {"type": "click_goal", "pixel": [320, 240]})
            _, ack = collect_until(fh, lambda m: m["type"] == "ack")
            assert ack["ok"]
            _, done = collect_until(fh, lambda m: m["type"] == "goal_reached")
            assert done["entry"]["landed"]
            assert done["entry"]["x_err_mm"] <= 0.05
        finally:
            sock.close()

    def test_rejected_command_leaves_state(self, server):
        srv, _ = server
        sock, fh = connect(srv)
        try:
            recv_message(fh)
            send_message(sock, {"type": "click_goal", "pixel": [639, 240]})
            _, ack = collect_until(fh, lambda m: m["type"] == "ack")
            assert not ack["ok"] and ack["error"] == "GoalOffRetina"
            _, tick = collect_until(fh, lambda m: m["type"] == "state_tick")
            assert tick["mode"] == "idle"
        finally:
            sock.close()

    def test_event_log_replays_identically(self, server):
        srv, log_path = server
        sock, fh = connect(srv)
        try:
            recv_message(fh)
            send_message(sock, {"type": "click_goal", "pixel": [320, 240]})
            collect_until(fh, lambda m: m["type"] == "goal_reached")
        finally:
            sock.close()
        time.sleep(0.3)  # let the server flush the tail of the log
        identical, compared, mismatches = replay_log(log_path, session_factory=fast_session)
        assert compared > 50
        assert identical, f"{mismatches} mismatching events"

    def test_burst_commands_acked_in_order(self, server):
        srv, _ = server
        sock, fh = connect(srv)
        try:
            recv_message(fh)
            burst = [
                {"type": "pause"},
                {"type": "set_weights", "w_s": 123.0},
                {"type": "resume"},
                {"type": "click_goal", "pixel": [320, 240]},
            ]
            for cmd in burst:
                send_message(sock, cmd)
            acks = []
            while len(acks) < len(burst):
                msg = recv_message(fh)
                assert msg is not None
                if msg["type"] == "ack":
                    acks.append(msg)
            seqs = [a["cmd_seq"] for a in acks]
            assert seqs == sorted(seqs)
            assert all(a["ok"] for a in acks)
        finally:
            sock.close()

    def test_replay_detects_tampering(self, server, tmp_path):
        srv, log_path = server
        sock, fh = connect(srv)
        try:
            recv_message(fh)
            send_message(sock, {"type": "pause"})
            collect_until(fh, lambda m: m["type"] == "ack")
        finally:
            sock.close()
        time.sleep(0.3)
        lines = log_path.read_text().splitlines()
        idx = next(i for i, ln in enumerate(lines) if '"state_tick"' in ln)
        rec = json.loads(lines[idx])
        rec["msg"]["sclera_residual_mm"] = 123.0
        lines[idx] = json.dumps(rec, sort_keys=True, separators=(",", ":"))
        tampered = tmp_path / "tampered.jsonl"
        tampered.write_text("\n".join(lines) + "\n")
        identical, _, mismatches = replay_log(tampered, session_factory=fast_session)
        assert not identical and mismatches >= 1
