import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from fallwatch.notify import DeliveryResult, alert_payload, notify
from fallwatch.stream import FallAlert


class _Receiver:
    """Local webhook endpoint with a scripted status sequence."""

    def __init__(self, statuses):
        self.statuses = list(statuses)
        self.bodies = []
        receiver = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                receiver.bodies.append(
                    (self.headers.get("Content-Type"), self.rfile.read(length))
                )
                status = receiver.statuses.pop(0) if receiver.statuses else 200
                self.send_response(status)
                self.send_header("Content-Length", "0")
                self.end_headers()

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_address[1]}/hook"

    def stop(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def alert():
    return FallAlert(event_time=12.5, probability=0.93, window_index=4, device_id="dev7")


def run_against(statuses, alert, **kwargs):
    receiver = _Receiver(statuses)
    try:
        result = notify(alert, receiver.url, base_delay_s=0.01, **kwargs)
    finally:
        receiver.stop()
    return result, receiver


def test_payload_keys_are_exact(alert):
    assert alert_payload(alert) == {
        "event": "fall_detected",
        "timestamp": 12.5,
        "probability": 0.93,
        "window_index": 4,
        "device_id": "dev7",
    }


def test_immediate_success_is_one_attempt(alert):
    result, receiver = run_against([200], alert)
    assert result == DeliveryResult(delivered=True, attempts=1, status_code=200)
    content_type, body = receiver.bodies[0]
    assert content_type == "application/json"
    assert json.loads(body) == alert_payload(alert)


def test_two_failures_then_success(alert):
    result, receiver = run_against([500, 503, 200], alert)
    assert result.delivered
    assert result.attempts == 3
    assert len(receiver.bodies) == 3


def test_persistent_failure_journals_the_alert(alert, tmp_path):
    journal = tmp_path / "alerts.jsonl"
    result, receiver = run_against([500, 500, 500], alert, journal_path=journal)
    assert not result.delivered
    assert result.attempts == 3
    assert result.error == "HTTP 500"
    entries = [json.loads(line) for line in journal.read_text().splitlines()]
    assert len(entries) == 1
    assert entries[0]["event"] == "fall_detected"
    assert entries[0]["window_index"] == 4
    assert entries[0]["delivery_error"] == "HTTP 500"


def test_unreachable_endpoint_fails_without_raising(alert, tmp_path):
    journal = tmp_path / "alerts.jsonl"
    result = notify(alert, "http://127.0.0.1:1/hook", base_delay_s=0.01, journal_path=journal)
    assert not result.delivered
    assert result.attempts == 3
    assert journal.exists()


def test_backoff_schedule_doubles(alert):
    sleeps = []
    receiver = _Receiver([500, 500, 200])
    try:
        notify(alert, receiver.url, base_delay_s=1.0, sleep=sleeps.append)
    finally:
        receiver.stop()
    assert sleeps == [1.0, 2.0]
