"""Webhook delivery of fall alerts.

POSTs the JSON payload with up to three attempts and exponential backoff
starting at one second.  Failed deliveries are never dropped silently:
they are journaled to an append-only JSON-lines file when a journal path
is configured.
"""

import json
import time
from dataclasses import dataclass

import requests

from .stream import FallAlert

WEBHOOK_ENV_VAR = "FALLWATCH_WEBHOOK_URL"


@dataclass(frozen=True)
class DeliveryResult:
    delivered: bool
    attempts: int
    status_code: int | None = None
    error: str | None = None


def alert_payload(alert: FallAlert) -> dict:
    return {
        "event": "fall_detected",
        "timestamp": alert.event_time,
        "probability": alert.probability,
        "window_index": alert.window_index,
        "device_id": alert.device_id,
    }


def journal_alert(alert: FallAlert, error: str, journal_path) -> None:
    entry = dict(alert_payload(alert))
    entry["delivery_error"] = error
    entry["journaled_at"] = time.time()
    with open(journal_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


def notify(
    alert: FallAlert,
    endpoint: str,
    *,
    max_attempts: int = 3,
    base_delay_s: float = 1.0,
    timeout_s: float = 5.0,
    journal_path=None,
    sleep=time.sleep,
) -> DeliveryResult:
    """Deliver one alert; returns the outcome instead of raising."""
    payload = alert_payload(alert)
    error = None
    status = None
    for attempt in range(1, max_attempts + 1):
        try:
            resp = requests.post(endpoint, json=payload, timeout=timeout_s)
            status = resp.status_code
            if 200 <= resp.status_code < 300:
                return DeliveryResult(delivered=True, attempts=attempt, status_code=status)
            error = f"HTTP {resp.status_code}"
        except requests.RequestException as exc:
            error = str(exc)
        if attempt < max_attempts:
            sleep(base_delay_s * (2 ** (attempt - 1)))
    if journal_path is not None:
        journal_alert(alert, error or "unknown", journal_path)
    return DeliveryResult(delivered=False, attempts=max_attempts, status_code=status, error=error)
