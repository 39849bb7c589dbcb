"""Small HTTP helpers: bounded retries with backoff and a per-backend rate limiter."""
from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass

import requests

from .errors import HttpError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({408, 425, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff_s: float = 0.5
    factor: float = 2.0
    max_backoff_s: float = 8.0
    timeout_s: float = 60.0

    def delay(self, retry: int) -> float:
        return min(self.max_backoff_s, self.backoff_s * self.factor ** (retry - 1))


class RateLimiter:
    """Enforces a minimum interval between consecutive requests (thread-safe)."""

    def __init__(self, min_interval_s: float = 0.2):
        self.min_interval_s = min_interval_s
        self._lock = threading.Lock()
        self._last = float("-inf")

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            pause = self._last + self.min_interval_s - now
            if pause > 0:
                time.sleep(pause)
            self._last = time.monotonic()


@dataclass
class Response:
    status: int
    body: bytes
    content_type: str
    retries: int

    def json(self):
        import json
        return json.loads(self.body.decode("utf-8"))


def request(method: str, url: str, *, policy: RetryPolicy | None = None,
            limiter: RateLimiter | None = None, session: requests.Session | None = None,
            sleep=time.sleep, **kwargs) -> Response:
    """Issue a request, retrying transport failures and retryable statuses.

    Raises HttpError once the policy is exhausted or on a non-retryable status.
    """
    policy = policy or RetryPolicy()
    http = session or requests
    last_status, last_msg = None, ""
    for attempt in range(1, policy.attempts + 1):
        if attempt > 1:
            sleep(policy.delay(attempt - 1))
        if limiter is not None:
            limiter.wait()
        try:
            r = http.request(method, url, timeout=policy.timeout_s, **kwargs)
        except requests.RequestException as exc:
            last_status, last_msg = None, f"{type(exc).__name__}: {exc}"
            logger.info("%s %s failed (attempt %d): %s", method, url, attempt, last_msg)
            continue
        if r.status_code < 400:
            return Response(r.status_code, r.content, r.headers.get("Content-Type", ""), attempt - 1)
        last_status, last_msg = r.status_code, r.text[:200]
        if r.status_code not in RETRYABLE_STATUS:
            raise HttpError(f"{method} {url} -> {r.status_code}: {last_msg}", r.status_code, attempt)
        logger.info("%s %s -> %d (attempt %d)", method, url, r.status_code, attempt)
    raise HttpError(f"{method} {url} failed after {policy.attempts} attempts: "
                    f"{last_status or ''} {last_msg}".strip(), last_status, policy.attempts)
