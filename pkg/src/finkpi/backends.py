"""Pluggable completion backends: a provider-agnostic interface, the
deterministic mock used by all tests, and an optional HTTP adapter."""

from __future__ import annotations

import json
import os
from typing import Protocol


class BackendError(Exception):
    pass


class CompletionBackend(Protocol):
    def complete(self, prompt: str) -> str: ...


class MockBackend:
    """Deterministic offline backend.

    Recovers the section text embedded in the extraction prompt, runs the
    same deterministic candidate detection the pipeline uses, and replies
    with the structured JSON a well-behaved model would produce. Pure
    function of (prompt, seed).
    """

    def __init__(self, taxonomy=None, seed: int = 0):
        from .taxonomy import default_taxonomy
        self.taxonomy = taxonomy or default_taxonomy()
        self.seed = seed

    def complete(self, prompt: str) -> str:
        from .extraction import TEXT_BEGIN, TEXT_END, deterministic_records
        start = prompt.find(TEXT_BEGIN)
        end = prompt.find(TEXT_END)
        if start == -1 or end == -1:
            return json.dumps({"records": []})
        body = prompt[start + len(TEXT_BEGIN):end].strip("\n")
        records = deterministic_records(body, self.taxonomy)
        return json.dumps({"records": records}, sort_keys=True)


class FaultyBackend:
    """Test double: emits canned completions in sequence (for repair-loop and
    grounding tests)."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.calls = 0

    def complete(self, prompt: str) -> str:
        idx = min(self.calls, len(self.responses) - 1)
        self.calls += 1
        return self.responses[idx]


class HttpBackend:
    """Live adapter: POSTs {"prompt": ...} to a provider endpoint configured
    via FINKPI_BACKEND_URL / FINKPI_BACKEND_TOKEN. Never used in tests."""

    def __init__(self, url: str | None = None, token: str | None = None, timeout: float = 60.0):
        self.url = url or os.environ.get("FINKPI_BACKEND_URL", "")
        self.token = token or os.environ.get("FINKPI_BACKEND_TOKEN", "")
        self.timeout = timeout
        if not self.url:
            raise BackendError("HttpBackend requires FINKPI_BACKEND_URL")

    def complete(self, prompt: str) -> str:
        import urllib.request

        req = urllib.request.Request(
            self.url,
            data=json.dumps({"prompt": prompt}).encode("utf-8"),
            headers={"Content-Type": "application/json",
                     **({"Authorization": f"Bearer {self.token}"} if self.token else {})},
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            payload = json.loads(resp.read().decode("utf-8"))
        if "completion" not in payload:
            raise BackendError("backend response missing 'completion'")
        return payload["completion"]


def make_backend(name: str, taxonomy=None, seed: int = 0) -> CompletionBackend:
    if name == "mock":
        return MockBackend(taxonomy=taxonomy, seed=seed)
    if name == "live":
        return HttpBackend()
    raise BackendError(f"unknown backend: {name}")
