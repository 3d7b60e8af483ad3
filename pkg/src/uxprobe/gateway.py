"""Model access for the three engine roles (reasoning, ux, checklist).

Two backends ship: :class:`ChatCompletionsBackend` talks to any
OpenAI-compatible ``/chat/completions`` endpoint (text plus an optional PNG
attachment), and :class:`ScriptedBackend` replays a fixture of role-tagged
responses in strict order for offline runs and tests.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import httpx

log = logging.getLogger(__name__)

ROLES = ("reasoning", "ux", "checklist")


class GatewayError(Exception):
    pass


class TransientError(GatewayError):
    """Worth retrying: timeouts, dropped connections, 429 and 5xx."""


class AuthError(GatewayError):
    """Missing or rejected credentials. Never retried."""


class FixtureError(GatewayError):
    """Scripted backend was asked for a call the fixture does not contain."""


class RetryBudgetExhausted(GatewayError):
    pass


class ContextOverflow(GatewayError):
    """Prompt exceeds the configured budget; callers must shrink it first."""


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    image: Optional[bytes] = None
    image_mime: str = "image/png"

    def size(self) -> int:
        return len(self.system) + len(self.user)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.system.encode())
        h.update(b"\0")
        h.update(self.user.encode())
        if self.image:
            h.update(b"\0")
            h.update(self.image)
        return h.hexdigest()


@dataclass(frozen=True)
class Reply:
    text: str
    prompt_tokens: Optional[int] = None
    completion_tokens: Optional[int] = None


class ScriptedBackend:
    """Replays ``(role, text)`` pairs in order; any divergence raises FixtureError."""

    name = "scripted"

    def __init__(self, responses):
        self.responses = [(r, t) for r, t in responses]
        self.index = 0
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path) -> "ScriptedBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("schema") != "uxprobe.script/1":
            raise FixtureError(f"{path}: unsupported script schema {data.get('schema')!r}")
        out = []
        for i, entry in enumerate(data["responses"], start=1):
            if entry.get("role") not in ROLES:
                raise FixtureError(f"{path}: entry {i} has unknown role {entry.get('role')!r}")
            text = entry["text"] if "text" in entry else json.dumps(entry["json"], sort_keys=True)
            out.append((entry["role"], text))
        return cls(out)

    def __call__(self, role: str, bundle: PromptBundle) -> Reply:
        with self._lock:
            call = self.index + 1
            if self.index >= len(self.responses):
                raise FixtureError(f"fixture underrun at call {call} (role={role}); script has {len(self.responses)} entries")
            want, text = self.responses[self.index]
            if want != role:
                raise FixtureError(f"fixture role mismatch at call {call}: script has {want}, agent asked {role}")
            self.index += 1
        return Reply(text)

    @property
    def remaining(self) -> int:
        return len(self.responses) - self.index

    def assert_consumed(self):
        if self.remaining:
            raise FixtureError(
                f"fixture overrun: {self.remaining} unused entries starting at call {self.index + 1}"
            )


class ChatCompletionsBackend:
    """OpenAI-style chat completion endpoint. The key comes from an env var only."""

    name = "http"

    def __init__(self, endpoint, model, api_key_env="UXPROBE_API_KEY", timeout=120.0,
                 client: Optional[httpx.Client] = None, temperature=0.0, max_tokens=2048):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.temperature = temperature
        self.max_tokens = max_tokens
        self._client = client or httpx.Client(timeout=timeout)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise AuthError(f"missing API key: environment variable {self.api_key_env} is not set")
        return key

    def payload(self, bundle: PromptBundle) -> dict:
        if bundle.image:
            b64 = base64.b64encode(bundle.image).decode("ascii")
            content = [
                {"type": "text", "text": bundle.user},
                {"type": "image_url", "image_url": {"url": f"data:{bundle.image_mime};base64,{b64}"}},
            ]
        else:
            content = bundle.user
        return {
            "model": self.model,
            "messages": [
                {"role": "system", "content": bundle.system},
                {"role": "user", "content": content},
            ],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }

    def __call__(self, role: str, bundle: PromptBundle) -> Reply:
        url = self.endpoint if self.endpoint.endswith("/chat/completions") else self.endpoint + "/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key()}"}
        try:
            resp = self._client.post(url, json=self.payload(bundle), headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise TransientError(f"timeout after {self.timeout}s: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientError(f"transport error: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise GatewayError(f"unexpected response shape: {str(data)[:200]}") from None
        if isinstance(text, list):  # content parts
            text = "".join(p.get("text", "") for p in text if isinstance(p, dict))
        usage = data.get("usage") or {}
        return Reply(text or "", usage.get("prompt_tokens"), usage.get("completion_tokens"))


class ModelGateway:
    """Routes each role to a backend, with bounded retries and call metadata."""

    def __init__(self, backends, retries=3, backoff=1.0, max_backoff=30.0, seed=0,
                 max_prompt_chars=400_000, sleep: Callable = time.sleep,
                 clock: Callable[[], float] = time.monotonic, models: Optional[dict] = None):
        if callable(backends):
            backends = {role: backends for role in ROLES}
        missing = [r for r in ROLES if r not in backends]
        if missing:
            raise ValueError(f"no backend configured for roles: {', '.join(missing)}")
        self.backends = backends
        self.models = models or {r: getattr(b, "model", getattr(b, "name", "?")) for r, b in backends.items()}
        self.retries = retries
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.max_prompt_chars = max_prompt_chars
        self._rng = random.Random(seed)
        self._sleep = sleep
        self._clock = clock
        self._lock = threading.Lock()
        self.calls: list[dict] = []
        self.listeners: list[Callable[[dict], None]] = []

    def fits(self, bundle: PromptBundle) -> bool:
        return bundle.size() <= self.max_prompt_chars

    def complete(self, role: str, bundle: PromptBundle) -> str:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        if not self.fits(bundle):
            raise ContextOverflow(f"prompt of {bundle.size()} chars exceeds budget {self.max_prompt_chars}")
        backend = self.backends[role]
        failures = []
        start = self._clock()
        for attempt in range(self.retries + 1):
            try:
                reply = backend(role, bundle)
                break
            except TransientError as exc:
                failures.append(str(exc))
                log.warning("%s call failed (attempt %d): %s", role, attempt + 1, exc)
                if attempt == self.retries:
                    self._record(role, bundle, None, start, failures)
                    raise RetryBudgetExhausted(
                        f"{role}: gave up after {attempt + 1} attempts: {exc}"
                    ) from exc
                with self._lock:
                    jitter = self._rng.uniform(0, self.backoff)
                self._sleep(min(self.max_backoff, self.backoff * 2**attempt) + jitter)
        self._record(role, bundle, reply, start, failures)
        return reply.text

    def _record(self, role, bundle, reply, start, failures):
        meta = {
            "role": role,
            "model": self.models.get(role, "?"),
            "request_digest": bundle.digest(),
            "response_digest": hashlib.sha256(reply.text.encode()).hexdigest() if reply else None,
            "latency_ms": int(round((self._clock() - start) * 1000)),
            "attempts": len(failures) + (1 if reply else 0),
            "retries": list(failures),
            "prompt_tokens": reply.prompt_tokens if reply else None,
            "completion_tokens": reply.completion_tokens if reply else None,
        }
        with self._lock:
            self.calls.append(meta)
        for fn in list(self.listeners):
            fn(meta)


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def extract_json(text: str):
    """First JSON value in a model reply (bare, fenced, or embedded in prose)."""
    text = text.strip()
    candidates = [m.group(1).strip() for m in _FENCE.finditer(text)] + [text]
    decoder = json.JSONDecoder()
    for chunk in candidates:
        try:
            return json.loads(chunk)
        except json.JSONDecodeError:
            pass
        for i, ch in enumerate(chunk):
            if ch in "{[":
                try:
                    value, _ = decoder.raw_decode(chunk[i:])
                    return value
                except json.JSONDecodeError:
                    continue
    raise ValueError("no JSON object found in model output")
