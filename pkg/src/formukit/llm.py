"""Chat-completions client with retries, transcripts and offline backends.

Three interchangeable backends sit behind one client:

* live    -- HTTP POST of {model, messages, temperature, max_tokens} to the
             configured endpoint, bearer token from the environment;
* mock    -- a deterministic physics oracle: parses the prompt's Input
             Format section, simulates the release curve with default
             conditions and a log-normal distribution around the given D50,
             and answers in the standard output JSON;
* replay  -- byte-identical responses looked up from stored transcripts,
             keyed by a content hash of the rendered prompt.

Every complete() call, including failures, appends a transcript record.
Mock and replay never touch the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError, MockParseError, RequestError, TransportError
from .prompts import PromptBundle, extract_section, parse_input_block, render_profile_json

DEFAULT_API_KEY_ENV = "FORMU_API_KEY"


@dataclass(frozen=True)
class LLMConfig:
    base_url: str = "https://api.deepseek.com/v1/chat/completions"
    model: str = "deepseek-r1"
    temperature: float = 0.0
    max_tokens: int = 4096
    timeout_s: float = 120.0
    max_retries: int = 3
    max_inflight: int = 4
    api_key_env: str = DEFAULT_API_KEY_ENV

    def __post_init__(self):
        if self.temperature < 0:
            raise ConfigurationError("temperature must be >= 0")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")
        if self.max_inflight < 1:
            raise ConfigurationError("max_inflight must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "LLMConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in obj.items() if k in known})


def prompt_sha256(prompt: PromptBundle | str) -> str:
    rendered = prompt if isinstance(prompt, str) else prompt.rendered
    return hashlib.sha256(rendered.encode("utf-8")).hexdigest()


@dataclass
class Transcript:
    """Verbatim record of one completion attempt."""

    prompt_sha256: str
    prompt: str
    response: str | None
    model: str
    backend: str                  # live | mock | replay
    started_at: float
    elapsed_s: float
    usage: dict | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "prompt_sha256": self.prompt_sha256,
            "prompt": self.prompt,
            "response": self.response,
            "model": self.model,
            "backend": self.backend,
            "started_at": self.started_at,
            "elapsed_s": self.elapsed_s,
            "usage": self.usage,
            "error": self.error,
        }


class TranscriptRecorder:
    """Append-only JSONL sink for transcripts; safe for concurrent writers."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self.records: list[Transcript] = []
        self._lock = threading.Lock()

    def record(self, transcript: Transcript) -> None:
        with self._lock:
            self.records.append(transcript)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(transcript.to_dict()) + "\n")


class RetryableTransportFailure(TransportError):
    """Transient failure (connection error, timeout, 429 or 5xx)."""


def _requests_transport(url: str, headers: dict, payload: dict,
                        timeout: float) -> tuple[int, str]:
    import requests

    try:
        response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise RetryableTransportFailure(f"transport failure: {exc}") from exc
    return response.status_code, response.text


class LiveBackend:
    """HTTP chat-completions backend."""

    tag = "live"

    def __init__(self, config: LLMConfig, transport=None):
        self.config = config
        self.transport = transport if transport is not None else _requests_transport

    def respond(self, prompt: PromptBundle) -> tuple[str, dict | None]:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise ConfigurationError(
                f"live backend requires the {self.config.api_key_env} environment variable")
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt.rendered}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        headers = {"Authorization": f"Bearer {key}",
                   "Content-Type": "application/json"}
        status, text = self.transport(self.config.base_url, headers, payload,
                                      self.config.timeout_s)
        if status == 429 or status >= 500:
            raise RetryableTransportFailure(f"HTTP {status}: {text[:200]}")
        if status >= 400:
            raise RequestError(f"HTTP {status}: {text[:200]}")
        try:
            body = json.loads(text)
            content = body["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise RequestError(f"unexpected response body: {text[:200]}") from exc
        return content, body.get("usage")


class MockBackend:
    """Physics-oracle backend for offline runs.

    Parses the prompt's Input Format block, builds a log-normal distribution
    (geo sigma 1.5, 50 bins) around the given D50, simulates release under
    default conditions on the standard grid and renders the output JSON.
    Responses are byte-deterministic for identical prompts.
    """

    tag = "mock"

    def __init__(self, geo_sigma: float = 1.5, n_bins: int = 50, conditions=None):
        from .types import DissolutionConditions

        self.geo_sigma = geo_sigma
        self.n_bins = n_bins
        self.conditions = conditions if conditions is not None else DissolutionConditions()

    def respond(self, prompt: PromptBundle) -> tuple[str, None]:
        from .dissolution import psd_from_lognormal, simulate_dissolution
        from .errors import ParseError

        try:
            block = extract_section(prompt.rendered, "Input Format")
            features = parse_input_block(block)
        except ParseError as exc:
            raise MockParseError(f"mock backend cannot read the prompt input: {exc}") from exc
        psd = psd_from_lognormal(features.d50_um, self.geo_sigma, self.n_bins)
        profile = simulate_dissolution(
            features.drug(), features.morphology(), psd, self.conditions)
        return render_profile_json(profile), None


class ReplayBackend:
    """Replays stored responses keyed by prompt content hash."""

    tag = "replay"

    def __init__(self, responses: dict[str, str]):
        self.responses = dict(responses)

    @classmethod
    def from_jsonl(cls, path: str | Path) -> "ReplayBackend":
        responses: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                if row.get("response") is not None:
                    responses[row["prompt_sha256"]] = row["response"]
        return cls(responses)

    def respond(self, prompt: PromptBundle) -> tuple[str, None]:
        digest = prompt_sha256(prompt)
        if digest not in self.responses:
            raise ConfigurationError(
                f"replay store has no transcript for prompt {digest[:12]}...")
        return self.responses[digest], None


@dataclass
class CompletionResult:
    text: str
    transcript: Transcript


class LLMClient:
    """Backend-agnostic completion client with retry and recording.

    Retries only transient transport failures, with exponential backoff
    (base 1 s, factor 2, multiplicative jitter); at most ``max_inflight``
    requests run concurrently. The sleep function and jitter seed are
    injectable for tests.
    """

    def __init__(self, config: LLMConfig | None = None, backend=None,
                 recorder: TranscriptRecorder | None = None,
                 sleep=time.sleep, seed: int = 0,
                 backoff_base_s: float = 1.0, backoff_factor: float = 2.0):
        self.config = config if config is not None else LLMConfig()
        self.backend = backend if backend is not None else LiveBackend(self.config)
        self.recorder = recorder if recorder is not None else TranscriptRecorder()
        self._sleep = sleep
        self._rng = random.Random(seed)
        self._backoff_base_s = backoff_base_s
        self._backoff_factor = backoff_factor
        self._semaphore = threading.Semaphore(self.config.max_inflight)

    def complete(self, prompt: PromptBundle) -> CompletionResult:
        """Send one prompt; returns the raw response text plus its transcript."""
        digest = prompt_sha256(prompt)
        started = time.time()
        t0 = time.monotonic()
        attempt = 0
        with self._semaphore:
            while True:
                try:
                    text, usage = self.backend.respond(prompt)
                    break
                except RetryableTransportFailure as exc:
                    if attempt >= self.config.max_retries:
                        self._record(digest, prompt, None, started, t0, error=str(exc))
                        raise TransportError(
                            f"retries exhausted after {attempt} retries: {exc}") from exc
                    delay = (self._backoff_base_s * self._backoff_factor ** attempt
                             * (0.5 + self._rng.random()))
                    self._sleep(delay)
                    attempt += 1
                except Exception as exc:
                    self._record(digest, prompt, None, started, t0, error=str(exc))
                    raise
        transcript = self._record(digest, prompt, text, started, t0, usage=usage)
        return CompletionResult(text=text, transcript=transcript)

    def _record(self, digest: str, prompt: PromptBundle, response: str | None,
                started: float, t0: float, usage: dict | None = None,
                error: str | None = None) -> Transcript:
        transcript = Transcript(
            prompt_sha256=digest,
            prompt=prompt.rendered,
            response=response,
            model=self.config.model,
            backend=getattr(self.backend, "tag", "live"),
            started_at=started,
            elapsed_s=time.monotonic() - t0,
            usage=usage,
            error=error,
        )
        self.recorder.record(transcript)
        return transcript


def make_backend(name: str, config: LLMConfig, *, replay_path=None,
                 transport=None, conditions=None):
    """Backend factory for the CLI: name is live, mock or replay."""
    if name == "live":
        return LiveBackend(config, transport=transport)
    if name == "mock":
        return MockBackend(conditions=conditions)
    if name == "replay":
        if replay_path is None:
            raise ConfigurationError("replay backend needs a transcript file")
        return ReplayBackend.from_jsonl(replay_path)
    raise ConfigurationError(f"unknown backend {name!r}")
