"""Pluggable inference backends with caching and bounded-parallel dispatch.

Two backends ship here: an OpenAI-compatible chat-completions HTTP endpoint
and a deterministic mock model used as a test oracle. Responses are cached
on a content hash of (backend id, prompt, max_tokens, temperature), so
probing the same dataset twice (answer stage, then confidence stage reruns)
never double-spends API calls.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Protocol, Sequence

import requests

from ._phrases import CERTAINTY_QUESTION, SURE_PHRASE, UNSURE_PHRASE
from .data_model import AnswerFormat, Problem

DEFAULT_API_KEY_ENV = "MULTIPROBE_API_KEY"


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class BackendError(Exception):
    """Terminal backend failure (maps to exit code 3)."""

    def __init__(self, message: str, attempts: int | None = None):
        super().__init__(message)
        self.attempts = attempts


class TransportError(BackendError):
    """Network-level failure; the only kind that retries."""


class DecodeError(BackendError):
    """The backend replied with a body we cannot interpret."""

    def __init__(self, message: str, raw_body: str = ""):
        super().__init__(message)
        self.raw_body = raw_body


# ---------------------------------------------------------------------------
# Request / response types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 512
    temperature: float = 0.0  # greedy decoding by default
    logprob_request: bool = False


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    token_logprobs: tuple[tuple[str, float], ...] | None
    backend_id: str


class Backend(Protocol):
    backend_id: str

    def generate(self, request: CompletionRequest) -> CompletionResponse: ...


# ---------------------------------------------------------------------------
# Mock backend
# ---------------------------------------------------------------------------


class ConfidenceBehavior(str, Enum):
    HONEST = "Honest"
    OVERCONFIDENT = "Overconfident"
    UNDERCONFIDENT = "Underconfident"


@dataclass(frozen=True)
class MockModelSpec:
    accuracy: float
    wrong_answer_text: str = "I do not recall"
    seed: int = 0
    confidence_behavior: ConfidenceBehavior = ConfidenceBehavior.HONEST


def _unit_hash(*parts: object) -> float:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


class MockBackend:
    """Deterministic stand-in model.

    Correctness of each sub-answer is decided by hashing (seed, problem id)
    against the configured accuracy, so it is stable across n, across runs,
    and across prompt phrasings. The backend recognizes which problems a
    prompt contains by locating their question texts.
    """

    def __init__(self, spec: MockModelSpec, problems: Sequence[Problem]):
        self.spec = spec
        self._problems = list(problems)
        fingerprint = hashlib.sha256(
            f"{spec.accuracy}:{spec.wrong_answer_text}:{spec.seed}:{spec.confidence_behavior.value}".encode()
        ).hexdigest()[:12]
        self.backend_id = f"mock:{fingerprint}"

    def knows(self, problem_id: str) -> bool:
        return _unit_hash(self.spec.seed, "know", problem_id) < self.spec.accuracy

    def _sure_probability(self, problem_id: str) -> float:
        # Honest tracks correctness exactly; the skewed behaviors carry a
        # deterministic per-problem jitter so rankings stay informative.
        u = _unit_hash(self.spec.seed, "conf", problem_id)
        behavior = self.spec.confidence_behavior
        if behavior is ConfidenceBehavior.OVERCONFIDENT:
            return 0.90 + 0.09 * u
        if behavior is ConfidenceBehavior.UNDERCONFIDENT:
            return 0.01 + 0.09 * u
        return 1.0 if self.knows(problem_id) else 0.0

    def _members_in(self, prompt: str) -> list[Problem]:
        found = [(prompt.find(p.question), p) for p in self._problems]
        return [p for pos, p in sorted(found, key=lambda t: t[0]) if pos >= 0]

    def _gold_answer(self, problem: Problem) -> str:
        if problem.format is AnswerFormat.MC and problem.choices:
            for g in problem.gold:
                for c in problem.choices:
                    if g.strip().upper() == c.letter.upper():
                        return c.letter
                    if g.strip().lower() == c.text.strip().lower():
                        return c.letter
        return problem.gold[0]

    def _wrong_answer(self, problem: Problem) -> str:
        if problem.format is AnswerFormat.MC and problem.choices:
            gold_letter = self._gold_answer(problem)
            for c in problem.choices:
                if c.letter != gold_letter:
                    return c.letter
        return self.spec.wrong_answer_text

    def generate(self, request: CompletionRequest) -> CompletionResponse:
        members = self._members_in(request.prompt)
        if CERTAINTY_QUESTION in request.prompt:
            return self._confidence_reply(members)
        lines = []
        for k, p in enumerate(members, start=1):
            answer = self._gold_answer(p) if self.knows(p.id) else self._wrong_answer(p)
            lines.append(f"{k}: {answer}")
        return CompletionResponse(
            text="\n".join(lines), token_logprobs=None, backend_id=self.backend_id
        )

    def _confidence_reply(self, members: list[Problem]) -> CompletionResponse:
        # Tokens must concatenate exactly to the text so that token offsets
        # can be reconstructed when scoring the discriminating token.
        tokens: list[tuple[str, float]] = []
        pieces: list[str] = []
        filler = -1e-4
        for k, p in enumerate(members, start=1):
            p_sure = self._sure_probability(p.id)
            phrase = SURE_PHRASE if p_sure >= 0.5 else UNSURE_PHRASE
            word = " sure" if phrase == SURE_PHRASE else " unsure"
            chosen = p_sure if phrase == SURE_PHRASE else 1.0 - p_sure
            lead = " " if pieces else ""
            pieces.append(f"{lead}{k}: {phrase}")
            tokens.extend(
                [
                    (f"{lead}{k}", filler),
                    (":", filler),
                    (" I", filler),
                    (" am", filler),
                    (word, math.log(chosen)),
                ]
            )
        return CompletionResponse(
            text="".join(pieces),
            token_logprobs=tuple(tokens),
            backend_id=self.backend_id,
        )


# ---------------------------------------------------------------------------
# Remote OpenAI-compatible backend
# ---------------------------------------------------------------------------


class RemoteBackend:
    """Chat-completions endpoint. Auth token comes from an environment variable."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout: float = 120.0,
        post: Callable | None = None,
    ):
        self._url = base_url.rstrip("/") + "/chat/completions"
        self._model = model
        self._api_key = os.environ.get(api_key_env, "")
        self._timeout = timeout
        self._post = post if post is not None else requests.post
        self.backend_id = f"{model}@{base_url}"

    def generate(self, request: CompletionRequest) -> CompletionResponse:
        payload: dict = {
            "model": self._model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if request.logprob_request:
            payload["logprobs"] = True
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        try:
            resp = self._post(self._url, json=payload, headers=headers, timeout=self._timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransportError(f"transport failure: {exc}") from exc

        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"backend returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendError(f"backend rejected request: HTTP {resp.status_code}")

        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except Exception as exc:
            raise DecodeError(
                f"malformed backend reply: {exc}", raw_body=resp.text
            ) from exc

        token_logprobs = None
        logprobs = (choice.get("logprobs") or {}).get("content")
        if logprobs:
            token_logprobs = tuple((t["token"], float(t["logprob"])) for t in logprobs)
        return CompletionResponse(
            text=text, token_logprobs=token_logprobs, backend_id=self.backend_id
        )


# ---------------------------------------------------------------------------
# Cache + client
# ---------------------------------------------------------------------------


def cache_key(backend_id: str, request: CompletionRequest) -> str:
    payload = json.dumps(
        [backend_id, request.prompt, request.max_tokens, request.temperature],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed response files under one directory."""

    def __init__(self, directory: str | Path):
        self._dir = Path(directory)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def get(self, key: str) -> CompletionResponse | None:
        path = self._dir / f"{key}.json"
        with self._lock:
            if not path.exists():
                return None
            obj = json.loads(path.read_text(encoding="utf-8"))
        logprobs = obj["token_logprobs"]
        return CompletionResponse(
            text=obj["text"],
            token_logprobs=tuple((t, lp) for t, lp in logprobs) if logprobs is not None else None,
            backend_id=obj["backend_id"],
        )

    def put(self, key: str, response: CompletionResponse) -> None:
        obj = {
            "text": response.text,
            "token_logprobs": [list(t) for t in response.token_logprobs]
            if response.token_logprobs is not None
            else None,
            "backend_id": response.backend_id,
        }
        path = self._dir / f"{key}.json"
        tmp = path.with_suffix(".tmp")
        with self._lock:
            tmp.write_text(json.dumps(obj, ensure_ascii=False), encoding="utf-8")
            tmp.rename(path)


class ModelClient:
    """Backend wrapper owning retries, caching, and bounded parallelism."""

    def __init__(
        self,
        backend: Backend,
        cache_dir: str | Path | None = None,
        max_attempts: int = 3,
        backoff_s: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._backend = backend
        self._cache = ResponseCache(cache_dir) if cache_dir is not None else None
        self._max_attempts = max_attempts
        self._backoff_s = backoff_s
        self._sleep = sleep
        self._count_lock = threading.Lock()
        self.backend_calls = 0

    @property
    def backend_id(self) -> str:
        return self._backend.backend_id

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = cache_key(self._backend.backend_id, request)
        if self._cache is not None:
            hit = self._cache.get(key)
            if hit is not None:
                return hit

        last: TransportError | None = None
        for attempt in range(1, self._max_attempts + 1):
            with self._count_lock:
                self.backend_calls += 1
            try:
                response = self._backend.generate(request)
                break
            except TransportError as exc:
                last = exc
                if attempt < self._max_attempts:
                    self._sleep(self._backoff_s * 2 ** (attempt - 1))
        else:
            raise BackendError(
                f"retry budget exhausted after {self._max_attempts} attempts: {last}",
                attempts=self._max_attempts,
            ) from last

        if self._cache is not None:
            self._cache.put(key, response)
        return response

    def complete_batch(
        self, requests_: Sequence[CompletionRequest], parallelism: int
    ) -> list[CompletionResponse | Exception]:
        """Responses in request order; failures reported positionally."""
        if parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        results: list[CompletionResponse | Exception | None] = [None] * len(requests_)
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {pool.submit(self.complete, r): i for i, r in enumerate(requests_)}
            for future in as_completed(futures):
                i = futures[future]
                try:
                    results[i] = future.result()
                except Exception as exc:
                    results[i] = exc
        return results  # type: ignore[return-value]
