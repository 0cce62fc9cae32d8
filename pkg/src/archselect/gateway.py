"""Chat-completion / embedding access with a disk cache and a mock backend.

The gateway is the only place that talks to an LLM. Pipeline steps build
:class:`LlmRequest` objects and hand them to :meth:`Gateway.complete` or
:meth:`Gateway.embed`; the gateway handles caching, JSON-repair retries,
bounded concurrency and call accounting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import httpx

from .errors import (
    DimensionMismatch,
    EndpointUnreachable,
    GatewayError,
    MalformedAfterRetries,
    MissingCredential,
)

log = logging.getLogger(__name__)

COMPLETION = "completion"
EMBEDDING = "embedding"
STRUCTURED_JSON = "structured-json"
RAW = "raw"

JSON_REPAIR_INSTRUCTION = (
    "\n\nYour previous answer could not be parsed as JSON. "
    "Reply again with valid JSON only, no prose and no code fences."
)


@dataclass(frozen=True)
class LlmRequest:
    kind: str
    prompt_or_texts: Union[str, tuple]
    model: str
    response_format_hint: str = RAW
    # structured payload for the mock backend; never part of the cache key
    meta: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind == COMPLETION:
            if not isinstance(self.prompt_or_texts, str) or not self.prompt_or_texts.strip():
                raise ValueError("completion request needs a non-empty prompt")
        elif self.kind == EMBEDDING:
            texts = self.prompt_or_texts
            if isinstance(texts, str) or not texts:
                raise ValueError("embedding request needs a non-empty list of texts")
            object.__setattr__(self, "prompt_or_texts", tuple(texts))
        else:
            raise ValueError(f"unknown request kind {self.kind!r}")
        if self.response_format_hint not in (STRUCTURED_JSON, RAW):
            raise ValueError(f"unknown response format hint {self.response_format_hint!r}")


def cache_key(request: LlmRequest) -> str:
    """Stable sha256 digest over kind, model, format hint and payload."""
    payload = request.prompt_or_texts
    if isinstance(payload, str):
        payload = payload.replace("\r\n", "\n")
    else:
        payload = [t.replace("\r\n", "\n") for t in payload]
    canon = json.dumps(
        {
            "kind": request.kind,
            "model": request.model,
            "format": request.response_format_hint,
            "payload": payload,
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class GatewayStats:
    completion_calls: int = 0
    embedding_calls: int = 0
    cache_hits: int = 0
    total_latency: float = 0.0

    def to_dict(self):
        return {
            "completion_calls": self.completion_calls,
            "embedding_calls": self.embedding_calls,
            "cache_hits": self.cache_hits,
            "total_latency_s": round(self.total_latency, 6),
        }


class ResponseCache:
    """Content-addressed JSON files: ``<dir>/<key[:2]>/<key>.json``."""

    def __init__(self, directory):
        self.directory = Path(directory)

    def path(self, key: str) -> Path:
        return self.directory / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[str]:
        p = self.path(key)
        try:
            with open(p, encoding="utf-8") as fh:
                return json.load(fh)["response_text"]
        except FileNotFoundError:
            return None
        except (json.JSONDecodeError, KeyError):
            log.warning("ignoring corrupt cache entry %s", p)
            return None

    def put(self, key: str, response_text: str) -> None:
        p = self.path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        doc = {"request_digest": key, "response_text": response_text, "timestamp": time.time()}
        # atomic replace so concurrent writers never expose a half-written file
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-", suffix=".json")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, ensure_ascii=False)
        os.replace(tmp, p)


# ---------------------------------------------------------------------------
# backends


class MockBackend:
    """Deterministic offline backend driven by a fixture dictionary.

    Fixture keys (all optional):

    ``prompt1``
        ``{requirement_id: {"is_asr", "qas", "condition"}}``; unmapped ids
        are answered as non-ASR.
    ``equivalent``
        list of condition pairs the equivalence prompt answers ``True`` for;
        every other pair answers ``False``.
    ``concurrent``
        list of ``{"conditions": [...], "response": "(1, 2) (3)"}``;
        unmapped condition lists get one group per condition.
    ``embeddings``
        ``{text: vector}``; other texts get a seeded pseudo-random unit
        vector of ``embedding_dim`` (default 64) components.
    ``responses``
        ``{prompt_text: reply}`` overrides, checked first.
    """

    name = "mock"

    def __init__(self, fixture: Optional[dict] = None):
        fixture = fixture or {}
        self.fixture = fixture
        self._prompt1 = dict(fixture.get("prompt1", {}))
        self._equivalent = {
            frozenset((_key(a), _key(b))) for a, b in fixture.get("equivalent", [])
        }
        self._concurrent = {
            tuple(_key(c) for c in entry["conditions"]): entry["response"]
            for entry in fixture.get("concurrent", [])
        }
        self._embeddings = {t: list(map(float, v)) for t, v in fixture.get("embeddings", {}).items()}
        dims = {len(v) for v in self._embeddings.values()}
        if len(dims) > 1:
            raise ValueError(f"fixture embeddings have mixed dimensions {sorted(dims)}")
        self.embedding_dim = dims.pop() if dims else int(fixture.get("embedding_dim", 64))
        self._responses = dict(fixture.get("responses", {}))

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def complete(self, prompt: str, model: str, temperature: float, meta: dict) -> str:
        if prompt in self._responses:
            return self._responses[prompt]
        task = meta.get("task")
        if task == "prompt1":
            out = []
            for rid in meta["ids"]:
                ans = self._prompt1.get(rid)
                if ans is None:
                    out.append({"id": rid, "is_asr": False, "qas": [], "condition": ""})
                else:
                    out.append({"id": rid, **ans})
            return json.dumps(out)
        if task == "prompt2":
            a, b = meta["conditions"]
            return "True" if frozenset((_key(a), _key(b))) in self._equivalent else "False"
        if task == "prompt3":
            conds = tuple(_key(c) for c in meta["conditions"])
            if conds in self._concurrent:
                return self._concurrent[conds]
            return " ".join(f"({i})" for i in range(1, len(conds) + 1))
        raise GatewayError(f"mock backend cannot answer task {task!r}")

    def embed(self, texts: Sequence[str], model: str, meta: dict) -> List[List[float]]:
        return [self._embeddings.get(t) or _hash_vector(t, self.embedding_dim) for t in texts]


def _key(text: str) -> str:
    return " ".join(text.split()).casefold()


def _hash_vector(text: str, dim: int) -> List[float]:
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    rng = random.Random(seed)
    v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    norm = math.sqrt(sum(x * x for x in v)) or 1.0
    return [x / norm for x in v]


class OpenAICompatibleBackend:
    """Chat-completions and embeddings over an OpenAI-compatible HTTP API."""

    name = "live"

    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 60.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(
            base_url=self.base_url,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
            transport=transport,
        )

    @classmethod
    def from_env(cls, base_url: str, credential_env_var: str, **kw) -> "OpenAICompatibleBackend":
        if not base_url:
            raise MissingCredential("live backend needs an endpoint URL")
        if not credential_env_var:
            raise MissingCredential("live backend needs the name of a credential env var")
        key = os.environ.get(credential_env_var, "").strip()
        if not key:
            raise MissingCredential(f"environment variable {credential_env_var} is not set")
        return cls(base_url, key, **kw)

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._client.post(path, json=body)
        except (httpx.ConnectError, httpx.TimeoutException, httpx.NetworkError) as exc:
            raise EndpointUnreachable(f"{self.base_url}{path}: {exc}") from exc
        if resp.status_code >= 500 or resp.status_code == 429:
            raise EndpointUnreachable(f"{self.base_url}{path}: HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"{self.base_url}{path}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise GatewayError(f"{self.base_url}{path}: response is not JSON") from exc

    def complete(self, prompt: str, model: str, temperature: float, meta: dict) -> str:
        data = self._post(
            "/chat/completions",
            {
                "model": model,
                "temperature": temperature,
                "messages": [{"role": "user", "content": prompt}],
            },
        )
        try:
            return data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError("chat completion response lacks choices[0].message.content") from exc

    def embed(self, texts: Sequence[str], model: str, meta: dict) -> List[List[float]]:
        data = self._post("/embeddings", {"model": model, "input": list(texts)})
        try:
            items = sorted(data["data"], key=lambda d: d.get("index", 0))
            return [list(map(float, d["embedding"])) for d in items]
        except (KeyError, TypeError) as exc:
            raise GatewayError("embedding response lacks data[].embedding") from exc

    def close(self):
        self._client.close()


# ---------------------------------------------------------------------------


class Gateway:
    def __init__(
        self,
        backend,
        cache_dir=None,
        completion_model: str = "gpt-4o",
        embedding_model: str = "text-embedding-3-small",
        temperature: float = 0.0,
        max_retries: int = 2,
        concurrency: int = 4,
    ):
        self.backend = backend
        self.cache = ResponseCache(cache_dir) if cache_dir else None
        self.completion_model = completion_model
        self.embedding_model = embedding_model
        self.temperature = temperature
        self.max_retries = max_retries
        self.concurrency = max(1, int(concurrency))
        self.stats = GatewayStats()
        self._lock = threading.Lock()

    def request(self, prompt: str, hint: str = RAW, **meta) -> LlmRequest:
        return LlmRequest(COMPLETION, prompt, self.completion_model, hint, meta)

    def complete(
        self,
        request: LlmRequest,
        validate: Optional[Callable[[str], Any]] = None,
    ) -> str:
        """Return the reply text for ``request``.

        ``validate`` raises ``ValueError`` on an unusable reply; structured
        JSON requests default to ``json.loads``. A failing reply is retried
        up to ``max_retries`` times with a corrective suffix, then
        :class:`MalformedAfterRetries` is raised. Only validated replies are
        cached.
        """
        if request.kind != COMPLETION:
            raise ValueError("complete() needs a completion request")
        if validate is None and request.response_format_hint == STRUCTURED_JSON:
            validate = _parse_json_reply
        key = cache_key(request)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.stats.cache_hits += 1
                return hit

        prompt = request.prompt_or_texts
        last_error = None
        for attempt in range(self.max_retries + 1):
            text = self._call(self.backend.complete, prompt, request.model, self.temperature, request.meta)
            with self._lock:
                self.stats.completion_calls += 1
            if validate is None:
                break
            try:
                validate(text)
                break
            except ValueError as exc:
                last_error = exc
                log.warning("unusable reply (attempt %d/%d): %s", attempt + 1, self.max_retries + 1, exc)
                if request.response_format_hint == STRUCTURED_JSON:
                    prompt = request.prompt_or_texts + JSON_REPAIR_INSTRUCTION
                else:
                    prompt = request.prompt_or_texts + "\n\nAnswer with exactly one of the allowed tokens."
        else:
            raise MalformedAfterRetries(
                f"reply still unusable after {self.max_retries} retries: {last_error}"
            )
        if self.cache is not None:
            self.cache.put(key, text)
        return text

    def complete_many(self, requests: Sequence[LlmRequest], validate=None) -> List[str]:
        """Issue requests with bounded concurrency; results in input order."""
        if len(requests) <= 1 or self.concurrency == 1:
            return [self.complete(r, validate) for r in requests]
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            return list(pool.map(lambda r: self.complete(r, validate), requests))

    def embed(self, texts: Sequence[str], **meta) -> List[List[float]]:
        """One vector per text, order preserved."""
        texts = list(texts)
        if not texts:
            raise ValueError("embed() needs at least one text")
        request = LlmRequest(EMBEDDING, tuple(texts), self.embedding_model, RAW, meta)
        key = cache_key(request)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                with self._lock:
                    self.stats.cache_hits += 1
                return json.loads(hit)
        vectors = self._call(self.backend.embed, request.prompt_or_texts, request.model, request.meta)
        with self._lock:
            self.stats.embedding_calls += 1
        if len(vectors) != len(texts):
            raise DimensionMismatch(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        dims = {len(v) for v in vectors}
        if len(dims) != 1 or 0 in dims:
            raise DimensionMismatch(f"embedding dimensions are inconsistent: {sorted(dims)}")
        if self.cache is not None:
            self.cache.put(key, json.dumps(vectors))
        return vectors

    def _call(self, fn, *args):
        t0 = time.perf_counter()
        try:
            return fn(*args)
        finally:
            with self._lock:
                self.stats.total_latency += time.perf_counter() - t0


def _parse_json_reply(text: str):
    return json.loads(strip_code_fence(text))


def strip_code_fence(text: str) -> str:
    t = text.strip()
    if t.startswith("```"):
        t = t.split("\n", 1)[1] if "\n" in t else ""
        if t.rstrip().endswith("```"):
            t = t.rstrip()[:-3]
    return t.strip()
