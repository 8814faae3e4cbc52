"""Query decomposition into ordered start-state / end-state sub-queries.

Three interchangeable backends produce the sub-query pair: a naive
word-count bisection, a delimiter-based rule split, and a chat-completion
endpoint. Endpoint results are cached on disk, keyed by backend, model,
prompt digest and normalized query text, so repeated runs pay the
generation cost once.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

BACKEND_NAIVE = "naive"
BACKEND_RULE = "rule"
BACKEND_LLM = "llm"
BACKEND_PROVIDED = "provided"

BACKENDS = (BACKEND_NAIVE, BACKEND_RULE, BACKEND_LLM, BACKEND_PROVIDED)

# closed delimiter set for the rule backend; the scan is positional, so the
# earliest delimiter or comma in the query wins
RULE_DELIMITERS = ("and", "while", "then", "before", "after")

# The decomposition contract the endpoint must follow. The two sub-queries
# must be chronological (first one strictly earlier), self-contained (no
# pronouns that need the other line to resolve), and even an atomic query
# must split into its context and its action. Output format is two labeled
# lines so parsing stays trivial. Changing this text changes cache keys.
SYSTEM_PROMPT = """\
You split one video-search query into exactly two sub-queries that describe
the same event as two moments in time.

Rules:
1. Q_a describes the earlier state or action; Q_b describes the later one.
   Q_a must come strictly before Q_b in time.
2. Each sub-query must stand alone: replace every pronoun with the noun it
   refers to, and repeat the subject in both lines if needed.
3. Keep every sub-query a complete subject-verb phrase from the original
   event. Do not invent objects, people, or places that the query does not
   mention.
4. Do not copy the whole query into one line; distribute the event across
   the two lines.
5. Keep each line short and concrete.
6. If the query names a single atomic action, make Q_a the preparation or
   context of that action and Q_b the action itself.

Answer with exactly two lines and nothing else:
Q_a: <earlier sub-query>
Q_b: <later sub-query>
"""


class DecomposeError(RuntimeError):
    """Endpoint decomposition failed before any usable result."""


@dataclass(frozen=True)
class QueryTriple:
    """An original query with its ordered sub-query pair."""

    original: str
    sub_a: str
    sub_b: str
    backend: str

    def __post_init__(self) -> None:
        if not self.sub_a or not self.sub_b:
            raise ValueError("sub-queries must be non-empty")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.sub_a == self.sub_b and not (
            self.backend == BACKEND_NAIVE and len(self.original.split()) == 1
        ):
            raise ValueError("sub-queries must differ except for one-word naive splits")


def naive_split(query: str) -> QueryTriple:
    """Bisect the query by word count; a lone word is duplicated."""
    tokens = query.split()
    if not tokens:
        raise ValueError("query is empty")
    if len(tokens) == 1:
        return QueryTriple(query, tokens[0], tokens[0], BACKEND_NAIVE)
    half = len(tokens) // 2
    return QueryTriple(
        query, " ".join(tokens[:half]), " ".join(tokens[half:]), BACKEND_NAIVE
    )


def rule_split(query: str) -> QueryTriple:
    """Split at the first comma or temporal connective; else fall back to naive.

    The delimiter itself attaches to neither side. A candidate split that
    would leave either side empty is skipped and the scan continues.
    """
    tokens = query.split()
    if not tokens:
        raise ValueError("query is empty")
    for i, token in enumerate(tokens):
        if "," in token:
            before, after = token.split(",", 1)
            left = " ".join(tokens[:i] + ([before] if before else [])).strip()
            right = " ".join(([after] if after else []) + tokens[i + 1 :]).strip()
            if left and right:
                return QueryTriple(query, left, right, BACKEND_RULE)
        elif token.lower() in RULE_DELIMITERS:
            left = " ".join(tokens[:i])
            right = " ".join(tokens[i + 1 :])
            if left and right:
                return QueryTriple(query, left, right, BACKEND_RULE)
    return naive_split(query)


def provided_triple(query: str, sub_a: str, sub_b: str) -> QueryTriple:
    """Wrap externally supplied sub-queries."""
    return QueryTriple(query, sub_a, sub_b, BACKEND_PROVIDED)


_LABEL_A = re.compile(r"^\s*q_a\s*:\s*(.+?)\s*$", re.IGNORECASE)
_LABEL_B = re.compile(r"^\s*q_b\s*:\s*(.+?)\s*$", re.IGNORECASE)


def parse_labeled_response(text: str) -> tuple[str, str] | None:
    """Extract the two labeled sub-query lines, or None if malformed."""
    sub_a = sub_b = None
    for line in text.splitlines():
        match = _LABEL_A.match(line)
        if match and sub_a is None:
            sub_a = match.group(1)
            continue
        match = _LABEL_B.match(line)
        if match and sub_b is None:
            sub_b = match.group(1)
    if not sub_a or not sub_b or sub_a == sub_b:
        return None
    return sub_a, sub_b


@dataclass(frozen=True)
class EndpointConfig:
    """Where and how to reach the chat-completion service."""

    base_url: str
    model: str
    api_key: str = ""
    timeout_s: float = 30.0
    max_inflight: int = 4
    temperature: float = 0.0

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        fields = {
            "base_url": os.environ.get("SPANSEEK_LLM_BASE_URL", ""),
            "model": os.environ.get("SPANSEEK_LLM_MODEL", ""),
            "api_key": os.environ.get("SPANSEEK_LLM_API_KEY", ""),
        }
        fields.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**fields)


class ChatEndpoint:
    """Thin chat-completions client with a bounded in-flight count."""

    def __init__(self, config: EndpointConfig):
        if not config.base_url:
            raise ValueError("endpoint base_url is not configured")
        if not config.model:
            raise ValueError("endpoint model is not configured")
        self.config = config
        self._gate = threading.Semaphore(max(1, config.max_inflight))

    @property
    def url(self) -> str:
        base = self.config.base_url.rstrip("/")
        if base.endswith("/chat/completions"):
            return base
        return base + "/chat/completions"

    def complete(self, system: str, user: str) -> str:
        """One chat completion; returns the assistant message content."""
        payload = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        request = urllib.request.Request(
            self.url, data=json.dumps(payload).encode("utf-8"), headers=headers
        )
        with self._gate:
            with urllib.request.urlopen(request, timeout=self.config.timeout_s) as resp:
                body = json.loads(resp.read().decode("utf-8"))
        return body["choices"][0]["message"]["content"]


def _normalize_query(query: str) -> str:
    return " ".join(query.split())


def cache_key(backend: str, model: str, prompt: str, query: str) -> str:
    """Content address of a decomposition; timestamps never participate."""
    prompt_digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    material = "\n".join([backend, model, prompt_digest, _normalize_query(query)])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


class DecomposeCache:
    """Content-addressed on-disk store of query triples.

    One JSON file per key; writes go through a temp file and an atomic
    rename, so concurrent readers only ever see complete entries.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> QueryTriple | None:
        path = self._path(key)
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        triple = entry["triple"]
        return QueryTriple(
            triple["original"], triple["sub_a"], triple["sub_b"], triple["backend"]
        )

    def put(self, key: str, triple: QueryTriple) -> None:
        entry = {
            "triple": {
                "original": triple.original,
                "sub_a": triple.sub_a,
                "sub_b": triple.sub_b,
                "backend": triple.backend,
            },
            "created_at": time.time(),
        }
        fd, tmp_name = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(entry, handle)
            os.replace(tmp_name, self._path(key))
        except BaseException:
            try:
                os.unlink(tmp_name)
            except FileNotFoundError:
                pass
            raise


def llm_decompose(
    query: str,
    endpoint: ChatEndpoint,
    cache: DecomposeCache | None = None,
    retries: int = 2,
) -> QueryTriple:
    """Decompose through the endpoint, with caching and a rule fallback.

    A cache hit returns without any network call. Otherwise the endpoint is
    asked up to ``1 + retries`` times; responses that do not parse as two
    distinct labeled lines trigger a retry, and once retries are exhausted
    the rule split takes over (marked with its own backend). Transport
    failures on a cold cache are raised with the underlying cause attached.
    Successful endpoint results are cached.
    """
    if not query.strip():
        raise ValueError("query is empty")
    key = cache_key(BACKEND_LLM, endpoint.config.model, SYSTEM_PROMPT, query)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    for _ in range(1 + retries):
        try:
            content = endpoint.complete(SYSTEM_PROMPT, query)
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise DecomposeError(f"endpoint request failed: {exc}") from exc
        parsed = parse_labeled_response(content)
        if parsed is not None:
            triple = QueryTriple(query, parsed[0], parsed[1], BACKEND_LLM)
            if cache is not None:
                cache.put(key, triple)
            return triple
    return rule_split(query)


def decompose_query(
    query: str,
    backend: str,
    endpoint: ChatEndpoint | None = None,
    cache: DecomposeCache | None = None,
    provided: tuple[str, str] | None = None,
) -> QueryTriple:
    """Dispatch to the configured backend."""
    if backend == BACKEND_NAIVE:
        return naive_split(query)
    if backend == BACKEND_RULE:
        return rule_split(query)
    if backend == BACKEND_PROVIDED:
        if provided is None:
            raise ValueError("provided backend needs pre-decomposed sub-queries")
        return provided_triple(query, provided[0], provided[1])
    if backend == BACKEND_LLM:
        if endpoint is None:
            raise ValueError("llm backend needs an endpoint")
        return llm_decompose(query, endpoint, cache=cache)
    raise ValueError(f"unknown backend {backend!r}")
