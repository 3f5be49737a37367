"""LLM-driven conversation extension and control generation.

Every provider call goes through :class:`ProviderSession`, which answers
from a recorded exchange log when it can and only reaches the network when
live mode is switched on. Two prompting modes exist: ``one-shot`` asks for
the whole continuation in one completion, ``turn-by-turn`` requests one
turn per call.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import urlparse

import httpx

from .corpus import MAX_TURNS, Conversation, CorpusSet, DatasetKind, Role, truncate
from .errors import MalformedCompletion, MissingFile, ParseError, ProviderError, ReplayMiss, UsageError

log = logging.getLogger(__name__)

MODES = ("one-shot", "turn-by-turn")
API_STYLES = ("openai-chat", "gemini-generate")
RETRYABLE_STATUS = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


@dataclass(frozen=True)
class ProviderConfig:
    name: str
    endpoint: str
    model: str
    credential: str
    api_style: str = "openai-chat"
    temperature: float = 1.0
    max_retries: int = 3
    timeout: float = 60.0

    def __post_init__(self):
        if not self.name:
            raise ValueError("provider name must be non-empty")
        url = urlparse(self.endpoint)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise ValueError(f"endpoint must be an absolute http(s) URL, got {self.endpoint!r}")
        if self.api_style not in API_STYLES:
            raise ValueError(f"unknown api_style {self.api_style!r}")
        if not 0 <= self.max_retries <= 10:
            raise ValueError("max_retries must be between 0 and 10")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


DEFAULT_PROVIDERS = {
    "chatgpt": ProviderConfig(
        name="chatgpt",
        endpoint="https://api.openai.com/v1/chat/completions",
        model="gpt-4o-mini",
        credential="OPENAI_API_KEY",
    ),
    "gemini": ProviderConfig(
        name="gemini",
        endpoint="https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent",
        model="gemini-1.5-flash",
        credential="GEMINI_API_KEY",
        api_style="gemini-generate",
    ),
}


def load_providers(path: str | os.PathLike | None = None) -> dict[str, ProviderConfig]:
    """Built-in providers, overridden or extended by a JSON file of ``{name: {...}}``."""
    providers = dict(DEFAULT_PROVIDERS)
    if path is None:
        return providers
    path = Path(path)
    if not path.is_file():
        raise MissingFile(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        for name, fields in raw.items():
            base = asdict(providers[name]) if name in providers else {}
            providers[name] = ProviderConfig(**{**base, **fields, "name": name})
    except (json.JSONDecodeError, TypeError, ValueError, AttributeError) as exc:
        raise ParseError(str(path), f"bad provider config ({exc})") from None
    return providers


# -- prompt templates ------------------------------------------------------

_SECTION_RE = re.compile(r"^\[(system|continuation|turn)\]\s*$")
PLACEHOLDERS = ("conversation_so_far", "target_turns", "next_role")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system_instruction: str
    continuation_instruction: str
    turn_instruction: str = ""

    def __post_init__(self):
        # a dry render surfaces typos in placeholder names at load time
        probe = {"conversation_so_far": "Speaker: x", "target_turns": 12, "next_role": "Listener"}
        for part in (self.system_instruction, self.continuation_instruction, self.turn_instruction):
            try:
                part.format_map(probe)
            except (KeyError, IndexError, ValueError) as exc:
                raise ValueError(f"template {self.name!r}: bad placeholder {exc}") from None
        if not self.continuation_instruction.strip():
            raise ValueError(f"template {self.name!r} has no continuation instruction")

    def render(self, conversation_so_far: str, target_turns: int, next_role: Role, turn: bool = False) -> list[dict]:
        values = {
            "conversation_so_far": conversation_so_far or "(the conversation has not started yet)",
            "target_turns": target_turns,
            "next_role": next_role.value.capitalize(),
        }
        body = self.turn_instruction if turn and self.turn_instruction else self.continuation_instruction
        if turn and not self.turn_instruction:
            body += "\n\nWrite only the next turn, spoken by the {next_role}."
        messages = []
        system = self.system_instruction.format_map(values).strip()
        if system:
            messages.append({"role": "system", "content": system})
        messages.append({"role": "user", "content": body.format_map(values).strip()})
        return messages


def parse_template(text: str, name: str = "<template>") -> PromptTemplate:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        if line.startswith("#"):
            continue
        match = _SECTION_RE.match(line)
        if match:
            current = match.group(1)
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
        elif line.strip():
            raise ParseError(name, "text before the first [section] header")
    joined = {k: "\n".join(v).strip() for k, v in sections.items()}
    try:
        return PromptTemplate(
            name=name,
            system_instruction=joined.get("system", ""),
            continuation_instruction=joined.get("continuation", ""),
            turn_instruction=joined.get("turn", ""),
        )
    except ValueError as exc:
        raise ParseError(name, str(exc)) from None


def load_template(path_or_name: str | os.PathLike) -> PromptTemplate:
    """Load a template file, or a bundled one by name (``empathetic``, ``control``)."""
    if str(path_or_name) in ("empathetic", "control"):
        ref = resources.files("listening_energy") / "data" / "templates" / f"{path_or_name}.txt"
        return parse_template(ref.read_text(encoding="utf-8"), name=str(path_or_name))
    path = Path(path_or_name)
    if not path.is_file():
        raise MissingFile(path)
    return parse_template(path.read_text(encoding="utf-8"), name=path.stem)


def render_transcript(texts: Sequence[str]) -> str:
    return "\n".join(f"{Role.at(k).value.capitalize()}: {t}" for k, t in enumerate(texts, start=1))


# -- exchange records ------------------------------------------------------


def request_digest(config: ProviderConfig, messages: list[dict], mode: str, key: str) -> str:
    payload = {
        "provider": config.name,
        "model": config.model,
        "temperature": config.temperature,
        "mode": mode,
        "key": key,
        "messages": messages,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ExchangeRecord:
    request_digest: str
    response_text: str
    timestamp: str
    provider: str = ""
    model: str = ""
    temperature: float = 1.0
    mode: str = "one-shot"
    key: str = ""
    messages: list = field(default_factory=list, hash=False, compare=False)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)


class ExchangeLog:
    """Append-only JSONL log of provider exchanges, keyed by request digest."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._records: dict[str, ExchangeRecord] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self):
        for number, line in enumerate(self.path.read_text(encoding="utf-8").split("\n"), start=1):
            if not line.strip():
                continue
            try:
                record = ExchangeRecord(**json.loads(line))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ParseError(f"{self.path}:{number}", f"bad exchange record ({exc})") from None
            self._records[record.request_digest] = record

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, digest: str) -> bool:
        return digest in self._records

    def __iter__(self):
        return iter(list(self._records.values()))

    def get(self, digest: str) -> ExchangeRecord | None:
        return self._records.get(digest)

    def append(self, record: ExchangeRecord) -> None:
        with self._lock:
            self._records[record.request_digest] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(record.to_json() + "\n")


# -- wire adapters ---------------------------------------------------------


def _openai_request(config: ProviderConfig, messages: list[dict], secret: str):
    body = {"model": config.model, "messages": messages, "temperature": config.temperature}
    return config.endpoint, {"Authorization": f"Bearer {secret}"}, body


def _openai_response(payload: dict) -> str:
    return payload["choices"][0]["message"]["content"]


def _gemini_request(config: ProviderConfig, messages: list[dict], secret: str):
    system = [m["content"] for m in messages if m["role"] == "system"]
    contents = [
        {"role": "model" if m["role"] == "assistant" else "user", "parts": [{"text": m["content"]}]}
        for m in messages
        if m["role"] != "system"
    ]
    body = {"contents": contents, "generationConfig": {"temperature": config.temperature}}
    if system:
        body["systemInstruction"] = {"parts": [{"text": "\n\n".join(system)}]}
    url = config.endpoint.replace("{model}", config.model)
    return url, {"x-goog-api-key": secret}, body


def _gemini_response(payload: dict) -> str:
    parts = payload["candidates"][0]["content"]["parts"]
    return "".join(p.get("text", "") for p in parts)


ADAPTERS = {
    "openai-chat": (_openai_request, _openai_response),
    "gemini-generate": (_gemini_request, _gemini_response),
}


class ChatClient:
    """Blocking chat-completion client with exponential backoff."""

    def __init__(
        self,
        config: ProviderConfig,
        http: httpx.Client | None = None,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.http = http or httpx.Client(timeout=config.timeout)
        self.backoff_base = backoff_base
        self.sleep = sleep

    def complete(self, messages: list[dict]) -> str:
        secret = os.environ.get(self.config.credential)
        if not secret:
            raise ProviderError(f"environment variable {self.config.credential} is not set")
        build, extract = ADAPTERS[self.config.api_style]
        url, headers, body = build(self.config, messages, secret)
        attempts = self.config.max_retries + 1
        status = None
        for attempt in range(1, attempts + 1):
            try:
                response = self.http.post(url, headers=headers, json=body, timeout=self.config.timeout)
            except httpx.TransportError as exc:
                status = None
                log.warning("%s: transport error on attempt %d: %s", self.config.name, attempt, exc)
            else:
                status = response.status_code
                if status < 400:
                    try:
                        return extract(response.json())
                    except (KeyError, IndexError, TypeError, ValueError):
                        raise ProviderError("unexpected response shape", status, attempt) from None
                if status not in RETRYABLE_STATUS:
                    raise ProviderError(f"{self.config.name} rejected the request", status, attempt)
                log.warning("%s: HTTP %d on attempt %d", self.config.name, status, attempt)
            if attempt < attempts:
                self.sleep(self.backoff_base * 2 ** (attempt - 1))
        raise ProviderError(f"{self.config.name} failed after retries", status, attempts)


class ProviderSession:
    """Resolves requests against the exchange log, calling out only when live."""

    def __init__(
        self,
        config: ProviderConfig,
        exchanges: ExchangeLog | None = None,
        live: bool = False,
        client: ChatClient | None = None,
        clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc),
    ):
        self.config = config
        self.exchanges = exchanges if exchanges is not None else ExchangeLog()
        self.live = live
        self._client = client
        self.clock = clock

    @property
    def client(self) -> ChatClient:
        if self._client is None:
            self._client = ChatClient(self.config)
        return self._client

    def complete(self, messages: list[dict], mode: str, key: str) -> str:
        digest = request_digest(self.config, messages, mode, key)
        recorded = self.exchanges.get(digest)
        if recorded is not None:
            return recorded.response_text
        if not self.live:
            raise ReplayMiss(digest)
        text = self.client.complete(messages)
        self.exchanges.append(
            ExchangeRecord(
                request_digest=digest,
                response_text=text,
                timestamp=self.clock().isoformat(timespec="seconds"),
                provider=self.config.name,
                model=self.config.model,
                temperature=self.config.temperature,
                mode=mode,
                key=key,
                messages=messages,
            )
        )
        return text


# -- completion parsing ----------------------------------------------------

_LABEL_RE = re.compile(
    r"^\s*(?:[-*>]\s+)?[*_]{0,2}(speaker|listener)[*_]{0,2}\s*:\s*[*_]{0,2}\s*(.*)$",
    re.IGNORECASE,
)


def _split_labeled(raw: str) -> list[tuple[Role, str]] | None:
    """Labeled turns in order, or None if no line carries a role label.

    Unlabeled lines after a label continue that turn; unlabeled lines
    before the first label are treated as preamble and dropped.
    """
    pairs: list[tuple[Role, list[str]]] = []
    for line in raw.splitlines():
        match = _LABEL_RE.match(line)
        if match:
            pairs.append((Role(match.group(1).lower()), [match.group(2).strip()]))
        elif pairs and line.strip():
            pairs[-1][1].append(line.strip())
    if not pairs:
        return None
    return [(role, " ".join(p for p in parts if p)) for role, parts in pairs]


def _check_alternation(pairs: list[tuple[Role, str]], expected_first_role: Role, raw: str) -> list[str]:
    expected = expected_first_role
    texts = []
    for role, text in pairs:
        if role is not expected:
            raise MalformedCompletion(f"expected a {expected.value} turn, got {role.value}", raw)
        if not text:
            raise MalformedCompletion(f"empty {role.value} turn", raw)
        texts.append(text)
        expected = expected.other
    return texts


def parse_completion(raw: str, expected_first_role: Role) -> list[tuple[Role, str]]:
    """Split a completion into alternating ``(role, text)`` turns.

    ``Speaker:``/``Listener:`` labels are honoured when present; otherwise
    each non-blank line is one turn, alternating from ``expected_first_role``.
    A single unlabeled block is rejected as prose rather than dialogue.
    """
    if not raw or not raw.strip():
        raise MalformedCompletion("empty completion")
    pairs = _split_labeled(raw)
    if pairs is None:
        lines = [line.strip() for line in raw.splitlines() if line.strip()]
        if len(lines) < 2:
            raise MalformedCompletion("no role labels and fewer than two lines", raw)
        role = expected_first_role
        pairs = []
        for line in lines:
            pairs.append((role, line))
            role = role.other
    texts = _check_alternation(pairs, expected_first_role, raw)
    role = expected_first_role
    out = []
    for text in texts:
        out.append((role, text))
        role = role.other
    return out


def parse_single_turn(raw: str, role: Role) -> str:
    if not raw or not raw.strip():
        raise MalformedCompletion("empty completion")
    pairs = _split_labeled(raw)
    if pairs is None:
        return " ".join(line.strip() for line in raw.splitlines() if line.strip())
    first_role, text = pairs[0]
    if first_role is not role or not text:
        raise MalformedCompletion(f"expected a single {role.value} turn", raw)
    return text


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _drop_echo(pairs: list[tuple[Role, str]], prefix: Sequence[str]) -> list[tuple[Role, str]]:
    """Remove a restatement of the existing turns at the head of a completion."""
    k = 0
    while k < len(pairs) and k < len(prefix) and _normalize_ws(pairs[k][1]) == _normalize_ws(prefix[k]):
        k += 1
    if k:
        log.info("dropping %d echoed turns from completion", k)
    return pairs[k:]


# -- generation ------------------------------------------------------------


def _continue(
    session: ProviderSession,
    template: PromptTemplate,
    texts: list[str],
    target_turns: int,
    mode: str,
    key: str,
) -> list[str]:
    texts = list(texts)
    if mode == "one-shot":
        next_role = Role.at(len(texts) + 1)
        messages = template.render(render_transcript(texts), target_turns, next_role)
        raw = session.complete(messages, mode, key)
        pairs = _split_labeled(raw)
        if pairs is not None and texts:
            pairs = _drop_echo(pairs, texts)
            if not pairs:
                raise MalformedCompletion("completion only repeats the existing turns", raw)
            texts += _check_alternation(pairs, next_role, raw)
        else:
            texts += [t for _r, t in parse_completion(raw, next_role)]
    elif mode == "turn-by-turn":
        while len(texts) < target_turns:
            position = len(texts) + 1
            role = Role.at(position)
            messages = template.render(render_transcript(texts), target_turns, role, turn=True)
            raw = session.complete(messages, mode, f"{key}#{position}")
            texts.append(parse_single_turn(raw, role))
    else:
        raise UsageError(f"mode must be one of {', '.join(MODES)}")
    if len(texts) < target_turns:
        log.warning("%s: completion stopped at %d of %d turns", key, len(texts), target_turns)
    return texts[:target_turns]


def extend_conversation(
    seed: Conversation,
    session: ProviderSession,
    template: PromptTemplate,
    target_turns: int = MAX_TURNS,
    mode: str = "one-shot",
) -> Conversation:
    """Continue an expert conversation; its turns are kept verbatim."""
    if seed.kind.name != "expert":
        raise UsageError(f"seed {seed.id!r} must be an expert conversation")
    if target_turns < len(seed):
        raise UsageError("target_turns cannot be below the seed length")
    seed_texts = [t.text for t in seed.turns]
    texts = _continue(session, template, seed_texts, target_turns, mode, key=seed.id)
    result = Conversation.from_texts(seed.id, DatasetKind.extended(session.config.name), texts)
    return truncate(result, target_turns)


def generate_control(
    session: ProviderSession,
    template: PromptTemplate,
    count: int,
    target_turns: int = MAX_TURNS,
    mode: str = "one-shot",
    workers: int = 1,
) -> CorpusSet:
    if count < 1:
        raise UsageError("count must be at least 1")
    kind = DatasetKind.control(session.config.name)
    ids = [f"control-{i:03d}" for i in range(1, count + 1)]

    def one(cid: str) -> Conversation:
        texts = _continue(session, template, [], target_turns, mode, key=cid)
        return truncate(Conversation.from_texts(cid, kind, texts), target_turns)

    if workers <= 1:
        conversations = [one(cid) for cid in ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            conversations = list(pool.map(one, ids))
    return CorpusSet(kind, conversations)


def extend_corpus(
    seeds: CorpusSet,
    session: ProviderSession,
    template: PromptTemplate,
    target_turns: int = MAX_TURNS,
    mode: str = "one-shot",
    workers: int = 1,
) -> CorpusSet:
    run = lambda seed: extend_conversation(seed, session, template, target_turns, mode)  # noqa: E731
    if workers <= 1:
        conversations = [run(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            conversations = list(pool.map(run, seeds))
    return CorpusSet(DatasetKind.extended(session.config.name), conversations)
