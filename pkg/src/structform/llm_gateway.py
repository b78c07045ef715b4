"""Text-completion backends, prompt templates and code-block extraction.

Three backends sit behind one ``Gateway``:

* ``live``     -- an OpenAI-compatible chat-completions endpoint over HTTPS
* ``replay``   -- answers from a recorded JSON Lines transcript, keyed by prompt hash
* ``scripted`` -- first-match rules from a fixture file (tests, demos)

Completions are keyed on ``(prompt, params, sample)``. ``sample`` separates
repeated draws of the same prompt (majority voting); with it, replayed and
scripted output stay pure functions of the request.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping

log = logging.getLogger(__name__)


class GatewayError(Exception):
    pass


class UnknownTemplate(GatewayError):
    pass


class MissingBinding(GatewayError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


class BackendUnavailable(GatewayError):
    pass


class ReplayMiss(GatewayError):
    pass


class Timeout(GatewayError):
    pass


class EmptyCompletion(GatewayError):
    pass


@dataclass(frozen=True)
class GenParams:
    model_name: str = "deepseek-reasoner"
    temperature: float = 0.7
    max_tokens: int = 16000
    top_p: float = 0.9
    frequency_penalty: float = 0.2

    def __post_init__(self) -> None:
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValueError(f"top_p out of range: {self.top_p}")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be positive: {self.max_tokens}")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- templates

PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    placeholders: tuple[str, ...] = ()

    @classmethod
    def from_body(cls, id: str, body: str) -> PromptTemplate:
        names = tuple(dict.fromkeys(PLACEHOLDER_RE.findall(body)))
        return cls(id, body, names)

    def render(self, bindings: Mapping[str, str]) -> str:
        for name in self.placeholders:
            if name not in bindings:
                raise MissingBinding(name)
        # single pass: binding values are never rescanned for placeholders
        return PLACEHOLDER_RE.sub(lambda m: str(bindings[m.group(1)]), self.body)


_TEMPLATE_CACHE: dict[str, PromptTemplate] = {}
_TEMPLATE_LOCK = threading.Lock()


def load_templates(directory: str | os.PathLike | None = None) -> dict[str, PromptTemplate]:
    """Load every ``*.txt`` prompt asset; the file stem is the template id."""
    out = {}
    if directory is None:
        root = resources.files("structform") / "prompts"
        entries = [(p.name, p.read_text(encoding="utf-8")) for p in root.iterdir() if p.name.endswith(".txt")]
    else:
        entries = [(p.name, p.read_text(encoding="utf-8")) for p in Path(directory).glob("*.txt")]
    for name, body in sorted(entries):
        tid = name[:-4]
        out[tid] = PromptTemplate.from_body(tid, body)
    return out


def get_template(template_id: str) -> PromptTemplate:
    with _TEMPLATE_LOCK:
        if not _TEMPLATE_CACHE:
            _TEMPLATE_CACHE.update(load_templates())
        try:
            return _TEMPLATE_CACHE[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None


def render_prompt(template_id: str, bindings: Mapping[str, str],
                  templates: Mapping[str, PromptTemplate] | None = None) -> str:
    if templates is not None:
        if template_id not in templates:
            raise UnknownTemplate(template_id)
        return templates[template_id].render(bindings)
    return get_template(template_id).render(bindings)


# ---------------------------------------------------------------- code blocks

FENCE_RE = re.compile(r"^[ \t]*```[ \t]*([\w+-]*)[^\n]*$", re.MULTILINE)


def extract_code_block(completion: str) -> str:
    """Contents of the last ```lean / ```lean4 block (last-fence-wins).

    Falls back to the last unlabeled block, then to the whole completion with
    any stray fence lines removed.
    """
    if not completion or not completion.strip():
        raise EmptyCompletion("completion is empty")
    fences = list(FENCE_RE.finditer(completion))
    blocks: list[tuple[str, str]] = []
    i = 0
    while i < len(fences):
        opener = fences[i]
        if i + 1 < len(fences):
            closer = fences[i + 1]
            blocks.append((opener.group(1).lower(), completion[opener.end():closer.start()]))
            i += 2
        else:
            # unterminated fence: take everything after it
            blocks.append((opener.group(1).lower(), completion[opener.end():]))
            i += 1
    chosen = None
    for label, body in reversed(blocks):
        if label in ("lean", "lean4"):
            chosen = body
            break
    if chosen is None:
        for label, body in reversed(blocks):
            if label == "":
                chosen = body
                break
    if chosen is None:
        chosen = FENCE_RE.sub("", completion)
    result = chosen.strip()
    if not result:
        raise EmptyCompletion("no code in completion")
    return result


# ---------------------------------------------------------------- transcripts

def request_key(prompt: str, params: GenParams, sample: int = 0) -> str:
    payload = json.dumps({"prompt": prompt, "params": params.to_dict(), "sample": sample},
                         sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Transcript:
    request_id: str
    prompt_hash: str
    prompt: str
    completion: str
    params: GenParams
    timestamp: float
    backend: str  # live | replay | scripted

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Transcript:
        return cls(d["request_id"], d["prompt_hash"], d["prompt"], d["completion"],
                   GenParams(**d["params"]), float(d["timestamp"]), d["backend"])


def read_transcripts(path: str | os.PathLike) -> list[Transcript]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(Transcript.from_dict(json.loads(line)))
    return out


# ---------------------------------------------------------------- backends

class Backend:
    name = "abstract"

    def generate(self, prompt: str, params: GenParams, sample: int, key: str) -> str:
        raise NotImplementedError


@dataclass
class ScriptRule:
    response: str
    contains: tuple[str, ...] = ()
    regex: str | None = None
    sample: int | None = None

    def matches(self, prompt: str, sample: int) -> bool:
        if self.sample is not None and self.sample != sample:
            return False
        if any(c not in prompt for c in self.contains):
            return False
        if self.regex is not None and re.search(self.regex, prompt) is None:
            return False
        return True


class ScriptedBackend(Backend):
    """First matching rule answers. No match raises ``ReplayMiss``."""

    name = "scripted"

    def __init__(self, rules: Iterable[ScriptRule] = (), responder: Callable[[str, int], str | None] | None = None):
        self.rules = list(rules)
        self.responder = responder

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ScriptedBackend:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = []
        for r in data["rules"]:
            contains = r.get("contains", ())
            if isinstance(contains, str):
                contains = (contains,)
            rules.append(ScriptRule(r["response"], tuple(contains), r.get("regex"), r.get("sample")))
        return cls(rules)

    def generate(self, prompt: str, params: GenParams, sample: int, key: str) -> str:
        if self.responder is not None:
            out = self.responder(prompt, sample)
            if out is not None:
                return out
        for rule in self.rules:
            if rule.matches(prompt, sample):
                return rule.response
        raise ReplayMiss(f"no scripted rule matches prompt {key[:12]}")


class ReplayBackend(Backend):
    name = "replay"

    def __init__(self, transcripts: Iterable[Transcript]):
        self.by_key: dict[str, Transcript] = {}
        for t in transcripts:
            self.by_key.setdefault(t.prompt_hash, t)

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> ReplayBackend:
        return cls(read_transcripts(path))

    def lookup(self, key: str) -> Transcript:
        try:
            return self.by_key[key]
        except KeyError:
            raise ReplayMiss(f"no recorded completion for {key[:12]}") from None

    def generate(self, prompt: str, params: GenParams, sample: int, key: str) -> str:
        return self.lookup(key).completion


class LiveBackend(Backend):
    """OpenAI-compatible chat completion endpoint."""

    name = "live"

    def __init__(self, base_url: str, api_key: str, timeout_s: float = 600.0, retries: int = 1,
                 backoff_s: float = 2.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s

    @classmethod
    def from_env(cls, prefix: str = "STRUCTFORM", timeout_s: float = 600.0) -> LiveBackend:
        base = os.environ.get(f"{prefix}_BASE_URL")
        key = os.environ.get(f"{prefix}_API_KEY")
        if not base or not key:
            raise BackendUnavailable(f"set {prefix}_BASE_URL and {prefix}_API_KEY")
        return cls(base, key, timeout_s)

    def generate(self, prompt: str, params: GenParams, sample: int, key: str) -> str:
        body = json.dumps({
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "top_p": params.top_p,
            "frequency_penalty": params.frequency_penalty,
        }).encode("utf-8")
        req = urllib.request.Request(
            f"{self.base_url}/chat/completions", data=body, method="POST",
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"},
        )
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    data = json.loads(resp.read().decode("utf-8"))
                return data["choices"][0]["message"]["content"] or ""
            except TimeoutError as exc:
                raise Timeout(f"no response within {self.timeout_s}s") from exc
            except (urllib.error.URLError, OSError, KeyError, ValueError) as exc:
                last = exc
                if attempt < self.retries:
                    delay = self.backoff_s * (2 ** attempt)
                    log.warning("completion failed (%s); retrying in %.1fs", exc, delay)
                    time.sleep(delay)
        raise BackendUnavailable(str(last))


# ---------------------------------------------------------------- gateway

@dataclass
class Gateway:
    backend: Backend
    params: GenParams = field(default_factory=GenParams)
    log_path: Path | None = None
    clock: Callable[[], float] = time.time
    transcripts: list[Transcript] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()
        self._seq = 0

    @property
    def calls(self) -> int:
        return len(self.transcripts)

    def complete(self, prompt: str, params: GenParams | None = None, sample: int = 0) -> str:
        return self.request(prompt, params, sample).completion

    def request(self, prompt: str, params: GenParams | None = None, sample: int = 0) -> Transcript:
        """Like ``complete`` but returns the recorded transcript."""
        params = params or self.params
        key = request_key(prompt, params, sample)
        if isinstance(self.backend, ReplayBackend):
            rec = self.backend.lookup(key)
            t = Transcript(rec.request_id, key, prompt, rec.completion, params, rec.timestamp, "replay")
        else:
            completion = self.backend.generate(prompt, params, sample, key)
            with self._lock:
                self._seq += 1
                seq = self._seq
            t = Transcript(f"{seq:06d}-{key[:12]}", key, prompt, completion, params,
                           self.clock(), self.backend.name)
        self._record(t)
        return t

    def _record(self, t: Transcript) -> None:
        with self._lock:
            self.transcripts.append(t)
            if self.log_path is not None:
                self.log_path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.log_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(t.to_dict(), ensure_ascii=False) + "\n")

    @property
    def last_id(self) -> str | None:
        return self.transcripts[-1].request_id if self.transcripts else None


class GatewayView:
    """Per-caller view of a shared gateway that keeps its own call log.

    ``last_id`` on a shared ``Gateway`` races between workers; a view only
    sees the requests made through it.
    """

    def __init__(self, gateway: Gateway):
        self.gateway = gateway
        self.ids: list[str] = []

    @property
    def calls(self) -> int:
        return len(self.ids)

    @property
    def last_id(self) -> str | None:
        return self.ids[-1] if self.ids else None

    def complete(self, prompt: str, params: GenParams | None = None, sample: int = 0) -> str:
        t = self.gateway.request(prompt, params, sample)
        self.ids.append(t.request_id)
        return t.completion


def make_backend(mode: str, source: str | os.PathLike | None = None, env_prefix: str = "STRUCTFORM",
                 timeout_s: float = 600.0) -> Backend:
    if mode == "scripted":
        if source is None:
            raise BackendUnavailable("scripted backend needs a fixture file")
        return ScriptedBackend.from_file(source)
    if mode == "replay":
        if source is None:
            raise BackendUnavailable("replay backend needs a transcript file")
        return ReplayBackend.from_file(source)
    if mode == "live":
        return LiveBackend.from_env(env_prefix, timeout_s)
    raise ValueError(f"unknown backend mode {mode!r}")
