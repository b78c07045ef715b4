"""Abstract-structure templates, worked examples and the problem manifest.

A template is a ``<class_id>.lean`` file plus a ``<class_id>.roles`` sidecar
assigning each declaration one of the four structure roles:

    D  definitions      O  operations (the algorithm)
    C  conditions       T  theorems

Sidecar syntax is one ``name: ROLE`` pair per line; ``#`` starts a comment.
Worked examples live in ``<templates_dir>/examples/<example_ref>.lean``.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .lean.lexer import mask
from .lean.source import PREAMBLE, THEOREM, DeclSpan, classify_line, index_declarations

BUILTIN_CLASSES = ("GD", "PGM", "Nesterov", "BCD", "ADMM")
ROLES = ("D", "O", "C", "T")


class TemplateError(Exception):
    pass


class MissingAsset(TemplateError):
    pass


class RoleAnnotationInvalid(TemplateError):
    pass


class ManifestError(Exception):
    pass


class DuplicateId(ManifestError):
    pass


class UnknownClass(ManifestError):
    pass


class SchemaViolation(ManifestError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


@dataclass(frozen=True)
class Snippets:
    imports: list[str]
    opens: list[str]
    section_header: str | None
    local_notations: list[str]

    def lines(self) -> list[str]:
        out = list(self.imports) + list(self.opens)
        if self.section_header:
            out.append(self.section_header)
        out.extend(self.local_notations)
        return out

    @property
    def section_end(self) -> str | None:
        if not self.section_header:
            return None
        name = self.section_header.split("section", 1)[1].strip()
        return f"end {name}".rstrip()


@dataclass
class Template:
    class_id: str
    lean_source: str
    snippets: Snippets
    decl_index: list[DeclSpan]
    roles: dict[str, str] = field(default_factory=dict)

    def decl(self, name: str) -> DeclSpan | None:
        for s in self.decl_index:
            if s.name == name:
                return s
        return None

    def decl_text(self, name: str) -> str:
        span = self.decl(name)
        if span is None:
            raise KeyError(name)
        return span.text(self.lean_source.splitlines(keepends=True)).rstrip()

    def theorem_names(self) -> list[str]:
        return [s.name for s in self.decl_index if s.category == THEOREM]

    def names_with_role(self, role: str) -> list[str]:
        return [n for n, r in self.roles.items() if r == role]


def default_templates_dir() -> Path:
    return Path(str(resources.files("structform") / "data" / "templates"))


def default_manifest_path() -> Path:
    return Path(str(resources.files("structform") / "data" / "manifest.jsonl"))


def extract_snippets(src: str, spans: list[DeclSpan]) -> Snippets:
    lines = src.splitlines()
    mlines = mask(src).text.splitlines()
    imports, opens, notations = [], [], []
    header = None
    for span in spans:
        if span.category != PREAMBLE:
            continue
        for i in range(span.start_line - 1, span.end_line):
            hit = classify_line(mlines[i])
            if hit is None:
                continue
            kw = hit[0]
            text = lines[i].rstrip()
            if kw == "import":
                imports.append(text)
            elif kw == "open":
                opens.append(text)
            elif kw == "section" and header is None:
                header = text
            elif kw.startswith("local notation"):
                notations.append(text)
    return Snippets(imports, opens, header, notations)


def parse_roles(text: str, origin: str = "<roles>") -> dict[str, str]:
    roles: dict[str, str] = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise RoleAnnotationInvalid(f"{origin}:{no}: expected 'name: ROLE'")
        name, role = (p.strip() for p in line.rsplit(":", 1))
        if role not in ROLES:
            raise RoleAnnotationInvalid(f"{origin}:{no}: unknown role {role!r}")
        if name in roles:
            raise RoleAnnotationInvalid(f"{origin}:{no}: duplicate entry for {name}")
        roles[name] = role
    return roles


def format_roles(roles: dict[str, str]) -> str:
    return "".join(f"{name}: {role}\n" for name, role in roles.items())


def make_template(class_id: str, lean_source: str, roles: dict[str, str]) -> Template:
    spans = index_declarations(lean_source)
    snippets = extract_snippets(lean_source, spans)
    if not snippets.imports:
        raise RoleAnnotationInvalid(f"{class_id}: template has no import lines")
    names = {s.name for s in spans}
    missing = [n for n in roles if n not in names]
    if missing:
        raise RoleAnnotationInvalid(f"{class_id}: roles name unknown declarations {missing}")
    if "T" not in roles.values():
        raise RoleAnnotationInvalid(f"{class_id}: no T-role declaration")
    return Template(class_id, lean_source, snippets, spans, dict(roles))


def load_template(class_id: str, templates_dir: str | os.PathLike | None = None) -> Template:
    d = Path(templates_dir) if templates_dir else default_templates_dir()
    lean_path = d / f"{class_id}.lean"
    roles_path = d / f"{class_id}.roles"
    if not lean_path.is_file():
        raise MissingAsset(str(lean_path))
    if not roles_path.is_file():
        raise MissingAsset(str(roles_path))
    roles = parse_roles(roles_path.read_text(encoding="utf-8"), str(roles_path))
    return make_template(class_id, lean_path.read_text(encoding="utf-8"), roles)


def write_template(template: Template, templates_dir: str | os.PathLike) -> None:
    d = Path(templates_dir)
    d.mkdir(parents=True, exist_ok=True)
    (d / f"{template.class_id}.lean").write_text(template.lean_source, encoding="utf-8")
    (d / f"{template.class_id}.roles").write_text(format_roles(template.roles), encoding="utf-8")


def load_example(example_ref: str, templates_dir: str | os.PathLike | None = None) -> str:
    d = Path(templates_dir) if templates_dir else default_templates_dir()
    path = d / "examples" / f"{example_ref}.lean"
    if not path.is_file():
        raise MissingAsset(str(path))
    return path.read_text(encoding="utf-8")


def class_registry(templates_dir: str | os.PathLike | None = None) -> tuple[str, ...]:
    """Built-in classes plus any extra ``*.lean`` templates found on disk."""
    d = Path(templates_dir) if templates_dir else default_templates_dir()
    extra = sorted(p.stem for p in d.glob("*.lean") if p.stem not in BUILTIN_CLASSES) if d.is_dir() else []
    return BUILTIN_CLASSES + tuple(extra)


# ---------------------------------------------------------------- manifest

MANIFEST_FIELDS = ("id", "class_id", "title", "description", "objective_latex", "template_ref", "example_ref")


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    class_id: str
    title: str
    description: str
    objective_latex: str
    template_ref: str
    example_ref: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Manifest:
    problems: list[ProblemSpec]
    class_counts: dict[str, int]

    def get(self, problem_id: str) -> ProblemSpec:
        for p in self.problems:
            if p.id == problem_id:
                return p
        raise KeyError(problem_id)

    def ids(self) -> list[str]:
        return [p.id for p in self.problems]


def parse_manifest(text: str, registry: tuple[str, ...] = BUILTIN_CLASSES) -> Manifest:
    problems: list[ProblemSpec] = []
    seen: set[str] = set()
    for no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(no, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise SchemaViolation(no, "record is not an object")
        missing = [f for f in MANIFEST_FIELDS if f not in rec]
        extra = [f for f in rec if f not in MANIFEST_FIELDS]
        if missing or extra:
            raise SchemaViolation(no, f"missing {missing} / unexpected {extra}")
        if not all(isinstance(rec[f], str) for f in MANIFEST_FIELDS):
            raise SchemaViolation(no, "all fields must be strings")
        if not rec["description"].strip():
            raise SchemaViolation(no, "empty description")
        if rec["class_id"] not in registry or rec["template_ref"] not in registry:
            raise UnknownClass(f"line {no}: {rec['class_id']!r}")
        if rec["id"] in seen:
            raise DuplicateId(rec["id"])
        seen.add(rec["id"])
        problems.append(ProblemSpec(**{f: rec[f] for f in MANIFEST_FIELDS}))
    counts = {c: 0 for c in registry}
    for p in problems:
        counts[p.class_id] += 1
    return Manifest(problems, counts)


def load_manifest(path: str | os.PathLike | None = None,
                  registry: tuple[str, ...] | None = None) -> Manifest:
    p = Path(path) if path else default_manifest_path()
    if not p.is_file():
        raise MissingAsset(str(p))
    return parse_manifest(p.read_text(encoding="utf-8"), registry or BUILTIN_CLASSES)


def write_manifest(manifest: Manifest, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in manifest.problems:
            fh.write(json.dumps(p.to_dict(), ensure_ascii=False) + "\n")


def check_referential_integrity(manifest: Manifest, templates_dir: str | os.PathLike | None = None) -> list[str]:
    """Problems whose template or example fails to load (empty when all good)."""
    bad = []
    for p in manifest.problems:
        try:
            load_template(p.template_ref, templates_dir)
            load_example(p.example_ref, templates_dir)
        except TemplateError as exc:
            bad.append(f"{p.id}: {exc}")
    return bad
