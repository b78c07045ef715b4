"""Lean checker backends.

``LeanChecker`` shells out to ``lake env lean`` inside a Lean project;
``MockChecker`` looks the file's sha256 up in a directory of canned outputs.
Both return the same ``CheckReport``.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import subprocess
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .diagnostics import Diagnostic, ErrorKind, parse_with_report
from .source import DeclSpan, attribute_diagnostics, index_declarations

DEFAULT_TIMEOUT_S = 300.0


class CheckerError(Exception):
    pass


class CheckerUnavailable(CheckerError):
    pass


class WorkspaceInvalid(CheckerError):
    pass


class CheckerTimeout(CheckerError):
    pass


@dataclass
class CheckReport:
    diagnostics: list[Diagnostic]
    decls: list[DeclSpan]
    unparsed_lines: int = 0
    raw: str = field(default="", repr=False)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.is_error]

    @property
    def error_count(self) -> int:
        return len(self.errors)

    @property
    def compiled_ok(self) -> bool:
        return self.error_count == 0

    def to_dict(self) -> dict:
        return {
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "decls": [s.to_dict() for s in self.decls],
            "error_count": self.error_count,
            "compiled_ok": self.compiled_ok,
        }


def digest(src: str) -> str:
    return hashlib.sha256(src.encode("utf-8")).hexdigest()


def build_report(src: str, raw: str) -> CheckReport:
    diags, skipped = parse_with_report(raw)
    decls = index_declarations(src)
    return CheckReport(attribute_diagnostics(diags, decls), decls, skipped, raw)


def timeout_report(src: str, file: str, limit: float) -> CheckReport:
    msg = f"(deterministic) timeout: checker exceeded {limit:g}s"
    d = Diagnostic(file, 1, 0, "error", msg, ErrorKind.TIMEOUT)
    decls = index_declarations(src)
    return CheckReport(attribute_diagnostics([d], decls), decls)


class Checker:
    """Base interface; subclasses implement ``raw_output``."""

    timeout_s: float = DEFAULT_TIMEOUT_S

    def raw_output(self, src: str, name: str) -> str:
        raise NotImplementedError

    def check_source(self, src: str, name: str = "Main.lean") -> CheckReport:
        return build_report(src, self.raw_output(src, name))

    def check(self, workspace: str | os.PathLike, file: str | os.PathLike) -> CheckReport:
        path = Path(workspace) / file
        if not path.is_file():
            raise WorkspaceInvalid(f"no such file: {path}")
        return self.check_source(path.read_text(encoding="utf-8"), Path(file).name)

    def check_or_timeout(self, src: str, name: str = "Main.lean") -> CheckReport:
        """Like ``check_source`` but a timeout becomes a ``timeout`` diagnostic."""
        try:
            return self.check_source(src, name)
        except CheckerTimeout:
            return timeout_report(src, name, self.timeout_s)


class MockChecker(Checker):
    """Canned outputs keyed by sha256 of the file text; a missing fixture means clean."""

    def __init__(self, fixture_dir: str | os.PathLike):
        self.fixture_dir = Path(fixture_dir)
        if not self.fixture_dir.is_dir():
            raise WorkspaceInvalid(f"mock fixture dir missing: {self.fixture_dir}")
        self.calls = 0
        self._lock = threading.Lock()

    def raw_output(self, src: str, name: str) -> str:
        with self._lock:
            self.calls += 1
        fixture = self.fixture_dir / f"{digest(src)}.txt"
        if fixture.is_file():
            return fixture.read_text(encoding="utf-8")
        return ""


class LeanChecker(Checker):
    """Runs the Lean build tool on a private scratch copy inside the workspace."""

    def __init__(self, workspace: str | os.PathLike, timeout_s: float = DEFAULT_TIMEOUT_S,
                 command: tuple[str, ...] = ("lake", "env", "lean")):
        self.workspace = Path(workspace)
        self.timeout_s = timeout_s
        self.command = command
        if not (self.workspace / "lakefile.lean").exists() and not (self.workspace / "lakefile.toml").exists():
            raise WorkspaceInvalid(f"not a Lean project: {self.workspace}")
        if shutil.which(command[0]) is None:
            raise CheckerUnavailable(f"{command[0]} not found on PATH")

    def raw_output(self, src: str, name: str) -> str:
        scratch = self.workspace / ".structform_scratch"
        scratch.mkdir(exist_ok=True)
        path = scratch / f"{uuid.uuid4().hex}_{name}"
        path.write_text(src, encoding="utf-8")
        try:
            proc = subprocess.run(
                [*self.command, str(path)],
                cwd=self.workspace,
                capture_output=True,
                text=True,
                timeout=self.timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise CheckerTimeout(f"{name}: exceeded {self.timeout_s}s") from exc
        except OSError as exc:
            raise CheckerUnavailable(str(exc)) from exc
        finally:
            path.unlink(missing_ok=True)
        return proc.stdout + proc.stderr


def write_fixture(fixture_dir: str | os.PathLike, src: str, raw: str) -> Path:
    """Store canned checker output for ``src`` (used by tests and demo bundles)."""
    d = Path(fixture_dir)
    d.mkdir(parents=True, exist_ok=True)
    p = d / f"{digest(src)}.txt"
    p.write_text(raw, encoding="utf-8")
    return p


def make_checker(mode: str, workspace: str | os.PathLike, timeout_s: float = DEFAULT_TIMEOUT_S) -> Checker:
    if mode == "mock":
        return MockChecker(workspace)
    if mode == "real":
        return LeanChecker(workspace, timeout_s)
    raise ValueError(f"unknown checker mode {mode!r}")


def check(workspace: str | os.PathLike, file: str | os.PathLike, mode: str = "mock",
          timeout_s: float = DEFAULT_TIMEOUT_S) -> CheckReport:
    return make_checker(mode, workspace, timeout_s).check(workspace, file)


__all__ = [
    "CheckReport", "Checker", "MockChecker", "LeanChecker", "CheckerError", "CheckerUnavailable",
    "WorkspaceInvalid", "CheckerTimeout", "check", "make_checker", "write_fixture", "digest",
]
