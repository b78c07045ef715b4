from .checker import (CheckReport, Checker, CheckerError, CheckerTimeout, CheckerUnavailable,
                      LeanChecker, MockChecker, WorkspaceInvalid, check, digest, make_checker,
                      write_fixture)
from .diagnostics import Diagnostic, ErrorKind, normalize_error, parse_diagnostics
from .source import (DEFINITION, INSTANCE, PREAMBLE, THEOREM, DeclSpan, attribute_diagnostics,
                     index_declarations, scan_sorries)

__all__ = [
    "CheckReport", "Checker", "CheckerError", "CheckerTimeout", "CheckerUnavailable", "LeanChecker",
    "MockChecker", "WorkspaceInvalid", "check", "digest", "make_checker", "write_fixture",
    "Diagnostic", "ErrorKind", "normalize_error", "parse_diagnostics", "DeclSpan",
    "attribute_diagnostics", "index_declarations", "scan_sorries",
    "DEFINITION", "THEOREM", "INSTANCE", "PREAMBLE",
]
