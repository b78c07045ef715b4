"""Per-file scoring, pooled aggregate metrics, judge-based voting and stage timing.

Rates whose denominator is zero are ``None`` and print as ``n/a``.

* Category rates pool ``ok / total`` over files.
* SC pools declaration correctness over files that did not succeed.
* PS pools ``proofs_complete / proof_obligations`` over files with zero errors.
"""

from __future__ import annotations

import csv
import io
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from .lean.checker import CheckReport
from .lean.diagnostics import Diagnostic
from .lean.source import DEFINITION, INSTANCE, PREAMBLE, THEOREM
from .llm_gateway import Gateway, render_prompt
from .templates import Manifest

STAGES = ("generation", "backbone_correction", "proof_generation", "proof_correction", "harmless_fixing")
DEFAULT_MV_ROUNDS = 16
NA = "n/a"


class MissingProblem(KeyError):
    pass


class MVInconclusive(RuntimeError):
    pass


class EmptyRunSet(ValueError):
    pass


# ---------------------------------------------------------------- per file

@dataclass
class FileScore:
    problem_id: str
    def_total: int
    def_ok: int
    thm_total: int
    thm_ok: int
    inst_total: int
    inst_ok: int
    file_success: bool
    proof_obligations: int
    proofs_complete: int
    compiled_ok: bool = False
    lines: int = 0
    error_count: int = 0

    def __post_init__(self) -> None:
        for ok, total in ((self.def_ok, self.def_total), (self.thm_ok, self.thm_total),
                          (self.inst_ok, self.inst_total), (self.proofs_complete, self.proof_obligations)):
            if not 0 <= ok <= total:
                raise ValueError(f"count {ok} outside [0, {total}]")

    @property
    def decl_total(self) -> int:
        return self.def_total + self.thm_total + self.inst_total

    @property
    def decl_ok(self) -> int:
        return self.def_ok + self.thm_ok + self.inst_ok

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> FileScore:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def score_file(src: str, report: CheckReport, problem_id: str = "",
               commented_out: Mapping[str, str] | None = None) -> FileScore:
    """Score one file from its check report.

    ``commented_out`` maps names removed by harmless fixing to their
    category; each counts as a declaration that is not ok.
    """
    totals = {DEFINITION: 0, THEOREM: 0, INSTANCE: 0}
    oks = dict(totals)
    erroring = {d.decl for d in report.errors if d.decl is not None}
    obligations = complete = 0
    for s in report.decls:
        if s.category == PREAMBLE:
            continue
        totals[s.category] += 1
        ok = s.name not in erroring and not (s.category == DEFINITION and s.has_sorry)
        oks[s.category] += ok
        if s.category in (THEOREM, INSTANCE) and s.body_is_proof:
            obligations += 1
            complete += not s.has_sorry
    commented_out = dict(commented_out or {})
    for cat in commented_out.values():
        if cat in totals:
            totals[cat] += 1
    compiled = report.compiled_ok
    success = (compiled and not commented_out and all(oks[c] == totals[c] for c in totals)
               and all(totals[c] >= 1 for c in totals))
    return FileScore(
        problem_id=problem_id,
        def_total=totals[DEFINITION], def_ok=oks[DEFINITION],
        thm_total=totals[THEOREM], thm_ok=oks[THEOREM],
        inst_total=totals[INSTANCE], inst_ok=oks[INSTANCE],
        file_success=success,
        proof_obligations=obligations,
        proofs_complete=complete if compiled else 0,
        compiled_ok=compiled,
        lines=len(src.splitlines()),
        error_count=report.error_count,
    )


# ---------------------------------------------------------------- aggregate

def _rate(num: float, den: float) -> float | None:
    return num / den if den else None


@dataclass
class Metrics:
    files: int
    def_rate: float | None
    thm_rate: float | None
    inst_rate: float | None
    file_rate: float | None
    sc_rate: float | None
    ps_rate: float | None
    dm: float | None
    tm: float | None
    fl: float | None
    successes: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(scores: Sequence[FileScore]) -> Metrics:
    n = len(scores)
    failed = [s for s in scores if not s.file_success]
    clean = [s for s in scores if s.compiled_ok]
    successes = sum(s.file_success for s in scores)
    return Metrics(
        files=n,
        def_rate=_rate(sum(s.def_ok for s in scores), sum(s.def_total for s in scores)),
        thm_rate=_rate(sum(s.thm_ok for s in scores), sum(s.thm_total for s in scores)),
        inst_rate=_rate(sum(s.inst_ok for s in scores), sum(s.inst_total for s in scores)),
        file_rate=_rate(successes, n),
        sc_rate=_rate(sum(s.decl_ok for s in failed), sum(s.decl_total for s in failed)),
        ps_rate=_rate(sum(s.proofs_complete for s in clean), sum(s.proof_obligations for s in clean)),
        dm=_rate(sum(s.def_total for s in scores), n),
        tm=_rate(sum(s.thm_total for s in scores), n),
        fl=_rate(sum(s.lines for s in scores), n),
        successes=successes,
    )


@dataclass
class EvalReport:
    per_class: dict[str, Metrics]
    overall: Metrics
    mv_scores: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pooling": "category, SC and PS rates pool counts over files; n/a means empty denominator",
            "per_class": {k: v.to_dict() for k, v in self.per_class.items()},
            "overall": self.overall.to_dict(),
            "mv_scores": dict(self.mv_scores),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def aggregate(scores: Iterable[FileScore], manifest: Manifest,
              mv_scores: Mapping[str, float] | None = None) -> EvalReport:
    by_id = {p.id: p for p in manifest.problems}
    groups: dict[str, list[FileScore]] = {}
    all_scores = []
    for s in scores:
        if s.problem_id not in by_id:
            raise MissingProblem(s.problem_id)
        groups.setdefault(by_id[s.problem_id].class_id, []).append(s)
        all_scores.append(s)
    order = [c for c in manifest.class_counts if c in groups] + sorted(c for c in groups if c not in manifest.class_counts)
    per_class = {c: compute_metrics(groups[c]) for c in order}
    return EvalReport(per_class, compute_metrics(all_scores), dict(mv_scores or {}))


def fmt_rate(r: float | None) -> str:
    return NA if r is None else f"{100 * r:.2f}%"


def fmt_num(x: float | None) -> str:
    return NA if x is None else f"{x:.2f}"


TABLE_COLUMNS = ("class", "files", "Def", "Thm", "Inst", "File", "SC", "PS", "DM", "TM", "FL", "MV")


def _row(name: str, m: Metrics, mv: float | None) -> list[str]:
    return [name, str(m.files), fmt_rate(m.def_rate), fmt_rate(m.thm_rate), fmt_rate(m.inst_rate),
            fmt_rate(m.file_rate), fmt_rate(m.sc_rate), fmt_rate(m.ps_rate), fmt_num(m.dm),
            fmt_num(m.tm), fmt_num(m.fl), fmt_num(mv)]


def report_rows(report: EvalReport, manifest: Manifest | None = None) -> list[list[str]]:
    def mv_for(ids: Iterable[str]) -> float | None:
        vals = [report.mv_scores[i] for i in ids if i in report.mv_scores]
        return sum(vals) / len(vals) if vals else None

    rows = []
    for cls, m in report.per_class.items():
        ids = [p.id for p in manifest.problems if p.class_id == cls] if manifest else []
        rows.append(_row(cls, m, mv_for(ids)))
    rows.append(_row("overall", report.overall, mv_for(report.mv_scores)))
    return rows


def format_table(report: EvalReport, manifest: Manifest | None = None) -> str:
    rows = [list(TABLE_COLUMNS)] + report_rows(report, manifest)
    widths = [max(len(r[i]) for r in rows) for i in range(len(TABLE_COLUMNS))]
    out = []
    for k, r in enumerate(rows):
        out.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def format_csv(report: EvalReport, manifest: Manifest | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    w.writerows(report_rows(report, manifest))
    return buf.getvalue()


# ---------------------------------------------------------------- majority vote

_INT_RE = re.compile(r"-?\d+")


def parse_score(text: str) -> int | None:
    """First integer in ``text`` if it lies in [0, 100]; otherwise None."""
    m = _INT_RE.search(text or "")
    if m is None:
        return None
    v = int(m.group(0))
    return v if 0 <= v <= 100 else None


def format_diagnostics(diags: Iterable[Diagnostic]) -> str:
    lines = [f"{d.file}:{d.line}:{d.col}: {d.severity}: {d.message}" for d in diags]
    return "\n".join(lines) if lines else "No errors."


@dataclass(frozen=True)
class VoteResult:
    score: float
    values: list[int]
    dropped: int
    retried: int


def majority_vote(problem: str, src: str, diags: Iterable[Diagnostic], judge: Gateway,
                  rounds: int = DEFAULT_MV_ROUNDS, workers: int = 4) -> VoteResult:
    """Mean of per-round judge scores.

    Round ``r`` uses sample ``r``; its single retry uses sample ``rounds + r``.
    Values outside [0, 100] count as unparseable.
    """
    if rounds <= 0:
        raise ValueError("rounds must be positive")
    prompt = render_prompt("majority_vote", {
        "problem": problem, "candidate": src, "error_messages": format_diagnostics(diags)})

    def one(r: int) -> tuple[int | None, bool]:
        v = parse_score(judge.complete(prompt, sample=r))
        if v is not None:
            return v, False
        return parse_score(judge.complete(prompt, sample=rounds + r)), True

    with ThreadPoolExecutor(max_workers=max(1, min(workers, rounds))) as pool:
        results = list(pool.map(one, range(rounds)))
    values = [v for v, _ in results if v is not None]
    retried = sum(1 for _, r in results if r)
    if 2 * len(values) < rounds:
        raise MVInconclusive(f"only {len(values)} of {rounds} rounds gave a score")
    return VoteResult(sum(values) / len(values), values, rounds - len(values), retried)


# ---------------------------------------------------------------- timing

@dataclass
class StageTiming:
    durations: dict[str, float]
    shares: dict[str, float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("stage", "seconds", "share_percent"))
        for s in STAGES:
            w.writerow((s, f"{self.durations[s]:.6f}", f"{self.shares[s]:.4f}"))
        return buf.getvalue()


def _durations_of(rec: Any) -> Mapping[str, float]:
    if isinstance(rec, Mapping):
        return rec.get("durations", rec)
    return rec.durations


def timing_report(records: Iterable[Any]) -> StageTiming:
    totals = {s: 0.0 for s in STAGES}
    for rec in records:
        for s, v in _durations_of(rec).items():
            if s in totals:
                totals[s] += float(v)
    grand = sum(totals.values())
    if grand <= 0:
        raise EmptyRunSet("no stage time recorded")
    return StageTiming(totals, {s: 100.0 * v / grand for s, v in totals.items()})
