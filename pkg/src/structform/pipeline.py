"""End-to-end orchestration with stage-granular checkpoints.

Each problem gets ``<run_dir>/<problem_id>/`` holding the stage outputs and a
``record.json`` rewritten after every stage. Rerunning over the same run
directory resumes from the last completed stage; finished problems cost no
model calls at all.
"""

from __future__ import annotations

import configparser
import fnmatch
import json
import logging
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .error_kb import KnowledgeBase, read_seed_records
from .evaluator import (STAGES, EvalReport, FileScore, aggregate, format_csv, format_table,
                        majority_vote, score_file, timing_report)
from .lean.checker import Checker, CheckerError, make_checker
from .llm_gateway import Gateway, GatewayError, GatewayView, GenParams, make_backend
from .postprocess import backtranslate, harmless_fix
from .repair import RepairEngine
from .skeleton import build_skeleton
from .templates import (Manifest, ManifestError, ProblemSpec, TemplateError, class_registry,
                        load_example, load_manifest, load_template, parse_manifest, write_manifest)

log = logging.getLogger(__name__)

STAGE_ORDER = ("generation", "backbone_correction", "proof_generation", "harmless_fixing",
               "backtranslation", "scoring")
RECORD_FILE = "record.json"
SECRET_KEYS = {"api_key", "apikey", "key", "secret", "password", "token", "auth", "authorization"}
MANIFEST_SNAPSHOT = "manifest.jsonl"


class ConfigError(Exception):
    pass


class NoRuns(Exception):
    pass


# ---------------------------------------------------------------- config

@dataclass
class Limits:
    backbone_attempts: int = 3
    proof_attempts: int = 3
    correction_steps: int = 3
    final_fix_attempts: int = 2
    retrieval_k: int = 3


@dataclass
class RunConfig:
    run_dir: Path
    kb_path: Path
    manifest: Path | None = None
    templates_dir: Path | None = None
    transcripts: Path | None = None
    backend_mode: str = "scripted"
    backend_source: Path | None = None
    judge_mode: str | None = None
    judge_source: Path | None = None
    params: GenParams = field(default_factory=GenParams)
    judge_params: GenParams = field(default_factory=lambda: GenParams(model_name="deepseek-chat"))
    limits: Limits = field(default_factory=Limits)
    checker_mode: str = "mock"
    checker_workspace: Path | None = None
    checker_timeout: float = 300.0
    workers: int = 1
    mv_rounds: int = 16
    env_prefix: str = "STRUCTFORM"


def _path(base: Path, value: str | None) -> Path | None:
    if value is None or not value.strip():
        return None
    p = Path(os.path.expanduser(value.strip()))
    return p if p.is_absolute() else base / p


def _params(sec: configparser.SectionProxy | None, default: GenParams) -> GenParams:
    if sec is None:
        return default
    return GenParams(
        model_name=sec.get("model", default.model_name),
        temperature=sec.getfloat("temperature", default.temperature),
        max_tokens=sec.getint("max_tokens", default.max_tokens),
        top_p=sec.getfloat("top_p", default.top_p),
        frequency_penalty=sec.getfloat("frequency_penalty", default.frequency_penalty),
    )


def load_config(path: str | os.PathLike) -> RunConfig:
    """Read an INI run configuration. Relative paths resolve against the file's directory.

    API credentials are never read from the file; the live backend takes them
    from ``<env_prefix>_BASE_URL`` and ``<env_prefix>_API_KEY``.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cp = configparser.ConfigParser()
    try:
        cp.read(p, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    base = p.resolve().parent
    for sec in cp.sections():
        for key in cp[sec]:
            if key.lower() in SECRET_KEYS:
                raise ConfigError(f"[{sec}] {key}: credentials belong in environment variables")
    try:
        paths = cp["paths"] if cp.has_section("paths") else {}
        run_dir = _path(base, paths.get("run_dir"))
        kb = _path(base, paths.get("kb"))
        if run_dir is None:
            raise ConfigError("[paths] run_dir is required")
        be = cp["backend"] if cp.has_section("backend") else None
        jd = cp["judge"] if cp.has_section("judge") else None
        ck = cp["checker"] if cp.has_section("checker") else None
        lim = cp["limits"] if cp.has_section("limits") else None
        run = cp["run"] if cp.has_section("run") else None
        limits = Limits()
        if lim is not None:
            limits = Limits(**{k: lim.getint(k, getattr(limits, k)) for k in asdict(limits)})
        params = _params(be, GenParams())
        cfg = RunConfig(
            run_dir=run_dir,
            kb_path=kb or run_dir / "kb.jsonl",
            manifest=_path(base, paths.get("manifest")),
            templates_dir=_path(base, paths.get("templates")),
            transcripts=_path(base, paths.get("transcripts")),
            backend_mode=be.get("mode", "scripted") if be is not None else "scripted",
            backend_source=_path(base, be.get("source")) if be is not None else None,
            judge_mode=jd.get("mode") if jd is not None else None,
            judge_source=_path(base, jd.get("source")) if jd is not None else None,
            params=params,
            judge_params=_params(jd, GenParams(model_name="deepseek-chat")),
            limits=limits,
            checker_mode=ck.get("mode", "mock") if ck is not None else "mock",
            checker_workspace=_path(base, ck.get("workspace")) if ck is not None else None,
            checker_timeout=ck.getfloat("timeout", 300.0) if ck is not None else 300.0,
            workers=run.getint("workers", 1) if run is not None else 1,
            mv_rounds=run.getint("mv_rounds", 16) if run is not None else 16,
            env_prefix=run.get("env_prefix", "STRUCTFORM") if run is not None else "STRUCTFORM",
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return cfg


def ensure_writable(d: Path) -> None:
    try:
        d.mkdir(parents=True, exist_ok=True)
        fd, probe = tempfile.mkstemp(dir=d, prefix=".probe-")
        os.close(fd)
        os.unlink(probe)
    except OSError as exc:
        raise ConfigError(f"run dir not writable: {d} ({exc})") from exc


@dataclass
class Services:
    generator: Gateway
    explainer: Gateway
    judge: Gateway | None
    checker: Checker
    kb: KnowledgeBase
    manifest: Manifest


def build_services(cfg: RunConfig, clock: Callable[[], float] = time.time) -> Services:
    """Validate the configuration and construct every shared component.

    Everything that can fail on bad configuration fails here, before any
    model call is made.
    """
    ensure_writable(cfg.run_dir)
    try:
        manifest = load_manifest(cfg.manifest, class_registry(cfg.templates_dir))
    except (ManifestError, TemplateError) as exc:
        raise ConfigError(f"manifest: {exc}") from exc
    if cfg.checker_workspace is None:
        raise ConfigError("[checker] workspace is required")
    try:
        checker = make_checker(cfg.checker_mode, cfg.checker_workspace, cfg.checker_timeout)
    except (CheckerError, ValueError) as exc:
        raise ConfigError(f"checker: {exc}") from exc
    try:
        backend = make_backend(cfg.backend_mode, cfg.backend_source, cfg.env_prefix)
        judge_backend = make_backend(cfg.judge_mode, cfg.judge_source, cfg.env_prefix) if cfg.judge_mode else None
    except (GatewayError, ValueError, OSError) as exc:
        raise ConfigError(f"backend: {exc}") from exc
    log_path = cfg.transcripts or cfg.run_dir / "transcripts.jsonl"
    generator = Gateway(backend, cfg.params, log_path, clock)
    explainer = Gateway(backend, cfg.params, log_path, clock)
    judge = Gateway(judge_backend, cfg.judge_params, log_path, clock) if judge_backend else None
    kb = open_kb(cfg.kb_path)
    return Services(generator, explainer, judge, checker, kb, manifest)


def open_kb(path: Path) -> KnowledgeBase:
    """Load the KB at ``path``; a missing file is created from the packaged seed."""
    if path.exists():
        return KnowledgeBase.load(path)
    kb = KnowledgeBase(path=None)
    kb.seed(read_seed_records())
    kb.path = path
    kb.persist()
    return kb


# ---------------------------------------------------------------- records

@dataclass
class RunRecord:
    problem_id: str
    class_id: str
    status: str = "pending"
    error: str | None = None
    stages_done: list[str] = field(default_factory=list)
    durations: dict[str, float] = field(default_factory=lambda: {s: 0.0 for s in STAGES})
    attempts: dict[str, int] = field(default_factory=dict)
    calls: dict[str, int] = field(default_factory=dict)
    explainer_calls: int = 0
    transcripts: dict[str, list[str]] = field(default_factory=dict)
    files: dict[str, list[str]] = field(default_factory=dict)
    details: dict[str, dict] = field(default_factory=dict)
    score: dict | None = None

    @property
    def gateway_calls(self) -> int:
        return sum(self.calls.values())

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def file_score(self) -> FileScore | None:
        return FileScore.from_dict(self.score) if self.score else None


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_record(pdir: Path, rec: RunRecord) -> None:
    _atomic_write(pdir / RECORD_FILE, json.dumps(rec.to_dict(), indent=2, ensure_ascii=False) + "\n")


def load_record(pdir: Path) -> RunRecord | None:
    p = pdir / RECORD_FILE
    if not p.is_file():
        return None
    return RunRecord.from_dict(json.loads(p.read_text(encoding="utf-8")))


def iter_records(run_dir: str | os.PathLike) -> list[RunRecord]:
    d = Path(run_dir)
    if not d.is_dir():
        return []
    return [r for r in (load_record(p) for p in sorted(d.iterdir()) if p.is_dir()) if r is not None]


# ---------------------------------------------------------------- pipeline

def select_problems(manifest: Manifest, patterns: Iterable[str] | None) -> list[ProblemSpec]:
    pats = list(patterns or [])
    if not pats:
        return list(manifest.problems)
    return [p for p in manifest.problems if any(fnmatch.fnmatchcase(p.id, pat) for pat in pats)]


class Pipeline:
    def __init__(self, cfg: RunConfig, services: Services, clock: Callable[[], float] = time.perf_counter):
        self.cfg = cfg
        self.s = services
        self.clock = clock
        self._clock_lock = threading.Lock()

    def _now(self) -> float:
        with self._clock_lock:
            return self.clock()

    def run(self, patterns: Iterable[str] | None = None) -> list[RunRecord]:
        problems = select_problems(self.s.manifest, patterns)
        if not problems:
            log.warning("no problems match %s", list(patterns or []))
            return []
        self.cfg.run_dir.mkdir(parents=True, exist_ok=True)
        snapshot = self.cfg.run_dir / MANIFEST_SNAPSHOT
        if snapshot.exists():
            self._merge_snapshot(problems)
        else:
            write_manifest(Manifest(problems, {}), snapshot)
        workers = max(1, self.cfg.workers)
        if workers == 1:
            return [self.run_problem(p) for p in problems]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(self.run_problem, problems))

    def _merge_snapshot(self, problems: list[ProblemSpec]) -> None:
        path = self.cfg.run_dir / MANIFEST_SNAPSHOT
        known = parse_manifest(path.read_text(encoding="utf-8"), tuple(self.s.manifest.class_counts))
        ids = set(known.ids())
        merged = known.problems + [p for p in problems if p.id not in ids]
        if len(merged) != len(known.problems):
            write_manifest(Manifest(merged, {}), path)

    def run_problem(self, problem: ProblemSpec) -> RunRecord:
        pdir = self.cfg.run_dir / problem.id
        rec = load_record(pdir) or RunRecord(problem.id, problem.class_id)
        if rec.status == "complete":
            return rec
        rec.status, rec.error = "running", None
        try:
            self._stages(problem, pdir, rec)
            rec.status = "complete"
        except Exception as exc:  # isolate: one failing problem never stops the batch
            log.exception("%s failed", problem.id)
            rec.status = "failed"
            rec.error = f"{type(exc).__name__}: {exc}"
        save_record(pdir, rec)
        return rec

    def _stages(self, problem: ProblemSpec, pdir: Path, rec: RunRecord) -> None:
        lim = self.cfg.limits
        gen = GatewayView(self.s.generator)
        expl = GatewayView(self.s.explainer)
        template = load_template(problem.template_ref, self.cfg.templates_dir)
        example = load_example(problem.example_ref, self.cfg.templates_dir)
        engine = RepairEngine(self.s.checker, gen, self.s.kb, template, expl, lim.correction_steps,
                              lim.retrieval_k, pdir, clock=self._now)

        def rel(path: str | Path) -> str:
            return Path(path).relative_to(pdir).as_posix()

        def done(stage: str, calls_before: int, expl_before: int, ids_before: int,
                 split: tuple[str, int] | None = None) -> None:
            n = gen.calls - calls_before
            if split is not None:
                rec.calls[split[0]] = split[1]
                n -= split[1]
            rec.calls[stage] = n
            rec.explainer_calls += expl.calls - expl_before
            rec.transcripts[stage] = gen.ids[ids_before:] + expl.ids[expl_before:]
            rec.stages_done.append(stage)
            save_record(pdir, rec)

        def read(name: str) -> str:
            return (pdir / name).read_text(encoding="utf-8")

        # 1. skeleton
        if "generation" not in rec.stages_done:
            c0, e0, i0 = gen.calls, expl.calls, len(gen.ids)
            t0 = self._now()
            sk = build_skeleton(problem, template, example, gen, lim.backbone_attempts, pdir)
            rec.durations["generation"] += self._now() - t0
            rec.attempts["generation"] = sk.generation_attempt
            rec.files["generation"] = [rel(sk.path)] if sk.path else []
            done("generation", c0, e0, i0)
        skeleton = read(rec.files["generation"][-1])

        # 2. backbone correction
        if "backbone_correction" not in rec.stages_done:
            c0, e0, i0 = gen.calls, expl.calls, len(gen.ids)
            t0 = self._now()
            out = engine.repair(skeleton, stage="backbone")
            rec.durations["backbone_correction"] += self._now() - t0
            (pdir / "backbone.lean").write_text(out.final_source, encoding="utf-8")
            rec.attempts["backbone_correction"] = out.iterations_used
            rec.files["backbone_correction"] = [r.candidate_path for r in out.per_iteration
                                                if r.candidate_path] + ["backbone.lean"]
            rec.details["backbone_correction"] = out.to_dict()
            done("backbone_correction", c0, e0, i0)
        backbone = read("backbone.lean")

        # 3. proof refinement
        if "proof_generation" not in rec.stages_done:
            c0, e0, i0 = gen.calls, expl.calls, len(gen.ids)
            t0 = self._now()
            pr = engine.refine_proofs(backbone, template.lean_source, lim.proof_attempts)
            total = self._now() - t0
            rec.durations["proof_generation"] += total - pr.correction_seconds
            rec.durations["proof_correction"] += pr.correction_seconds
            (pdir / "proved.lean").write_text(pr.source, encoding="utf-8")
            rec.attempts["proof_generation"] = pr.attempts
            rec.attempts["proof_correction"] = sum(r.iterations_used for r in pr.repairs)
            rec.files["proof_generation"] = [r.candidate_path for o in pr.repairs for r in o.per_iteration
                                             if r.candidate_path] + ["proved.lean"]
            rec.details["proof_generation"] = pr.to_dict()
            done("proof_generation", c0, e0, i0, ("proof_correction", rec.attempts["proof_correction"]))
        proved = read("proved.lean")

        # 4. harmless fixing
        if "harmless_fixing" not in rec.stages_done:
            c0, e0, i0 = gen.calls, expl.calls, len(gen.ids)
            t0 = self._now()
            art = harmless_fix(proved, self.s.checker, gen, lim.final_fix_attempts)
            rec.durations["harmless_fixing"] += self._now() - t0
            (pdir / "final.lean").write_text(art.source, encoding="utf-8")
            rec.attempts["harmless_fixing"] = art.llm_attempts
            rec.files["harmless_fixing"] = ["final.lean"]
            rec.details["harmless_fixing"] = art.to_dict()
            done("harmless_fixing", c0, e0, i0)
        final = read("final.lean")

        # 5. back-translation (timed with the final clean-up)
        if "backtranslation" not in rec.stages_done:
            c0, e0, i0 = gen.calls, expl.calls, len(gen.ids)
            t0 = self._now()
            if final.strip():
                bt = backtranslate(final, gen)
                (pdir / "final_report.md").write_text(bt.text, encoding="utf-8")
                rec.details["backtranslation"] = bt.to_dict()
                rec.files["backtranslation"] = ["final_report.md"]
            else:
                rec.details["backtranslation"] = {"skipped": "empty final source"}
            rec.durations["harmless_fixing"] += self._now() - t0
            done("backtranslation", c0, e0, i0)

        # 6. scoring
        if "scoring" not in rec.stages_done:
            c0, e0, i0 = gen.calls, expl.calls, len(gen.ids)
            report = self.s.checker.check_or_timeout(final)
            cats = rec.details.get("harmless_fixing", {}).get("commented_out_categories", {})
            rec.score = score_file(final, report, problem.id, cats).to_dict()
            done("scoring", c0, e0, i0)


# ---------------------------------------------------------------- evaluate / report

def run_manifest(run_dir: Path, fallback: Manifest | None = None) -> Manifest:
    snap = run_dir / MANIFEST_SNAPSHOT
    if snap.is_file():
        return load_manifest(snap, class_registry())
    if fallback is not None:
        return fallback
    return load_manifest(None)


def evaluate(run_dir: str | os.PathLike, manifest: Manifest | None = None, judge: Gateway | None = None,
             rounds: int = 16, checker: Checker | None = None) -> EvalReport:
    d = Path(run_dir)
    records = [r for r in iter_records(d) if r.score is not None]
    if not records:
        raise NoRuns(f"no runs found in {d}")
    man = run_manifest(d, manifest)
    scores = [r.file_score() for r in records]
    mv: dict[str, float] = {}
    if judge is not None:
        by_id = {p.id: p for p in man.problems}
        for r in records:
            final = d / r.problem_id / "final.lean"
            if not final.is_file():
                continue
            src = final.read_text(encoding="utf-8")
            diags = checker.check_or_timeout(src).diagnostics if checker else []
            p = by_id[r.problem_id]
            text = f"{p.title}. {p.description} Objective: {p.objective_latex}"
            mv[r.problem_id] = majority_vote(text, src, diags, judge, rounds).score
    report = aggregate(scores, man, mv)
    _atomic_write(d / "evaluation.json", report.to_json() + "\n")
    return report


def write_report(run_dir: str | os.PathLike, manifest: Manifest | None = None) -> str:
    d = Path(run_dir)
    records = iter_records(d)
    if not records:
        raise NoRuns(f"no runs found in {d}")
    man = run_manifest(d, manifest)
    scored = [r for r in records if r.score is not None]
    parts = []
    if scored:
        report = aggregate([r.file_score() for r in scored], man)
        _atomic_write(d / "report.csv", format_csv(report, man))
        parts.append(format_table(report, man))
    try:
        timing = timing_report(records)
        _atomic_write(d / "timing.csv", timing.to_csv())
        parts.append("\n".join(f"{s:>20}: {timing.shares[s]:6.2f}%" for s in STAGES))
    except ValueError:
        parts.append("no stage time recorded")
    failed = [r.problem_id for r in records if r.status != "complete"]
    if failed:
        parts.append("incomplete runs: " + ", ".join(failed))
    text = "\n\n".join(parts) + "\n"
    _atomic_write(d / "report.txt", text)
    return text
