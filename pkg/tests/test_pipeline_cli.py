from __future__ import annotations

import itertools
import json
import os
from importlib import resources
from dataclasses import asdict, replace

import pytest

from lasso_bundle import PROBLEM_ID, make_bundle
from structform.cli import main
from structform.error_kb import SEED_TIMESTAMP, KnowledgeBase, read_seed_records
from structform.evaluator import STAGES
from structform.lean.checker import MockChecker
from structform.llm_gateway import Gateway, ScriptedBackend
from structform.pipeline import (ConfigError, NoRuns, Pipeline, RunConfig, Services, build_services,
                                 evaluate, iter_records, load_config, write_report)
from structform.templates import load_manifest


def _services(tmp_path, backend, fx):
    cfg = RunConfig(run_dir=tmp_path / "run", kb_path=tmp_path / "kb.jsonl", checker_workspace=fx)
    ticks = itertools.count()
    clock = lambda: float(next(ticks))  # noqa: E731
    log = cfg.run_dir / "transcripts.jsonl"
    kb = KnowledgeBase(clock=lambda: SEED_TIMESTAMP)
    kb.seed(read_seed_records())
    svc = Services(Gateway(backend, cfg.params, log, clock), Gateway(backend, cfg.params, log, clock), None,
                   MockChecker(fx), kb, load_manifest())
    return cfg, svc, clock


def _lasso_only(rules):
    """The bundle rules restricted to prompts about the Lasso problem; anything else misses."""
    return [replace(r, contains=tuple(r.contains) + ("Lasso",)) for r in rules]


@pytest.fixture
def lasso(tmp_path):
    fx = tmp_path / "fx"
    fx.mkdir()
    b = make_bundle(fx)
    cfg, svc, clock = _services(tmp_path, ScriptedBackend(_lasso_only(b.backend.rules)), fx)
    return b, cfg, svc, clock


def test_lasso_end_to_end(lasso):
    b, cfg, svc, clock = lasso
    (rec,) = Pipeline(cfg, svc, clock).run([PROBLEM_ID])
    assert rec.status == "complete", rec.error
    assert rec.calls == b.expected_calls and rec.explainer_calls == b.expected_explainer_calls
    pdir = cfg.run_dir / PROBLEM_ID
    final = (pdir / "final.lean").read_text(encoding="utf-8")
    assert "instance pg_Lasso" in final and final == b.proved
    assert set(rec.durations) == set(STAGES) and all(v > 0 for v in rec.durations.values())
    assert rec.score["file_success"]
    saved = json.loads((pdir / "record.json").read_text(encoding="utf-8"))
    assert saved["status"] == "complete" and saved["calls"] == rec.calls
    for files in rec.files.values():
        for f in files:
            assert "/" not in f and (pdir / f).is_file()


def test_resume_makes_no_calls(lasso):
    b, cfg, svc, clock = lasso
    Pipeline(cfg, svc, clock).run([PROBLEM_ID])
    before = svc.generator.calls
    (rec,) = Pipeline(cfg, svc, clock).run([PROBLEM_ID])
    assert rec.status == "complete" and svc.generator.calls == before


def test_resume_mid_pipeline(lasso):
    b, cfg, svc, clock = lasso
    (full,) = Pipeline(cfg, svc, clock).run([PROBLEM_ID])
    pdir = cfg.run_dir / PROBLEM_ID
    data = json.loads((pdir / "record.json").read_text(encoding="utf-8"))
    data["status"] = "running"
    data["stages_done"] = data["stages_done"][:4]
    data["score"] = None
    (pdir / "record.json").write_text(json.dumps(data), encoding="utf-8")
    before = svc.generator.calls
    (rec,) = Pipeline(cfg, svc, clock).run([PROBLEM_ID])
    assert rec.status == "complete" and rec.score == full.score
    assert svc.generator.calls - before == 1  # only back-translation reruns


def test_failing_problem_isolated(lasso):
    b, cfg, svc, clock = lasso
    recs = Pipeline(cfg, svc, clock).run([PROBLEM_ID, "gd_logistic_regression"])
    status = {r.problem_id: r.status for r in recs}
    assert status == {PROBLEM_ID: "complete", "gd_logistic_regression": "failed"}
    bad = next(r for r in recs if r.status == "failed")
    assert "ReplayMiss" in bad.error
    assert json.loads((cfg.run_dir / "gd_logistic_regression" / "record.json").read_text())["status"] == "failed"


def test_evaluate_and_report(lasso):
    b, cfg, svc, clock = lasso
    Pipeline(cfg, svc, clock).run([PROBLEM_ID, "gd_logistic_regression"])
    rep = evaluate(cfg.run_dir)
    assert rep.overall.file_rate == 1.0
    assert (cfg.run_dir / "evaluation.json").is_file()
    text = write_report(cfg.run_dir)
    assert "incomplete runs: gd_logistic_regression" in text
    assert (cfg.run_dir / "timing.csv").is_file() and (cfg.run_dir / "report.csv").is_file()


def test_evaluate_two_scored_files(lasso, tmp_path):
    b, cfg, svc, clock = lasso
    Pipeline(cfg, svc, clock).run([PROBLEM_ID])
    src, dst = cfg.run_dir / PROBLEM_ID, cfg.run_dir / "pgm_robust_huber"
    dst.mkdir()
    data = json.loads((src / "record.json").read_text(encoding="utf-8"))
    data.update(problem_id="pgm_robust_huber")
    data["score"].update(problem_id="pgm_robust_huber", file_success=False, thm_ok=data["score"]["thm_ok"] - 1)
    (dst / "record.json").write_text(json.dumps(data), encoding="utf-8")
    snap = cfg.run_dir / "manifest.jsonl"
    packaged = (resources.files("structform") / "data" / "manifest.jsonl").read_text(encoding="utf-8")
    huber = [ln for ln in packaged.splitlines() if "pgm_robust_huber" in ln]
    snap.write_text(snap.read_text(encoding="utf-8") + huber[0] + "\n", encoding="utf-8")
    rep = evaluate(cfg.run_dir)
    assert rep.overall.file_rate == 0.5
    assert rep.per_class["PGM"].file_rate == 0.5


def test_evaluate_empty_dir(tmp_path):
    with pytest.raises(NoRuns, match="no runs found"):
        evaluate(tmp_path)
    with pytest.raises(NoRuns, match="no runs found"):
        write_report(tmp_path)


# ---------------------------------------------------------------- config

def _write_config(tmp_path, fx, rules_path, extra=""):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"""[paths]
run_dir = run
kb = kb.jsonl

[backend]
mode = scripted
source = {rules_path}

[checker]
mode = mock
workspace = {fx}
{extra}""", encoding="utf-8")
    return cfg


def _rules_file(tmp_path, bundle):
    path = tmp_path / "rules.json"
    path.write_text(json.dumps({"rules": [asdict(r) for r in _lasso_only(bundle.backend.rules)]}), encoding="utf-8")
    return path


def test_config_relative_paths(tmp_path):
    cfg = load_config(_write_config(tmp_path, "fx", "rules.json", "[limits]\nproof_attempts = 5\n"))
    assert cfg.run_dir == tmp_path.resolve() / "run"
    assert cfg.checker_workspace == tmp_path.resolve() / "fx"
    assert cfg.limits.proof_attempts == 5 and cfg.limits.backbone_attempts == 3


@pytest.mark.parametrize("key", ["api_key", "token", "API_KEY"])
def test_config_rejects_secrets(tmp_path, key):
    cfg = _write_config(tmp_path, "fx", "rules.json", f"\n[run]\n{key} = sk-123\n")
    with pytest.raises(ConfigError, match="environment"):
        load_config(cfg)


def test_config_missing_run_dir(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[backend]\nmode = scripted\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="run_dir"):
        load_config(p)
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")


def test_build_services_needs_workspace(tmp_path):
    cfg = RunConfig(run_dir=tmp_path / "run", kb_path=tmp_path / "kb.jsonl")
    with pytest.raises(ConfigError, match="workspace"):
        build_services(cfg)


def test_live_backend_needs_env(tmp_path, monkeypatch):
    monkeypatch.delenv("STRUCTFORM_BASE_URL", raising=False)
    monkeypatch.delenv("STRUCTFORM_API_KEY", raising=False)
    fx = tmp_path / "fx"
    fx.mkdir()
    cfg = RunConfig(run_dir=tmp_path / "run", kb_path=tmp_path / "kb.jsonl", checker_workspace=fx,
                    backend_mode="live")
    with pytest.raises(ConfigError, match="backend"):
        build_services(cfg)


# ---------------------------------------------------------------- CLI

def test_cli_run_end_to_end(tmp_path, capsys):
    fx = tmp_path / "fx"
    fx.mkdir()
    b = make_bundle(fx)
    cfg = _write_config(tmp_path, "fx", _rules_file(tmp_path, b).name)
    assert main(["run", "--config", str(cfg), "--problem", PROBLEM_ID]) == 0
    out = capsys.readouterr().out
    assert PROBLEM_ID in out and "complete" in out
    (rec,) = iter_records(tmp_path / "run")
    assert rec.calls == b.expected_calls
    assert (tmp_path / "kb.jsonl").is_file()
    # second run resumes from the checkpoint
    assert main(["run", "--config", str(cfg), "--problem", PROBLEM_ID]) == 0
    assert "calls=7" in capsys.readouterr().out

    assert main(["evaluate", str(tmp_path / "run"), "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["overall"]["file_rate"] == 1.0
    assert main(["report", str(tmp_path / "run")]) == 0
    assert "generation" in capsys.readouterr().out


def test_cli_partial_failure_exit(tmp_path, capsys):
    fx = tmp_path / "fx"
    fx.mkdir()
    b = make_bundle(fx)
    cfg = _write_config(tmp_path, "fx", _rules_file(tmp_path, b).name)
    assert main(["run", "--config", str(cfg), "--problem", PROBLEM_ID, "--problem", "gd_*"]) == 2


def test_cli_no_matches(tmp_path, capsys):
    fx = tmp_path / "fx"
    fx.mkdir()
    rules = tmp_path / "rules.json"
    rules.write_text('{"rules": []}', encoding="utf-8")
    cfg = _write_config(tmp_path, "fx", "rules.json")
    assert main(["run", "--config", str(cfg), "--problem", "zzz_*"]) == 0
    assert "no problems matched" in capsys.readouterr().err


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_cli_unwritable_run_dir(tmp_path, capsys):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        cfg = tmp_path / "c.ini"
        cfg.write_text(f"[paths]\nrun_dir = {ro / 'run'}\n[checker]\nworkspace = {tmp_path}\n", encoding="utf-8")
        assert main(["run", "--config", str(cfg)]) == 1
        assert "not writable" in capsys.readouterr().err
    finally:
        ro.chmod(0o700)


def test_cli_run_dir_is_a_file(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("x", encoding="utf-8")
    cfg = tmp_path / "c.ini"
    cfg.write_text(f"[paths]\nrun_dir = {blocker / 'run'}\n[checker]\nworkspace = {tmp_path}\n", encoding="utf-8")
    assert main(["run", "--config", str(cfg)]) == 1
    assert "not writable" in capsys.readouterr().err
    assert not (tmp_path / "kb.jsonl").exists()


def test_cli_bad_config(tmp_path, capsys):
    cfg = _write_config(tmp_path, "fx", "rules.json", "\n[backend]\napi_key = x\n")
    assert main(["run", "--config", str(cfg)]) == 1
    assert "config error" in capsys.readouterr().err


def test_cli_report_empty(tmp_path, capsys):
    assert main(["report", str(tmp_path)]) == 1
    assert "no runs found" in capsys.readouterr().err
    assert main(["evaluate", str(tmp_path)]) == 1


def test_cli_kb(tmp_path, capsys):
    assert main(["kb", "stats"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 14 and lines[-1].split() == ["total", "75"]
    assert main(["kb", "show", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["id"] == 1
    assert main(["kb", "show", "999"]) == 1
    capsys.readouterr()
    kb = tmp_path / "kb.jsonl"
    assert main(["kb", "seed", "--kb", str(kb)]) == 0
    assert "added 75" in capsys.readouterr().out
    assert main(["kb", "seed", "--kb", str(kb)]) == 0
    assert "added 0" in capsys.readouterr().out
    assert main(["kb", "seed"]) == 1


def test_cli_fixer(tmp_path, capsys):
    assert main(["fixer", "rules"]) == 0
    assert "match:" in capsys.readouterr().out
    f = tmp_path / "a.lean"
    f.write_text("```lean4\nimport Mathlib\ndef a : \\R := 0\n```\n", encoding="utf-8")
    assert main(["fixer", "apply", str(f)]) == 0
    captured = capsys.readouterr()
    assert "```" not in captured.out and "ℝ" in captured.out and "applied:" in captured.err
    assert main(["fixer", "apply", str(f), "--in-place"]) == 0
    assert f.read_text(encoding="utf-8") == captured.out


def test_cli_check(tmp_path, capsys):
    from structform.lean.checker import write_fixture
    src = "def a : ℕ := 1\n\ntheorem t : a = 2 := by\n  rfl\n"
    f = tmp_path / "t.lean"
    f.write_text(src, encoding="utf-8")
    fx = tmp_path / "fx"
    fx.mkdir()
    write_fixture(fx, src, "t.lean:4:2: error: The rfl tactic failed\n")
    assert main(["check", str(f), "--workspace", str(fx)]) == 2
    out = capsys.readouterr().out
    assert "(t)" in out and "compiled_ok=False" in out
    assert main(["check", str(f), "--workspace", str(fx), "--json"]) == 2
    assert json.loads(capsys.readouterr().out)["error_count"] == 1
    assert main(["check", str(f), "--workspace", str(tmp_path / "missing")]) == 1


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
