"""Project workspace: stage state machine, persistence, resume, timers.

All persistence is plain files written atomically (write to a temp name,
then rename); the project manifest is always written last, so a crash
between artifact writes leaves a manifest pointing at the previous
consistent state and the interrupted stage simply re-runs. Resume
reconstructs state solely from the persisted artifacts.

Layout inside a project directory::

    manifest.json        project state, artifact index, config snapshot
    bundle/              the paper bundle (copied at init)
    metadata.json        extracted system metadata
    modules.json         module division
    approval.json        division approval record
    scots/               per-module reasoning chains
    secots/              per-function semantic chains
    workspace/<module>/  code files + unit.json per module
    workspace/system/    combined workspace used for tests
    tests/               generated test cases (JSON)
    repairs/             repair episodes (JSON)
    transcripts/         one JSON-lines file per session
    metrics/             metric exports
    timers.json          human timer events
"""
from __future__ import annotations

import json
import os
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .. import funcgen as funcgen_mod
from .. import repair as repair_mod
from .. import scaffold as scaffold_mod
from ..document import PaperBundle, load_bundle
from ..errors import (
    CorruptWorkspace,
    LockHeld,
    OutOfOrderStage,
    PaperforgeError,
    RefusedExisting,
    StageFailed,
    UnbalancedTimer,
)
from ..extraction import (
    ModuleDivision,
    SystemMetadata,
    approve_division,
    divide_modules,
    extract_metadata,
    refine_division,
    topological_order,
)
from ..gateway import Gateway, Session, export_transcript, load_transcript
from ..prompting import (
    ExemplarStore,
    TemplateRegistry,
    load_builtin_exemplars,
    load_builtin_templates,
)
from ..sandbox import compile_workspace, ensure_adapter, run_tests
from ..scot import print_scot
from .config import Config, load_config

# Stage names (project states)
INITIALIZED = "Initialized"
EXTRACTED = "Extracted"
DIVISION_APPROVED = "DivisionApproved"
SCAFFOLDED = "Scaffolded"
FUNCTIONS_GENERATED = "FunctionsGenerated"
INTEGRATED = "Integrated"
REPAIRING = "Repairing"
DONE = "Done"
FAILED = "Failed"

# Runnable stages: name -> (from state, to state)
RUNNABLE = {
    "extract": (INITIALIZED, EXTRACTED),
    "scaffold": (DIVISION_APPROVED, SCAFFOLDED),
    "funcgen": (SCAFFOLDED, FUNCTIONS_GENERATED),
    "integrate": (FUNCTIONS_GENERATED, INTEGRATED),
    "finalize": (INTEGRATED, DONE),
}

PAPER_READING = "PaperReading"

MANIFEST = "manifest.json"

# Test hook: called with the target path before every atomic write. The
# crash-safety fuzz raises here to simulate a kill between writes.
CRASH_HOOK: Callable[[Path], None] | None = None


def atomic_write(path: Path, data: str) -> None:
    if CRASH_HOOK is not None:
        CRASH_HOOK(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(data, "utf-8")
    os.replace(tmp, path)


def atomic_write_json(path: Path, payload) -> None:
    atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


@dataclass
class ProjectState:
    project_id: str
    stage: str = INITIALIZED
    failed_stage: str | None = None
    failed_reason: str | None = None
    revision: int = 0
    artifact_index: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    session_seq: int = 0

    def to_dict(self) -> dict:
        return {
            "project_id": self.project_id,
            "stage": self.stage,
            "failed_stage": self.failed_stage,
            "failed_reason": self.failed_reason,
            "revision": self.revision,
            "artifact_index": dict(sorted(self.artifact_index.items())),
            "config": self.config,
            "session_seq": self.session_seq,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectState":
        return cls(
            project_id=data["project_id"],
            stage=data["stage"],
            failed_stage=data.get("failed_stage"),
            failed_reason=data.get("failed_reason"),
            revision=data.get("revision", 0),
            artifact_index=dict(data.get("artifact_index", {})),
            config=data.get("config", {}),
            session_seq=data.get("session_seq", 0),
        )


class Lockfile:
    """Single-writer lock: one CLI or API process mutates a project."""

    def __init__(self, project_dir: Path):
        self.path = Path(project_dir) / ".lock"

    def acquire(self) -> None:
        while True:
            try:
                fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                try:
                    pid = int(self.path.read_text("utf-8").strip() or "0")
                except (OSError, ValueError):
                    pid = 0
                if pid and _pid_alive(pid):
                    raise LockHeld(pid) from None
                self.path.unlink(missing_ok=True)  # stale lock
                continue
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            return

    def release(self) -> None:
        self.path.unlink(missing_ok=True)

    def __enter__(self) -> "Lockfile":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


class Project:
    """One reproduction project over a persistent directory."""

    def __init__(self, directory: str | Path, state: ProjectState, config: Config):
        self.dir = Path(directory)
        self.state = state
        self.config = config
        self.registry: TemplateRegistry = load_builtin_templates()
        self.exemplars: ExemplarStore = load_builtin_exemplars()
        self._gateway: Gateway | None = None

    # --- construction -------------------------------------------------------

    @classmethod
    def init(cls, bundle_path: str | Path, config_path: str | Path, project_dir: str | Path) -> "Project":
        project_dir = Path(project_dir)
        if (project_dir / MANIFEST).exists():
            raise RefusedExisting(f"{project_dir} already holds a project; use resume")
        bundle = load_bundle(bundle_path)  # validates before any write
        config = load_config(config_path)
        project_dir.mkdir(parents=True, exist_ok=True)
        bundle_dst = project_dir / "bundle"
        if bundle_dst.exists():
            shutil.rmtree(bundle_dst)
        shutil.copytree(bundle_path, bundle_dst)
        state = ProjectState(
            project_id=project_dir.name,
            stage=INITIALIZED,
            config=config.to_dict(),
            artifact_index={"bundle": "bundle"},
        )
        project = cls(project_dir, state, config)
        project._persist_manifest()
        return project

    @classmethod
    def resume(cls, project_dir: str | Path) -> "Project":
        project_dir = Path(project_dir)
        manifest_path = project_dir / MANIFEST
        if not manifest_path.is_file():
            raise CorruptWorkspace(f"no {MANIFEST} in {project_dir}")
        try:
            state = ProjectState.from_dict(json.loads(manifest_path.read_text("utf-8")))
        except (json.JSONDecodeError, KeyError) as exc:
            raise CorruptWorkspace(f"unreadable manifest: {exc}") from exc
        for name, rel in state.artifact_index.items():
            if not (project_dir / rel).exists():
                raise CorruptWorkspace(f"artifact {name} missing on disk: {rel}")
        config = Config.from_dict(state.config)
        return cls(project_dir, state, config)

    # --- persistence helpers ---------------------------------------------------

    def _persist_manifest(self) -> None:
        if self._gateway is not None:
            self.state.session_seq = self._gateway.session_seq
        atomic_write_json(self.dir / MANIFEST, self.state.to_dict())

    def _index(self, name: str, rel_path: str) -> None:
        self.state.artifact_index[name] = rel_path

    def gateway(self) -> Gateway:
        if self._gateway is None:
            self._gateway = Gateway(self.config.backend, script_root=self.dir)
            self._gateway.session_seq = self.state.session_seq
        return self._gateway

    def _export_session(self, session: Session) -> None:
        rel = f"transcripts/{session.id}.jsonl"
        path = self.dir / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        if CRASH_HOOK is not None:
            CRASH_HOOK(path)
        export_transcript(session.transcript(), path)
        self._index(f"transcript:{session.id}", rel)

    # --- loaded artifacts --------------------------------------------------------

    def bundle(self) -> PaperBundle:
        return load_bundle(self.dir / "bundle")

    def metadata(self) -> SystemMetadata:
        return SystemMetadata.from_dict(
            json.loads((self.dir / "metadata.json").read_text("utf-8"))
        )

    def division(self) -> ModuleDivision:
        return ModuleDivision.from_dict(
            json.loads((self.dir / "modules.json").read_text("utf-8"))
        )

    def unit(self, module_name: str) -> scaffold_mod.CodeUnit:
        return scaffold_mod.CodeUnit.from_dict(
            json.loads((self.dir / "workspace" / module_name / "unit.json").read_text("utf-8"))
        )

    def units(self) -> list[scaffold_mod.CodeUnit]:
        return [self.unit(spec.name) for spec in topological_order(self.division())]

    def episodes(self) -> list[repair_mod.RepairEpisode]:
        repairs_dir = self.dir / "repairs"
        if not repairs_dir.is_dir():
            return []
        episodes = []
        for path in sorted(repairs_dir.glob("*.json")):
            episodes.append(
                repair_mod.RepairEpisode.from_dict(json.loads(path.read_text("utf-8")))
            )
        return episodes

    def episode(self, error_id: str) -> repair_mod.RepairEpisode:
        path = self.dir / "repairs" / f"{error_id}.json"
        if not path.is_file():
            raise KeyError(error_id)
        return repair_mod.RepairEpisode.from_dict(json.loads(path.read_text("utf-8")))

    # --- stage machinery -----------------------------------------------------------

    def _effective_stage(self) -> str:
        """Failed states roll back to the failed stage's entry state."""
        if self.state.stage == FAILED and self.state.failed_stage in RUNNABLE:
            return RUNNABLE[self.state.failed_stage][0]
        return self.state.stage

    def run_stage(self, name: str) -> ProjectState:
        """Run one pipeline stage; stage outputs persist atomically and the
        manifest advances (or records Failed) last."""
        if name not in RUNNABLE:
            raise OutOfOrderStage(name, self.state.stage)
        from_state, to_state = RUNNABLE[name]
        current = self._effective_stage()
        rerun_of_current = current == to_state or (
            name == "finalize" and current in (DONE, REPAIRING)
        ) or (name == "integrate" and current == REPAIRING)
        if current != from_state and not rerun_of_current:
            raise OutOfOrderStage(name, self.state.stage)

        runner = getattr(self, f"_run_{name}")
        try:
            runner()
        except PaperforgeError as exc:
            self.state.stage = FAILED
            self.state.failed_stage = name
            self.state.failed_reason = str(exc)
            self.state.revision += 1
            self._persist_manifest()
            return self.state
        self.state.failed_stage = None
        self.state.failed_reason = None
        self.state.revision += 1
        self._persist_manifest()
        return self.state

    # --- stages ------------------------------------------------------------------

    def _run_extract(self) -> None:
        bundle = self.bundle()
        gateway = self.gateway()
        session = gateway.open_session("extract")
        try:
            metadata = extract_metadata(
                bundle, gateway, session, self.registry, self.config.retry_limit
            )
            division = divide_modules(
                bundle, metadata, gateway, session, self.registry, self.config.retry_limit
            )
        finally:
            if session.records:
                self._export_session(session)
        atomic_write_json(self.dir / "metadata.json", metadata.to_dict())
        self._index("metadata", "metadata.json")
        atomic_write_json(self.dir / "modules.json", division.to_dict())
        self._index("modules", "modules.json")
        self.state.stage = EXTRACTED

    def approve(self, actor: str) -> ModuleDivision:
        """Freeze the division (human gate between extract and scaffold)."""
        if self.state.stage not in (EXTRACTED, DIVISION_APPROVED):
            raise OutOfOrderStage("approve-division", self.state.stage)
        division = approve_division(self.division(), actor)
        atomic_write_json(self.dir / "modules.json", division.to_dict())
        atomic_write_json(
            self.dir / "approval.json",
            {"actor": actor, "at": self.gateway().clock.now(), "revision": division.revision},
        )
        self._index("approval", "approval.json")
        if self.state.stage == EXTRACTED:
            self.state.stage = DIVISION_APPROVED
        self.state.revision += 1
        self._persist_manifest()
        return division

    def refine(self, feedback: str) -> ModuleDivision:
        """Apply human feedback to the unapproved division (revision + 1)."""
        if self.state.stage != EXTRACTED:
            raise OutOfOrderStage("refine-division", self.state.stage)
        gateway = self.gateway()
        session = gateway.open_session("extract")
        try:
            division = refine_division(
                self.division(), feedback, gateway, session, self.registry,
                self.config.retry_limit,
            )
        finally:
            if session.records:
                self._export_session(session)
        atomic_write_json(self.dir / "modules.json", division.to_dict())
        self.state.revision += 1
        self._persist_manifest()
        return division

    def _run_scaffold(self) -> None:
        bundle = self.bundle()
        division = self.division()
        gateway = self.gateway()
        for spec in topological_order(division):
            session = gateway.open_session("scaffold")
            try:
                chain = scaffold_mod.generate_scot(
                    spec, gateway, session, self.registry, self.exemplars,
                    k=self.config.exemplar_k, retry_limit=self.config.retry_limit,
                )
                unit = scaffold_mod.generate_framework(
                    spec, chain, gateway, session, self.registry, self.exemplars,
                    self.config.toolchain, k=self.config.exemplar_k,
                    retry_limit=self.config.retry_limit,
                    preventive_guidelines=self.config.preamble_text(),
                )
                unit = scaffold_mod.map_paper_content(
                    unit, spec, bundle, gateway, session, self.registry,
                    self.config.retry_limit,
                )
            finally:
                if session.records:
                    self._export_session(session)
            build = scaffold_mod.compile_check(
                unit, self.config.toolchain, self.dir / "workspace" / spec.name
            )
            if not build.ok:
                raise StageFailed(
                    "scaffold", f"{spec.name} skeleton does not compile: {build.report.stderr}"
                )
            rel_scot = f"scots/{spec.name}.scot.md"
            atomic_write(self.dir / rel_scot, print_scot(chain))
            self._index(f"scot:{spec.name}", rel_scot)
            self._persist_unit(unit)
        self.state.stage = SCAFFOLDED

    def _persist_unit(self, unit: scaffold_mod.CodeUnit) -> None:
        rel_dir = f"workspace/{unit.module_name}"
        module_dir = self.dir / rel_dir
        module_dir.mkdir(parents=True, exist_ok=True)
        for path, text in unit.files:
            atomic_write(module_dir / path, text)
        atomic_write_json(module_dir / "unit.json", unit.to_dict())
        self._index(f"unit:{unit.module_name}", f"{rel_dir}/unit.json")
        self._index(f"workspace:{unit.module_name}", rel_dir)

    def _run_funcgen(self) -> None:
        division = self.division()
        gateway = self.gateway()
        for spec in topological_order(division):
            unit = self.unit(spec.name)
            compliance: list[str] = []
            for decl in unit.functions:
                if decl.body_kind != scaffold_mod.PLACEHOLDER:
                    continue
                session = gateway.open_session("funcgen")
                try:
                    chain = funcgen_mod.generate_secot(
                        decl, gateway, session, self.registry, self.exemplars,
                        spec=spec, k=self.config.exemplar_k,
                        retry_limit=self.config.retry_limit,
                        preventive_guidelines=self.config.preamble_text(),
                    )
                    impl = funcgen_mod.generate_function(
                        decl, chain, gateway, session, self.registry, self.exemplars,
                        language=self.config.toolchain.language, spec=spec,
                        k=self.config.exemplar_k, retry_limit=self.config.retry_limit,
                        preventive_guidelines=self.config.preamble_text(),
                    )
                    cases = funcgen_mod.generate_tests(
                        impl, spec.name, gateway, session, self.registry, self.exemplars,
                        spec=spec, k=self.config.exemplar_k,
                        retry_limit=self.config.retry_limit,
                    )
                finally:
                    if session.records:
                        self._export_session(session)
                compliance.extend(
                    str(f) for f in funcgen_mod.check_io_compliance(impl, spec)
                )
                rel_secot = f"secots/{spec.name}.{decl.name}.secot.md"
                atomic_write(self.dir / rel_secot, funcgen_mod.print_secot(chain))
                self._index(f"secot:{spec.name}.{decl.name}", rel_secot)
                rel_tests = f"tests/{spec.name}.{decl.name}.tests.json"
                (self.dir / "tests").mkdir(parents=True, exist_ok=True)
                if CRASH_HOOK is not None:
                    CRASH_HOOK(self.dir / rel_tests)
                funcgen_mod.save_test_cases(cases, self.dir / rel_tests)
                self._index(f"tests:{spec.name}.{decl.name}", rel_tests)
                unit = unit.with_function(impl)
                self._persist_unit(unit)
            if compliance:
                rel = f"workspace/{spec.name}/io_compliance.json"
                atomic_write_json(self.dir / rel, {"findings": compliance})
                self._index(f"compliance:{spec.name}", rel)
        self.state.stage = FUNCTIONS_GENERATED

    # --- integration & repair -------------------------------------------------------

    def _system_dir(self) -> Path:
        return self.dir / "workspace" / "system"

    def _build_system_workspace(self, units: list[scaffold_mod.CodeUnit]) -> Path:
        system = self._system_dir()
        system.mkdir(parents=True, exist_ok=True)
        for unit in units:
            for path, text in unit.files:
                atomic_write(system / path, text)
        ensure_adapter(system, self.config.toolchain)
        self._index("system", "workspace/system")
        return system

    def _load_generated_cases(self) -> list[funcgen_mod.TestCase]:
        cases: list[funcgen_mod.TestCase] = []
        tests_dir = self.dir / "tests"
        if tests_dir.is_dir():
            for path in sorted(tests_dir.glob("*.tests.json")):
                cases.extend(funcgen_mod.load_test_cases(path))
        return cases

    def _recheck_case(self, case: funcgen_mod.TestCase, units_by_name: dict) -> repair_mod.Recheck:
        def recheck(unit: scaffold_mod.CodeUnit) -> repair_mod.CheckResult:
            units_by_name[unit.module_name] = unit
            system = self._build_system_workspace(list(units_by_name.values()))
            view = run_tests(system, [case], self.config.toolchain)
            _, report, verdict = view[0]
            return repair_mod.CheckResult(
                passed=verdict == "Pass", report=report, verdict=verdict, failing_case=case
            )

        return recheck

    def _recheck_compile(self, module_name: str) -> repair_mod.Recheck:
        def recheck(unit: scaffold_mod.CodeUnit) -> repair_mod.CheckResult:
            build = scaffold_mod.compile_check(
                unit, self.config.toolchain, self.dir / "workspace" / module_name
            )
            return repair_mod.CheckResult(passed=build.ok, report=build.report)

        return recheck

    def _next_error_id(self) -> str:
        existing = len(list((self.dir / "repairs").glob("*.json"))) if (
            self.dir / "repairs"
        ).is_dir() else 0
        return f"e{existing + 1:04d}"

    def _persist_episode(self, episode: repair_mod.RepairEpisode) -> None:
        rel = f"repairs/{episode.error_id}.json"
        atomic_write_json(self.dir / rel, episode.to_dict())
        self._index(f"episode:{episode.error_id}", rel)

    def _auto_repair(
        self,
        unit: scaffold_mod.CodeUnit,
        trigger: repair_mod.CheckResult,
        context: repair_mod.TriggerContext,
        recheck: repair_mod.Recheck,
        tag: str,
    ) -> tuple[scaffold_mod.CodeUnit, repair_mod.RepairEpisode]:
        gateway = self.gateway()
        session = gateway.open_session("repair")
        try:
            unit, episode = repair_mod.repair_loop(
                unit, trigger, context, gateway, session, self.registry, recheck,
                error_id=self._next_error_id(),
                max_attempts=self.config.max_attempts, tag=tag,
            )
        finally:
            if session.records:
                self._export_session(session)
        self._persist_unit(unit)
        self._persist_episode(episode)
        return unit, episode

    def _run_integrate(self) -> None:
        division = self.division()
        units_by_name: dict[str, scaffold_mod.CodeUnit] = {}
        unresolved = 0

        for spec in topological_order(division):
            unit = self.unit(spec.name)
            impls = {
                decl.name: decl
                for decl in unit.functions
                if decl.body_kind == scaffold_mod.IMPLEMENTED and decl.body_source
            }
            unit, build = funcgen_mod.integrate(
                unit, impls, self.config.toolchain,
                workdir=self.dir / "workspace" / spec.name,
            )
            self._persist_unit(unit)
            if not build.ok:
                context = repair_mod.TriggerContext(kind="compile", module=spec.name)
                trigger = repair_mod.CheckResult(passed=False, report=build.report)
                unit, episode = self._auto_repair(
                    unit, trigger, context, self._recheck_compile(spec.name), tag="module"
                )
                if not episode.resolved:
                    unresolved += 1
            units_by_name[spec.name] = unit

        system = self._build_system_workspace(list(units_by_name.values()))
        report = compile_workspace(system, self.config.toolchain)
        if not report.ok:
            raise StageFailed("integrate", f"combined workspace does not compile: {report.stderr}")

        if self.config.run_generated_tests:
            for case, case_report, verdict in run_tests(
                system, self._load_generated_cases(), self.config.toolchain
            ):
                if verdict == "Pass":
                    continue
                context = repair_mod.TriggerContext(
                    kind="tests", module=case.module, failing_case=case, verdict=verdict
                )
                trigger = repair_mod.CheckResult(
                    passed=False, report=case_report, verdict=verdict, failing_case=case
                )
                unit = units_by_name[case.module]
                unit, episode = self._auto_repair(
                    unit, trigger, context, self._recheck_case(case, units_by_name), tag="module"
                )
                units_by_name[case.module] = unit
                if not episode.resolved:
                    unresolved += 1

        self.state.stage = REPAIRING if unresolved else INTEGRATED

    def _run_finalize(self) -> None:
        if any(not e.resolved for e in self.episodes()):
            self.state.stage = REPAIRING
            return
        division = self.division()
        units = [self.unit(spec.name) for spec in topological_order(division)]
        units_by_name = {u.module_name: u for u in units}
        system = self._build_system_workspace(units)

        metadata = self.metadata()
        system_io = (
            "inputs: "
            + "; ".join(f"{i.name} ({i.hint})" for i in metadata.system_inputs)
            + "\noutputs: "
            + "; ".join(f"{o.name} ({o.hint})" for o in metadata.system_outputs)
        )
        gateway = self.gateway()
        session = gateway.open_session("integration")
        try:
            cases = repair_mod.generate_integration_cases(
                units, system_io, gateway, session, self.registry, self.config.retry_limit
            )
        finally:
            if session.records:
                self._export_session(session)
        (self.dir / "tests").mkdir(parents=True, exist_ok=True)
        if CRASH_HOOK is not None:
            CRASH_HOOK(self.dir / "tests/integration.tests.json")
        funcgen_mod.save_test_cases(cases, self.dir / "tests/integration.tests.json")
        self._index("tests:integration", "tests/integration.tests.json")

        unresolved = 0
        outcome = repair_mod.run_integration_cases(system, cases, self.config.toolchain)
        for case, case_report, verdict in outcome.failures:
            context = repair_mod.TriggerContext(
                kind="integration", module=case.module, failing_case=case, verdict=verdict
            )
            trigger = repair_mod.CheckResult(
                passed=False, report=case_report, verdict=verdict, failing_case=case
            )
            unit = units_by_name[case.module]
            unit, episode = self._auto_repair(
                unit, trigger, context, self._recheck_case(case, units_by_name), tag="integration"
            )
            units_by_name[case.module] = unit
            if not episode.resolved:
                unresolved += 1

        self.state.stage = REPAIRING if unresolved else DONE

    # --- human repair ------------------------------------------------------------------

    def human_repair(self, error_id: str, human_prompt: str) -> repair_mod.RepairEpisode:
        """Apply one human-crafted prompt to an unresolved episode."""
        episode = self.episode(error_id)
        unit = self.unit(episode.context.module)
        gateway = self.gateway()
        transcript_path = self.dir / "transcripts" / f"{episode.session_id}.jsonl"
        session = gateway.reopen_session(load_transcript(transcript_path))

        if episode.context.kind == "compile":
            recheck = self._recheck_compile(episode.context.module)
        else:
            units_by_name = {u.module_name: u for u in self.units()}
            recheck = self._recheck_case(episode.context.failing_case, units_by_name)

        try:
            unit, episode = repair_mod.human_repair_step(
                episode, human_prompt, unit, gateway, session, recheck
            )
        finally:
            if session.records:
                self._export_session(session)
        self._persist_unit(unit)
        self._persist_episode(episode)
        if self.state.stage == REPAIRING and all(e.resolved for e in self.episodes()):
            self.state.stage = INTEGRATED
        self.state.revision += 1
        self._persist_manifest()
        return episode

    # --- timers ---------------------------------------------------------------------

    def record_timer(self, action: str, category: str = PAPER_READING) -> None:
        """Record a human timer event; starts and stops must balance."""
        if action not in ("start", "stop"):
            raise UnbalancedTimer(f"action must be start or stop, got {action!r}")
        path = self.dir / "timers.json"
        events = json.loads(path.read_text("utf-8")) if path.is_file() else []
        open_starts = sum(
            +1 if e["action"] == "start" else -1
            for e in events
            if e["category"] == category
        )
        if action == "start" and open_starts > 0:
            raise UnbalancedTimer(f"{category} timer already running")
        if action == "stop" and open_starts <= 0:
            raise UnbalancedTimer(f"{category} timer is not running")
        events.append({"category": category, "action": action, "at": self.gateway().clock.now()})
        atomic_write_json(path, events)
        self._index("timers", "timers.json")
        self._persist_manifest()
