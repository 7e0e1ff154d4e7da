"""Persisted pipeline workspace.

Layout under the workspace root:

    config.json                  immutable snapshot after the first stage
    manifest.json                ingested program index
    splits.json                  split manifest (optional)
    programs/<key>/              per-program stage outputs
        source.<ext>             original source
        repair.json              repair report (+ repaired source)
        campaign/queue/NNNNNN    saved fuzz inputs (raw bytes)
        campaign/crashes/ hangs/ stats.json
        testcases.jsonl          harvested pairs
    dataset.jsonl                emitted records
    stats.json                   pipeline accounting

Stage state is derived from which outputs exist, which makes re-invocation
idempotent and the pipeline resumable mid-way.
"""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as corpus_mod
from . import harvest as harvest_mod
from . import prompts as prompts_mod
from . import repair as repair_mod
from . import targets as targets_mod
from .fuzzer import FuzzConfig, fuzz_program

STAGES = ("ingested", "repaired", "built", "fuzzed", "harvested", "emitted")

_EXT = {"cpp": ".cpp", "java": ".java", "python": ".py"}


class WorkspaceError(Exception):
    pass


@dataclass
class PipelineConfig:
    seed: int = 0
    budget_minutes: float = 5.0
    per_exec_timeout_ms: int = 1000
    max_input_len: int = 1 << 20
    havoc_iterations_per_entry: int = 256
    exhaust_havoc_execs: int = 50000
    max_execs: int | None = None
    max_pairs: int = 5
    max_pair_chars: int = 200
    decode_mode: str = "utf8"
    template: str = "pl_cpp"
    max_total_units: int | None = None
    max_rounds: int = 10
    workers: int = 0  # 0 = machine parallelism
    fail_threshold: float = 0.5

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def program_seed(base_seed: int, program_id: str) -> int:
    """Stable per-program RNG seed derived from the workspace seed."""
    return (base_seed << 16) ^ zlib.crc32(program_id.encode("utf-8"))


@dataclass
class Workspace:
    root: Path
    config: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        self.root = Path(self.root)

    # --- paths ---------------------------------------------------------
    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def program_dir(self, key: str) -> Path:
        return self.root / "programs" / key

    @staticmethod
    def key_of(program_id: str) -> str:
        return program_id.replace("/", "__")

    # --- config snapshot -------------------------------------------------
    def save_config(self):
        if self.config_path.exists():
            return  # immutable after the first stage
        self.root.mkdir(parents=True, exist_ok=True)
        self.config_path.write_text(
            json.dumps(self.config.to_dict(), indent=2) + "\n")

    @classmethod
    def open(cls, root: Path) -> "Workspace":
        root = Path(root)
        cfg_path = root / "config.json"
        config = PipelineConfig()
        if cfg_path.exists():
            config = PipelineConfig.from_dict(json.loads(cfg_path.read_text()))
        return cls(root=root, config=config)

    # --- stage: ingest ---------------------------------------------------
    def ingest(self, corpus: corpus_mod.Corpus) -> dict:
        self.save_config()
        manifest = {"programs": [], "warnings": corpus.warnings}
        for p in corpus.programs:
            key = self.key_of(p.id)
            d = self.program_dir(key)
            d.mkdir(parents=True, exist_ok=True)
            src = d / ("source" + _EXT[p.language])
            if not src.exists():
                src.write_text(p.source, encoding="utf-8")
            manifest["programs"].append({
                "id": p.id, "key": key, "problem_id": p.problem_id,
                "language": p.language, "byte_len": p.byte_len,
            })
        self.manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
        return corpus.counts()

    def manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise WorkspaceError(f"workspace not ingested: {self.root}")
        return json.loads(self.manifest_path.read_text())

    def _source_of(self, entry: dict) -> str:
        d = self.program_dir(entry["key"])
        return (d / ("source" + _EXT[entry["language"]])).read_text(
            encoding="utf-8")

    # --- per-program stages ----------------------------------------------
    def repair_one(self, entry: dict) -> dict:
        d = self.program_dir(entry["key"])
        report_path = d / "repair.json"
        if report_path.exists():
            return json.loads(report_path.read_text())
        if entry["language"] != "cpp":
            report = {"status": "skipped", "reason": "no language adapter",
                      "actions": [], "rounds_used": 0}
        else:
            cfg = repair_mod.RepairConfig(max_rounds=self.config.max_rounds)
            rp = repair_mod.repair_loop(entry["id"], self._source_of(entry),
                                        "cpp", cfg)
            (d / "repaired.cpp").write_text(rp.final_source, encoding="utf-8")
            report = {"status": rp.status, "actions": rp.actions,
                      "rounds_used": rp.rounds_used}
        report_path.write_text(json.dumps(report, indent=2) + "\n")
        return report

    def build_one(self, entry: dict) -> dict:
        d = self.program_dir(entry["key"])
        report_path = d / "build.json"
        if report_path.exists():
            return json.loads(report_path.read_text())
        repair_report = json.loads((d / "repair.json").read_text())
        if repair_report["status"] != "compiles":
            report = {"status": "skipped", "reason": "repair did not compile"}
        else:
            source = (d / "repaired.cpp").read_text(encoding="utf-8")
            bcfg = targets_mod.BuildConfig(
                timeout_ms=self.config.per_exec_timeout_ms)
            try:
                targets_mod.build(entry["id"], source, d / "build", bcfg,
                                  instrumented=True)
                targets_mod.build(entry["id"], source, d / "build", bcfg,
                                  instrumented=False)
                report = {"status": "built"}
            except (targets_mod.BuildError, targets_mod.ExecError) as e:
                report = {"status": "failed", "error": str(e)[:2000]}
        report_path.write_text(json.dumps(report, indent=2) + "\n")
        return report

    def fuzz_one(self, entry: dict) -> dict:
        d = self.program_dir(entry["key"])
        camp = d / "campaign"
        stats_path = camp / "stats.json"
        if stats_path.exists():
            return json.loads(stats_path.read_text())
        build_report = json.loads((d / "build.json").read_text())
        if build_report["status"] != "built":
            return {"status": "skipped"}
        target = targets_mod.Target(
            program_id=entry["id"], kind="instrumented_binary",
            invocation=d / "build" / "target.cov",
            timeout_ms=self.config.per_exec_timeout_ms)
        fcfg = FuzzConfig(
            budget_minutes=self.config.budget_minutes,
            per_exec_timeout_ms=self.config.per_exec_timeout_ms,
            max_input_len=self.config.max_input_len,
            rng_seed=program_seed(self.config.seed, entry["id"]),
            havoc_iterations_per_entry=self.config.havoc_iterations_per_entry,
            exhaust_havoc_execs=self.config.exhaust_havoc_execs,
            max_execs=self.config.max_execs,
        )
        report = fuzz_program(target, [b"\n"], fcfg)
        for sub in ("queue", "crashes", "hangs"):
            (camp / sub).mkdir(parents=True, exist_ok=True)
        for e in report.queue:
            (camp / "queue" / f"{e.id:06d}").write_bytes(e.input)
        for i, data in enumerate(report.crashes):
            (camp / "crashes" / f"{i:06d}").write_bytes(data)
        for i, data in enumerate(report.hangs):
            (camp / "hangs" / f"{i:06d}").write_bytes(data)
        stats = {
            "status": "aborted" if report.aborted else "done",
            "queue_len": len(report.queue),
            "crashes": len(report.crashes),
            "hangs": len(report.hangs),
            "execs_total": report.execs_total,
            "edges_covered": report.edges_covered,
            "wall_time_ms": report.wall_time_ms,
            "termination": report.termination,
        }
        stats_path.write_text(json.dumps(stats, indent=2) + "\n")
        return stats

    def harvest_one(self, entry: dict) -> dict:
        d = self.program_dir(entry["key"])
        out_path = d / "testcases.jsonl"
        if out_path.exists():
            return {"status": "done", "pairs": len(
                harvest_mod.read_pairs(out_path))}
        camp = d / "campaign"
        if not (camp / "stats.json").exists():
            return {"status": "skipped"}
        queue_inputs = [p.read_bytes()
                        for p in sorted((camp / "queue").iterdir())]
        plain = targets_mod.Target(
            program_id=entry["id"], kind="plain_binary",
            invocation=d / "build" / "target.plain",
            timeout_ms=self.config.per_exec_timeout_ms)
        pairs = harvest_mod.harvest_program(
            plain, queue_inputs,
            max_pairs=self.config.max_pairs,
            max_pair_chars=self.config.max_pair_chars,
            decode_mode=self.config.decode_mode)
        harvest_mod.write_pairs(pairs, entry["id"], out_path)
        return {"status": "done", "pairs": len(pairs)}

    # --- emit --------------------------------------------------------------
    def emit(self, template_kind: str | None = None,
             out_path: Path | None = None) -> Path:
        """Assemble dataset.jsonl from harvested pairs and sources."""
        template_kind = template_kind or self.config.template
        template = prompts_mod.PromptTemplate(kind=template_kind)
        split_of = {}
        splits_path = self.root / "splits.json"
        if splits_path.exists():
            splits = corpus_mod.read_manifest(splits_path)
            for tag in ("train", "val", "test"):
                for pid in getattr(splits, tag):
                    split_of[pid] = tag
        records = []
        for entry in self.manifest()["programs"]:
            d = self.program_dir(entry["key"])
            pairs_path = d / "testcases.jsonl"
            pairs = (harvest_mod.read_pairs(pairs_path)
                     if pairs_path.exists() else [])
            records.append(prompts_mod.build_record(
                entry["id"], entry["problem_id"], self._source_of(entry),
                pairs, template,
                max_total_units=self.config.max_total_units,
                # problem-unit splits list problem ids, program-unit splits
                # list program ids; tag from whichever matches
                split_tag=split_of.get(entry["id"],
                                       split_of.get(entry["problem_id"], ""))))
        out = Path(out_path) if out_path else self.root / "dataset.jsonl"
        prompts_mod.write_records(records, out)
        return out

    # --- batch driver --------------------------------------------------------
    def run_stage(self, stage_fn, entries: list[dict],
                  workers: int | None = None) -> list[dict]:
        workers = workers or self.config.workers or None
        results = [None] * len(entries)

        def run(i_entry):
            i, entry = i_entry
            try:
                results[i] = stage_fn(entry)
            except repair_mod.CompilerMissingError:
                raise  # environment problem: no point continuing the batch
            except Exception as e:  # per-program failures never abort the batch
                results[i] = {"status": "failed", "error": str(e)[:2000]}

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, item) for item in enumerate(entries)]
            for fut in futures:
                fut.result()  # re-raise environment errors
        return results

    def pipeline(self, workers: int | None = None,
                 emit_template: str | None = None) -> dict:
        """repair -> build -> fuzz -> harvest -> emit for every program."""
        entries = self.manifest()["programs"]
        repair_r = self.run_stage(self.repair_one, entries, workers)
        build_r = self.run_stage(self.build_one, entries, workers)
        fuzz_r = self.run_stage(self.fuzz_one, entries, workers)
        harvest_r = self.run_stage(self.harvest_one, entries, workers)
        self.emit(emit_template)
        n = len(entries)
        compiled = sum(1 for r in repair_r if r.get("status") == "compiles")
        built = sum(1 for r in build_r if r.get("status") == "built")
        fuzzed = sum(1 for r in fuzz_r if r.get("status") == "done")
        harvested = [r.get("pairs", 0) for r in harvest_r
                     if r.get("status") == "done"]
        queue_sizes = [r.get("queue_len", 0) for r in fuzz_r
                       if r.get("status") == "done"]
        stats = {
            "ingested": n,
            "compiled": compiled,
            "compiled_pct": 100.0 * compiled / n if n else 0.0,
            "built": built,
            "fuzzed": fuzzed,
            "fuzzed_pct": 100.0 * fuzzed / compiled if compiled else 0.0,
            "mean_queue_size": (sum(queue_sizes) / len(queue_sizes)
                                if queue_sizes else 0.0),
            "pairs_per_program": (sum(harvested) / len(harvested)
                                  if harvested else 0.0),
            "programs_with_pairs": sum(1 for h in harvested if h > 0),
        }
        (self.root / "stats.json").write_text(
            json.dumps(stats, indent=2) + "\n")
        return stats
