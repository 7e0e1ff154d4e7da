"""Command-line front end chaining the pipeline stages over a workspace.

Exit codes: 0 ok, 1 usage error, 2 environment error, 3 partial failures
above the configured threshold.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import metrics as metrics_mod
from .repair import CompilerMissingError
from .targets import BuildError
from .workspace import PipelineConfig, Workspace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ENV = 2
EXIT_PARTIAL = 3

click.UsageError.exit_code = EXIT_USAGE


def _load_config_file(path: str | None) -> dict:
    """Flat key=value config file; flags override."""
    if not path:
        return {}
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.UsageError(f"bad config line: {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _build_pipeline_config(config_file: str | None, **flags) -> PipelineConfig:
    base = PipelineConfig().to_dict()
    file_vals = _load_config_file(config_file)
    for k, v in file_vals.items():
        if k not in base:
            raise click.UsageError(f"unknown config key: {k}")
        cur = base[k]
        if isinstance(cur, bool):
            base[k] = v.lower() in ("1", "true", "yes")
        elif isinstance(cur, int) or cur is None:
            base[k] = int(v) if v.lower() != "none" else None
        elif isinstance(cur, float):
            base[k] = float(v)
        else:
            base[k] = v
    for k, v in flags.items():
        if v is not None:
            base[k] = v
    return PipelineConfig.from_dict(base)


@click.group()
def main():
    """Fuzz-augmented training data pipeline."""


_config_option = click.option("--config-file", default=None,
                              help="flat key=value config file")

_pipeline_flags = [
    click.option("--seed", type=int, default=None),
    click.option("--budget-minutes", "budget_minutes", type=float, default=None,
                 help="per-program fuzzing budget (K minutes)"),
    click.option("--per-exec-timeout-ms", "per_exec_timeout_ms", type=int,
                 default=None),
    click.option("--exhaust-havoc-execs", "exhaust_havoc_execs", type=int,
                 default=None),
    click.option("--max-execs", "max_execs", type=int, default=None),
    click.option("--max-pairs", "max_pairs", type=int, default=None),
    click.option("--max-pair-chars", "max_pair_chars", type=int, default=None),
    click.option("--decode-mode", "decode_mode",
                 type=click.Choice(["utf8", "raw_bytes"]), default=None),
    click.option("--template", type=click.Choice(
        ["none", "nl_a", "nl_b", "pl_cpp", "pl_java", "pl_python"]),
        default=None),
    click.option("--max-total-units", "max_total_units", type=int, default=None),
    click.option("--workers", type=int, default=None),
    click.option("--fail-threshold", "fail_threshold", type=float, default=None),
]


def _with_pipeline_flags(fn):
    for opt in reversed(_pipeline_flags):
        fn = opt(fn)
    return _config_option(fn)


def _open_ws(workspace: str) -> Workspace:
    ws = Workspace.open(Path(workspace))
    return ws


@main.command()
@click.argument("root", type=click.Path(exists=True))
@click.option("--workspace", "-w", required=True, type=click.Path())
@click.option("--layout", type=click.Choice(
    ["poj104", "java250", "python800", "cpp1000"]), default="poj104")
@_with_pipeline_flags
def ingest(root, workspace, layout, config_file, **flags):
    """Ingest a corpus directory tree into the workspace."""
    ws = Workspace(Path(workspace),
                   _build_pipeline_config(config_file, **flags))
    try:
        if layout == "poj104":
            corpus = corpus_mod.ingest_poj104(Path(root))
        else:
            corpus = corpus_mod.ingest_codenet(Path(root), layout)
    except corpus_mod.CorpusError as e:
        raise click.UsageError(str(e))
    counts = ws.ingest(corpus)
    click.echo(json.dumps(counts))


def _stage_command(name: str, stage_attr: str):
    @main.command(name=name)
    @click.option("--workspace", "-w", required=True,
                  type=click.Path(exists=True))
    @click.option("--workers", type=int, default=None)
    def cmd(workspace, workers):
        ws = _open_ws(workspace)
        entries = ws.manifest()["programs"]
        try:
            results = ws.run_stage(getattr(ws, stage_attr), entries, workers)
        except CompilerMissingError as e:
            click.echo(f"environment error: {e}", err=True)
            sys.exit(EXIT_ENV)
        failed = sum(1 for r in results if r.get("status") == "failed")
        click.echo(json.dumps({"programs": len(results), "failed": failed}))
        if entries and failed / len(entries) > ws.config.fail_threshold:
            sys.exit(EXIT_PARTIAL)
    cmd.__name__ = name
    return cmd


repair_cmd = _stage_command("repair", "repair_one")
build_cmd = _stage_command("build", "build_one")
fuzz_cmd = _stage_command("fuzz", "fuzz_one")
harvest_cmd = _stage_command("harvest", "harvest_one")


@main.command()
@click.option("--workspace", "-w", required=True, type=click.Path(exists=True))
@click.option("--template", type=click.Choice(
    ["none", "nl_a", "nl_b", "pl_cpp", "pl_java", "pl_python"]), default=None)
@click.option("--out", type=click.Path(), default=None)
def emit(workspace, template, out):
    """Assemble the dataset JSONL from harvested pairs."""
    ws = _open_ws(workspace)
    path = ws.emit(template, Path(out) if out else None)
    click.echo(str(path))


@main.command()
@click.option("--workspace", "-w", required=True, type=click.Path(exists=True))
@click.option("--task", type=click.Choice(["clone_detection", "classification"]),
              default="clone_detection")
@click.option("--fractions", default="64/104,16/104,24/104",
              help="train,val,test fractions (rationals)")
@click.option("--seed", type=int, default=None)
def split(workspace, task, fractions, seed):
    """Write splits.json for the ingested corpus."""
    ws = _open_ws(workspace)
    manifest = ws.manifest()
    programs = [corpus_mod.Program(
        id=e["id"], problem_id=e["problem_id"], language=e["language"],
        source_path="", source=" ", byte_len=e["byte_len"])
        for e in manifest["programs"]]
    corpus = corpus_mod.Corpus(programs=programs)
    try:
        fr = tuple(Fraction(f) for f in fractions.split(","))
        spec = corpus_mod.SplitSpec(
            task=task,
            unit="problems" if task == "clone_detection" else "programs",
            fractions=fr,
            seed=seed if seed is not None else ws.config.seed)
        splits = corpus_mod.split(corpus, spec)
    except (ValueError, ZeroDivisionError, corpus_mod.CorpusError) as e:
        raise click.UsageError(str(e))
    corpus_mod.write_manifest(splits, ws.root / "splits.json")
    click.echo(json.dumps({k: len(v) for k, v in
                           splits.as_dict().items() if isinstance(v, list)}))


@main.command()
@click.option("--workspace", "-w", required=True, type=click.Path(exists=True))
@click.option("--ratio", required=True, help="fraction to keep, e.g. 2/5 or 0.4")
@click.option("--unit", type=click.Choice(["problems", "programs"]),
              required=True)
@click.option("--seed", type=int, default=None)
def subsample(workspace, ratio, unit, seed):
    """Shrink train/val in splits.json; test is untouched."""
    ws = _open_ws(workspace)
    splits_path = ws.root / "splits.json"
    if not splits_path.exists():
        raise click.UsageError("no splits.json; run the split command first")
    splits = corpus_mod.read_manifest(splits_path)
    problem_of = {e["id"]: e["problem_id"]
                  for e in ws.manifest()["programs"]}
    try:
        sub = corpus_mod.subsample(
            splits, Fraction(ratio), unit,
            seed=seed if seed is not None else ws.config.seed,
            problem_of=problem_of)
    except (ValueError, ZeroDivisionError, corpus_mod.CorpusError) as e:
        raise click.UsageError(str(e))
    corpus_mod.write_manifest(sub, splits_path)
    click.echo(json.dumps({"train": len(sub.train), "val": len(sub.val),
                           "test": len(sub.test)}))


@main.command(name="eval")
@click.argument("embeddings", type=click.Path(exists=True))
@click.option("--report", type=click.Path(), default=None)
@click.option("--breakdown-csv", type=click.Path(), default=None)
@click.option("--similarity", type=click.Choice(["cosine", "dot"]),
              default="cosine")
def eval_cmd(embeddings, report, breakdown_csv, similarity):
    """MAP@R over an embedding file."""
    try:
        table = metrics_mod.read_embeddings(Path(embeddings))
        rep = metrics_mod.map_at_r(table, similarity)
    except metrics_mod.MetricsError as e:
        raise click.UsageError(str(e))
    if report:
        metrics_mod.write_report_json(rep, Path(report))
    if breakdown_csv:
        metrics_mod.write_breakdown_csv(rep, Path(breakdown_csv))
    click.echo(json.dumps({"map_at_r": rep.map_at_r,
                           "n_queries": rep.n_queries}))


@main.command()
@click.option("--workspace", "-w", required=True, type=click.Path(exists=True))
@click.option("--workers", type=int, default=None)
@click.option("--template", type=click.Choice(
    ["none", "nl_a", "nl_b", "pl_cpp", "pl_java", "pl_python"]), default=None)
def pipeline(workspace, workers, template):
    """Run repair -> build -> fuzz -> harvest -> emit, resumably."""
    ws = _open_ws(workspace)
    try:
        stats = ws.pipeline(workers, template)
    except CompilerMissingError as e:
        click.echo(f"environment error: {e}", err=True)
        sys.exit(EXIT_ENV)
    except BuildError as e:
        click.echo(f"environment error: {e}", err=True)
        sys.exit(EXIT_ENV)
    click.echo(json.dumps(stats, indent=2))
    n = stats["ingested"]
    failures = n - stats["fuzzed"]
    if n and failures / n > ws.config.fail_threshold:
        sys.exit(EXIT_PARTIAL)


if __name__ == "__main__":
    main()
