"""Cloze prompt rendering and model-input assembly.

Each test-case pair is rendered through one of five fixed templates (two
natural-language forms, three programming-language forms) and the rendered
block is concatenated after the source code under a character budget.
Template strings are byte-exact contracts; nl_b's missing spaces around
"and" are intentional and must not be "corrected".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .harvest import TestCasePair

DEFAULT_SEP = "[SEP]"

TEMPLATE_KINDS = ("none", "nl_a", "nl_b", "pl_cpp", "pl_java", "pl_python")

# template kind -> language it belongs to, for auto-selection
PL_TEMPLATE_FOR_LANGUAGE = {"cpp": "pl_cpp", "java": "pl_java",
                            "python": "pl_python"}


@dataclass
class PromptTemplate:
    kind: str
    sep_token: str = DEFAULT_SEP

    def __post_init__(self):
        if self.kind not in TEMPLATE_KINDS:
            raise ValueError(f"unknown template kind: {self.kind}")


@dataclass
class AugmentedRecord:
    program_id: str
    problem_id: str
    text: str
    n_pairs_used: int
    template_kind: str
    split_tag: str


def render_pair(pair: TestCasePair, template: PromptTemplate) -> str:
    """Byte-exact concatenation of the template around one pair."""
    sep, i, o = template.sep_token, pair.input_text, pair.output_text
    kind = template.kind
    if kind == "nl_a":
        return sep + "input: " + i + "," + "output: " + o
    if kind == "nl_b":
        return sep + "input is " + i + "and" + "output is " + o
    if kind == "pl_cpp":
        return sep + "cin>>" + i + ";" + "cout<<" + o
    if kind == "pl_java":
        return sep + "System.in " + i + ";" + "System.out" + o
    if kind == "pl_python":
        return sep + "input()" + i + "\n" + "print" + o
    raise ValueError(f"cannot render template kind {kind}")


def build_record(program_id: str, problem_id: str, source: str,
                 pairs: list[TestCasePair], template: PromptTemplate,
                 max_total_units: int | None = None,
                 split_tag: str = "") -> AugmentedRecord:
    """Assemble source followed by rendered pairs under a character budget.

    Over budget: whole pairs are dropped from the end first, then the source
    tail is truncated. kind=none reproduces the plain fine-tuning input.
    """
    if template.kind == "none":
        text = source
        if max_total_units is not None and len(text) > max_total_units:
            text = text[:max_total_units]
        return AugmentedRecord(program_id, problem_id, text, 0,
                               template.kind, split_tag)
    rendered = [render_pair(p, template) for p in pairs]
    n_used = len(rendered)
    if max_total_units is not None:
        total = len(source) + sum(len(r) for r in rendered)
        while n_used > 0 and total > max_total_units:
            n_used -= 1
            total -= len(rendered[n_used])
        if total > max_total_units:
            source = source[:max_total_units]
    text = source + "".join(rendered[:n_used])
    return AugmentedRecord(program_id, problem_id, text, n_used,
                           template.kind, split_tag)


def write_records(records: list[AugmentedRecord], path: Path):
    """Dataset JSONL with deterministic field order."""
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({
                "program_id": r.program_id,
                "problem_id": r.problem_id,
                "text": r.text,
                "n_pairs_used": r.n_pairs_used,
                "template_kind": r.template_kind,
                "split_tag": r.split_tag,
            }, ensure_ascii=False) + "\n")


def read_records(path: Path) -> list[AugmentedRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        records.append(AugmentedRecord(
            d["program_id"], d["problem_id"], d["text"], d["n_pairs_used"],
            d["template_kind"], d["split_tag"]))
    return records
