"""Retrieval and classification metrics over embedding tables.

MAP@R: for each query with class size c, rank all other items by cosine
similarity (ties broken by stable table order) and average precision over
the top R = c - 1 positions. The overall score is the mean over queries.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class MetricsError(Exception):
    pass


@dataclass
class EmbeddingTable:
    ids: list[str]
    labels: list[str]
    vectors: np.ndarray  # (n, dim) float64

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        n = len(self.ids)
        if len(self.labels) != n or self.vectors.shape[0] != n:
            raise MetricsError("ids, labels and vectors must have equal length")
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise MetricsError("vectors must be a (n, dim>=1) matrix")
        if not np.isfinite(self.vectors).all():
            raise MetricsError("vectors contain non-finite components")


@dataclass
class EvalReport:
    map_at_r: float
    per_problem: dict[str, float]
    n_queries: int


def map_at_r(table: EmbeddingTable, similarity: str = "cosine") -> EvalReport:
    """Mean average precision at R over every item as query."""
    n = len(table.ids)
    labels = np.asarray(table.labels)
    for lab in set(table.labels):
        if int((labels == lab).sum()) < 2:
            raise MetricsError(f"class '{lab}' has fewer than 2 members")
    X = table.vectors
    if similarity == "cosine":
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.where(norms == 0, 1.0, norms)
    elif similarity != "dot":
        raise MetricsError(f"unknown similarity: {similarity}")
    per_query: list[tuple[str, float]] = []
    order_key = np.arange(n)
    for q in range(n):
        # elementwise product + row sum rather than BLAS matmul/matvec:
        # identical rows must get bit-identical similarities so the stable
        # tie rule can apply, and BLAS kernels reassociate per row position
        sims_q = (X * X[q]).sum(axis=1)
        rest = np.delete(order_key, q)
        s = sims_q[rest]
        # primary key: similarity descending; ties: stable table order
        ranked = rest[np.lexsort((rest, -s))]
        relevant = labels[ranked] == labels[q]
        r = int((labels == labels[q]).sum()) - 1
        top = relevant[:r]
        hits = np.cumsum(top)
        precisions = hits[top] / (np.nonzero(top)[0] + 1)
        per_query.append((table.labels[q], float(precisions.sum() / r)))
    overall = float(np.mean([ap for _, ap in per_query]))
    per_problem: dict[str, list[float]] = {}
    for lab, ap in per_query:
        per_problem.setdefault(lab, []).append(ap)
    return EvalReport(
        map_at_r=overall,
        per_problem={lab: float(np.mean(v)) for lab, v in per_problem.items()},
        n_queries=n,
    )


def error_rate(predictions: list[str], truth: list[str]) -> float:
    if not predictions or len(predictions) != len(truth):
        raise MetricsError("predictions and truth must be equal-length, nonempty")
    wrong = sum(1 for p, t in zip(predictions, truth) if p != t)
    return wrong / len(predictions)


def per_problem_breakdown(report: EvalReport) -> list[tuple[str, float]]:
    return sorted(report.per_problem.items())


def write_breakdown_csv(report: EvalReport, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["problem_id", "map_at_r"])
        for pid, score in per_problem_breakdown(report):
            w.writerow([pid, f"{score:.6f}"])


def write_report_json(report: EvalReport, path: Path):
    Path(path).write_text(json.dumps({
        "map_at_r": report.map_at_r,
        "n_queries": report.n_queries,
        "per_problem": dict(per_problem_breakdown(report)),
    }, indent=2) + "\n", encoding="utf-8")


def write_embeddings(table: EmbeddingTable, path: Path):
    """Header line "n dim", then one line per item: id<TAB>label<TAB>v1 ... v_dim."""
    with open(path, "w", encoding="utf-8") as f:
        n, dim = table.vectors.shape
        f.write(f"{n} {dim}\n")
        for i in range(n):
            vec = " ".join(repr(float(v)) for v in table.vectors[i])
            f.write(f"{table.ids[i]}\t{table.labels[i]}\t{vec}\n")


def read_embeddings(path: Path) -> EmbeddingTable:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MetricsError(f"empty embedding file: {path}")
    n, dim = (int(x) for x in lines[0].split())
    ids, labels, vectors = [], [], []
    for line in lines[1:n + 1]:
        pid, label, vec = line.split("\t")
        values = [float(x) for x in vec.split()]
        if len(values) != dim:
            raise MetricsError(f"bad vector dimension in {path}")
        ids.append(pid)
        labels.append(label)
        vectors.append(values)
    if len(ids) != n:
        raise MetricsError(f"expected {n} rows in {path}, got {len(ids)}")
    return EmbeddingTable(ids, labels, np.array(vectors))
