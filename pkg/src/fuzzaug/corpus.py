"""Corpus ingestion, labeled splits, and subsampling.

Supports POJ104-style layouts (one directory per problem) and CodeNet-style
benchmark subsets. All operations are pure functions of (inputs, seed);
problem directories are sorted lexicographically before seeded shuffling so
splits reproduce across filesystems.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

LANGUAGES = ("cpp", "java", "python")

_EXT_LANG = {
    ".c": "cpp", ".cc": "cpp", ".cpp": "cpp", ".cxx": "cpp", ".C": "cpp",
    ".java": "java",
    ".py": "python",
}

CODENET_SUBSETS = {
    "java250": "java",
    "python800": "python",
    "cpp1000": "cpp",
}


class CorpusError(Exception):
    pass


@dataclass
class Program:
    id: str
    problem_id: str
    language: str
    source_path: str
    source: str
    byte_len: int

    def __post_init__(self):
        if not self.problem_id:
            raise ValueError("problem_id must be non-empty")
        if self.language not in LANGUAGES:
            raise ValueError(f"unsupported language: {self.language}")


@dataclass
class Corpus:
    programs: list[Program]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        ids = [p.id for p in self.programs]
        if len(set(ids)) != len(ids):
            raise ValueError("program ids must be unique within a corpus")

    @property
    def problem_ids(self) -> list[str]:
        return sorted({p.problem_id for p in self.programs})

    def by_id(self, pid: str) -> Program:
        for p in self.programs:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def counts(self) -> dict:
        return {"programs": len(self.programs),
                "problems": len(self.problem_ids),
                "warnings": len(self.warnings)}


@dataclass
class SplitSpec:
    task: str  # clone_detection | classification
    unit: str  # problems | programs
    fractions: tuple[Fraction, Fraction, Fraction]
    seed: int = 0

    def __post_init__(self):
        if self.task not in ("clone_detection", "classification"):
            raise ValueError(f"unknown task: {self.task}")
        if self.unit not in ("problems", "programs"):
            raise ValueError(f"unknown unit: {self.unit}")
        fr = tuple(Fraction(f) for f in self.fractions)
        if any(f <= 0 for f in fr):
            raise ValueError("fractions must be strictly positive")
        if sum(fr) != 1:
            raise ValueError(f"fractions must sum to 1 exactly, got {sum(fr)}")
        if self.task == "clone_detection" and self.unit != "problems":
            raise ValueError("clone_detection splits must be by problems")
        self.fractions = fr


@dataclass
class Splits:
    train: list[str]
    val: list[str]
    test: list[str]
    spec: SplitSpec | None = None

    def as_dict(self) -> dict:
        d = {"train": self.train, "val": self.val, "test": self.test}
        if self.spec is not None:
            d["spec"] = {
                "task": self.spec.task,
                "unit": self.spec.unit,
                "fractions": [str(f) for f in self.spec.fractions],
                "seed": self.spec.seed,
            }
        return d


def _read_program(path: Path, problem_id: str, language: str,
                  warnings: list[str]) -> Program | None:
    try:
        raw = path.read_bytes()
        source = raw.decode("utf-8")
    except (OSError, UnicodeDecodeError) as e:
        # undecodable files cannot be prompt-concatenated; skip with a warning
        warnings.append(f"skipped {path}: {e}")
        return None
    return Program(
        id=f"{problem_id}/{path.name}",
        problem_id=problem_id,
        language=language,
        source_path=str(path),
        source=source,
        byte_len=len(raw),
    )


def ingest_poj104(root: Path) -> Corpus:
    """One directory per problem, each holding C/C++ program files."""
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root missing: {root}")
    problem_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not problem_dirs:
        raise CorpusError(f"corpus root has no problem directories: {root}")
    programs: list[Program] = []
    warnings: list[str] = []
    for d in problem_dirs:
        for f in sorted(d.iterdir()):
            if not f.is_file():
                continue
            lang = _EXT_LANG.get(f.suffix)
            if lang is None:
                lang = "cpp"  # POJ104 files often carry .txt or no extension
            prog = _read_program(f, d.name, lang, warnings)
            if prog is not None:
                programs.append(prog)
    if not programs:
        raise CorpusError(f"no readable programs under {root}")
    return Corpus(programs=programs, warnings=warnings)


def ingest_codenet(root: Path, subset: str) -> Corpus:
    """CodeNet benchmark subset: <root>/<subset>/<problem>/<files>.

    The subset directory may also be the root itself. Language is fixed per
    subset; files with other extensions are ignored.
    """
    if subset not in CODENET_SUBSETS:
        raise CorpusError(f"unknown CodeNet subset: {subset}")
    language = CODENET_SUBSETS[subset]
    root = Path(root)
    candidates = [root / subset, root / subset.capitalize(), root]
    subset_dir = next(
        (c for c in candidates
         if c.is_dir() and any(d.is_dir() for d in c.iterdir())), None)
    if subset_dir is None:
        raise CorpusError(f"subset directory not found under {root}")
    exts = {e for e, l in _EXT_LANG.items() if l == language}
    programs: list[Program] = []
    warnings: list[str] = []
    for d in sorted(x for x in subset_dir.iterdir() if x.is_dir()):
        for f in sorted(d.iterdir()):
            if f.is_file() and f.suffix in exts:
                prog = _read_program(f, d.name, language, warnings)
                if prog is not None:
                    programs.append(prog)
    if not programs:
        raise CorpusError(f"no programs found for subset {subset} under {root}")
    return Corpus(programs=programs, warnings=warnings)


def _partition_sizes(n: int, fractions) -> list[int]:
    """Exact split sizes by largest remainder; every part must be non-empty."""
    exact = [Fraction(n) * f for f in fractions]
    sizes = [int(e) for e in exact]
    remainders = sorted(range(len(exact)), key=lambda i: (exact[i] - sizes[i], -i),
                        reverse=True)
    short = n - sum(sizes)
    for i in remainders[:short]:
        sizes[i] += 1
    if any(s == 0 for s in sizes):
        raise CorpusError(f"fraction yields an empty split for n={n}")
    return sizes


def split(corpus: Corpus, spec: SplitSpec) -> Splits:
    """Deterministic seeded split.

    clone_detection: partitions problem ids (disjoint class sets per split).
    classification: partitions programs, stratified by problem id.
    """
    if not corpus.programs:
        raise CorpusError("cannot split an empty corpus")
    rng = random.Random(spec.seed)
    if spec.task == "clone_detection":
        problems = list(corpus.problem_ids)
        rng.shuffle(problems)
        n_train, n_val, _ = _partition_sizes(len(problems), spec.fractions)
        groups = (problems[:n_train], problems[n_train:n_train + n_val],
                  problems[n_train + n_val:])
        by_problem = {pid: [] for pid in problems}
        for p in corpus.programs:
            by_problem[p.problem_id].append(p.id)
        parts = [sorted(pid for g in grp for pid in by_problem[g])
                 for grp in groups]
        return Splits(*parts, spec=spec)
    # classification: stratify program ids within each problem
    parts: list[list[str]] = [[], [], []]
    by_problem: dict[str, list[str]] = {}
    for p in corpus.programs:
        by_problem.setdefault(p.problem_id, []).append(p.id)
    for pid in sorted(by_problem):
        ids = sorted(by_problem[pid])
        rng.shuffle(ids)
        n_train, n_val, _ = _partition_sizes(len(ids), spec.fractions)
        parts[0] += ids[:n_train]
        parts[1] += ids[n_train:n_train + n_val]
        parts[2] += ids[n_train + n_val:]
    return Splits(*[sorted(p) for p in parts], spec=spec)


def subsample(splits: Splits, ratio, unit: str, seed: int = 0,
              problem_of: dict[str, str] | None = None) -> Splits:
    """Shrink train/val deterministically; the test split is never touched.

    unit='problems': keep the given fraction of train and of val problem ids.
    unit='programs': keep round(ratio * (train+val)) programs at a 4:1
    train:val count ratio.
    """
    ratio = Fraction(ratio)
    if not 0 < ratio <= 1:
        raise CorpusError(f"ratio must be in (0, 1], got {ratio}")
    if ratio == 1:
        return Splits(list(splits.train), list(splits.val), list(splits.test),
                      spec=splits.spec)
    rng = random.Random(seed)
    if unit == "problems":
        if problem_of is None:
            raise CorpusError("problems-mode subsampling needs a problem map")
        out = []
        for part in (splits.train, splits.val):
            problems = sorted({problem_of[i] for i in part})
            keep_n = max(1, round(len(problems) * ratio))
            keep = set(rng.sample(problems, keep_n))
            out.append([i for i in part if problem_of[i] in keep])
        if not out[0]:
            raise CorpusError("subsample ratio produced an empty train split")
        return Splits(out[0], out[1], list(splits.test), spec=splits.spec)
    if unit != "programs":
        raise CorpusError(f"unknown subsample unit: {unit}")
    pool = len(splits.train) + len(splits.val)
    keep_total = int(round(pool * ratio))
    keep_val = keep_total // 5
    keep_train = keep_total - keep_val  # 4:1 train:val
    if keep_train == 0 or keep_train > len(splits.train) \
            or keep_val > len(splits.val):
        raise CorpusError(
            f"cannot keep {keep_train}/{keep_val} from "
            f"{len(splits.train)}/{len(splits.val)}")
    train = sorted(rng.sample(sorted(splits.train), keep_train))
    val = sorted(rng.sample(sorted(splits.val), keep_val))
    return Splits(train, val, list(splits.test), spec=splits.spec)


def write_manifest(splits: Splits, path: Path):
    Path(path).write_text(json.dumps(splits.as_dict(), indent=2) + "\n",
                          encoding="utf-8")


def read_manifest(path: Path) -> Splits:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    spec = None
    if "spec" in d:
        s = d["spec"]
        spec = SplitSpec(task=s["task"], unit=s["unit"],
                         fractions=tuple(Fraction(f) for f in s["fractions"]),
                         seed=s["seed"])
    return Splits(d["train"], d["val"], d["test"], spec=spec)
