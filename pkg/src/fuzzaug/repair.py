"""Diagnostic-driven C/C++ source repair.

A compile-parse-fix loop: invoke the compiler, classify its messages with
regex patterns, apply one fix per round (compiler locations shift after
edits), and stop at success, a fixpoint, or the round limit. Fixes target
build blockers that do not change program semantics: missing headers,
missing returns, identifiers shadowing the standard library, struct
definitions lacking their trailing semicolon, and undeclared constants.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_MAX_ROUNDS = 10
DEFAULT_UNDECLARED_VALUE = 100000

# Fixed, versioned umbrella block of commonly used standard headers.
UMBRELLA_HEADER_BLOCK = """\
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <cmath>
#include <cctype>
#include <climits>
#include <iostream>
#include <iomanip>
#include <string>
#include <vector>
#include <map>
#include <set>
#include <queue>
#include <stack>
#include <algorithm>
using namespace std;
"""

DIAG_KINDS = ("missing_header", "missing_return", "reserved_keyword_misuse",
              "struct_missing_semicolon", "undeclared_identifier", "other")

# Standard-library names whose absence points at a missing #include rather
# than at a genuinely undeclared program constant.
_STD_NAMES = {
    "printf", "scanf", "puts", "gets", "getchar", "putchar", "sprintf",
    "sscanf", "fgets", "freopen", "exit", "malloc", "free", "calloc",
    "realloc", "abs", "labs", "atoi", "atof", "qsort", "rand", "srand",
    "strlen", "strcpy", "strcat", "strcmp", "strncmp", "memset", "memcpy",
    "sqrt", "pow", "floor", "ceil", "fabs", "sin", "cos", "tan", "log",
    "exp", "toupper", "tolower", "isdigit", "isalpha", "isspace",
    "cin", "cout", "cerr", "endl", "string", "vector", "map", "set",
    "sort", "swap", "min", "max", "queue", "stack", "pair", "abort",
    "count", "find", "begin", "end", "next", "prev", "distance",
    "reverse", "copy", "fill", "merge", "remove", "hash", "data",
    "INT_MAX", "INT_MIN", "LONG_MAX", "RAND_MAX", "NULL", "EOF",
}


class CompilerMissingError(Exception):
    """The configured compiler binary is absent (environment, not a compile failure)."""


@dataclass
class Diagnostic:
    kind: str
    location: tuple[int, int] | None  # 1-based (line, column)
    symbol: str | None
    raw_message: str

    def __post_init__(self):
        if self.kind not in DIAG_KINDS:
            raise ValueError(f"unknown diagnostic kind: {self.kind}")
        if self.kind != "other" and self.location is None:
            raise ValueError("classified diagnostics carry a location")


@dataclass
class RepairedProgram:
    program_id: str
    final_source: str
    actions: list[tuple[str, tuple[int, int] | None, str]]
    status: str  # compiles | unfixable
    rounds_used: int


@dataclass
class RepairConfig:
    # {src} is substituted; -Werror=return-type surfaces missing returns
    compile_cmd: list[str] = field(default_factory=lambda: [
        "g++", "-fsyntax-only", "-Werror=return-type", "{src}"])
    max_rounds: int = DEFAULT_MAX_ROUNDS
    undeclared_value: int = DEFAULT_UNDECLARED_VALUE


_LOC_RE = re.compile(r"^[^:\n]+:(\d+):(\d+): (?:error|warning): (.*)$")
_NOTE_HEADER_RE = re.compile(r"note: '(?:std::)?(\w+)' is defined in header")
_UNDECLARED_RE = re.compile(r"'(\w+)' was not declared in this scope")
_AMBIGUOUS_RE = re.compile(r"reference to '(\w+)' is ambiguous")
_CONFLICT_RE = re.compile(r"'[^']*\b(\w+)' redeclared as different kind|"
                          r"declaration of '[^']*\b(\w+)' (?:conflicts|shadows)")
_STRUCT_SEMI_RE = re.compile(r"expected ';' after (?:struct|class|union|enum)")
_MAIN_RETURN_RE = re.compile(r"'::main' must return 'int'")
_NO_RETURN_RE = re.compile(r"no return statement in function returning non-void|"
                           r"control reaches end of non-void function")


def _classify(line: str, message: str, loc: tuple[int, int],
              notes: str) -> Diagnostic:
    m = _UNDECLARED_RE.search(message)
    if m:
        sym = m.group(1)
        if sym in _STD_NAMES or f"'{sym}' is defined in header" in notes:
            return Diagnostic("missing_header", loc, sym, line)
        return Diagnostic("undeclared_identifier", loc, sym, line)
    if _STRUCT_SEMI_RE.search(message):
        return Diagnostic("struct_missing_semicolon", loc, None, line)
    if _MAIN_RETURN_RE.search(message) or _NO_RETURN_RE.search(message):
        return Diagnostic("missing_return", loc, None, line)
    m = _AMBIGUOUS_RE.search(message)
    if m and m.group(1) in _STD_NAMES:
        return Diagnostic("reserved_keyword_misuse", loc, m.group(1), line)
    return Diagnostic("other", loc, None, line)


def diagnose(source: str, language: str = "cpp",
             config: RepairConfig | None = None) -> list[Diagnostic]:
    """Run one compiler invocation and classify its messages.

    Returns [] iff compilation succeeds. Only the cpp adapter is implemented.
    """
    if language != "cpp":
        raise NotImplementedError(f"no language adapter for {language}")
    config = config or RepairConfig()
    with tempfile.TemporaryDirectory(prefix="fuzzaug_diag_") as d:
        src = Path(d) / "prog.cpp"
        src.write_text(source, encoding="utf-8")
        cmd = [a.format(src=str(src)) for a in config.compile_cmd]
        env = dict(os.environ, LC_ALL="C")  # plain ASCII quotes in messages
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True,
                                  timeout=60, env=env)
        except FileNotFoundError as e:
            raise CompilerMissingError(str(e)) from e
    if proc.returncode == 0:
        return []
    lines = proc.stderr.splitlines()
    diags: list[Diagnostic] = []
    for i, line in enumerate(lines):
        m = _LOC_RE.match(line)
        if not m:
            continue
        loc = (int(m.group(1)), int(m.group(2)))
        # adjacent notes sharpen classification (e.g. missing-header hints)
        notes = "\n".join(lines[i + 1:i + 8])
        diags.append(_classify(line, m.group(3), loc, notes))
    if not diags:
        diags.append(Diagnostic("other", None, None,
                                proc.stderr.strip() or "compile failed"))
    return diags


# --- fix application -------------------------------------------------------

def _line_col_offset(source: str, line: int, col: int) -> int:
    lines = source.splitlines(keepends=True)
    if line > len(lines):
        return len(source)
    return sum(len(l) for l in lines[:line - 1]) + min(col - 1,
                                                       len(lines[line - 1]))


def _code_spans(source: str):
    """Yield (index, char) for positions outside strings, chars and comments."""
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                i += 1
        elif c == "/" and i + 1 < n and source[i + 1] == "*":
            i += 2
            while i + 1 < n and source[i:i + 2] != "*/":
                i += 1
            i += 2
        elif c in "\"'":
            quote = c
            i += 1
            while i < n and source[i] != quote:
                i += 2 if source[i] == "\\" else 1
            i += 1
        else:
            yield i, c
            i += 1


def _matching_close_brace(source: str, open_idx: int) -> int | None:
    depth = 0
    for i, c in _code_spans(source):
        if i < open_idx:
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i
    return None


def _enclosing_close_brace(source: str, offset: int) -> int | None:
    """Closing brace of the innermost block containing offset."""
    depth = 0
    for i, c in _code_spans(source):
        if i < offset:
            if c == "{":
                depth += 1
            elif c == "}":
                depth = max(0, depth - 1)
        else:
            if c == "{":
                depth += 1
            elif c == "}":
                if depth == 0:
                    return i
                depth -= 1
    return None


def _has_umbrella(source: str) -> bool:
    first_line = UMBRELLA_HEADER_BLOCK.splitlines()[0]
    return first_line in source


def _fix_missing_header(source: str, diag: Diagnostic) -> str:
    if _has_umbrella(source):
        return source
    return UMBRELLA_HEADER_BLOCK + source


def _fix_missing_return(source: str, diag: Diagnostic) -> str:
    line, col = diag.location
    offset = _line_col_offset(source, line, col)
    close = None
    if _MAIN_RETURN_RE.search(diag.raw_message):
        # void main: rewrite the declaration, then patch main's body
        m = re.search(r"\bvoid\s+main\b", source)
        if m:
            source = source[:m.start()] + "int main" + source[m.end():]
        m = re.search(r"\bmain\s*\([^)]*\)", source)
        if not m:
            return source
        open_idx = next((i for i, c in _code_spans(source)
                         if i >= m.end() and c == "{"), None)
        if open_idx is None:
            return source
        close = _matching_close_brace(source, open_idx)
    else:
        # "no return statement": the location is at/near the closing brace
        window = source[max(0, offset - 2):offset + 2]
        if "}" in window:
            close = max(0, offset - 2) + window.index("}")
        else:
            close = _enclosing_close_brace(source, offset)
    if close is None:
        return source
    before = source[:close].rstrip()
    if re.search(r"\breturn\b[^;{}]*;$", before):
        return source  # already ends with a return
    return source[:close] + "return 0;" + source[close:]


def _word_occurrences_outside_literals(source: str, word: str):
    starts = set()
    pattern = re.compile(rf"\b{re.escape(word)}\b")
    code_positions = {i for i, _ in _code_spans(source)}
    for m in pattern.finditer(source):
        if m.start() in code_positions:
            starts.add(m.start())
    return sorted(starts)


def _fix_reserved_keyword(source: str, diag: Diagnostic) -> str:
    sym = diag.symbol
    starts = _word_occurrences_outside_literals(source, sym)
    out = []
    prev = 0
    for s in starts:
        # leave qualified std uses (std::max, obj.max) untouched
        before = source[:s].rstrip()
        if before.endswith("::") or before.endswith(".") or before.endswith("->"):
            continue
        out.append(source[prev:s])
        out.append(f"fixed_{sym}")
        prev = s + len(sym)
    out.append(source[prev:])
    return "".join(out)


def _fix_struct_semicolon(source: str, diag: Diagnostic) -> str:
    line, col = diag.location
    offset = _line_col_offset(source, line, col)
    if offset < len(source) and source[offset] == ";":
        return source
    # the compiler points at the position where the semicolon belongs
    return source[:offset] + ";" + source[offset:]


def _fix_undeclared_identifier(source: str, diag: Diagnostic,
                               value: int) -> str:
    sym = diag.symbol
    if re.search(rf"\bconst\s+(?:long\s+long|int)\s+{re.escape(sym)}\b", source):
        return source
    ctype = "int"
    for ln in source.splitlines():
        if re.search(rf"\b{re.escape(sym)}\b", ln) and (
                "long long" in ln or "%lld" in ln or "int64" in ln):
            ctype = "long long"
            break
    decl = f"const {ctype} {sym} = {value};\n"
    # insert at file scope after the last preprocessor/using line
    lines = source.splitlines(keepends=True)
    insert_at = 0
    for i, ln in enumerate(lines):
        s = ln.strip()
        if s.startswith("#") or s.startswith("using "):
            insert_at = i + 1
    lines.insert(insert_at, decl)
    return "".join(lines)


_FIXERS = {
    "missing_header": lambda src, d, cfg: _fix_missing_header(src, d),
    "missing_return": lambda src, d, cfg: _fix_missing_return(src, d),
    "reserved_keyword_misuse": lambda src, d, cfg: _fix_reserved_keyword(src, d),
    "struct_missing_semicolon": lambda src, d, cfg: _fix_struct_semicolon(src, d),
    "undeclared_identifier": lambda src, d, cfg: _fix_undeclared_identifier(
        src, d, cfg.undeclared_value),
}


def apply_fix(source: str, diag: Diagnostic,
              config: RepairConfig | None = None) -> str:
    """Apply the fix rule for one classified diagnostic.

    If the fix site cannot be located the source is returned unchanged;
    the caller records a no-op action.
    """
    if diag.kind == "other":
        raise ValueError("cannot fix an unclassified diagnostic")
    config = config or RepairConfig()
    return _FIXERS[diag.kind](source, diag, config)


def repair_loop(program_id: str, source: str, language: str = "cpp",
                config: RepairConfig | None = None) -> RepairedProgram:
    """diagnose -> apply one fix, until compiling, a fixpoint, or max_rounds."""
    config = config or RepairConfig()
    if config.max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    actions: list[tuple[str, tuple[int, int] | None, str]] = []
    current = source
    rounds = 0
    while rounds < config.max_rounds:
        rounds += 1
        diags = diagnose(current, language, config)
        if not diags:
            return RepairedProgram(program_id, current, actions, "compiles",
                                   rounds)
        diag = next((d for d in diags if d.kind != "other"), None)
        if diag is None:
            return RepairedProgram(program_id, current, actions, "unfixable",
                                   rounds)
        fixed = apply_fix(current, diag, config)
        if fixed == current:
            actions.append((diag.kind, diag.location, "no-op: fix site not found"))
            return RepairedProgram(program_id, current, actions, "unfixable",
                                   rounds)
        actions.append((diag.kind, diag.location,
                        f"applied {diag.kind}"
                        + (f" for '{diag.symbol}'" if diag.symbol else "")))
        current = fixed
    diags = diagnose(current, language, config)
    status = "compiles" if not diags else "unfixable"
    return RepairedProgram(program_id, current, actions, status, rounds)
