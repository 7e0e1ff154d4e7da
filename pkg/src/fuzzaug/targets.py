"""Build repaired programs into executable fuzz targets and run them.

Two target kinds share one execution interface:

* instrumented binaries, compiled with clang's inline 8-bit edge counters
  plus a small runtime that dumps a 65536-byte counter map at exit;
* scripted in-process targets (a Python callable), so the fuzzing loop is
  testable without a compiler.
"""

from __future__ import annotations

import os
import resource
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .coverage import MAP_SIZE, CoverageMap

DEFAULT_TIMEOUT_MS = 1000
DEFAULT_MEMORY_LIMIT = 1 << 30
DEFAULT_MAX_INPUT_LEN = 1 << 20
STDOUT_CAP = 64 * 1024

_RUNTIME_C = Path(__file__).parent / "runtime" / "covrt.c"


class BuildError(Exception):
    """Instrumentation or plain compile failed; carries compiler output."""


class ExecError(Exception):
    """Infrastructure failure while executing a target (not a program behavior)."""


@dataclass
class ExecResult:
    coverage: CoverageMap | None
    stdout: bytes
    status: str  # ok | crash | hang
    exec_time_ms: float
    stdout_truncated: bool = False


@dataclass
class Target:
    """Uniform execution handle for one built program."""

    program_id: str
    kind: str  # instrumented_binary | scripted | plain_binary
    invocation: object  # Path for binaries, callable for scripted targets
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    memory_limit: int = DEFAULT_MEMORY_LIMIT

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.kind in ("instrumented_binary", "plain_binary"):
            if not Path(self.invocation).is_file():
                raise ValueError(f"target binary missing: {self.invocation}")


@dataclass
class BuildConfig:
    """Compiler command templates; {src}, {out}, {runtime} are substituted."""

    instrumented_cmd: list[str] = field(
        default_factory=lambda: [
            "clang++", "-O1", "-w", "-fsanitize-coverage=inline-8bit-counters",
            "{src}", "{runtime}", "-o", "{out}",
        ]
    )
    plain_cmd: list[str] = field(
        default_factory=lambda: ["g++", "-O1", "-w", "{src}", "-o", "{out}"]
    )
    runtime_cc: list[str] = field(
        default_factory=lambda: ["clang", "-O2", "-c", "{src}", "-o", "{out}"]
    )
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    memory_limit: int = DEFAULT_MEMORY_LIMIT


def compile_runtime(cache_dir: Path, config: BuildConfig | None = None) -> Path:
    """Compile the coverage dump runtime once, cached under cache_dir."""
    config = config or BuildConfig()
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    obj = cache_dir / "covrt.o"
    if obj.is_file():
        return obj
    cmd = [a.format(src=str(_RUNTIME_C), out=str(obj)) for a in config.runtime_cc]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise BuildError(f"coverage runtime compile failed:\n{proc.stderr}")
    return obj


def _compile(cmd_template: list[str], src: Path, out: Path, runtime: Path | None):
    cmd = [
        a.format(src=str(src), out=str(out), runtime=str(runtime or ""))
        for a in cmd_template
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
    if proc.returncode != 0:
        raise BuildError(f"compile failed ({' '.join(cmd)}):\n{proc.stderr}")


def build(
    program_id: str,
    source: str,
    workdir: Path,
    config: BuildConfig | None = None,
    instrumented: bool = True,
    smoke_run: bool = True,
) -> Target:
    """Compile source into a Target; instrumented targets get edge counters."""
    config = config or BuildConfig()
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    src = workdir / "src.cpp"
    src.write_text(source, encoding="utf-8")
    if instrumented:
        out = workdir / "target.cov"
        runtime = compile_runtime(workdir.parent / "_cache")
        _compile(config.instrumented_cmd, src, out, runtime)
        kind = "instrumented_binary"
    else:
        out = workdir / "target.plain"
        _compile(config.plain_cmd, src, out, None)
        kind = "plain_binary"
    target = Target(
        program_id=program_id,
        kind=kind,
        invocation=out,
        timeout_ms=config.timeout_ms,
        memory_limit=config.memory_limit,
    )
    if smoke_run:
        execute(target, b"")
    return target


def scripted_target(program_id: str, fn, timeout_ms: int = DEFAULT_TIMEOUT_MS) -> Target:
    """Wrap fn(input_bytes) -> (edges, stdout_bytes, status) as a Target."""
    return Target(program_id=program_id, kind="scripted", invocation=fn,
                  timeout_ms=timeout_ms)


def _limits(memory_limit: int):
    def apply():
        try:
            resource.setrlimit(resource.RLIMIT_AS, (memory_limit, memory_limit))
        except (ValueError, OSError):
            pass
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    return apply


def execute(target: Target, data: bytes,
            max_input_len: int = DEFAULT_MAX_INPUT_LEN,
            want_coverage: bool = True) -> ExecResult:
    """Run the target on one stdin payload and report behavior.

    stdout is captured byte-faithfully up to STDOUT_CAP; wall-clock timeout
    yields status=hang; termination by signal yields status=crash.
    want_coverage=False skips coverage-map materialization (coverage=None)
    for callers that only need status/stdout, e.g. the coverage-blind arm.
    """
    if len(data) > max_input_len:
        raise ValueError(f"input exceeds max length {max_input_len}")
    if target.kind == "scripted":
        return _execute_scripted(target, data, want_coverage)
    return _execute_binary(target, data)


def _execute_scripted(target: Target, data: bytes,
                      want_coverage: bool = True) -> ExecResult:
    t0 = time.perf_counter()
    edges, stdout, status = target.invocation(data)
    dt = (time.perf_counter() - t0) * 1000.0
    if status not in ("ok", "crash", "hang"):
        raise ExecError(f"scripted target returned bad status {status!r}")
    if status == "hang":
        dt = max(dt, float(target.timeout_ms))
    cov = None
    if want_coverage:
        cov = (CoverageMap.from_edges(edges) if status == "ok"
               else CoverageMap.empty())
    truncated = len(stdout) > STDOUT_CAP
    return ExecResult(cov, stdout[:STDOUT_CAP], status, dt, truncated)


def _execute_binary(target: Target, data: bytes) -> ExecResult:
    instrumented = target.kind == "instrumented_binary"
    cov_path = None
    env = dict(os.environ)
    # the sancov runtime must not intercept fatal signals: crashes should
    # terminate by signal so they are classified as crashes
    env["UBSAN_OPTIONS"] = ("handle_segv=0:handle_abort=0:handle_sigfpe=0:"
                            "handle_sigill=0:handle_sigbus=0")
    tmp = None
    if instrumented:
        tmp = tempfile.NamedTemporaryFile(prefix="cov_", delete=False)
        tmp.close()
        cov_path = tmp.name
        env["COV_MAP_PATH"] = cov_path
    t0 = time.perf_counter()
    try:
        proc = subprocess.run(
            [str(target.invocation)],
            input=data,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            timeout=target.timeout_ms / 1000.0,
            env=env,
            preexec_fn=_limits(target.memory_limit),
        )
        dt = (time.perf_counter() - t0) * 1000.0
        status = "crash" if proc.returncode < 0 else "ok"
        stdout = proc.stdout or b""
    except subprocess.TimeoutExpired as e:
        dt = (time.perf_counter() - t0) * 1000.0
        status = "hang"
        stdout = e.stdout or b""
    except OSError as e:
        if cov_path:
            os.unlink(cov_path)
        raise ExecError(f"failed to spawn target: {e}") from e
    try:
        cov = None
        if instrumented:
            if status == "ok":
                raw = Path(cov_path).read_bytes()
                if len(raw) != MAP_SIZE:
                    raise ExecError(
                        f"coverage channel unreadable ({len(raw)} bytes)")
                cov = CoverageMap.from_bytes(raw)
            else:
                # crash/hang: the dump destructor may not have run
                cov = CoverageMap.empty()
    finally:
        if cov_path:
            try:
                os.unlink(cov_path)
            except OSError:
                pass
    truncated = len(stdout) > STDOUT_CAP
    return ExecResult(cov, stdout[:STDOUT_CAP], status, dt, truncated)


def clean_workdir(workdir: Path):
    shutil.rmtree(workdir, ignore_errors=True)
