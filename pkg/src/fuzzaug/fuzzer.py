"""Coverage-guided greybox fuzzing loop.

Execute, monitor for new behavior, save interesting inputs, mutate.
Deterministic stages (bitflip, arith, interest) enumerate exhaustively per
queue entry; havoc/splice apply seeded random edits. Campaigns end at the
wall-clock budget or when every deterministic stage is complete and a
configured number of consecutive havoc executions finds nothing new.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .coverage import CoverageAccumulator, CoverageMap
from .targets import ExecError, Target, execute

STAGES = ("seed", "bitflip", "arith", "interest", "havoc", "splice")

ARITH_MAX = 35

# Boundary values likely to exercise edge conditions. 8-bit values are
# substituted byte-wise; 16-bit values are substituted in both endiannesses.
INTERESTING_8 = [0, 1, 16, 32, 127, 255]  # 255 doubles as -1
INTERESTING_16 = [256, 1024, 32767, 65535]

HAVOC_STACK_MAX = 64


@dataclass
class FuzzConfig:
    budget_minutes: float = 5.0
    per_exec_timeout_ms: int = 1000
    max_input_len: int = 1 << 20
    rng_seed: int = 0
    havoc_iterations_per_entry: int = 256
    exhaust_havoc_execs: int = 50000  # consecutive fruitless havoc execs => exhausted
    max_execs: int | None = None
    stability_retries: int = 3

    def __post_init__(self):
        if self.budget_minutes <= 0:
            raise ValueError("budget must be positive")
        if self.max_input_len < 1:
            raise ValueError("max_input_len must be >= 1")


@dataclass
class QueueEntry:
    id: int
    input: bytes
    signature: frozenset
    exec_time_ms: float
    parent: int | None
    stage_found: str

    def __post_init__(self):
        if (self.parent is None) != (self.stage_found == "seed"):
            raise ValueError("parent must be absent iff stage_found=seed")


@dataclass
class FuzzReport:
    queue: list[QueueEntry]
    crashes: list[bytes]
    hangs: list[bytes]
    execs_total: int
    edges_covered: int
    wall_time_ms: float
    termination: str  # exhausted | timeout
    aborted: bool = False  # infrastructure ExecError cut the campaign short


def bitflip_mutations(data: bytes):
    """All 1/2/4-bit flips, AFL-style walking windows."""
    n_bits = len(data) * 8
    for width in (1, 2, 4):
        for pos in range(n_bits - width + 1):
            buf = bytearray(data)
            for b in range(pos, pos + width):
                buf[b >> 3] ^= 0x80 >> (b & 7)
            yield bytes(buf)


def arith_mutations(data: bytes):
    """Byte-wise +/- 1..35 with wraparound."""
    for i in range(len(data)):
        orig = data[i]
        for delta in range(1, ARITH_MAX + 1):
            for val in ((orig + delta) & 0xFF, (orig - delta) & 0xFF):
                if val == orig:
                    continue
                buf = bytearray(data)
                buf[i] = val
                yield bytes(buf)


def interest_mutations(data: bytes):
    """Substitute interesting 8-bit values byte-wise and 16-bit values
    in both endiannesses."""
    for i in range(len(data)):
        for v in INTERESTING_8:
            if data[i] == v:
                continue
            buf = bytearray(data)
            buf[i] = v
            yield bytes(buf)
    for i in range(len(data) - 1):
        for v in INTERESTING_16:
            for word in (v.to_bytes(2, "little"), v.to_bytes(2, "big")):
                if data[i:i + 2] == word:
                    continue
                buf = bytearray(data)
                buf[i:i + 2] = word
                yield bytes(buf)


def havoc_mutation(data: bytes, rng: random.Random, max_len: int) -> bytes:
    """1-64 stacked random edits: flip, set, delete, clone, insert.

    Index draws use rng.random() rather than randrange(): this is the hot
    loop of every campaign and the Python-level randrange wrapper dominates
    otherwise. Seeded determinism is unaffected.
    """
    buf = bytearray(data)
    rnd = rng.random
    for _ in range(1 + int(rnd() * HAVOC_STACK_MAX)):
        op = int(rnd() * 5)
        n = len(buf)
        if op == 0 and n:  # flip one bit
            b = int(rnd() * (n * 8))
            buf[b >> 3] ^= 0x80 >> (b & 7)
        elif op == 1 and n:  # set a random byte
            buf[int(rnd() * n)] = int(rnd() * 256)
        elif op == 2 and n > 1:  # delete a span
            start = int(rnd() * n)
            span = 1 + int(rnd() * min(n - start, 8))
            del buf[start:start + span]
        elif op == 3 and 0 < n < max_len:  # clone a span
            start = int(rnd() * n)
            span = 1 + int(rnd() * min(n - start, 8, max_len - n))
            at = int(rnd() * (n + 1))
            buf[at:at] = buf[start:start + span]
        elif op == 4 and n < max_len:  # insert random bytes
            span = 1 + int(rnd() * min(8, max_len - n))
            at = int(rnd() * (n + 1))
            buf[at:at] = rng.randbytes(span)
    if not buf:
        buf.append(0)
    return bytes(buf[:max_len])


def splice_mutation(a: bytes, b: bytes, rng: random.Random, max_len: int) -> bytes:
    """Prefix of one input crossed with the suffix of another."""
    cut_a = rng.randint(0, len(a))
    cut_b = rng.randint(0, len(b))
    return (a[:cut_a] + b[cut_b:])[:max_len]


def mutate(data: bytes, stage: str, rng: random.Random | None = None,
           other: bytes | None = None, max_len: int = 1 << 20):
    """Dispatch one mutation stage.

    Deterministic stages return an exhaustive iterator of variants;
    havoc/splice return a single random variant.
    """
    if stage == "bitflip":
        return bitflip_mutations(data)
    if stage == "arith":
        return arith_mutations(data)
    if stage == "interest":
        return interest_mutations(data)
    if rng is None:
        raise ValueError(f"stage {stage} requires an rng")
    if stage == "havoc":
        return havoc_mutation(data, rng, max_len)
    if stage == "splice":
        if other is None:
            raise ValueError("splice requires a second input")
        return splice_mutation(data, other, rng, max_len)
    raise ValueError(f"unknown stage: {stage}")


class _Campaign:
    def __init__(self, target: Target, config: FuzzConfig, coverage_blind: bool):
        self.target = target
        self.config = config
        self.coverage_blind = coverage_blind
        self.rng = random.Random(config.rng_seed)
        self.acc = CoverageAccumulator()
        self.queue: list[QueueEntry] = []
        self.signatures: set[frozenset] = set()
        self.crashes: list[bytes] = []
        self.hangs: list[bytes] = []
        self.execs = 0
        self.fruitless_havoc = 0
        self.deadline = time.monotonic() + config.budget_minutes * 60.0
        self.out_of_budget = False
        self.aborted = False

    def budget_left(self) -> bool:
        if self.out_of_budget:
            return False
        cfg = self.config
        if cfg.max_execs is not None and self.execs >= cfg.max_execs:
            self.out_of_budget = True
        elif time.monotonic() >= self.deadline:
            self.out_of_budget = True
        return not self.out_of_budget

    def _stable_coverage(self, data: bytes, first: CoverageMap) -> CoverageMap:
        """Retry to confirm the signature; unstable targets contribute only
        the stable intersection of their counters."""
        counters = first.counters
        for _ in range(self.config.stability_retries - 1):
            res = execute(self.target, data, self.config.max_input_len)
            self.execs += 1
            if res.status != "ok":
                break
            if res.coverage == CoverageMap(counters):
                return CoverageMap(counters)
            counters = counters.copy()
            mask = res.coverage.counters != counters
            counters[mask] = 0
        return CoverageMap(counters)

    def run_one(self, data: bytes, stage: str, parent: int | None) -> str:
        """Execute one input. Returns 'new', 'old', 'crash', 'hang' or 'abort'."""
        try:
            res = execute(self.target, data, self.config.max_input_len,
                          want_coverage=not self.coverage_blind)
        except ExecError:
            self.aborted = True
            self.out_of_budget = True
            return "abort"
        self.execs += 1
        if res.status == "crash":
            self.crashes.append(data)
            return "crash"
        if res.status == "hang":
            self.hangs.append(data)
            return "hang"
        if self.coverage_blind:
            return "old"  # never interesting; nothing is enqueued
        if not self.acc.would_be_new(res.coverage):
            return "old"
        cov = self._stable_coverage(data, res.coverage)
        if not self.acc.observe(cov):
            return "old"
        sig = cov.signature()
        if sig in self.signatures:
            return "old"
        self.signatures.add(sig)
        self.queue.append(QueueEntry(
            id=len(self.queue), input=data, signature=sig,
            exec_time_ms=res.exec_time_ms, parent=parent, stage_found=stage,
        ))
        return "new"


def fuzz_program(target: Target, seeds: list[bytes] | None,
                 config: FuzzConfig | None = None,
                 coverage_blind: bool = False) -> FuzzReport:
    """Run one single-threaded fuzzing campaign against one target.

    coverage_blind disables the interestingness filter (nothing is ever
    enqueued beyond the seeds); used for the random-input ablation arm.
    """
    config = config or FuzzConfig()
    if not seeds:
        seeds = [b"\n"]
    t0 = time.monotonic()
    c = _Campaign(target, config, coverage_blind)

    for s in seeds:
        if not c.budget_left():
            break
        s = s[:config.max_input_len]
        if coverage_blind:
            # blind arm still needs a seed pool to mutate from
            c.run_one(s, "seed", None)
            c.queue.append(QueueEntry(
                id=len(c.queue), input=s, signature=frozenset(),
                exec_time_ms=0.0, parent=None, stage_found="seed"))
        else:
            c.run_one(s, "seed", None)
            if not c.queue:
                # seed triggered no coverage at all; keep it as mutation base
                c.queue.append(QueueEntry(
                    id=len(c.queue), input=s, signature=frozenset(),
                    exec_time_ms=0.0, parent=None, stage_found="seed"))

    det_done = 0  # queue entries whose deterministic stages are complete
    exhausted = False
    while c.budget_left() and not exhausted:
        if det_done < len(c.queue) and not coverage_blind:
            entry = c.queue[det_done]
            for stage in ("bitflip", "arith", "interest"):
                for variant in mutate(entry.input, stage):
                    if not c.budget_left():
                        break
                    c.run_one(variant, stage, entry.id)
                if not c.budget_left():
                    break
            if c.budget_left():
                det_done += 1
            continue
        # havoc round-robin (with occasional splice when possible)
        for entry in list(c.queue):
            for _ in range(config.havoc_iterations_per_entry):
                if not c.budget_left():
                    break
                if len(c.queue) >= 2 and c.rng.random() < 0.1:
                    other = c.queue[c.rng.randrange(len(c.queue))]
                    base = splice_mutation(entry.input, other.input, c.rng,
                                           config.max_input_len)
                    stage = "splice"
                else:
                    base = entry.input
                    stage = "havoc"
                data = havoc_mutation(base, c.rng, config.max_input_len)
                outcome = c.run_one(data, stage, entry.id)
                if outcome == "new":
                    c.fruitless_havoc = 0
                else:
                    c.fruitless_havoc += 1
                if (not coverage_blind
                        and c.fruitless_havoc >= config.exhaust_havoc_execs
                        and det_done >= len(c.queue)):
                    exhausted = True
                    break
            if exhausted or not c.budget_left():
                break
            if det_done < len(c.queue) and not coverage_blind:
                break  # new entries owe their deterministic stages first

    wall = (time.monotonic() - t0) * 1000.0
    return FuzzReport(
        queue=c.queue,
        crashes=c.crashes,
        hangs=c.hangs,
        execs_total=c.execs,
        edges_covered=c.acc.edges_covered(),
        termination="exhausted" if exhausted else "timeout",
        wall_time_ms=wall,
        aborted=c.aborted,
    )
