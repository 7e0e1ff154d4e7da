"""Replay saved fuzz inputs against the plain (uninstrumented) program and
turn the observed outputs into bounded, decoded test-case pairs."""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass
from pathlib import Path

from .targets import ExecError, Target, execute

DEFAULT_MAX_PAIRS = 5
DEFAULT_MAX_PAIR_CHARS = 200

# keep \n and \t; strip every other control character after decoding
_CONTROL_RE = re.compile(r"[\x00-\x08\x0b-\x1f\x7f]")
_NEWLINE_RUN_RE = re.compile(r"\n{3,}")


@dataclass
class TestCasePair:
    input_bytes: bytes
    output_bytes: bytes
    input_text: str
    output_text: str
    decode_mode: str  # utf8 | raw_bytes
    status: str = "ok"  # crash/hang pairs are filtered before construction


def decode(b: bytes, mode: str) -> str:
    """Total decoder for harvested byte strings.

    utf8: replacement character for invalid sequences, control characters
    other than newline/tab stripped, runs of 3+ newlines collapsed to 2.
    raw_bytes: printable ASCII kept, everything else hex-escaped (\\xNN).
    """
    if mode == "utf8":
        s = b.decode("utf-8", errors="replace")
        s = _CONTROL_RE.sub("", s)
        return _NEWLINE_RUN_RE.sub("\n\n", s)
    if mode == "raw_bytes":
        return "".join(
            chr(c) if 0x20 <= c <= 0x7E else f"\\x{c:02x}" for c in b)
    raise ValueError(f"unknown decode mode: {mode}")


def replay(plain_target: Target, data: bytes) -> tuple[bytes, str, bool]:
    """Run one input; returns (stdout, status, truncated)."""
    res = execute(plain_target, data)
    return res.stdout, res.status, res.stdout_truncated


def harvest_program(plain_target: Target, queue_inputs: list[bytes],
                    max_pairs: int = DEFAULT_MAX_PAIRS,
                    max_pair_chars: int = DEFAULT_MAX_PAIR_CHARS,
                    decode_mode: str = "utf8") -> list[TestCasePair]:
    """Replay queue inputs in order; keep the first max_pairs clean pairs.

    Crash/hang replays and truncated outputs are dropped, as are pairs whose
    combined decoded length exceeds max_pair_chars.
    """
    pairs: list[TestCasePair] = []
    for data in queue_inputs:
        if len(pairs) >= max_pairs:
            break
        try:
            out, status, truncated = replay(plain_target, data)
        except ExecError:
            continue  # infrastructure hiccup: skip the pair, keep harvesting
        if status != "ok" or truncated:
            continue
        in_text = decode(data, decode_mode)
        out_text = decode(out, decode_mode)
        if len(in_text) + len(out_text) > max_pair_chars:
            continue
        pairs.append(TestCasePair(
            input_bytes=data, output_bytes=out,
            input_text=in_text, output_text=out_text,
            decode_mode=decode_mode))
    return pairs


def write_pairs(pairs: list[TestCasePair], program_id: str, path: Path):
    """testcases.jsonl: one record per pair."""
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps({
                "program_id": program_id,
                "input_text": p.input_text,
                "output_text": p.output_text,
                "input_b64": base64.b64encode(p.input_bytes).decode("ascii"),
                "output_b64": base64.b64encode(p.output_bytes).decode("ascii"),
                "decode_mode": p.decode_mode,
            }, ensure_ascii=False) + "\n")


def read_pairs(path: Path) -> list[TestCasePair]:
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        pairs.append(TestCasePair(
            input_bytes=base64.b64decode(d["input_b64"]),
            output_bytes=base64.b64decode(d["output_b64"]),
            input_text=d["input_text"],
            output_text=d["output_text"],
            decode_mode=d["decode_mode"]))
    return pairs
