"""Trace file codec.

A trace file is UTF-8 text: ``# key: value`` header lines, one CSV column
line, one CSV row per tick, and a ``# end`` footer. Per side (leader, then
follower) and per joint the row carries theta_ref, omega_ref, tau_ref, theta,
omega, tau, followed by the environment channels. Floats are written in their
shortest round-trip form so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from datakit.trace import ENV_CHANNELS, SIDE_CHANNELS, MotionTrace, TraceMeta

TRACE_MAGIC = "workbench-trace"
TRACE_VERSION = 1
FOOTER = "# end"

HEADER_KEYS = ("task", "variant", "ratio", "seed", "n_joints", "dt", "ticks", "outcome", "failure_reason", "label", "fault", "trace_id", "source")


class TraceFormatError(ValueError):
    def __init__(self, message: str, record: int | None = None, offset: int | None = None):
        self.record, self.offset = record, offset
        where = []
        if record is not None:
            where.append(f"record {record}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def format_float(value: float) -> str:
    return repr(float(value))


class LineReader:
    """Lines of a file with the byte offset at which each one starts."""

    def __init__(self, data: bytes, error=TraceFormatError):
        self.lines = data.splitlines(keepends=True)
        self.offsets = np.concatenate([[0], np.cumsum([len(line) for line in self.lines])]).astype(int).tolist()
        self.size = len(data)
        self.position = 0
        self.error = error

    def offset(self) -> int:
        return self.offsets[self.position] if self.position < len(self.lines) else self.size

    def next(self, record: int | None = None) -> str:
        if self.position >= len(self.lines):
            raise self.error("unexpected end of file (truncated)", record, self.size)
        raw = self.lines[self.position]
        if not raw.endswith(b"\n"):
            raise self.error("incomplete final line (truncated)", record, self.offsets[self.position])
        self.position += 1
        return raw.decode("utf-8").rstrip("\r\n")

    def peek(self) -> str | None:
        return self.lines[self.position].decode("utf-8").rstrip("\r\n") if self.position < len(self.lines) else None


def read_magic(reader: LineReader, magic: str, version: int):
    line = reader.next()
    parts = line.split()
    if len(parts) != 3 or parts[0] != "#" or parts[1] != magic:
        raise reader.error(f"not a {magic} file", None, 0)
    if parts[2] != str(version):
        raise reader.error(f"unsupported {magic} version {parts[2]!r} (expected {version})", None, 0)


def read_header(reader: LineReader) -> dict[str, str]:
    header = {}
    while (line := reader.peek()) is not None and line.startswith("# ") and ": " in line:
        key, _, value = reader.next()[2:].partition(": ")
        header[key] = value
    if reader.peek() is None:
        raise reader.error("unexpected end of file in header (truncated)", None, reader.size)
    return header


def parse_floats(fields: list[str], reader: LineReader, record: int, offset: int) -> list[float]:
    try:
        values = [float(field) for field in fields]
    except ValueError:
        raise reader.error("malformed number", record, offset) from None
    if not all(math.isfinite(value) for value in values):
        raise reader.error("non-finite value", record, offset)
    return values


def trace_columns(n_joints: int) -> list[str]:
    columns = ["tick"]
    for side in ("leader", "follower"):
        for j in range(n_joints):
            columns += [f"{side}_{channel}_{j}" for channel in SIDE_CHANNELS]
    return columns + list(ENV_CHANNELS)


def dump_trace(trace: MotionTrace) -> str:
    meta = trace.meta
    header = {
        "task": meta.task,
        "variant": meta.variant,
        "ratio": format_float(meta.ratio),
        "seed": "none" if meta.seed is None else str(int(meta.seed)),
        "n_joints": str(trace.n_joints),
        "dt": format_float(trace.dt),
        "ticks": str(trace.n_ticks),
        "outcome": meta.outcome,
        "failure_reason": meta.failure_reason or "-",
        "label": "none" if meta.label is None else format_float(meta.label),
        "fault": "1" if meta.fault else "0",
        "trace_id": meta.trace_id or "-",
        "source": meta.source,
    }
    lines = [f"# {TRACE_MAGIC} {TRACE_VERSION}"]
    lines += [f"# {key}: {header[key]}" for key in HEADER_KEYS]
    lines.append(",".join(trace_columns(trace.n_joints)))
    sides = [trace.leader.channels(), trace.follower.channels()]
    for k in range(trace.n_ticks):
        row = [str(k)]
        for channels in sides:
            for j in range(trace.n_joints):
                row += [format_float(channels[name][k, j]) for name in SIDE_CHANNELS]
        row += [format_float(trace.env.contact_normal[k]), format_float(trace.env.grip_force[k]), format_float(trace.env.object_pos[k])]
        row.append("1" if trace.env.object_held[k] else "0")
        lines.append(",".join(row))
    lines.append(FOOTER)
    return "\n".join(lines) + "\n"


def save_trace(trace: MotionTrace, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_trace(trace).encode("utf-8"))
    return path


def parse_trace(data: bytes) -> MotionTrace:
    reader = LineReader(data)
    read_magic(reader, TRACE_MAGIC, TRACE_VERSION)
    header = read_header(reader)
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise TraceFormatError(f"header is missing {', '.join(missing)}", None, reader.offset())
    try:
        n_joints, ticks = int(header["n_joints"]), int(header["ticks"])
        meta = TraceMeta(
            task=header["task"],
            variant=header["variant"],
            ratio=float(header["ratio"]),
            seed=None if header["seed"] == "none" else int(header["seed"]),
            outcome=header["outcome"],
            label=None if header["label"] == "none" else float(header["label"]),
            fault=header["fault"] == "1",
            trace_id="" if header["trace_id"] == "-" else header["trace_id"],
            source=header["source"],
            failure_reason="" if header["failure_reason"] == "-" else header["failure_reason"],
        )
        dt = float(header["dt"])
    except ValueError as exc:
        raise TraceFormatError(f"bad header value: {exc}", None, reader.offset()) from None

    columns = trace_columns(n_joints)
    if reader.next().split(",") != columns:
        raise TraceFormatError("unexpected column line", None, reader.offsets[reader.position - 1])

    trace = MotionTrace.allocate(ticks, n_joints, meta, dt)
    sides = [trace.leader, trace.follower]
    width = len(SIDE_CHANNELS) * n_joints
    for k in range(ticks):
        offset = reader.offset()
        line = reader.next(record=k)
        if line == FOOTER:
            raise TraceFormatError(f"expected {ticks} records, found {k} (truncated)", k, offset)
        fields = line.split(",")
        if len(fields) != len(columns) or fields[0] != str(k):
            raise TraceFormatError("malformed record", k, offset)
        values = parse_floats(fields[1:-1], reader, k, offset)
        for s, side in enumerate(sides):
            block = np.array(values[s * width : (s + 1) * width]).reshape(n_joints, len(SIDE_CHANNELS))
            for c, name in enumerate(SIDE_CHANNELS):
                getattr(side, name)[k] = block[:, c]
        trace.env.contact_normal[k], trace.env.grip_force[k], trace.env.object_pos[k] = values[2 * width :]
        if fields[-1] not in ("0", "1"):
            raise TraceFormatError("malformed held flag", k, offset)
        trace.env.object_held[k] = fields[-1] == "1"
    offset = reader.offset()
    if reader.next(record=ticks) != FOOTER:
        raise TraceFormatError("missing end marker", ticks, offset)
    return trace


def load_trace(path) -> MotionTrace:
    return parse_trace(Path(path).read_bytes())
