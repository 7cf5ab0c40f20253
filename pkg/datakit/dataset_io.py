"""Dataset file codec: the trace layout with ``@seq`` blocks and normalisation statistics in the header."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from datakit.dataset import Dataset, LabeledSequence, NormStats
from datakit.trace_io import FOOTER, LineReader, TraceFormatError, format_float, parse_floats, read_header, read_magic

DATASET_MAGIC = "workbench-dataset"
DATASET_VERSION = 1
NORM_KEYS = ("input_mean", "input_std", "target_mean", "target_std")
SEQ_PREFIX = "@seq "


class DatasetFormatError(TraceFormatError):
    pass


def dump_dataset(dataset: Dataset) -> str:
    lines = [f"# {DATASET_MAGIC} {DATASET_VERSION}", f"# task: {dataset.task}", f"# n_joints: {dataset.n_joints}", f"# sequences: {len(dataset.sequences)}"]
    for key in NORM_KEYS:
        lines.append(f"# {key}: " + " ".join(format_float(value) for value in getattr(dataset.norm, key)))
    for sequence in dataset.sequences:
        info = {
            "trace_id": sequence.trace_id,
            "variant": sequence.variant,
            "ratio": sequence.ratio,
            "phase": sequence.phase,
            "label": sequence.label,
            "split": sequence.split,
            "length": sequence.length,
        }
        lines.append(SEQ_PREFIX + json.dumps(info, sort_keys=True))
        for inputs, targets in zip(sequence.inputs, sequence.targets):
            lines.append(",".join(format_float(value) for value in np.concatenate([inputs, targets])))
    lines.append(FOOTER)
    return "\n".join(lines) + "\n"


def save_dataset(dataset: Dataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_dataset(dataset).encode("utf-8"))
    return path


def parse_dataset(data: bytes) -> Dataset:
    reader = LineReader(data, DatasetFormatError)
    read_magic(reader, DATASET_MAGIC, DATASET_VERSION)
    header = read_header(reader)
    try:
        n_joints, count = int(header["n_joints"]), int(header["sequences"])
        norm = NormStats(*(np.array([float(value) for value in header[key].split()]) for key in NORM_KEYS))
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"bad or missing header field: {exc}", None, reader.offset()) from None
    input_dim, output_dim = 3 * n_joints + 1, 6 * n_joints
    if norm.input_mean.shape != (input_dim,) or norm.target_mean.shape != (output_dim,):
        raise DatasetFormatError("normalisation statistics do not match n_joints", None, reader.offset())

    sequences, record = [], 0
    for index in range(count):
        offset = reader.offset()
        line = reader.next(record=record)
        if not line.startswith(SEQ_PREFIX):
            raise DatasetFormatError(f"expected sequence {index} header", record, offset)
        try:
            info = json.loads(line[len(SEQ_PREFIX) :])
            length = int(info["length"])
        except (ValueError, KeyError):
            raise DatasetFormatError(f"malformed sequence {index} header", record, offset) from None
        rows = np.empty((length, input_dim + output_dim))
        for t in range(length):
            record += 1
            offset = reader.offset()
            fields = reader.next(record=record).split(",")
            if len(fields) != input_dim + output_dim:
                raise DatasetFormatError("malformed record", record, offset)
            rows[t] = parse_floats(fields, reader, record, offset)
        record += 1
        sequences.append(
            LabeledSequence(
                rows[:, :input_dim].copy(),
                rows[:, input_dim:].copy(),
                info["trace_id"],
                float(info["ratio"]),
                int(info["phase"]),
                float(info["label"]),
                info["variant"],
                info["split"],
            )
        )
    offset = reader.offset()
    if reader.next(record=record) != FOOTER:
        raise DatasetFormatError("missing end marker", record, offset)
    return Dataset(header.get("task", ""), n_joints, norm, sequences)


def load_dataset(path) -> Dataset:
    return parse_dataset(Path(path).read_bytes())
