"""Policy checkpoint file.

Layout: the line ``WBCKPT <version>``, one JSON header line (policy config,
seed, epoch, normalisation statistics, tensor names and shapes), then the raw
tensor payload in header order as little-endian float64.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from datakit.dataset import NormStats
from policy.lstm import PolicyConfig, PolicyParams
from policy.optim import Adam

MAGIC = b"WBCKPT"
VERSION = 1
DTYPE = "<f8"
NORM_KEYS = ("input_mean", "input_std", "target_mean", "target_std")


class CheckpointFormatError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(f"{message} (byte offset {offset})" if offset is not None else message)


def dump_checkpoint(params: PolicyParams, optimizer: Adam | None = None) -> bytes:
    tensors = dict(params.tensors())
    if optimizer is not None:
        tensors.update(optimizer.state_tensors())
    header = {
        "config": asdict(params.config),
        "seed": params.meta.get("seed"),
        "epoch": params.meta.get("epoch"),
        "norm": None if params.norm is None else {key: getattr(params.norm, key).tolist() for key in NORM_KEYS},
        "dtype": DTYPE,
        "adam_t": None if optimizer is None else optimizer.t,
        "tensors": [{"name": name, "shape": list(value.shape)} for name, value in tensors.items()],
    }
    payload = b"".join(np.ascontiguousarray(value, dtype=DTYPE).tobytes() for value in tensors.values())
    return MAGIC + b" " + str(VERSION).encode() + b"\n" + json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + payload


def save_checkpoint(params: PolicyParams, path, optimizer: Adam | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dump_checkpoint(params, optimizer))
    return path


def parse_checkpoint(data: bytes) -> tuple[PolicyParams, Adam | None]:
    first = data.find(b"\n")
    if first < 0 or not data.startswith(MAGIC + b" "):
        raise CheckpointFormatError("not a policy checkpoint", 0)
    version = data[len(MAGIC) + 1 : first].decode("ascii", "replace")
    if version != str(VERSION):
        raise CheckpointFormatError(f"unsupported checkpoint version {version!r} (expected {VERSION})", 0)
    second = data.find(b"\n", first + 1)
    if second < 0:
        raise CheckpointFormatError("header line is truncated", first + 1)
    try:
        header = json.loads(data[first + 1 : second].decode("utf-8"))
        config = PolicyConfig(**header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointFormatError(f"malformed header: {exc}", first + 1) from None
    if header.get("dtype") != DTYPE:
        raise CheckpointFormatError(f"unsupported tensor dtype {header.get('dtype')!r}", first + 1)

    offset = second + 1
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape, dtype=int)) * 8
        if offset + size > len(data):
            raise CheckpointFormatError(f"payload truncated inside tensor {entry['name']!r}", len(data))
        tensors[entry["name"]] = np.frombuffer(data, dtype=DTYPE, count=size // 8, offset=offset).reshape(shape).astype(float)
        offset += size
    if offset != len(data):
        raise CheckpointFormatError("trailing bytes after payload", offset)
    if not all(np.isfinite(value).all() for value in tensors.values()):
        raise CheckpointFormatError("non-finite tensor values", second + 1)

    norm = None if header["norm"] is None else NormStats(*(np.array(header["norm"][key], dtype=float) for key in NORM_KEYS))
    model = {name: value for name, value in tensors.items() if not name.startswith("adam.")}
    try:
        params = PolicyParams.from_tensors(config, model, norm, {"seed": header.get("seed"), "epoch": header.get("epoch")})
    except (KeyError, ValueError) as exc:
        raise CheckpointFormatError(f"tensors do not match the config: {exc}", second + 1) from None
    optimizer = None
    if header.get("adam_t") is not None:
        optimizer = Adam()
        optimizer.load_state(header["adam_t"], {name: value for name, value in tensors.items() if name.startswith("adam.")})
    return params, optimizer


def load_checkpoint(path) -> PolicyParams:
    return parse_checkpoint(Path(path).read_bytes())[0]
