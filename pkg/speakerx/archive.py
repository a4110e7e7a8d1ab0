"""Versioned tensor container.

Layout: one UTF-8 JSON header line, then the raw little-endian payloads of
every tensor in header order. The header carries the format version, a
``kind`` tag, free-form ``meta`` and the name/dtype/shape/offset of each
tensor. Keys are sorted so equal content always serializes to equal bytes.
"""
import json
from pathlib import Path
from typing import Dict, Mapping, Tuple

import numpy as np

from .errors import FormatError

FORMAT_NAME = "speakerx-container"
FORMAT_VERSION = 1

_DTYPES = {"<f4", "<f8"}


def write_container(path, kind: str, tensors: Mapping[str, np.ndarray], meta=None, dtype="<f4") -> Path:
    if dtype not in _DTYPES:
        raise ValueError(f"unsupported tensor dtype {dtype!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    payloads = []
    offset = 0
    for name, value in tensors.items():
        arr = np.ascontiguousarray(np.asarray(value, dtype=dtype))
        raw = arr.tobytes(order="C")
        entries.append({
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        })
        payloads.append(raw)
        offset += len(raw)

    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta or {},
        "tensors": entries,
    }
    line = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
    with open(path, "wb") as fh:
        fh.write(line)
        for raw in payloads:
            fh.write(raw)
    return path


def read_container(path, kind=None) -> Tuple[dict, Dict[str, np.ndarray]]:
    path = Path(path)
    with open(path, "rb") as fh:
        first = fh.readline()
        body = fh.read()
    try:
        header = json.loads(first.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: not a {FORMAT_NAME} file") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise FormatError(f"{path}: not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported container version {header.get('version')!r}")
    if kind is not None and header.get("kind") != kind:
        raise FormatError(f"{path}: expected a {kind!r} container, found {header.get('kind')!r}")

    tensors = {}
    for entry in header["tensors"]:
        start, stop = entry["offset"], entry["offset"] + entry["nbytes"]
        if stop > len(body):
            raise FormatError(f"{path}: truncated payload for tensor {entry['name']!r}")
        arr = np.frombuffer(body[start:stop], dtype=entry["dtype"]).reshape(entry["shape"])
        tensors[entry["name"]] = arr.astype(np.float64)
    return header, tensors
