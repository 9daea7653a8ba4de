"""Shared binary container for named float32 arrays.

Layout: 4-byte magic, little-endian uint32 header length, UTF-8 JSON
header, then raw little-endian float32 array data concatenated in the
order of the header's ``params`` table (name, shape, dtype).
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

from .errors import ConfigError


def save_archive(path: str, magic: bytes, header: dict, arrays: dict[str, np.ndarray]) -> None:
    if len(magic) != 4:
        raise ConfigError("archive magic must be exactly 4 bytes")
    header = dict(header)
    names = sorted(arrays)
    header["params"] = [[n, list(arrays[n].shape), "float32"] for n in names]
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(arrays[n], dtype="<f4").tobytes())
    os.replace(tmp, path)


def load_archive(path: str, magic: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(4) != magic:
            raise ConfigError(f"{path} does not carry the expected archive magic")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        arrays = {}
        for name, shape, dtype in header["params"]:
            if dtype != "float32":
                raise ConfigError(f"unsupported array dtype {dtype}")
            n = int(np.prod(shape)) if shape else 1
            arrays[name] = np.frombuffer(f.read(n * 4), dtype="<f4").reshape(shape).copy()
    return header, arrays
