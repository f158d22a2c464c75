"""Binary checkpoint format.

Layout: magic ``b"DXCN"``, uint16 version, uint32 length of the UTF-8 JSON
network config, the config itself, then every trainable parameter followed
by every running statistic in declaration order as little-endian float64.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import NetConfig, NetParams, buffer_shapes, param_shapes

MAGIC = b"DXCN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(params: NetParams) -> bytes:
    cfg_bytes = json.dumps(params.cfg.to_dict(), sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(cfg_bytes)), cfg_bytes]
    for k in param_shapes(params.cfg):
        parts.append(params.weights[k].astype("<f8").tobytes())
    for k in buffer_shapes(params.cfg):
        parts.append(params.buffers[k].astype("<f8").tobytes())
    return b"".join(parts)


def loads(blob: bytes) -> NetParams:
    if blob[:4] != MAGIC:
        raise CheckpointError("not a classifier checkpoint (bad magic)")
    try:
        version, n = struct.unpack_from("<HI", blob, 4)
    except struct.error:
        raise CheckpointError("checkpoint header truncated") from None
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    off = 10
    try:
        cfg = NetConfig.from_dict(json.loads(blob[off : off + n].decode()))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"bad network config in checkpoint: {exc}") from None
    off += n
    arrays = {}
    for k, shape in list(param_shapes(cfg).items()) + list(buffer_shapes(cfg).items()):
        size = int(np.prod(shape))
        if off + 8 * size > len(blob):
            raise CheckpointError(f"checkpoint truncated at {k}")
        arrays[k] = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
    if off != len(blob):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return NetParams(cfg, {k: arrays[k] for k in param_shapes(cfg)}, {k: arrays[k] for k in buffer_shapes(cfg)})


def save(path, params: NetParams, manifest: dict | None = None) -> None:
    path = Path(path)
    path.write_bytes(dumps(params))
    if manifest is not None:
        side = {"preset": params.cfg.preset, "param_count": params.count(), **manifest}
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def load(path) -> NetParams:
    return loads(Path(path).read_bytes())
