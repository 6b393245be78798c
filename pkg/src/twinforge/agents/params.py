"""Parameter copying and the binary checkpoint format.

File layout (little-endian)::

    b"TWFPARAM"  u32 version  u32 n_records
    per record:  u8 kind (0 = Q-table, 1 = MLP)  u32 n_dims  u32 dims[n_dims]
                 [Q-table only: f64 learning_rate, f64 discount]
                 f64 values[...]

A DQN checkpoint holds two MLP records: online then target.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .dqn import DqnParams
from .mlp import MlpParams, param_count
from .tabular import QTable

AgentParams = Union[QTable, MlpParams, DqnParams]

MAGIC = b"TWFPARAM"
VERSION = 1


def copy_params(src: AgentParams) -> AgentParams:
    """Deep value copy; mutating the result never affects ``src``."""
    return src.copy()


def params_equal(a: AgentParams, b: AgentParams) -> bool:
    return type(a) is type(b) and a == b


def _records(p: AgentParams):
    if isinstance(p, DqnParams):
        return [p.online, p.target]
    return [p]


def to_bytes(p: AgentParams) -> bytes:
    out = [MAGIC, struct.pack("<II", VERSION, len(_records(p)))]
    for r in _records(p):
        if isinstance(r, QTable):
            dims = r.values.shape
            out.append(struct.pack(f"<BI{len(dims)}I", 0, len(dims), *dims))
            out.append(struct.pack("<dd", r.learning_rate, r.discount))
            out.append(np.ascontiguousarray(r.values, dtype="<f8").tobytes())
        else:
            dims = r.sizes
            out.append(struct.pack(f"<BI{len(dims)}I", 1, len(dims), *dims))
            out.append(r.flat.astype("<f8").tobytes())
    return b"".join(out)


def from_bytes(data: bytes) -> AgentParams:
    if data[:8] != MAGIC:
        raise ValueError("not a parameter file (bad magic)")
    version, n = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"unsupported parameter file version {version}")
    off = 16
    recs = []
    for _ in range(n):
        kind, ndims = struct.unpack_from("<BI", data, off)
        off += 5
        dims = struct.unpack_from(f"<{ndims}I", data, off)
        off += 4 * ndims
        if kind == 0:
            lr, disc = struct.unpack_from("<dd", data, off)
            off += 16
            count = int(np.prod(dims))
            vals = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(dims).astype(np.float64)
            off += 8 * count
            recs.append(QTable(vals, lr, disc))
        elif kind == 1:
            count = param_count(dims)
            flat = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
            off += 8 * count
            recs.append(MlpParams(dims, flat))
        else:
            raise ValueError(f"unknown record kind {kind}")
    if off != len(data):
        raise ValueError("trailing bytes in parameter file")
    if len(recs) == 2:
        return DqnParams(*recs)
    if len(recs) == 1:
        return recs[0]
    raise ValueError(f"unexpected record count {len(recs)}")


def save_params(path: str | Path, p: AgentParams) -> None:
    Path(path).write_bytes(to_bytes(p))


def load_params(path: str | Path) -> AgentParams:
    return from_bytes(Path(path).read_bytes())
