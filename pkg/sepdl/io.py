# Copyright (c) 2025 sepdl developers

"""File formats: SDT1 tensors, CSV tables, raw float volumes and model directories."""

import csv
import math
import os
import struct
from typing import Iterable, Optional, Sequence

import numpy as np

from .constants import CSV_FLOAT_FORMAT, SDT1_MAGIC
from .errors import FormatError
from .objective import Model
from .tensor import as_matrix, as_tensor3

_HEADER = struct.Struct("<4sIII")

GAMMA_FILE = "gamma.sdt"
PSI_FILE = "psi.sdt"
COEF_FILE = "coef.sdt"


def format_float(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(float(value), CSV_FLOAT_FORMAT)


def encode_sdt1(x: np.ndarray) -> bytes:
    x = as_tensor3(x)
    g, v, t = x.shape
    payload = np.asarray(x, dtype="<f8").tobytes(order="F")
    return _HEADER.pack(SDT1_MAGIC, g, v, t) + payload


def decode_sdt1(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("SDT1 data shorter than its header")
    magic, g, v, t = _HEADER.unpack_from(data)
    if magic != SDT1_MAGIC:
        raise FormatError(f"bad SDT1 magic {magic!r}")
    expected = _HEADER.size + 8 * g * v * t
    if len(data) != expected:
        raise FormatError(
            f"SDT1 size mismatch: header says {g}x{v}x{t}, "
            f"expected {expected} bytes, got {len(data)}"
        )
    if min(g, v, t) < 1:
        raise FormatError(f"SDT1 dimensions must be positive, got {g}x{v}x{t}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    x = values.reshape((g, v, t), order="F").astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise FormatError("SDT1 payload contains non-finite values")
    return x


def write_sdt1(path: str, x: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(encode_sdt1(x))


def read_sdt1(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_sdt1(f.read())


def write_matrix(path: str, m: np.ndarray) -> None:
    """Store a matrix as a single-slice SDT1 tensor."""
    write_sdt1(path, as_matrix(m)[:, :, np.newaxis])


def read_matrix(path: str) -> np.ndarray:
    x = read_sdt1(path)
    if x.shape[2] != 1:
        raise FormatError(f"{path} holds {x.shape[2]} slices, expected a matrix")
    return x[:, :, 0]


def read_raw_volume(path: str, dims: Sequence[int]) -> np.ndarray:
    """Read little-endian float64 values laid out like an SDT1 payload."""
    if len(dims) != 3 or min(dims) < 1:
        raise FormatError(f"raw volume needs three positive dimensions, got {dims}")
    data = np.fromfile(path, dtype="<f8")
    count = int(np.prod(dims))
    if data.size != count:
        raise FormatError(
            f"raw volume {path} holds {data.size} values, dims {tuple(dims)} need {count}"
        )
    x = data.reshape(tuple(dims), order="F").astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise FormatError(f"raw volume {path} contains non-finite values")
    return x


def write_tensor_csv(path: str, x: np.ndarray) -> None:
    """Debug dump, one ``g,v,t,value`` line per entry in storage order."""
    x = as_tensor3(x)
    g_dim, v_dim, t_dim = x.shape
    rows = (
        (g, v, t, format_float(x[g, v, t]))
        for t in range(t_dim)
        for v in range(v_dim)
        for g in range(g_dim)
    )
    write_csv(path, ("g", "v", "t", "value"), rows)


def read_tensor_csv(path: str) -> np.ndarray:
    entries = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0] == "g":
                continue
            try:
                g, v, t = (int(field) for field in row[:3])
                value = float(row[3])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: bad tensor CSV row {row}") from exc
            entries.append((g, v, t, value))
    if not entries:
        raise FormatError(f"{path}: no tensor entries")
    dims = tuple(max(entry[k] for entry in entries) + 1 for k in range(3))
    x = np.zeros(dims)
    for g, v, t, value in entries:
        x[g, v, t] = value
    return as_tensor3(x)


def write_csv(
    path: str,
    header: Optional[Sequence[str]],
    rows: Iterable[Sequence],
    comment: Optional[str] = None,
) -> None:
    """Write rows as a fresh CSV table, replacing any existing file."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        if comment:
            f.write(f"# {comment}\n")
        writer = csv.writer(f, lineterminator="\n")
        if header:
            writer.writerow(header)
        writer.writerows(rows)


def save_model(directory: str, model: Model) -> None:
    os.makedirs(directory, exist_ok=True)
    write_matrix(os.path.join(directory, GAMMA_FILE), model.gamma)
    write_matrix(os.path.join(directory, PSI_FILE), model.psi)
    write_sdt1(os.path.join(directory, COEF_FILE), model.coef)


def load_model(directory: str) -> Model:
    for name in (GAMMA_FILE, PSI_FILE, COEF_FILE):
        if not os.path.isfile(os.path.join(directory, name)):
            raise FormatError(f"model directory {directory} lacks {name}")
    return Model(
        gamma=read_matrix(os.path.join(directory, GAMMA_FILE)),
        psi=read_matrix(os.path.join(directory, PSI_FILE)),
        coef=read_sdt1(os.path.join(directory, COEF_FILE)),
    )
