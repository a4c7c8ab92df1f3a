"""Binary and text interchange formats.

- "MEL1": magic, u32 LE n_mels, u32 LE n_frames, f32 LE values row-major.
  Also reused for alignment matrices (the first dimension then holds N).
- "STY1": magic, u32 count, u32 dim, then per record a length-prefixed
  UTF-8 utterance id and dim f32 values.
- Feature report CSV and training-loss CSV writers.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MEL_MAGIC = b"MEL1"
STY_MAGIC = b"STY1"


class FormatError(Exception):
    pass


def write_mel1(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise FormatError("MEL1 stores a 2-D matrix")
    rows, cols = values.shape
    with open(path, "wb") as f:
        f.write(MEL_MAGIC)
        f.write(struct.pack("<II", rows, cols))
        f.write(values.astype("<f4").tobytes(order="C"))


def read_mel1(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != MEL_MAGIC:
        raise FormatError(f"{path}: bad MEL1 magic")
    rows, cols = struct.unpack("<II", data[4:12])
    expected = 12 + 4 * rows * cols
    if len(data) != expected:
        raise FormatError(f"{path}: truncated MEL1 payload")
    return np.frombuffer(data[12:], dtype="<f4").reshape(rows, cols).astype(np.float64)


def write_sty1(path, records: list[tuple[str, np.ndarray]], dim: int = 128) -> None:
    with open(path, "wb") as f:
        f.write(STY_MAGIC)
        f.write(struct.pack("<II", len(records), dim))
        for name, vec in records:
            vec = np.asarray(vec, dtype="<f4")
            if vec.shape != (dim,):
                raise FormatError(f"style vector for {name!r} is not length {dim}")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(vec.tobytes())


def read_sty1(path) -> list[tuple[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != STY_MAGIC:
        raise FormatError(f"{path}: bad STY1 magic")
    count, dim = struct.unpack("<II", data[4:12])
    offset = 12
    records = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        records.append((name, vec))
    return records


def write_feature_csv(path, rows: list[tuple[str, "np.ndarray"]]) -> None:
    """rows: (utterance id, 8-feature vector) pairs."""
    from .dsp import AcousticFeatureSet

    lines = [AcousticFeatureSet.CSV_HEADER]
    for name, vec in rows:
        lines.append(name + "," + ",".join(f"{v:.6f}" for v in vec))
    Path(path).write_text("\n".join(lines) + "\n")
