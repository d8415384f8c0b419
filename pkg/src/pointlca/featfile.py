"""FEAT0001 feature files: one raw (unnormalised) global feature per row."""
import struct
from pathlib import Path

import numpy as np

from .errors import FileFormatError
from .lca import decode_label_table, encode_label_table

FEAT_MAGIC = b"FEAT0001"


def encode_features(features, labels) -> bytes:
    F = np.asarray(features, dtype="<f4")
    if F.ndim != 2:
        raise ValueError("features must be a (count, N) matrix")
    if len(labels) != F.shape[0]:
        raise ValueError(f"{len(labels)} labels for {F.shape[0]} features")
    return (FEAT_MAGIC + struct.pack("<IQ", F.shape[1], F.shape[0])
            + encode_label_table(labels) + np.ascontiguousarray(F).tobytes())


def decode_features(data: bytes):
    """Returns ``(features (count, N) float32, labels)``."""
    if data[:8] != FEAT_MAGIC:
        raise FileFormatError(f"bad feature-file magic {data[:8]!r}")
    if len(data) < 20:
        raise FileFormatError("truncated feature-file header")
    N, count = struct.unpack_from("<IQ", data, 8)
    labels, offset = decode_label_table(data, 20, count)
    need = 4 * N * count
    if len(data) - offset != need:
        raise FileFormatError(f"feature body holds {len(data) - offset} bytes, expected {need}")
    F = np.frombuffer(data, dtype="<f4", count=N * count, offset=offset).reshape(count, N)
    if not np.all(np.isfinite(F)):
        raise FileFormatError("non-finite feature value")
    return F.astype(np.float32), labels


def save_features(features, labels, path) -> None:
    Path(path).write_bytes(encode_features(features, labels))


def load_features(path):
    return decode_features(Path(path).read_bytes())
