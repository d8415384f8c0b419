"""Exemplar dictionaries and Locally Competitive Algorithm encoding.

Membrane dynamics are integrated with explicit Euler from ``u = 0``::

    u <- u + (dt / tau) * (b - u - (G - I) a)
    a <- T_lambda(u)

with ``b = Phi^T s_hat`` and ``G = Phi^T Phi``.  Atoms have unit norm so the
diagonal of ``G`` is one and ``(G - I) a`` is the lateral inhibition from all
other neurons.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._kernels import lca_dynamics
from .errors import (
    DegenerateInputError, FileFormatError, LcaDivergenceError, ValidationError, ZeroNormFeatureError,
)

DICT_MAGIC = b"LCADICT1"
DIVERGENCE_GUARD = 1e6


@dataclass
class Dictionary:
    atoms: np.ndarray  # (N, M), unit-norm columns
    labels: list

    @property
    def N(self) -> int:
        return self.atoms.shape[0]

    @property
    def M(self) -> int:
        return self.atoms.shape[1]

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 2 or self.atoms.shape[1] < 1:
            raise ValidationError("dictionary needs an (N, M) matrix with M >= 1")
        if len(self.labels) != self.atoms.shape[1]:
            raise ValidationError(f"{len(self.labels)} labels for {self.atoms.shape[1]} atoms")
        self.labels = list(self.labels)


@dataclass(frozen=True)
class LcaParams:
    lam: float = 0.2
    tau: float = 1000.0
    steps: int = 100
    dt: float = 1.0
    normalize_input: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")
        if self.tau <= 0 or self.dt <= 0:
            raise ValidationError("tau and dt must be positive")
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.dt / self.tau > 1:
            raise ValidationError("dt / tau must be <= 1")

    @property
    def rate(self) -> float:
        return self.dt / self.tau


@dataclass
class ActivationVector:
    a: np.ndarray
    u_final: np.ndarray
    active_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def M(self) -> int:
        return self.a.shape[0]


def build_dictionary(features: Sequence, labels: Optional[Sequence] = None) -> Dictionary:
    """Stack features as unit-norm columns.  No learning: atoms are exemplars."""
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] == 0:
        raise ValidationError("need at least one feature vector")
    norms = np.sqrt((F * F).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ZeroNormFeatureError(int(zero[0]))
    if labels is None:
        labels = [None] * F.shape[0]
    return Dictionary((F / norms[:, None]).T.copy(), list(labels))


def compute_gramian(dictionary: Dictionary) -> np.ndarray:
    """``Phi^T Phi``, symmetrised so ``G[i, j] == G[j, i]`` exactly."""
    Phi = dictionary.atoms
    G = Phi.T @ Phi
    return np.triu(G) + np.triu(G, 1).T


def driving_input(s, dictionary: Dictionary, normalize: bool = True) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (dictionary.N,):
        raise ValidationError(f"input has shape {s.shape}, dictionary expects ({dictionary.N},)")
    if normalize:
        s = _unit(s)
    return dictionary.atoms.T @ s


def _unit(s):
    norm = float(np.sqrt(s @ s))
    if norm == 0.0:
        raise DegenerateInputError("cannot normalise a zero input")
    return s / norm


def soft_threshold(u, lam):
    """0 where ``|u| < lam``, else ``u - lam * sign(u)``.  Scalars stay scalars."""
    arr = np.asarray(u, dtype=np.float64)
    out = np.where(arr >= lam, arr - lam, np.where(arr <= -lam, arr + lam, 0.0))
    return float(out) if out.ndim == 0 else out


def lca_encode(b, gram, params: LcaParams = LcaParams()) -> ActivationVector:
    b = np.asarray(b, dtype=np.float64)
    gram = np.asarray(gram, dtype=np.float64)
    if gram.shape != (b.size, b.size):
        raise ValidationError(f"gramian {gram.shape} does not match drive of length {b.size}")
    u, a, counts, bad_step = lca_dynamics(b, gram, params.rate, params.lam, params.steps,
                                          DIVERGENCE_GUARD)
    if bad_step:
        bad = np.abs(u[np.isfinite(u)])
        raise LcaDivergenceError(int(bad_step), float(bad.max()) if bad.size else float("inf"))
    return ActivationVector(a, u, counts)


def encode(s, dictionary: Dictionary, gram, params: LcaParams = LcaParams()) -> ActivationVector:
    """Drive from a raw feature and run the dynamics."""
    return lca_encode(driving_input(s, dictionary, params.normalize_input), gram, params)


def reconstruction_residual(s, dictionary: Dictionary, act, normalize: bool = True) -> float:
    s = np.asarray(s, dtype=np.float64)
    if normalize:
        s = _unit(s)
    a = getattr(act, "a", act)
    r = s - dictionary.atoms @ np.asarray(a, dtype=np.float64)
    return float(np.sqrt(r @ r))


# -- file format -----------------------------------------------------------------

def encode_label_table(labels) -> bytes:
    blob = json.dumps([None if lab is None else str(lab) for lab in labels],
                      separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    return struct.pack("<I", len(blob)) + blob


def decode_label_table(data: bytes, offset: int, count: int):
    if offset + 4 > len(data):
        raise FileFormatError("truncated label table")
    (n,) = struct.unpack_from("<I", data, offset)
    try:
        labels = json.loads(data[offset + 4:offset + 4 + n].decode("utf-8"))
    except ValueError as exc:
        raise FileFormatError(f"unreadable label table: {exc}") from None
    if not isinstance(labels, list) or len(labels) != count:
        raise FileFormatError(f"label table holds {len(labels)} entries, expected {count}")
    return labels, offset + 4 + n


def encode_dictionary(d: Dictionary) -> bytes:
    head = DICT_MAGIC + struct.pack("<II", d.N, d.M) + encode_label_table(d.labels)
    # column-major: atom after atom
    return head + np.ascontiguousarray(d.atoms.T, dtype="<f4").tobytes()


def decode_dictionary(data: bytes) -> Dictionary:
    if data[:8] != DICT_MAGIC:
        raise FileFormatError(f"bad dictionary magic {data[:8]!r}")
    if len(data) < 16:
        raise FileFormatError("truncated dictionary header")
    N, M = struct.unpack_from("<II", data, 8)
    labels, offset = decode_label_table(data, 16, M)
    need = 4 * N * M
    if len(data) - offset != need:
        raise FileFormatError(f"dictionary body holds {len(data) - offset} bytes, expected {need}")
    cols = np.frombuffer(data, dtype="<f4", count=N * M, offset=offset).reshape(M, N)
    if not np.all(np.isfinite(cols)):
        raise FileFormatError("non-finite dictionary entry")
    return Dictionary(cols.T.astype(np.float64), labels)


def save_dictionary(d: Dictionary, path) -> None:
    Path(path).write_bytes(encode_dictionary(d))


def load_dictionary(path) -> Dictionary:
    return decode_dictionary(Path(path).read_bytes())
