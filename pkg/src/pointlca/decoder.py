"""Activation decoders and evaluation statistics.

Class identifiers are compared as strings; ties go to the lexicographically
smallest identifier.  An all-zero code carries no evidence: the prediction's
``predicted_class`` is ``None`` and it is scored as wrong.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

NO_EVIDENCE = None
DECODERS = ("max-activation", "max-sum")


@dataclass
class Prediction:
    predicted_class: Optional[str]
    score: float
    per_class_scores: dict = field(default_factory=dict)

    @property
    def no_evidence(self) -> bool:
        return self.predicted_class is None


def _codes(act):
    return np.abs(np.asarray(getattr(act, "a", act), dtype=np.float64))


def _decode(act, labels, reduce) -> Prediction:
    mag = _codes(act)
    if mag.shape[0] != len(labels):
        raise ValidationError(f"{mag.shape[0]} activations for {len(labels)} labels")
    classes = sorted({str(lab) for lab in labels})
    scores = {k: 0.0 for k in classes}
    keys = [str(lab) for lab in labels]
    for i in np.flatnonzero(mag):
        scores[keys[i]] = reduce(scores[keys[i]], float(mag[i]))
    if not np.any(mag):
        return Prediction(NO_EVIDENCE, 0.0, scores)
    best = max(scores.values())
    winner = min(k for k, v in scores.items() if v == best)
    return Prediction(winner, best, scores)


def decode_max_activation(act, labels) -> Prediction:
    """Class of the single strongest |activation|."""
    return _decode(act, labels, max)


def decode_max_sum(act, labels) -> Prediction:
    """Class with the largest sum of |activation| over its atoms."""
    return _decode(act, labels, lambda acc, v: acc + v)


def decode(act, labels, method: str) -> Prediction:
    if method == "max-activation":
        return decode_max_activation(act, labels)
    if method == "max-sum":
        return decode_max_sum(act, labels)
    raise ValidationError(f"unknown decoder {method!r}; expected one of {DECODERS}")


@dataclass
class EvalReport:
    top1_accuracy: float
    classes: list
    # rows: true class; columns: predicted class, then a final no-evidence column
    confusion: list
    total: int
    correct: int
    no_evidence: int
    m_hat: Optional[float] = None
    sparsity_fraction: Optional[float] = None
    M: Optional[int] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def evaluate(predictions: Sequence[Prediction], truths: Sequence, traces=None, M=None) -> EvalReport:
    if len(predictions) != len(truths):
        raise ValidationError(f"{len(predictions)} predictions for {len(truths)} truths")
    if not predictions:
        raise ValidationError("nothing to evaluate")
    truths = [str(t) for t in truths]
    predicted = [p.predicted_class for p in predictions]
    classes = sorted(set(truths) | {p for p in predicted if p is not None})
    index = {k: i for i, k in enumerate(classes)}
    K = len(classes)
    confusion = np.zeros((K, K + 1), dtype=np.int64)
    for t, p in zip(truths, predicted):
        confusion[index[t], K if p is None else index[p]] += 1
    correct = int(np.trace(confusion[:, :K]))
    report = EvalReport(
        top1_accuracy=correct / len(truths),
        classes=classes,
        confusion=confusion.tolist(),
        total=len(truths),
        correct=correct,
        no_evidence=int(confusion[:, K].sum()),
    )
    if traces is not None:
        if M is None:
            M = len(traces[0].a)
        report.m_hat = measure_sparsity(traces, M)
        report.sparsity_fraction = report.m_hat / M
        report.M = int(M)
    return report


def measure_sparsity(traces, M: int) -> float:
    """Mean number of nonzero activations per step, over all traces and steps."""
    if len(traces) == 0:
        raise ValidationError("no traces")
    counts = np.concatenate([np.asarray(t.active_counts, dtype=np.int64) for t in traces])
    if counts.size == 0:
        return 0.0
    if counts.max() > M:
        raise ValidationError("active count exceeds dictionary length")
    return float(counts.sum()) / counts.size


def round_m_hat(m_hat: float) -> int:
    """Nearest integer, halves rounded up."""
    return int(math.floor(m_hat + 0.5))
