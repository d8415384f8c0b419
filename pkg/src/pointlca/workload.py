"""Closed-form FLOP counts and energy for exemplar-LCA inference.

Counts are exact Python integers, so large dictionaries never wrap.
``fits_int64`` reports whether a value would also fit a signed 64-bit word.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .errors import ValidationError

JOULES_PER_FLOP = 9.09e-14  # 11 TFLOPs/W RRAM crossbar
INT64_MAX = 2**63 - 1


def _positive(**kw):
    for name, v in kw.items():
        if int(v) != v or v < 1:
            raise ValidationError(f"{name} must be a positive integer, got {v!r}")


def training_flops(M: int, N: int) -> int:
    """Gramian cost: M(M+1)/2 dot products of length N."""
    _positive(M=M, N=N)
    return M * (M + 1) * (2 * N - 1) // 2


def inference_flops_dense(K: int, N: int, M: int) -> int:
    """Drive computed once, then K steps with every neuron inhibiting."""
    _positive(K=K, N=N, M=M)
    return (2 * N - 1) * M + K * (2 * M * M + M)


def inference_flops_sparse(K: int, N: int, M: int, m_hat: int) -> int:
    """As the dense count, with only ``m_hat`` firing neurons inhibiting per step."""
    _positive(K=K, N=N, M=M)
    if int(m_hat) != m_hat or m_hat < 0:
        raise ValidationError(f"m_hat must be a nonnegative integer, got {m_hat!r}")
    if m_hat > M:
        raise ValidationError(f"m_hat ({m_hat}) exceeds M ({M})")
    return (2 * N - 1) * M + K * (2 * M * m_hat + M)


def energy_estimate(flops: int, joules_per_flop: float = JOULES_PER_FLOP) -> float:
    if flops < 0:
        raise ValidationError("flops must be nonnegative")
    return flops * joules_per_flop


def fits_int64(value: int) -> bool:
    return -INT64_MAX - 1 <= value <= INT64_MAX


@dataclass(frozen=True)
class WorkloadParams:
    K: int
    N: int
    M: int
    m_hat: int
    joules_per_flop: float = JOULES_PER_FLOP

    def __post_init__(self):
        _positive(K=self.K, N=self.N, M=self.M)
        if self.m_hat > self.M:
            raise ValidationError(f"m_hat ({self.m_hat}) exceeds M ({self.M})")
        if self.joules_per_flop < 0:
            raise ValidationError("joules_per_flop must be nonnegative")


@dataclass
class WorkloadReport:
    K: int
    N: int
    M: int
    m_hat: int
    training_flops: int
    inference_flops_dense: int
    inference_flops_sparse: int
    energy_joules: float
    joules_per_flop: float

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self) -> str:
        rows = [
            ("K", f"{self.K}"),
            ("N", f"{self.N}"),
            ("M", f"{self.M}"),
            ("M_hat", f"{self.m_hat}"),
            ("Training (TFLOPs)", f"{self.training_flops / 1e12:.4g}"),
            ("Inference dense (GFLOPs)", f"{self.inference_flops_dense / 1e9:.4g}"),
            ("Inference sparse (GFLOPs)", f"{self.inference_flops_sparse / 1e9:.4g}"),
            ("Energy (mJ)", f"{self.energy_joules * 1e3:.4g}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def estimate(params: WorkloadParams) -> WorkloadReport:
    sparse = inference_flops_sparse(params.K, params.N, params.M, params.m_hat)
    return WorkloadReport(
        K=params.K,
        N=params.N,
        M=params.M,
        m_hat=params.m_hat,
        training_flops=training_flops(params.M, params.N),
        inference_flops_dense=inference_flops_dense(params.K, params.N, params.M),
        inference_flops_sparse=sparse,
        energy_joules=energy_estimate(sparse, params.joules_per_flop),
        joules_per_flop=params.joules_per_flop,
    )
