"""Planted factor-model panels and recovery diagnostics.

Draws come from NumPy's ``PCG64`` bit generator (PCG XSL-RR 128/64) seeded
through ``SeedSequence(seed)``, in a fixed order: loadings ``q x r``, then
factors ``r x T``, then noise ``q x T``, all standard normal.  The same seed
always yields the same panel bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import Month, Panel, SeriesMeta

__all__ = ["SynthSpec", "SynthDraw", "generate", "subspace_fit"]

SYNTH_START: Month = (2000, 1)


@dataclass(frozen=True)
class SynthSpec:
    q: int
    T: int
    r_true: int
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.q < 1 or self.T < 1 or self.r_true < 1:
            raise ValueError("q, T and r_true must be positive")
        if self.r_true > min(self.q, self.T):
            raise ValueError(f"r_true={self.r_true} exceeds min(q, T)={min(self.q, self.T)}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@dataclass(frozen=True, eq=False)
class SynthDraw:
    panel: Panel
    loadings: np.ndarray  # q x r_true
    factors: np.ndarray  # r_true x T


def _months(start: Month, n: int) -> tuple[Month, ...]:
    base = start[0] * 12 + start[1] - 1
    return tuple(((base + t) // 12, (base + t) % 12 + 1) for t in range(n))


def generate(spec: SynthSpec) -> SynthDraw:
    """``Y = L F + noise_sd * E`` as a level-coded (tcode 1) panel."""
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    loadings = rng.standard_normal((spec.q, spec.r_true))
    factors = rng.standard_normal((spec.r_true, spec.T))
    noise = rng.standard_normal((spec.q, spec.T))
    y = loadings @ factors + spec.noise_sd * noise
    width = len(str(spec.q))
    meta = tuple(
        SeriesMeta(id=i + 1, mnemonic=f"S{i + 1:0{width}d}", tcode=1) for i in range(spec.q)
    )
    panel = Panel(dates=_months(SYNTH_START, spec.T), meta=meta, values=y)
    return SynthDraw(panel=panel, loadings=loadings, factors=factors)


def _orthonormal_rows(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x = x - x.mean(axis=1, keepdims=True)
    sv = np.linalg.svd(x, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-12 * sv[0]:
        raise ValueError(f"{name} factors are rank deficient")
    qmat, _ = np.linalg.qr(x.T)
    return qmat


def subspace_fit(true_factors: np.ndarray, est_factors: np.ndarray) -> float:
    """Mean squared canonical correlation between two sets of factor series.

    Both inputs are ``r x T`` and are demeaned over time.  The statistic is
    ``trace(P_a P_b) / r`` for the projections onto the two row spaces, so it
    is symmetric and unchanged by any invertible re-mixing of either input.
    """
    a, b = np.atleast_2d(true_factors), np.atleast_2d(est_factors)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    qa = _orthonormal_rows(a, "true")
    qb = _orthonormal_rows(b, "estimated")
    cc = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.mean(np.clip(cc, 0.0, 1.0) ** 2))
