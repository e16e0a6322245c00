"""Explanatory power of estimated factors, rankings, scree data, diffusion indexes."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .engine import EigenDecomposition, FactorModel
from .panel import Month, StandardizedPanel

__all__ = [
    "Mr2Table",
    "DiffusionIndexSet",
    "RankedSeries",
    "r2_by_k",
    "mr2_table",
    "top_n",
    "r2_ranking",
    "diffusion_indexes",
    "scree_data",
]

# both sides of each regression must be centred for the no-intercept fit
_MEAN_TOL = 1e-8


@dataclass(frozen=True)
class RankedSeries:
    mnemonic: str
    value: float
    group: int


@dataclass(frozen=True, eq=False)
class Mr2Table:
    """Per-series R^2 with the first ``k`` factors and its increments.

    ``r2[i, k-1]`` is R^2 of series ``i`` on factors ``1..k``; ``mr2[i, k-1]``
    is ``r2[i, k-1] - r2[i, k-2]`` (with a zero column before the first).
    """

    mnemonics: tuple[str, ...]
    groups: tuple[int, ...]
    r2: np.ndarray
    mr2: np.ndarray

    @property
    def r(self) -> int:
        return self.r2.shape[1]

    @property
    def average_mr2(self) -> np.ndarray:
        return self.mr2.mean(axis=0)

    @property
    def total(self) -> float:
        return float(self.r2[:, -1].mean())


@dataclass(frozen=True, eq=False)
class DiffusionIndexSet:
    """Running sums of each factor, held exactly as rationals.

    ``values`` is the correctly rounded float view; ``differences`` recovers the
    factor series bit-for-bit from the exact sums.
    """

    dates: tuple[Month, ...]
    exact: tuple[tuple[Fraction, ...], ...]

    @property
    def values(self) -> np.ndarray:
        width = len(self.exact[0]) if self.exact else 0
        return np.array([[float(v) for v in row] for row in self.exact]).reshape(
            len(self.exact), width
        )

    def differences(self) -> np.ndarray:
        out = np.empty(self.values.shape)
        for k, row in enumerate(self.exact):
            prev = Fraction(0)
            for t, v in enumerate(row):
                out[k, t] = float(v - prev)
                prev = v
        return out


def _check_centred(z: StandardizedPanel, m: FactorModel) -> None:
    if np.max(np.abs(z.values.mean(axis=1))) > _MEAN_TOL:
        raise ValueError("series are not mean-zero; a no-intercept regression would be biased")
    if np.max(np.abs(m.factors.mean(axis=1))) > _MEAN_TOL:
        raise ValueError("factors are not mean-zero; a no-intercept regression would be biased")


def _r2_matrix(y: np.ndarray, f: np.ndarray, k: int) -> np.ndarray:
    """R^2 of every row of ``y`` regressed on the first ``k`` rows of ``f``."""
    fk = f[:k]
    gram = fk @ fk.T
    if np.linalg.cond(gram) > 1e12:
        raise np.linalg.LinAlgError(f"factor cross-moment matrix for k={k} is singular")
    beta = np.linalg.solve(gram, fk @ y.T)  # k x q
    resid = y - beta.T @ fk
    return 1.0 - (resid**2).sum(axis=1) / (y**2).sum(axis=1)


def r2_by_k(z: StandardizedPanel, m: FactorModel, i: int, k: int) -> float:
    """R^2 from regressing series ``i`` on factors ``1..k`` without intercept."""
    if not 1 <= k <= m.r:
        raise ValueError(f"k={k} outside 1..{m.r}")
    _check_centred(z, m)
    return float(_r2_matrix(z.values[i : i + 1], m.factors, k)[0])


def mr2_table(z: StandardizedPanel, m: FactorModel) -> Mr2Table:
    _check_centred(z, m)
    r2 = np.column_stack([_r2_matrix(z.values, m.factors, k) for k in range(1, m.r + 1)])
    mr2 = np.diff(r2, axis=1, prepend=0.0)
    return Mr2Table(
        mnemonics=tuple(z.mnemonics),
        groups=tuple(meta.group for meta in z.meta),
        r2=r2,
        mr2=mr2,
    )


def _ranked(t: Mr2Table, values: np.ndarray) -> list[RankedSeries]:
    order = sorted(range(len(values)), key=lambda i: (-values[i], t.mnemonics[i]))
    return [RankedSeries(t.mnemonics[i], float(values[i]), t.groups[i]) for i in order]


def top_n(t: Mr2Table, k: int, n: int) -> list[RankedSeries]:
    """The ``n`` series with the largest increment from factor ``k`` (1-based)."""
    if not 1 <= k <= t.r:
        raise ValueError(f"k={k} outside 1..{t.r}")
    if not 0 <= n <= len(t.mnemonics):
        raise ValueError(f"n={n} outside 0..{len(t.mnemonics)}")
    return _ranked(t, t.mr2[:, k - 1])[:n]


def r2_ranking(t: Mr2Table, threshold: float = 0.5) -> tuple[list[RankedSeries], int]:
    """Series ordered by R^2 with all factors, plus how many exceed ``threshold``."""
    full = t.r2[:, -1]
    return _ranked(t, full), int(np.sum(full > threshold))


def diffusion_indexes(m: FactorModel) -> DiffusionIndexSet:
    exact = []
    for row in m.factors:
        acc = Fraction(0)
        sums = []
        for v in row:
            acc += Fraction(float(v))
            sums.append(acc)
        exact.append(tuple(sums))
    return DiffusionIndexSet(dates=tuple(m.dates), exact=tuple(exact))


def scree_data(e: EigenDecomposition) -> list[tuple[int, float, float, float]]:
    """Rows ``(rank, eigenvalue, share, cumulative share)``."""
    lam = np.asarray(e.eigenvalues, dtype=float)
    total = lam.sum()
    share = lam / total
    cum = np.cumsum(lam) / total
    return [(j + 1, float(lam[j]), float(share[j]), float(cum[j])) for j in range(len(lam))]
