"""Principal-component factor estimation and factor-count selection.

For a standardized ``q x T`` panel ``Y`` the covariance ``S = YY'/T`` is
diagonalized as ``S = U diag(lam) U'``.  With ``U_r`` the leading ``r``
eigenvectors, loadings are ``sqrt(q) U_r`` and factors ``loadings' Y / q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .panel import Month, StandardizedPanel

__all__ = [
    "PENALTIES",
    "DEFAULT_RMAX",
    "EXACT_FIT_MSR",
    "ConvergenceError",
    "EigenDecomposition",
    "FactorModel",
    "IcReport",
    "covariance",
    "sym_eigen",
    "decompose",
    "estimate_factors",
    "variance_explained",
    "penalty",
    "ic_value",
    "select_num_factors",
]

PENALTIES = ("g1", "g2", "g3")
DEFAULT_RMAX = 15
MAX_SWEEPS = 100
# mean squared residual treated as an exact fit (residual rms 1e-10 on
# unit-variance rows); reconstruction noise from the eigensolver sits far below
EXACT_FIT_MSR = 1e-20


class ConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns
    sweeps: int = 0

    @property
    def q(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class FactorModel:
    r: int
    loadings: np.ndarray  # q x r
    factors: np.ndarray  # r x T
    residuals: np.ndarray  # q x T
    eigenvalues: np.ndarray
    dates: tuple[Month, ...] = ()
    mnemonics: tuple[str, ...] = ()

    @property
    def ssr(self) -> float:
        return float(np.sum(self.residuals**2))

    def common_component(self) -> np.ndarray:
        return self.loadings @ self.factors


@dataclass(frozen=True)
class IcReport:
    rmax: int
    curves: Mapping[str, list[float]]  # penalty -> IC(1..rmax)
    selected: Mapping[str, int]
    ssr: list[float] = field(default_factory=list)  # SSR(1..rmax)


def covariance(z: StandardizedPanel | np.ndarray) -> np.ndarray:
    """``YY'/T``, exactly symmetric."""
    y = z.values if isinstance(z, StandardizedPanel) else np.asarray(z, dtype=float)
    q, T = y.shape
    if q < 2 or T < 2:
        raise ValueError(f"need q >= 2 and T >= 2, got {q} x {T}")
    s = (y @ y.T) / T
    upper = np.triu(s)
    return upper + np.triu(s, 1).T


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings covering every index pair once per sweep, in disjoint rounds."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for k in range(m // 2):
            a, b = players[k], players[m - 1 - k]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    # largest |entry| positive; argmax picks the lowest index on ties
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.where(vecs[idx, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vecs * signs


def sym_eigen(s: np.ndarray, tol: float = 1e-12, max_sweeps: int = MAX_SWEEPS) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Each sweep visits every off-diagonal pair once, grouped into rounds of
    disjoint pairs (round-robin ordering) so a round is applied as one batch of
    commuting plane rotations.  Iteration stops once the largest off-diagonal
    magnitude falls below ``tol`` times the Frobenius norm of ``s``.

    Eigenpairs come back in descending eigenvalue order, each eigenvector
    signed so that its largest-magnitude entry is positive.
    """
    a = np.array(s, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = float(np.linalg.norm(a))
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * max(scale, 1.0)):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2.0
    v = np.eye(n)
    threshold = tol * scale
    off = ~np.eye(n, dtype=bool)
    rounds = _round_robin(n) if n > 1 else []

    sweeps = 0
    while n > 1 and scale > 0.0 and np.max(np.abs(a[off])) >= threshold:
        if sweeps == max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps; "
                f"off-diagonal norm {np.linalg.norm(a[off]):.3e}"
            )
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c

            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - sn[:, None] * rq
            a[q, :] = sn[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * c - cq * sn
            a[:, q] = cp * sn + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * c - vq * sn
            v[:, q] = vp * sn + vq * c
        a = (a + a.T) / 2.0
        sweeps += 1

    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    vecs = _fix_signs(v[:, order])
    return EigenDecomposition(eigenvalues=lam[order], eigenvectors=vecs, sweeps=sweeps)


def decompose(z: StandardizedPanel) -> EigenDecomposition:
    return sym_eigen(covariance(z))


def estimate_factors(
    z: StandardizedPanel,
    r: int,
    eig: EigenDecomposition | None = None,
    unit_variance: bool = False,
) -> FactorModel:
    """Fit the ``r``-factor principal-components model to ``z``.

    Parameters
    ----------
    z : StandardizedPanel
    r : int
        Number of factors, ``1 <= r <= min(q, T)``.
    eig : EigenDecomposition, optional
        Reuse a decomposition of ``covariance(z)`` instead of recomputing it.
    unit_variance : bool
        Rescale each factor to unit variance over time (loadings absorb the
        inverse scale, so the common component is unchanged).  Off by default:
        the unscaled factors have variance ``lam_j / q``.
    """
    q, T = z.q, z.T
    if not 1 <= r <= min(q, T):
        raise ValueError(f"r={r} outside 1..{min(q, T)}")
    if eig is None:
        eig = decompose(z)
    y = z.values
    loadings = math.sqrt(q) * eig.eigenvectors[:, :r]
    factors = loadings.T @ y / q
    residuals = y - loadings @ factors
    if unit_variance:
        sd = np.sqrt((factors**2).mean(axis=1))
        sd[sd == 0.0] = 1.0
        factors = factors / sd[:, None]
        loadings = loadings * sd[None, :]
    return FactorModel(
        r=r,
        loadings=loadings,
        factors=factors,
        residuals=residuals,
        eigenvalues=eig.eigenvalues.copy(),
        dates=tuple(z.dates),
        mnemonics=tuple(z.mnemonics),
    )


def variance_explained(e: EigenDecomposition, r: int) -> float:
    """Share of total variance carried by the first ``r`` eigenvalues."""
    if not 1 <= r <= e.q:
        raise ValueError(f"r={r} outside 1..{e.q}")
    lam = e.eigenvalues
    return float(lam[:r].sum() / lam.sum())


def penalty(name: str, q: int, T: int) -> float:
    """Per-factor penalty ``g(q, T)`` for the named criterion."""
    qt, qpt, m = q * T, q + T, min(q, T)
    if name == "g1":
        return qpt / qt * math.log(qt / qpt)
    if name == "g2":
        return qpt / qt * math.log(m)
    if name == "g3":
        return math.log(m) / m
    raise ValueError(f"unknown penalty {name!r}; choose from {PENALTIES}")


def _ic_from_ssr(ssr: float, q: int, T: int, r: int, name: str) -> float:
    msr = ssr / (q * T)
    if msr <= EXACT_FIT_MSR:
        return -math.inf
    return math.log(msr) + r * penalty(name, q, T)


def ic_value(
    z: StandardizedPanel, r: int, penalty_name: str, eig: EigenDecomposition | None = None
) -> float:
    """``log(SSR / qT) + r g(q, T)`` for the ``r``-factor fit.

    An exact fit (mean squared residual at rounding level) returns ``-inf``
    rather than taking the log of zero.
    """
    model = estimate_factors(z, r, eig=eig)
    return _ic_from_ssr(model.ssr, z.q, z.T, r, penalty_name)


def _argmin_first(values: list[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def select_num_factors(
    z: StandardizedPanel,
    rmax: int = DEFAULT_RMAX,
    penalties: Iterable[str] = PENALTIES,
    eig: EigenDecomposition | None = None,
) -> IcReport:
    """Evaluate IC(r) for ``r = 1..rmax`` and pick the minimizer per penalty.

    Ties go to the smaller ``r``.
    """
    penalties = [p for p in PENALTIES if p in set(penalties)] or None
    if penalties is None:
        raise ValueError(f"no valid penalty requested; choose from {PENALTIES}")
    if not 1 <= rmax <= min(z.q, z.T):
        raise ValueError(f"rmax={rmax} outside 1..{min(z.q, z.T)}")
    if eig is None:
        eig = decompose(z)
    ssr = [estimate_factors(z, r, eig=eig).ssr for r in range(1, rmax + 1)]
    curves = {
        name: [_ic_from_ssr(s, z.q, z.T, r, name) for r, s in enumerate(ssr, start=1)]
        for name in penalties
    }
    selected = {name: _argmin_first(c) + 1 for name, c in curves.items()}
    return IcReport(rmax=rmax, curves=curves, selected=selected, ssr=ssr)
