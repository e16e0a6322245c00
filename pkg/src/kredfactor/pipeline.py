"""End-to-end run: raw panel to factors, IC report and explanatory-power tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .analysis import DiffusionIndexSet, Mr2Table, diffusion_indexes, mr2_table
from .engine import (
    DEFAULT_RMAX,
    PENALTIES,
    EigenDecomposition,
    FactorModel,
    IcReport,
    decompose,
    estimate_factors,
    select_num_factors,
    variance_explained,
)
from .panel import Month, Panel, StandardizedPanel, extract_balanced, standardize, transform_panel

__all__ = ["DEFAULT_START", "DEFAULT_END", "DEFAULT_DROP", "AnalysisResult", "choose_r", "analyze"]

DEFAULT_START: Month = (2009, 9)
DEFAULT_END: Month = (2024, 12)
DEFAULT_DROP = ("HOUST", "HOUSTNE", "HOUSTMW", "HOUSTS", "HOUSTW", "RETAILx", "TOTRESNS", "EXCAUSx")


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    balanced: Panel
    z: StandardizedPanel
    eig: EigenDecomposition
    ic: IcReport | None
    r: int
    r_source: str
    model: FactorModel
    table: Mr2Table
    diffusion: DiffusionIndexSet

    @property
    def variance_explained(self) -> float:
        return variance_explained(self.eig, self.r)


def choose_r(selected: dict[str, int]) -> tuple[int, str]:
    """Factor count to carry forward: the g1 choice, else the first penalty run."""
    for name in PENALTIES:
        if name in selected:
            return selected[name], name
    raise ValueError("no penalty results to choose from")


def analyze(
    raw: Panel,
    start: Month = DEFAULT_START,
    end: Month = DEFAULT_END,
    drop: Iterable[str] = DEFAULT_DROP,
    rmax: int = DEFAULT_RMAX,
    penalties: Sequence[str] = PENALTIES,
    r: int | None = None,
    transform: bool = True,
) -> AnalysisResult:
    """Transform, window, standardize, select ``r`` and fit.

    ``r`` bypasses the information criteria when given.
    """
    panel = transform_panel(raw) if transform else raw
    balanced = extract_balanced(panel, start, end, drop)
    z = standardize(balanced)
    eig = decompose(z)
    if r is None:
        ic = select_num_factors(z, min(rmax, z.q, z.T), penalties, eig=eig)
        r, source = choose_r(dict(ic.selected))
    else:
        ic, source = None, "override"
    model = estimate_factors(z, r, eig=eig)
    return AnalysisResult(
        balanced=balanced,
        z=z,
        eig=eig,
        ic=ic,
        r=r,
        r_source=source,
        model=model,
        table=mr2_table(z, model),
        diffusion=diffusion_indexes(model),
    )
