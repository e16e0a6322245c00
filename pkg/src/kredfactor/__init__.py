"""Factor analysis toolkit for FRED-MD style monthly macroeconomic panels."""

__version__ = "0.1.0"

from .analysis import (
    DiffusionIndexSet,
    Mr2Table,
    diffusion_indexes,
    mr2_table,
    r2_by_k,
    r2_ranking,
    scree_data,
    top_n,
)
from .engine import (
    EigenDecomposition,
    FactorModel,
    IcReport,
    covariance,
    estimate_factors,
    ic_value,
    select_num_factors,
    sym_eigen,
    variance_explained,
)
from .panel import (
    Panel,
    PanelError,
    SeriesMeta,
    StandardizedPanel,
    apply_tcode,
    extract_balanced,
    load_kred_metadata,
    parse_panel_csv,
    read_panel,
    standardize,
    transform_panel,
)
from .pipeline import analyze
from .synth import SynthSpec, generate, subspace_fit
