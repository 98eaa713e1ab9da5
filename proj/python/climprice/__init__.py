from ._core import (
    ClimpriceError,
    GridDomain,
    default_threshold,
    embed,
    fit_factors,
    inner_product,
    lp_irf,
    make_shocks,
    run_cli,
)

__all__ = [
    "ClimpriceError",
    "GridDomain",
    "default_threshold",
    "embed",
    "fit_factors",
    "inner_product",
    "lp_irf",
    "make_shocks",
    "run_cli",
]
