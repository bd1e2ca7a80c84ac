"""Single-letter bound sets and region assembly."""

from .boundary import Corner, RegionBoundary, assemble_region, region_contains
from .corrections import FlmcCorrectionTerms, b_set, delta_k, flmc_corrections
from .schemes import (FlmcCodingSpec, RatePolytope, RDTuple, btsi_alpha, cc_alpha, flmc_alpha,
                      mcml_alpha)

__all__ = [
    "Corner", "RegionBoundary", "assemble_region", "region_contains",
    "FlmcCorrectionTerms", "b_set", "delta_k", "flmc_corrections",
    "FlmcCodingSpec", "RatePolytope", "RDTuple", "btsi_alpha", "cc_alpha", "flmc_alpha",
    "mcml_alpha",
]
