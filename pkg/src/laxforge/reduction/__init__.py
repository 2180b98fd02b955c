"""Similarity reductions of the 2+1 spectral problem."""

from .catalog import (CASE_IDS, Catalog, CatalogError, CaseInstance, ReductionCase,
                      load_catalog)
from .verify import (TrivialPatternError, case_generator, census, characteristic_reduce,
                     classify_spectrality, verify_reduced_hierarchy, verify_reduced_lax)

__all__ = ["CASE_IDS", "Catalog", "CatalogError", "CaseInstance", "ReductionCase",
           "load_catalog", "TrivialPatternError", "case_generator", "census",
           "characteristic_reduce", "classify_spectrality", "verify_reduced_hierarchy",
           "verify_reduced_lax"]
