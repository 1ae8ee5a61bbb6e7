"""Needle-and-mirror ion trap modelling: RF fields, pseudopotential, ion
crystals, collection optics and the aspheric corrector."""

from ._core import (
    RunConfig,
    TackError,
    acceptance,
    collection_fraction,
    default_config,
    design_corrector,
    load_config,
    na_equivalent,
    parse_config,
    photon_budget,
    relax_crystal,
    run_cli,
    segmented_config,
    solve_trap,
)

__version__ = "0.1.0"
