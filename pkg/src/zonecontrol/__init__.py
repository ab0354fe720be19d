"""Band spectra and inverse-problem zone control for 1D periodic potentials."""

from .bands import BandStructure, discriminant, forbiddenness, scan_bands, transmission
from .errors import NumericalError, ValidationError, ZoneControlError
from .potential import (DeltaSpike, PeriodicPotential, Segment, make_dirac_comb, make_free,
                        make_kronig_penney)
from .propagator import monodromy, propagate_trace, transfer
from .smart import auxiliary_spectrum, beat_profile, epsilon_sweep, knot_period_check, smart_pair
from .transform import delta_edge_shift, periodize_and_rescan, susy_shift, swf_transform

__all__ = [
    "BandStructure", "DeltaSpike", "NumericalError", "PeriodicPotential", "Segment",
    "ValidationError", "ZoneControlError", "auxiliary_spectrum", "beat_profile",
    "delta_edge_shift", "discriminant", "epsilon_sweep", "forbiddenness", "knot_period_check",
    "make_dirac_comb", "make_free", "make_kronig_penney", "monodromy", "periodize_and_rescan",
    "propagate_trace", "scan_bands", "smart_pair", "susy_shift", "swf_transform", "transfer",
    "transmission",
]
__version__ = "0.1.0"
