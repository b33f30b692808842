"""Theons as executable membership oracles."""

from .core import (Theon, TheonError, aligned_coupling, diagonal_self_coupling, independent_coupling,
                   independent_self_coupling, interpret_theon, load_theon, theon_from_dict)
from .sampling import (CHUNK, DensityEstimate, Realized, Theta, density_via_flattenings, empirical_distribution,
                       estimate_density, estimate_events, estimate_flattening, estimate_models, flattening_profile, realize_batch,
                       realize_model, sample_models, sample_theta)
from .catalog import build_interpretation, build_theon
