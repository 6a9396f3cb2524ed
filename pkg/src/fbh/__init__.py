"""Fan-beam millimetre-wave holography: lens design, echo simulation,
range-migration reconstruction, x deconvolution and system planning."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .quasioptics import (PROTOTYPE_LENS, BeamParams, LensDesign, LensSpec,  # noqa: F401
                          beam_radius, design_lens, hpbw, rayleigh_length)
from .forward import (PROTOTYPE_BEAM, PROTOTYPE_SWEEP, ArrayGeometry, EchoVolume,  # noqa: F401
                      FrequencySweep, RodTarget, Scene, add_noise, make_geometry,
                      prototype_geometry, simulate_echo)
from .recon import (ImageVolume, ReconGrid, SpectralPlan, backproject_oracle,  # noqa: F401
                    magnitude_db, make_grid, make_plan, reconstruct_column, reconstruct_volume)
from .deconv import PSFBank, capture_psf, capture_psf_bank, deconvolve, profile_fwhm  # noqa: F401
from .planning import (CostReport, SamplingPlan, SamplingReport, flop_cost,  # noqa: F401
                       latency_budget, validate_sampling)
