"""Link-level simulation and BER analysis of mediumband wireless channels."""

__version__ = "0.1.0"

from .ber_analytics import (
    BPSK,
    ModulationParams,
    SeriesCoefficients,
    asymptote,
    beta_moment,
    lower_bound,
    q_function,
    rayleigh_ber,
    series_coefficients,
    series_eval,
)
from .channel import (
    ChannelRealization,
    FadingPoint,
    MultipathProfile,
    fading_eta,
    fading_h,
    fading_taps,
    narrowband_g,
    pds,
    sample_realization,
    synchronize,
)
from .fading_stats import BimodalParams, FitError, fit, pdf_marginal, second_moment, table1_params
from .link_sim import BerPoint, FrameConfig, LinkScenario, run_ber, run_ber_paired
from .pulse import PulseSpec, autocorr, rc_pulse, singular_points
