"""Multi-user beamforming for continuous-aperture and discrete arrays."""

__version__ = "0.1.0"

from .aperture import Aperture, QuadratureGrid, build_grid, inner_product, integrate
from .beamformers import mmse, mrt, optimal_structure, verify_operator_inverse, zf
from .channel import (
    ChannelSamples,
    Scenario,
    SpdaArray,
    User,
    los_channel_response,
    random_scenario,
    sample_channel,
    spda_array,
    spda_channels,
)
from .errors import ConvergenceError, DomainError, IllConditionedError
from .metrics import (
    average_rate,
    beamforming_gain_capa,
    beamforming_gain_spda,
    correlation_matrix,
    multiplexing_gain_estimate,
    received_amplitudes,
    sinr,
    slnr,
    sum_rate,
    transmit_power,
)
from .optimizer import (
    fixed_point_lambda,
    initial_box,
    min_power_for_targets,
    polyblock_maximize,
    project_onto_G,
)
from .power import equal_power, heuristic_design, waterfill_sum_rate
from .spda import spda_gram, spda_optimal

