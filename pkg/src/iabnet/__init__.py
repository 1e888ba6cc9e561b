"""Two-tier mm-wave cellular networks with integrated (wireless) access
and backhaul: Monte Carlo simulation over a germ-grain blockage field
and a closed-form coverage/rate engine, cross-validated against each
other."""

from .config import (
    ConfigError,
    GainDistribution,
    NetworkConfig,
    interferer_gain_distribution,
)
from .geometry import (
    BlockageField,
    LinkState,
    Rect,
    Segment,
    link_state,
    pathloss,
    sample_blockage_field,
    segments_intersect,
)
from .numerics import QuadratureResult, find_root, integrate, log_gamma
from .analytic import (
    CalibrationError,
    CalibrationResult,
    ConvergenceError,
    LoadPmf,
    Omega,
    PathlossLaw,
    RateModel,
    association_probability,
    backhaul_snr_ccdf,
    calibrate_mu,
    conditional_backhaul_intensity,
    intensity_density,
    intensity_measure,
    joint_sbs_backhaul_coverage,
    load_pmf,
    los_prob,
    mbs_coverage,
    rate_coverage,
    sbs_access_coverage,
    serving_pathloss_pdf,
    split_association,
)
from .simulator import (
    AssociationMap,
    CcdfCurve,
    NetworkRealization,
    anchor_sbs,
    associate_user,
    build_association_map,
    empirical_association_prob,
    estimate_ccdf,
    sample_realization,
    simulate_coverage,
    simulate_rate_ccdfs,
    sinr_access,
    snr_backhaul,
    user_rate,
)
from .experiments import ExperimentSpec, emit_plot_script, run

__version__ = "0.1.0"
