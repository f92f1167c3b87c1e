"""Forward initial margin by nested Monte Carlo and regression approximators."""

from fwdim.errors import (
    BandwidthStarvation,
    ConfigError,
    FwdimError,
    NumericalError,
    TrainingDiverged,
    ValidationError,
)
from fwdim.mva import MvaInputs, mva_deterministic
from fwdim.oracle import ImSurface, brute_force_im, empirical_quantile, expected_im_profile
from fwdim.portfolio import (
    EuropeanCall,
    ForwardContract,
    NettingSet,
    ZeroCouponBondOU,
    value,
    value_netting_set,
)
from fwdim.regression import (
    NormalScaler,
    RegressionData,
    StudentTScaler,
    build_regression_data,
    im_from_second_moment,
    moment_diagnostics,
)
from fwdim.sde import (
    GBM,
    OrnsteinUhlenbeck,
    PathCube,
    TimeGrid,
    build_time_grid,
    simulate_inner,
    simulate_paths,
)

__version__ = "0.1.0"
