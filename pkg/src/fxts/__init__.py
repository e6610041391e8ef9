"""Fixed-time stability toolkit: norm-scaled vector fields, sampled Lyapunov
condition checks, settling-time bounds and trajectory simulation."""

__version__ = "0.1.0"

from .errors import (ContractError, FxtsError, InputError, NumericError, OutputError,  # noqa: E402
                     ParameterError, QuadratureError, UnknownSystemError)
from .field_core import (CatalogEntry, VectorField, catalog_get, evaluate, jacobian,  # noqa: E402
                         line_integral, parse_system_spec, potential)
from .scaling import (PiecewiseScaleParams, ScaledSystem, ScaleExponentsEq5,  # noqa: E402
                      compute_c_and_exponents, fxts_scale, piecewise_scale)
from .settling_bounds import (PiecewisePhi, PolyakovPhi, PowerPhi, SettlingBound,  # noqa: E402
                              TablePhi, closed_form_bound, phi_admissible, phi_eval,
                              settling_integral)
from .lyapunov_verify import (SamplingPlan, h_matrix, lie_derivative,  # noqa: E402
                              verify_condition_i, verify_condition_ii, verify_phi_decrease,
                              verify_second_order)
from .sim_engine import SimConfig, integrate, settling_time, sweep  # noqa: E402
