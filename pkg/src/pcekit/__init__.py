"""Non-intrusive polynomial chaos expansion for black-box simulators.

Sample uncertain inputs, run the simulator ensemble, fit a total-degree
expansion by least squares, then read off moments, output densities and
Sobol sensitivity indices.
"""

from .analysis import (mean, moments, sobol_first, sobol_group, sobol_indices, sobol_total, surrogate_pdf,
                       timeseries_summary, variance)
from .basis import BasisSpec, basis_size, eval_basis, norm_sq, total_degree_set
from .polynomials import HERMITE, LEGENDRE, eval_1d, gauss_rule, norm_sq_1d
from .regression import SurrogateModel, build_design, fit, fit_surrogate, loo_error, predict
from .sampling import InputVariable, Normal, SampleDesign, Uniform, joint_density, sample

__version__ = "0.1.0"
