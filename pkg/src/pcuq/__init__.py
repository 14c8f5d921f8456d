"""Polynomial chaos surrogates built by non-intrusive spectral projection."""

__version__ = "0.1.0"

from .basis import PcBasis, PolyFamily, build_basis, eval_1d, eval_basis
from .quadrature import QuadratureRule, check_discrete_orthogonality, gauss_1d, tensor_grid
from .projection import EvaluationTable, PcSurrogate, moments, project, read_archive, relative_l2_error, write_archive
from .analysis import exceedance_probability, kde, percentiles, sample
from .sensitivity import SensitivityReport, sobol_indices, sensitivity_timeseries
from .design import DesignProblem, failure_probability, optimal_design
