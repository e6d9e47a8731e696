"""Identification of relaxation kernels from two boundary measurements."""

from .inverse import (
    InverseConfig,
    ReconstructionReport,
    build_convolution_operator,
    identify_M_first_kind,
    identify_M_second_kind,
    identify_N_tikhonov,
    identify_N_two_initial,
    moving_average,
    numerical_derivative,
    reconstruct,
    relative_l2_error,
)
from .kernel import (
    TOY_KERNEL,
    ExpSumKernel,
    SampledKernel,
    UniformGrid,
    alpha_of,
    eval_kernel,
    kernel_primitive,
    normalize_speed,
    sample_kernel,
)
from .measurement import MeasurementSet, add_noise, downsample, read_signal, write_signal
from .signals import Signal
from .spectral import (
    BoundaryInput,
    InitialCondition,
    ModeSolution,
    compute_K,
    eta_from_xi,
    flux_from_boundary,
    flux_from_boundary_series,
    flux_from_initial,
    flux_y_eta,
    gamma_functional,
    lemma_residual,
    ramp_coefficients,
    solve_mode_expsum,
    solve_mode_general,
    solve_modes_expsum,
)

__version__ = "0.1.0"
