"""Sliced Wasserstein distances on images with convolution slicers."""
from ._backend import get_backend, set_backend
from .convolution import conv2d, mac_count, output_dim
from .distances import (
    MethodSpec, cprw, csw, evaluate, max_csw, max_sw, projected_costs, prw, sw,
)
from .errors import CapacityError, CSWError, FormatError, ShapeError
from .ot import exact_wasserstein_assignment, wasserstein1d_equal, wasserstein1d_general
from .slicer import (
    apply_slicer, apply_slicer_with_grad, make_k_schedule, make_schedule, param_count,
    sample_kernel_stack, schedule_base, schedule_dilation, schedule_stride, slicer_mac_count,
)
from .tensor import RandomSource, devectorize, sample_unit_tensor, vectorize

__version__ = "0.1.0"
