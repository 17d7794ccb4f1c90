"""Image-adaptive coordinate (IAC) color transforms.

Project RGB pixels onto a learned invertible 3x3 basis, adjust each projected
channel with a 1D curve, and map back. Parameters are fitted per image by
gradient descent; RGB-curve and 3D-LUT baselines and quality metrics are
included for comparison.
"""
from .baselines import (
    Lut3d,
    apply_rgb_curves,
    lut3d_identity,
    lut3d_trilinear,
    lut_occupancy,
    read_cube,
    write_cube,
)
from .core import (
    ChannelBounds,
    IacParams,
    Projected,
    apply_curves,
    apply_iac,
    apply_iac_staged,
    compute_bounds,
    curve_eval,
    denormalize,
    identity_curves,
    inverse_project,
    invert_basis,
    normalize,
    project,
    repair_rank,
)
from .errors import (
    DecodeError,
    DivergedError,
    IacError,
    InvalidCurveError,
    InvalidInputError,
    ParamsFormatError,
    RepairFailedError,
    SingularBasisError,
)
from .fit import (
    AdamState,
    FitConfig,
    FitReport,
    Gradients,
    LossKind,
    adam_step,
    backward,
    fit_iac,
    fit_rgb_only,
    grad_fd,
    gradient_check,
    loss_eval,
)
from .io import load_image, params_load, params_save, save_image
from .metrics import MetricSummary, delta_e2000, error_stats, psnr, ssim
from .synth import synth_target

__version__ = "0.1.0"
