"""Vector-extrapolation acceleration for fixed-point solvers, applied to
denoiser-regularized image restoration.

Layers, bottom up:

* :mod:`redve.extrapolation` -- MPE / RRE / SVD-MPE weights and the
  extrapolated point from a window of iterates;
* :mod:`redve.imaging` -- images, PSFs, circulant blur (+ decimation)
  operators, degradation synthesis, PSNR;
* :mod:`redve.denoisers` -- analytic denoising engines;
* :mod:`redve.objective` -- the denoiser-regularized objective, its
  gradient, fixed-point step, and denoiser condition checkers;
* :mod:`redve.solvers` -- fixed-point / gradient baselines and the cycling
  accelerator, with per-iteration traces;
* :mod:`redve.cli` -- experiment entry points (``redve ...``).
"""

from .denoisers import GaussianFilter, Identity, NotLinear, PatchWeighted, materialize_dense
from .extrapolation import (
    MPE,
    RRE,
    SVDMPE,
    DegenerateSum,
    ExtrapolationResult,
    ExtrapolationWeights,
    NoConvergence,
    QrFactorization,
    RankDeficient,
    VectorSequenceWindow,
    ZeroFirstColumn,
    build_difference_matrix,
    extrapolate_once,
    gamma_mpe,
    gamma_rre,
    gamma_svdmpe,
    mgs_qr,
    reconstruct,
    small_svd,
)
from .imaging import (
    Blur,
    BlurDownsample,
    InvalidSize,
    KernelTooLarge,
    Psf,
    ShapeMismatch,
    convolve_circular,
    degrade,
    dft2,
    idft2,
    make_psf,
    psnr,
    synthetic_image,
)
from .objective import (
    CgNoConvergence,
    RedObjective,
    as_fixed_point_problem,
    check_local_homogeneity,
    check_passivity,
    default_step_size,
)
from .solvers import (
    FixedPointProblem,
    IterationTrace,
    LinearFixedPointProblem,
    NonFiniteIterate,
    SolveConfig,
    Termination,
    TraceRecord,
    check_termination,
    run_fixed_point,
    run_nesterov,
    run_steepest_descent,
    run_ve_cycling,
    solve,
)

__version__ = "0.1.0"
