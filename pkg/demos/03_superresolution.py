"""Single-image x3 super-resolution with a patch-weighted denoiser.

The measurement is the ground truth blurred with a 7x7 Gaussian (std 1.6),
decimated by 3 in each direction, plus noise with sigma = 5.  The forward
operator is no longer pure convolution, so each fixed-point step solves its
linear system by warm-started conjugate gradients; the denoiser is the
nonlinear patch-weighted smoother.  MPE cycling reaches the plain method's
200-step cost an order of magnitude earlier.
"""

import os

import numpy as np

from redve import (
    BlurDownsample,
    PatchWeighted,
    RedObjective,
    SolveConfig,
    degrade,
    make_psf,
    psnr,
    run_fixed_point,
    run_ve_cycling,
    synthetic_image,
)
from redve.cli import write_pgm
from redve.objective import as_fixed_point_problem

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

truth = synthetic_image(96)
operator = BlurDownsample(make_psf("gaussian", 7, 1.6), 3, truth.shape)
measurement = degrade(truth, operator, 5.0, seed=0)
objective = RedObjective(forward=operator, y=measurement, sigma=5.0, alpha=0.02,
                         denoiser=PatchWeighted())
problem = as_fixed_point_problem(objective, reference=truth)

x0 = operator.adjoint(measurement)  # zero-filled adjoint initialization
print(f"measurement: {measurement.shape[0]}x{measurement.shape[1]}, "
      f"initialization psnr {psnr(x0, truth):.2f} dB")

sol_fp, tr_fp = run_fixed_point(problem, x0.ravel(), SolveConfig(method="fp", max_inner_steps=200))
target = objective.cost(sol_fp.reshape(truth.shape))
print(f"plain fixed point: cost {target:.2f} after {tr_fp.inner_steps} denoiser activations, "
      f"psnr {psnr(sol_fp.reshape(truth.shape), truth):.2f} dB")

cfg = SolveConfig(method="fp-ve", ve_method="mpe", m=0, kappa=5, max_inner_steps=100)
sol_mpe, tr_mpe = run_ve_cycling(problem, x0.ravel(), cfg)
k = tr_mpe.first_iter_at_cost(target)
restored = sol_mpe.reshape(truth.shape)
print(f"mpe cycling: reaches that cost at iteration {k}; "
      f"final psnr {psnr(restored, truth):.2f} dB")
print("stability sums per cycle:",
      " ".join(f"{w.stability_sum:.1f}" for w in tr_mpe.cycle_weights[:8]))

write_pgm(os.path.join(OUT, "sr_truth.pgm"), truth)
write_pgm(os.path.join(OUT, "sr_lowres.pgm"), measurement)
write_pgm(os.path.join(OUT, "sr_restored.pgm"), restored)
print(f"images written to {OUT}/")
