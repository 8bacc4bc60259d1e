"""The two denoiser conditions behind the residual-form gradient.

The restoration objective's gradient collapses to the denoising residual
x - f(x) when the denoiser is locally homogeneous (f(c x) = c f(x) for c
near 1) and passive (Jacobian spectral radius at most 1).  Both conditions
are measurable: homogeneity by direct evaluation, passivity by power
iteration on finite-difference Jacobian-vector products.  A deliberately
over-amplified denoiser shows what a violation looks like.
"""

import numpy as np

from redve import (
    GaussianFilter,
    Identity,
    PatchWeighted,
    check_local_homogeneity,
    check_passivity,
    materialize_dense,
    synthetic_image,
)

image = synthetic_image(32)

print(f"{'denoiser':42s} {'homog(c=1.001)':>15s} {'passivity est.':>15s}")
for engine in (Identity(), GaussianFilter(), PatchWeighted()):
    dev = check_local_homogeneity(engine, image, 1.001)
    rho = check_passivity(engine, image, iterations=25)
    print(f"{engine.name:42s} {dev:15.3e} {rho:15.6f}")

gauss = GaussianFilter()
overdriven = lambda x: 1.5 * gauss(x)
rho_bad = check_passivity(overdriven, image, iterations=25)
print(f"{'1.5 * gaussian (constructed violation)':42s} {'':>15s} {rho_bad:15.6f}"
      f"   <-- exceeds 1: not passive")

# for the linear smoother the conditions can be certified exactly
w = materialize_dense(gauss, 8, 8)
eigs = np.linalg.eigvalsh((w + w.T) / 2)
print(f"\ndense check at 8x8: gaussian filter matrix is symmetric "
      f"(asymmetry {np.max(np.abs(w - w.T)):.1e}), spectral radius {np.max(np.abs(eigs)):.12f}")
print("its dominant eigenvector is the constant image: row sums",
      f"{w.sum(axis=1).min():.12f} .. {w.sum(axis=1).max():.12f}")
