"""Denoiser-regularized restoration objective and its fixed-point step.

The objective on images x is

    E(x) = ||H x - y||^2 / (2 sigma^2) + alpha/2 * x . (x - f(x)),

with H a linear degradation operator, y the measurement, sigma the noise
level, and f a denoiser.  When f is locally homogeneous (f(c x) = c f(x)
for c near 1) and passive (Jacobian spectral radius <= 1), the gradient is
simply

    grad E(x) = H^T (H x - y) / sigma^2 + alpha (x - f(x)),

and the first-order condition rearranges into the fixed-point step

    x_{k+1} = (H^T H / sigma^2 + alpha I)^{-1} (H^T y / sigma^2 + alpha f(x_k)),

solved exactly in the DFT domain when H is pure circular blur, and by
conjugate gradients (warm-started from x_k) otherwise.

Pixel intensities live nominally in [0, 255] but iterates are never clipped
here; clipping would break homogeneity and differentiability.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .imaging import as_image, dft2, idft2
from .solvers import FixedPointProblem

CG_RTOL = 1e-6
CG_MAXITER = 200
CG_ABORT_RESIDUAL = 1e-4


class CgNoConvergence(ArithmeticError):
    """Inner CG solve left a residual above the abort threshold."""


@dataclass
class RedObjective:
    """Immutable bundle of forward model, measurement, and denoiser.

    ``forward`` must expose apply/adjoint, in_shape/out_shape, and an
    ``is_circulant`` flag with a ``spectrum`` attribute when True.
    """

    forward: object
    y: np.ndarray
    sigma: float
    alpha: float
    denoiser: object

    _hty: np.ndarray = field(init=False, repr=False)
    _fourier_denom: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        y = as_image(self.y)
        if y.shape != tuple(self.forward.out_shape):
            raise ValueError(f"y shape {y.shape} != operator output {self.forward.out_shape}")
        self.y = y
        self._hty = self.forward.adjoint(y) / self.sigma**2
        if getattr(self.forward, "is_circulant", False):
            self._fourier_denom = np.abs(self.forward.spectrum) ** 2 / self.sigma**2 + self.alpha
        else:
            self._fourier_denom = None

    # -- objective pieces ---------------------------------------------------

    def data_fidelity(self, x: np.ndarray) -> float:
        """||H x - y||^2 / (2 sigma^2)."""
        r = self.forward.apply(x) - self.y
        return float(np.vdot(r, r).real) / (2.0 * self.sigma**2)

    def regularizer(self, x: np.ndarray) -> float:
        """x . (x - f(x)) / 2, the denoising-residual prior."""
        return 0.5 * float(np.vdot(x, x - self.denoiser(x)).real)

    def cost(self, x: np.ndarray) -> float:
        return self.data_fidelity(x) + self.alpha * self.regularizer(x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """H^T (H x - y) / sigma^2 + alpha (x - f(x))."""
        data_term = self.forward.adjoint(self.forward.apply(x) - self.y) / self.sigma**2
        return data_term + self.alpha * (x - self.denoiser(x))

    # -- fixed-point step ----------------------------------------------------

    def _normal_matvec(self, x: np.ndarray) -> np.ndarray:
        return self.forward.adjoint(self.forward.apply(x)) / self.sigma**2 + self.alpha * x

    def fp_step(self, x: np.ndarray) -> np.ndarray:
        """One step of the denoise-then-solve iteration."""
        rhs = self._hty + self.alpha * self.denoiser(x)
        if self._fourier_denom is not None:
            return idft2(dft2(rhs) / self._fourier_denom)
        shape = self.forward.in_shape
        n = shape[0] * shape[1]
        op = LinearOperator(
            (n, n),
            matvec=lambda v: self._normal_matvec(v.reshape(shape)).ravel(),
            dtype=np.float64,
        )
        sol, info = cg(op, rhs.ravel(), x0=np.asarray(x).ravel(), rtol=CG_RTOL, atol=0.0,
                       maxiter=CG_MAXITER)
        sol = sol.reshape(shape)
        if info != 0:
            residual = np.linalg.norm(self._normal_matvec(sol) - rhs)
            if residual > CG_ABORT_RESIDUAL * np.linalg.norm(rhs):
                raise CgNoConvergence(
                    f"CG residual {residual:.3e} after {CG_MAXITER} iterations"
                )
        return sol


def as_fixed_point_problem(obj: RedObjective, reference: np.ndarray | None = None) -> FixedPointProblem:
    """Wrap a RedObjective for the solver drivers (flat-vector interface)."""
    shape = tuple(obj.forward.in_shape)
    n = shape[0] * shape[1]
    ref = None if reference is None else np.asarray(reference, dtype=np.float64).ravel()
    return FixedPointProblem(
        dimension=n,
        step=lambda v: obj.fp_step(v.reshape(shape)).ravel(),
        objective=lambda v: obj.cost(v.reshape(shape)),
        gradient=lambda v: obj.gradient(v.reshape(shape)).ravel(),
        reference=ref,
    )


def default_step_size(sigma: float, alpha: float) -> float:
    """Conservative gradient step: 1 over an upper bound of ||hess E||.

    For a normalized kernel ||H|| <= 1 and a passive denoiser the Hessian
    norm is at most 1/sigma^2 + 2 alpha, so sigma^2 / (1 + 2 alpha sigma^2)
    keeps plain gradient descent stable.
    """
    return sigma**2 / (1.0 + 2.0 * alpha * sigma**2)


# ---------------------------------------------------------------------------
# Denoiser condition checkers
# ---------------------------------------------------------------------------


def check_local_homogeneity(denoiser, x: np.ndarray, c: float) -> float:
    """Relative deviation ||f(c x) - c f(x)|| / (||f(x)|| + eps) for c near 1."""
    x = as_image(x)
    fx = denoiser(x)
    dev = np.linalg.norm(denoiser(c * x) - c * fx)
    return float(dev / (np.linalg.norm(fx) + 1e-12))


def check_passivity(denoiser, x: np.ndarray, iterations: int = 20, seed: int = 0) -> float:
    """Power-iteration estimate of the denoiser Jacobian's dominant eigenvalue.

    Jacobian-vector products are approximated by directional finite
    differences (f(x + h v) - f(x)) / h with h = 1e-4 ||x|| / ||v||.  The
    estimate after the given number of iterations approaches the spectral
    radius for denoisers with a dominant eigenvalue; values above 1 flag a
    passivity violation.
    """
    x = as_image(x)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(x.shape)
    v /= np.linalg.norm(v)
    fx = denoiser(x)
    scale = max(float(np.linalg.norm(x)), 1.0)
    estimate = 0.0
    for _ in range(iterations):
        h = 1e-4 * scale  # v is kept unit norm
        jv = (denoiser(x + h * v) - fx) / h
        estimate = float(np.linalg.norm(jv))
        if estimate == 0.0:
            return 0.0
        v = jv / estimate
    return estimate
