"""Pluggable denoising engines f(x).

These analytic denoisers stand in for learned engines.  A denoiser is any
callable mapping a 2-D image to a 2-D image of the same shape; the built-in
kinds are constructed so the two conditions the restoration objective relies
on (local homogeneity and a Jacobian spectral radius of at most one) hold
either exactly (linear kinds) or to good approximation (patch-weighted).
"""

from __future__ import annotations

import numpy as np

from .imaging import as_image, dft2, idft2, make_psf, psf_spectrum


class NotLinear(TypeError):
    """Raised when a dense matrix is requested for a nonlinear denoiser."""


class Identity:
    """f(x) = x.  Exactly homogeneous; Jacobian is the identity."""

    name = "identity"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=np.float64, copy=True)


class GaussianFilter:
    """Fixed linear smoother: circular convolution with a Gaussian kernel.

    f(x) = W x for a symmetric, row-stochastic circulant W, so homogeneity
    is exact and the Jacobian spectral radius equals 1 (constant images are
    fixed points of W).
    """

    def __init__(self, std: float = 0.55, support: int = 5):
        self.std = float(std)
        self.support = int(support)
        self.psf = make_psf("gaussian", support, std)
        self.name = f"gaussian(std={std:g},support={support})"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return idft2(dft2(x) * psf_spectrum(self.psf, x.shape))


class PatchWeighted:
    """Simplified non-local-means smoother with periodic boundaries.

    Each output pixel is a weighted average of the pixels in a square search
    window; pixel pairs are weighted by exp(-d^2 / h^2) where d^2 is the
    mean squared difference between their patches and h is the intensity
    scale.  The raw pairwise weights are symmetric, and the normalization is
    symmetric too (an iterative diagonal balancing toward a doubly
    stochastic kernel), so for any fixed input the averaging operator is an
    exactly symmetric matrix with rows summing to 1 up to the balancing
    residual.  The usual one-sided row normalization would make the frozen
    operator asymmetric and the residual-form gradient of the restoration
    objective measurably wrong.

    The weights vary with the input, so homogeneity holds approximately;
    with the weights frozen, each output pixel is a convex combination and
    the operator's spectral radius is 1 up to the balancing residual.
    """

    def __init__(
        self,
        patch_radius: int = 1,
        search_radius: int = 3,
        h: float = 110.0,
        balance_iters: int = 20,
    ):
        if patch_radius < 0 or search_radius < 1 or h <= 0 or balance_iters < 1:
            raise ValueError("need patch_radius >= 0, search_radius >= 1, h > 0, balance_iters >= 1")
        self.patch_radius = int(patch_radius)
        self.search_radius = int(search_radius)
        self.h = float(h)
        self.balance_iters = int(balance_iters)
        self.name = f"patch_weighted(p={patch_radius},s={search_radius},h={h:g})"

    def weight_maps(self, x: np.ndarray):
        """Balanced weight map per window offset, as (offsets, maps).

        ``maps[k][i, j]`` is the weight coupling pixel (i, j) to the pixel
        at (i, j) + offsets[k], periodic.  The self offset has raw weight 1,
        so the normalizer never degenerates.
        """
        x = np.asarray(x, dtype=np.float64)
        box = make_psf("uniform", 2 * self.patch_radius + 1)
        box_hat = psf_spectrum(box, x.shape)
        r = self.search_radius
        inv_h2 = 1.0 / self.h**2
        offsets = []
        maps = []
        for di in range(-r, r + 1):
            for dj in range(-r, r + 1):
                shifted = np.roll(x, (-di, -dj), axis=(0, 1))
                # mean squared patch difference, identical for the swapped pair
                d2 = idft2(dft2((x - shifted) ** 2) * box_hat)
                offsets.append((di, dj))
                maps.append(np.exp(-np.maximum(d2, 0.0) * inv_h2))
        for _ in range(self.balance_iters):
            total = np.zeros_like(x)
            for w in maps:
                total += w
            inv_sqrt = 1.0 / np.sqrt(total)
            for k, (di, dj) in enumerate(offsets):
                maps[k] = maps[k] * inv_sqrt * np.roll(inv_sqrt, (-di, -dj), axis=(0, 1))
        return offsets, maps

    @staticmethod
    def apply_maps(offsets, maps, z: np.ndarray) -> np.ndarray:
        """Apply a captured (frozen) weight field to an image."""
        out = np.zeros_like(z, dtype=np.float64)
        for (di, dj), w in zip(offsets, maps):
            out += w * np.roll(z, (-di, -dj), axis=(0, 1))
        return out

    def linearized(self, x: np.ndarray):
        """The denoiser with its weight field frozen at x, as a linear map."""
        offsets, maps = self.weight_maps(x)
        return lambda z: self.apply_maps(offsets, maps, np.asarray(z, dtype=np.float64))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        offsets, maps = self.weight_maps(x)
        return self.apply_maps(offsets, maps, x)


def denoise(spec, x: np.ndarray) -> np.ndarray:
    """Apply a denoiser handle to an image."""
    return spec(as_image(x))


def materialize_dense(spec, width: int, height: int) -> np.ndarray:
    """Explicit matrix W with W @ vec(x) == vec(f(x)), for linear kinds only.

    Built column by column from unit images, so it is valid for any linear
    denoiser; sizes are capped because the result is dense.
    """
    if isinstance(spec, PatchWeighted):
        raise NotLinear("patch-weighted denoising is input-dependent")
    n = width * height
    if n > 4096:
        raise ValueError(f"dense denoiser matrix capped at 4096 pixels, got {n}")
    w = np.empty((n, n))
    basis = np.zeros((height, width))
    for j in range(n):
        basis.flat[j] = 1.0
        w[:, j] = spec(basis).ravel()
        basis.flat[j] = 0.0
    return w


BUILTIN_DENOISERS = {
    "identity": Identity,
    "gaussian": GaussianFilter,
    "patch-weighted": PatchWeighted,
}
