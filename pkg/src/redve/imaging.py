"""Image containers, point-spread functions, and linear degradation operators.

Images are plain 2-D float64 arrays of shape (height, width), row-major,
with intensities nominally in [0, 255].  Iterates are never clipped during
optimization; clipping to the display range happens only when an image is
exported to disk.

All convolutions use periodic (circular) boundary conditions, so every blur
operator is exactly block-circulant and diagonalized by the 2-D DFT.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InvalidSize(ValueError):
    """Raised for PSF sizes that are not odd positive integers."""


class KernelTooLarge(ValueError):
    """Raised when a PSF does not fit inside the image."""


class ShapeMismatch(ValueError):
    """Raised when array shapes do not match an operator's contract."""


def as_image(x) -> np.ndarray:
    """Coerce to a finite 2-D float64 array (the image representation)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D image, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite entries")
    return a


# ---------------------------------------------------------------------------
# Point-spread functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Psf:
    """A k-by-k convolution kernel with a centered anchor.

    ``taps`` sums to 1 for the built-in kinds, so constant images are
    preserved (DC gain 1).
    """

    size: int
    taps: np.ndarray  # (size, size), float64
    kind: str = "custom"

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise InvalidSize(f"PSF size must be odd and >= 1, got {self.size}")
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.shape != (self.size, self.size):
            raise InvalidSize(f"taps shape {taps.shape} != ({self.size}, {self.size})")
        object.__setattr__(self, "taps", taps)

    @property
    def radius(self) -> int:
        return self.size // 2


def make_psf(kind: str, size: int, std: float | None = None) -> Psf:
    """Build a normalized blur kernel.

    kind "uniform": all taps equal 1/size^2.
    kind "gaussian": taps proportional to exp(-(i^2+j^2)/(2 std^2)) on the
    centered grid, then normalized to sum 1.
    """
    if size < 1 or size % 2 == 0:
        raise InvalidSize(f"PSF size must be odd and >= 1, got {size}")
    if kind == "uniform":
        taps = np.full((size, size), 1.0 / size**2)
        return Psf(size, taps, "uniform")
    if kind == "gaussian":
        if std is None or std <= 0:
            raise InvalidSize("gaussian PSF needs std > 0")
        r = size // 2
        grid = np.arange(-r, r + 1, dtype=np.float64)
        ii, jj = np.meshgrid(grid, grid, indexing="ij")
        taps = np.exp(-(ii**2 + jj**2) / (2.0 * std**2))
        taps /= taps.sum()
        return Psf(size, taps, "gaussian")
    raise InvalidSize(f"unknown PSF kind {kind!r}")


# ---------------------------------------------------------------------------
# DFT pair and circular convolution
# ---------------------------------------------------------------------------


def dft2(image: np.ndarray) -> np.ndarray:
    """2-D DFT, numpy "backward" convention (idft2(dft2(x)) == x).

    With this convention Parseval reads ||x||^2 == sum|X|^2 / (H*W).
    """
    return np.fft.fft2(image)


def idft2(spectrum: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft2`; returns the real part."""
    return np.fft.ifft2(spectrum).real


def embed_psf(psf: Psf, shape: tuple[int, int]) -> np.ndarray:
    """Embed the kernel in a full-size array with its anchor at (0, 0).

    The DFT of the result is the transfer function of circular convolution
    with the kernel.
    """
    h, w = shape
    if psf.size > min(h, w):
        raise KernelTooLarge(f"{psf.size}x{psf.size} PSF on a {h}x{w} image")
    full = np.zeros(shape)
    full[: psf.size, : psf.size] = psf.taps
    return np.roll(full, (-psf.radius, -psf.radius), axis=(0, 1))


def psf_spectrum(psf: Psf, shape: tuple[int, int]) -> np.ndarray:
    """Transfer function of circular convolution with the kernel."""
    return dft2(embed_psf(psf, shape))


def convolve_circular(image: np.ndarray, psf: Psf) -> np.ndarray:
    """Circular (periodic-boundary) convolution of an image with a kernel.

    Equals the brute-force sum over kernel offsets (oi, oj) in [-r, r]^2 of
    taps[r+oi, r+oj] * image[(i-oi) mod H, (j-oj) mod W].
    """
    image = np.asarray(image, dtype=np.float64)
    return idft2(dft2(image) * psf_spectrum(psf, image.shape))


# ---------------------------------------------------------------------------
# Degradation operators
# ---------------------------------------------------------------------------


class Blur:
    """Circular convolution operator H with its adjoint H^T.

    The adjoint is correlation (convolution with the flipped kernel), i.e.
    multiplication by the conjugate transfer function in the DFT domain.
    """

    is_circulant = True

    def __init__(self, psf: Psf, shape: tuple[int, int]):
        self.psf = psf
        self.in_shape = tuple(shape)
        self.out_shape = tuple(shape)
        self.spectrum = psf_spectrum(psf, self.in_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.in_shape:
            raise ShapeMismatch(f"expected {self.in_shape}, got {x.shape}")
        return idft2(dft2(x) * self.spectrum)

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        if z.shape != self.out_shape:
            raise ShapeMismatch(f"expected {self.out_shape}, got {z.shape}")
        return idft2(dft2(z) * np.conj(self.spectrum))


class BlurDownsample:
    """Blur followed by keeping every s-th pixel along each axis.

    The retained grid is the set of indices congruent to 0 mod s; the
    adjoint zero-fills the decimated samples back onto the fine grid and
    then correlates with the kernel.
    """

    is_circulant = False

    def __init__(self, psf: Psf, factor: int, shape: tuple[int, int]):
        if factor < 1:
            raise InvalidSize(f"downsample factor must be >= 1, got {factor}")
        self.psf = psf
        self.factor = int(factor)
        self.in_shape = tuple(shape)
        h, w = shape
        self.out_shape = (-(-h // self.factor), -(-w // self.factor))
        self.spectrum = psf_spectrum(psf, self.in_shape)

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.in_shape:
            raise ShapeMismatch(f"expected {self.in_shape}, got {x.shape}")
        blurred = idft2(dft2(x) * self.spectrum)
        return blurred[:: self.factor, :: self.factor]

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        if z.shape != self.out_shape:
            raise ShapeMismatch(f"expected {self.out_shape}, got {z.shape}")
        up = np.zeros(self.in_shape)
        up[:: self.factor, :: self.factor] = z
        return idft2(dft2(up) * np.conj(self.spectrum))


def gaussian_noise(shape: tuple[int, int], sigma: float, seed: int) -> np.ndarray:
    """I.i.d. N(0, sigma^2) field from a seeded PCG64 stream via Box-Muller.

    The transform is pinned (rather than delegating to a library sampler) so
    identical seeds give bit-identical noise across library versions.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    n = int(np.prod(shape))
    u1 = 1.0 - rng.random(n)  # in (0, 1], keeps the log finite
    u2 = rng.random(n)
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    return sigma * z.reshape(shape)


def degrade(image: np.ndarray, op, sigma: float, seed: int) -> np.ndarray:
    """Synthesize a measurement H x + e with e ~ N(0, sigma^2), seeded.

    Identical (op, image, sigma, seed) yields bit-identical output.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    clean = op.apply(as_image(image))
    if sigma == 0:
        return clean
    return clean + gaussian_noise(clean.shape, sigma, seed)


def psnr(x: np.ndarray, reference: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with a fixed peak of 255.

    Returns +inf when the images are identical.
    """
    x = np.asarray(x, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if x.shape != reference.shape:
        raise ShapeMismatch(f"{x.shape} vs {reference.shape}")
    mse = np.mean((x - reference) ** 2)
    if mse == 0.0:
        return np.inf
    if not np.isfinite(mse):  # overflowing error, e.g. a diverging iterate
        return -np.inf
    return 10.0 * np.log10(255.0**2 / mse)


def synthetic_image(height: int, width: int | None = None) -> np.ndarray:
    """Deterministic synthetic grayscale scene in [0, 255].

    Smooth background with a bright disk, a dark square, and oriented
    stripes: enough structure for denoisers and restoration demos without
    shipping photographic data.
    """
    if width is None:
        width = height
    ii, jj = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    y = ii / max(height - 1, 1)
    x = jj / max(width - 1, 1)
    img = 110.0 + 60.0 * np.sin(2 * np.pi * (1.5 * x + 0.5)) * np.cos(2 * np.pi * y)
    disk = ((x - 0.3) ** 2 + (y - 0.35) ** 2) < 0.04
    img[disk] = 220.0
    square = (np.abs(x - 0.72) < 0.12) & (np.abs(y - 0.68) < 0.12)
    img[square] = 35.0
    stripes = (np.abs(x + y - 1.35) < 0.18) & ~square
    img[stripes] += 45.0 * np.sin(24 * np.pi * (x - y))[stripes]
    return np.clip(img, 5.0, 250.0)
