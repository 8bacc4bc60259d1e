"""Vector extrapolation: MPE, RRE and SVD-MPE weights over an iterate window.

Given kappa+2 consecutive iterates x_m, ..., x_{m+kappa+1} of a fixed-point
map, these routines form the matrix of consecutive differences, factorize it
by modified Gram-Schmidt, compute normalized combination weights gamma with
sum(gamma) = 1, and return the extrapolated point

    x = sum_i gamma_i x_{m+i},

evaluated stably through the QR factors.  For a linear recurrence whose
error has exactly kappa eigen-components, the extrapolated point is the
fixed point itself; otherwise it is a least-squares estimate of the limit.

The three weight rules differ only in how gamma is obtained from the
triangular factor R:

* MPE      solves the kappa x kappa system R c' = -r_last, appends c=1 and
           normalizes by the coefficient sum (which may vanish);
* RRE      solves (R^T R) d = 1 by two triangular solves and normalizes by
           sum(d), which is provably positive, so RRE always exists;
* SVD-MPE  normalizes the right singular vector of R's smallest singular
           value (its entry sum may also vanish).

Everything here is a pure function of its inputs; all arrays are float64.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

MPE = "mpe"
RRE = "rre"
SVDMPE = "svdmpe"
METHODS = (MPE, RRE, SVDMPE)


class ZeroFirstColumn(ArithmeticError):
    """First difference column is numerically zero: the sequence is stationary."""


class DegenerateSum(ArithmeticError):
    """The normalizing coefficient sum vanished; these weights do not exist."""


class RankDeficient(ArithmeticError):
    """The difference matrix has numerical rank below the requested order."""


class NoConvergence(ArithmeticError):
    """The small SVD failed to converge (severe ill-conditioning)."""


# ---------------------------------------------------------------------------
# Domain containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VectorSequenceWindow:
    """kappa+2 consecutive iterates, stored as rows x_m ... x_{m+kappa+1}.

    ``m`` is bookkeeping only (the number of warm-up steps that preceded the
    window); the extrapolation itself depends only on the vectors.
    """

    vectors: np.ndarray
    m: int = 0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 3:
            raise ValueError("window needs at least kappa+2 = 3 equal-length vectors")
        if not np.all(np.isfinite(v)):
            raise ValueError("window contains non-finite entries")
        if self.m < 0:
            raise ValueError("m must be nonnegative")
        object.__setattr__(self, "vectors", v)

    @classmethod
    def from_iterates(cls, iterates, m: int = 0) -> "VectorSequenceWindow":
        return cls(np.array([np.asarray(x, dtype=np.float64).ravel() for x in iterates]), m=m)

    @property
    def kappa(self) -> int:
        return self.vectors.shape[0] - 2

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class QrFactorization:
    """Thin QR of the difference matrix from modified Gram-Schmidt.

    ``effective_rank`` counts the leading columns whose pivot passed the
    relative tolerance test; columns past it are left as zeros in Q (their
    projection coefficients in R are still valid).
    """

    Q: np.ndarray
    R: np.ndarray
    effective_rank: int
    rank_tolerance: float


@dataclass(frozen=True)
class ExtrapolationWeights:
    """Raw coefficients c and normalized weights gamma with sum(gamma) = 1.

    ``c`` holds the method's raw vector (MPE coefficients with c_kappa = 1,
    RRE's d, or SVD-MPE's right singular vector).  ``fallback_from`` records
    the originally requested method when an RRE fallback was taken.
    """

    method: str
    c: np.ndarray
    gamma: np.ndarray
    stability_sum: float
    fallback_from: str | None = None


class ReconstructionCoefficients(NamedTuple):
    xi: np.ndarray
    eta: np.ndarray


@dataclass(frozen=True)
class ExtrapolationResult:
    """Outcome of one extrapolation attempt on a window.

    ``converged`` marks a stationary window (the returned vector is x_m);
    ``extrapolated`` is False when no usable weights existed and the vector
    is just the last plain iterate.  ``kappa_used`` may be smaller than the
    window's kappa when rank deficiency shrank the order.
    """

    vector: np.ndarray
    weights: ExtrapolationWeights | None
    converged: bool
    extrapolated: bool
    kappa_used: int


# ---------------------------------------------------------------------------
# Difference matrix and its QR factorization
# ---------------------------------------------------------------------------


def build_difference_matrix(window: VectorSequenceWindow) -> np.ndarray:
    """N x (kappa+1) matrix whose column i is x_{m+i+1} - x_{m+i}."""
    return np.diff(window.vectors, axis=0).T


def mgs_qr(u: np.ndarray, rank_tolerance: float = 1e-12) -> QrFactorization:
    """Modified Gram-Schmidt QR with a relative rank cutoff.

    Each column is orthogonalized against the previous ones twice (the
    classical re-orthogonalization pass); a single sweep loses orthogonality
    proportionally to the condition number, which would break the 1e-10
    orthonormality contract already around condition 1e6.

    A pivot r_ii below ``rank_tolerance * r_11`` truncates the factorization
    with ``effective_rank = i``; a first column below the absolute floor
    1e-300 raises :class:`ZeroFirstColumn` (stationary sequence).
    """
    u = np.asarray(u, dtype=np.float64)
    n, ncols = u.shape
    if rank_tolerance <= 0:
        raise ValueError("rank_tolerance must be positive")
    q = np.zeros((n, ncols))
    r = np.zeros((ncols, ncols))
    r11 = 0.0
    effective = ncols
    for i in range(ncols):
        v = u[:, i].copy()
        for _ in range(2):
            for j in range(i):
                proj = q[:, j] @ v
                r[j, i] += proj
                v -= proj * q[:, j]
        rii = float(np.linalg.norm(v))
        r[i, i] = rii
        if i == 0:
            if rii < 1e-300:
                raise ZeroFirstColumn("first difference column is zero")
            r11 = rii
        elif rii < rank_tolerance * r11:
            effective = i
            break
        q[:, i] = v / rii
    return QrFactorization(Q=q, R=r, effective_rank=effective, rank_tolerance=rank_tolerance)


def small_svd(r: np.ndarray):
    """SVD of the small triangular factor; returns (u, sigma, vt).

    Backed by LAPACK through numpy (equivalent to a Jacobi sweep scheme at
    these sizes); a convergence failure is translated to
    :class:`NoConvergence` so callers can fall back to RRE.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("small_svd expects a square matrix")
    if r.shape[0] > 64:
        raise ValueError("small_svd is intended for windows of order <= 63")
    try:
        return np.linalg.svd(r)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological input
        raise NoConvergence(str(exc)) from exc


# ---------------------------------------------------------------------------
# Weight rules
# ---------------------------------------------------------------------------


def _require_full_rank(qr: QrFactorization) -> int:
    ncols = qr.R.shape[0]
    if qr.effective_rank != ncols:
        raise RankDeficient(
            f"effective rank {qr.effective_rank} < {ncols}; shrink the window order"
        )
    return ncols - 1


def _normalized(method: str, c: np.ndarray, denom: float) -> ExtrapolationWeights:
    gamma = c / denom
    return ExtrapolationWeights(
        method=method,
        c=c,
        gamma=gamma,
        stability_sum=float(np.abs(gamma).sum()),
    )


def _annihilating_weights(qr: QrFactorization, order: int, method: str) -> ExtrapolationWeights:
    """MPE-form weights of the given order from the triangular factor.

    Solves R[:order, :order] c' = -R[:order, order] by back-substitution and
    appends c_order = 1.  Only the leading ``order`` columns of R are
    touched, so this is valid whenever they are independent, including the
    exactly-determined case where column ``order`` is dependent on them.
    """
    cp = solve_triangular(qr.R[:order, :order], -qr.R[:order, order], lower=False)
    c = np.append(cp, 1.0)
    s = float(c.sum())
    if abs(s) < 1e-12 * float(np.abs(c).sum()) or not np.isfinite(s):
        raise DegenerateSum("MPE coefficient sum vanished")
    return _normalized(method, c, s)


def gamma_mpe(qr: QrFactorization) -> ExtrapolationWeights:
    """MPE weights; raises :class:`DegenerateSum` when sum(c) vanishes."""
    kappa = _require_full_rank(qr)
    return _annihilating_weights(qr, kappa, MPE)


def gamma_rre(qr: QrFactorization) -> ExtrapolationWeights:
    """RRE weights from (R^T R) d = 1; exists for every full-rank window.

    sum(d) = ||R^{-T} 1||^2 > 0 analytically, so no degeneracy check is
    needed.
    """
    _require_full_rank(qr)
    ones = np.ones(qr.R.shape[0])
    z = solve_triangular(qr.R, ones, trans="T", lower=False)
    d = solve_triangular(qr.R, z, lower=False)
    return _normalized(RRE, d, float(d.sum()))


def gamma_svdmpe(qr: QrFactorization) -> ExtrapolationWeights:
    """SVD-MPE weights from the right singular vector of the smallest sigma."""
    _require_full_rank(qr)
    _, _, vt = small_svd(qr.R)
    v = vt[-1].copy()
    s = float(v.sum())
    if abs(s) < 1e-12 or not np.isfinite(s):
        raise DegenerateSum("SVD-MPE singular-vector sum vanished")
    return _normalized(SVDMPE, v, s)


_GAMMA = {MPE: gamma_mpe, RRE: gamma_rre, SVDMPE: gamma_svdmpe}


# ---------------------------------------------------------------------------
# Reconstruction and the one-shot driver
# ---------------------------------------------------------------------------


def reconstruction_coefficients(gamma: np.ndarray, r: np.ndarray) -> ReconstructionCoefficients:
    """Partial-sum coefficients xi and their image eta = R xi.

    xi_j = 1 - (gamma_0 + ... + gamma_j) is the weight multiplying the j-th
    difference column when the weighted average is rewritten relative to the
    window's first vector.
    """
    kappa = len(gamma) - 1
    xi = 1.0 - np.cumsum(gamma[:kappa])
    eta = r[:kappa, :kappa] @ xi
    return ReconstructionCoefficients(xi=xi, eta=eta)


def reconstruct(
    window: VectorSequenceWindow, qr: QrFactorization, w: ExtrapolationWeights
) -> np.ndarray:
    """Evaluate sum_i gamma_i x_{m+i} as x_m + Q (R xi), through the factors."""
    kappa = window.kappa
    if len(w.gamma) != kappa + 1:
        raise ValueError(f"{len(w.gamma)} weights for a window of order {kappa}")
    coeffs = reconstruction_coefficients(w.gamma, qr.R)
    return window.vectors[0] + qr.Q[:, :kappa] @ coeffs.eta


def extrapolate_once(
    window: VectorSequenceWindow,
    method: str = MPE,
    rank_tolerance: float = 1e-12,
) -> ExtrapolationResult:
    """Full extrapolation pass: differences, QR, weights, reconstruction.

    Fallback policy:

    * stationary window (zero first difference): return x_m, converged;
    * MPE / SVD-MPE degeneracy at full rank: retry with RRE and record the
      fallback on the weights;
    * numerical rank e <= kappa: the differences already satisfy an order-e
      recurrence, so the exactly-determined order-e weights are used (all
      three methods coincide there) on the leading e+2 window vectors;
    * degenerate order-e weights: return the last plain iterate, flagged
      not extrapolated.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    u = build_difference_matrix(window)
    try:
        qr = mgs_qr(u, rank_tolerance)
    except ZeroFirstColumn:
        return ExtrapolationResult(
            vector=window.vectors[0].copy(),
            weights=None,
            converged=True,
            extrapolated=False,
            kappa_used=0,
        )
    if not (np.all(np.isfinite(qr.R)) and np.all(np.isfinite(qr.Q))):
        # norms overflowed (iterates near the float ceiling): skip this window
        return ExtrapolationResult(
            vector=window.vectors[-1].copy(),
            weights=None,
            converged=False,
            extrapolated=False,
            kappa_used=0,
        )
    kappa = window.kappa
    e = qr.effective_rank
    if e == kappa + 1:
        try:
            w = _GAMMA[method](qr)
        except (DegenerateSum, NoConvergence):
            w = replace(gamma_rre(qr), fallback_from=method)
        x = reconstruct(window, qr, w)
        return ExtrapolationResult(x, w, converged=False, extrapolated=True, kappa_used=kappa)
    try:
        w = _annihilating_weights(qr, e, method)
    except DegenerateSum:
        return ExtrapolationResult(
            vector=window.vectors[-1].copy(),
            weights=None,
            converged=False,
            extrapolated=False,
            kappa_used=0,
        )
    sub = VectorSequenceWindow(window.vectors[: e + 2], m=window.m)
    subqr = QrFactorization(
        Q=qr.Q[:, : e + 1],
        R=qr.R[: e + 1, : e + 1],
        effective_rank=e,
        rank_tolerance=rank_tolerance,
    )
    x = reconstruct(sub, subqr, w)
    return ExtrapolationResult(x, w, converged=False, extrapolated=True, kappa_used=e)
