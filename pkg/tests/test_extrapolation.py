import numpy as np
import pytest

from redve import (
    DegenerateSum,
    LinearFixedPointProblem,
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
from redve.extrapolation import METHODS, reconstruction_coefficients


def diag_window(kappa=2, steps=None):
    """Window from x_{k+1} = diag(0.5, 0.25) x_k + (1, 3), x_0 = 0."""
    lin = LinearFixedPointProblem(np.diag([0.5, 0.25]), np.array([1.0, 3.0]))
    x = np.zeros(2)
    iterates = [x]
    for _ in range(steps or kappa + 1):
        x = lin.step(x)
        iterates.append(x)
    return VectorSequenceWindow.from_iterates(iterates), lin.solve()


def random_full_rank_window(seed=0, n=30, kappa=4):
    """Window whose differences are generic (full rank kappa+1)."""
    rng = np.random.default_rng(seed)
    iterates = [rng.standard_normal(n)]
    for _ in range(kappa + 1):
        iterates.append(iterates[-1] + rng.standard_normal(n))
    return VectorSequenceWindow.from_iterates(iterates)


class TestWindow:
    def test_invariants(self):
        w, _ = diag_window()
        assert w.kappa == 2
        assert w.dimension == 2
        assert w.vectors.shape == (4, 2)

    def test_too_few_vectors(self):
        with pytest.raises(ValueError):
            VectorSequenceWindow(np.zeros((2, 5)))

    def test_non_finite_rejected(self):
        bad = np.zeros((3, 4))
        bad[1, 2] = np.nan
        with pytest.raises(ValueError):
            VectorSequenceWindow(bad)


class TestBuildDifferenceMatrix:
    def test_hand_iteration(self):
        w, _ = diag_window()
        u = build_difference_matrix(w)
        expected = np.array([[1.0, 0.5, 0.25], [3.0, 0.75, 0.1875]])
        assert np.allclose(u, expected, atol=1e-15)

    def test_constant_window_is_zero(self):
        w = VectorSequenceWindow(np.ones((4, 3)) * 2.5)
        assert np.array_equal(build_difference_matrix(w), np.zeros((3, 3)))

    def test_arithmetic_progression(self):
        v = np.array([1.0, -2.0, 0.5])
        w = VectorSequenceWindow(np.array([v, 2 * v, 3 * v]))
        u = build_difference_matrix(w)
        assert np.allclose(u[:, 0], v) and np.allclose(u[:, 1], v)


class TestMgsQr:
    def test_identity_input(self):
        qr = mgs_qr(np.eye(3))
        assert np.allclose(qr.Q, np.eye(3), atol=1e-15)
        assert np.allclose(qr.R, np.eye(3), atol=1e-15)
        assert qr.effective_rank == 3

    def test_single_column_normalization(self):
        qr = mgs_qr(np.array([[3.0], [4.0]]))
        assert abs(qr.R[0, 0] - 5.0) < 1e-14
        assert np.allclose(qr.Q[:, 0], [0.6, 0.8], atol=1e-15)

    def test_random_50x4(self):
        rng = np.random.default_rng(0)
        u = rng.standard_normal((50, 4))
        qr = mgs_qr(u)
        assert np.max(np.abs(qr.Q.T @ qr.Q - np.eye(4))) <= 1e-10
        assert np.linalg.norm(qr.Q @ qr.R - u) <= 1e-10 * np.linalg.norm(u)

    @pytest.mark.parametrize("cond", [1e2, 1e5, 1e8])
    def test_orthogonality_under_conditioning(self, cond):
        rng = np.random.default_rng(int(np.log10(cond)))
        left, _ = np.linalg.qr(rng.standard_normal((40, 6)))
        right, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        u = left @ np.diag(np.logspace(0, -np.log10(cond), 6)) @ right.T
        qr = mgs_qr(u)
        assert qr.effective_rank == 6
        assert np.max(np.abs(qr.Q.T @ qr.Q - np.eye(6))) <= 1e-10
        assert np.linalg.norm(qr.Q @ qr.R - u) <= 1e-10 * np.linalg.norm(u)

    def test_upper_triangular_and_nonnegative_diagonal(self):
        rng = np.random.default_rng(5)
        qr = mgs_qr(rng.standard_normal((20, 5)))
        assert np.array_equal(np.tril(qr.R, -1), np.zeros((5, 5)))
        assert np.all(np.diag(qr.R) >= 0)

    def test_zero_first_column(self):
        u = np.zeros((6, 3))
        u[:, 1] = 1.0
        with pytest.raises(ZeroFirstColumn):
            mgs_qr(u)

    def test_dependent_column_truncates(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal(10)
        b = rng.standard_normal(10)
        u = np.column_stack([a, 2.0 * a, b])
        qr = mgs_qr(u)
        assert qr.effective_rank == 1
        # projection coefficients of the dependent column are still recorded
        assert abs(qr.R[0, 1] - 2.0 * np.linalg.norm(a)) <= 1e-12 * np.linalg.norm(a)


class TestSmallSvd:
    def test_identity(self):
        u, s, vt = small_svd(np.eye(4))
        assert np.allclose(s, 1.0)
        assert np.allclose(np.abs(np.diag(u)), 1.0)
        assert np.allclose(u @ np.diag(s) @ vt, np.eye(4), atol=1e-14)

    def test_diagonal(self):
        _, s, _ = small_svd(np.diag([3.0, 2.0, 1.0]))
        assert np.allclose(s, [3.0, 2.0, 1.0])

    def test_reconstruction_random_upper_triangular(self):
        rng = np.random.default_rng(1)
        r = np.triu(rng.standard_normal((5, 5)))
        u, s, vt = small_svd(r)
        assert np.linalg.norm(u @ np.diag(s) @ vt - r) <= 1e-10 * np.linalg.norm(r)
        assert np.max(np.abs(u.T @ u - np.eye(5))) <= 1e-10
        assert np.max(np.abs(vt @ vt.T - np.eye(5))) <= 1e-10
        assert np.all(np.diff(s) <= 0) and s[-1] >= 0


def full_rank_three_mode_window(kappa=2, m=1, seed=2):
    """kappa+1 difference columns spanned by three modes: full rank for kappa=2."""
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    a = basis @ np.diag([0.9, 0.6, 0.3, 0, 0, 0, 0, 0]) @ basis.T
    b = rng.standard_normal(8)
    lin = LinearFixedPointProblem(a, b)
    x = lin.solve() + basis[:, 0] + basis[:, 1] + basis[:, 2]
    iterates = [x]
    for _ in range(m + kappa + 1):
        x = lin.step(x)
        iterates.append(x)
    return VectorSequenceWindow.from_iterates(iterates[m:], m=m), lin.solve()


class TestGammaRules:
    def test_mpe_normalization(self):
        w, _ = full_rank_three_mode_window()
        qr = mgs_qr(build_difference_matrix(w))
        assert qr.effective_rank == 3
        weights = gamma_mpe(qr)
        assert abs(weights.gamma.sum() - 1.0) <= 1e-12
        assert weights.c[-1] == 1.0
        assert weights.stability_sum >= 1.0

    def test_rre_normalization_and_existence(self):
        w, _ = full_rank_three_mode_window(seed=3)
        qr = mgs_qr(build_difference_matrix(w))
        weights = gamma_rre(qr)
        assert abs(weights.gamma.sum() - 1.0) <= 1e-12
        assert np.all(np.isfinite(weights.gamma))
        # d = c solves the normal equations: R^T R d = 1
        ones = np.ones(qr.R.shape[0])
        assert np.allclose(qr.R.T @ (qr.R @ weights.c), ones, atol=1e-8)

    def test_rre_exists_on_every_full_rank_window(self):
        # unconditional existence: sum(d) = ||R^-T 1||^2 > 0, never degenerate
        for seed in range(50):
            w = random_full_rank_window(seed=seed, n=20, kappa=3)
            qr = mgs_qr(build_difference_matrix(w))
            weights = gamma_rre(qr)
            assert float(weights.c.sum()) > 0.0
            assert np.all(np.isfinite(weights.gamma))

    def test_rre_symmetric_orthogonal_columns(self):
        # u_0 orthogonal to u_1 with equal norms: minimizer is the midpoint
        u0 = np.array([2.0, 0.0, 0.0])
        u1 = np.array([0.0, 2.0, 0.0])
        x0 = np.zeros(3)
        window = VectorSequenceWindow(np.array([x0, x0 + u0, x0 + u0 + u1]))
        qr = mgs_qr(build_difference_matrix(window))
        weights = gamma_rre(qr)
        assert np.allclose(weights.gamma, [0.5, 0.5], atol=1e-12)

    def test_svdmpe_diagonal_r(self):
        qr = QrFactorization(Q=np.eye(2), R=np.diag([2.0, 1.0]), effective_rank=2, rank_tolerance=1e-12)
        weights = gamma_svdmpe(qr)
        assert np.allclose(weights.gamma, [0.0, 1.0], atol=1e-12)

    def test_svdmpe_normalization(self):
        w, _ = full_rank_three_mode_window(seed=4)
        qr = mgs_qr(build_difference_matrix(w))
        weights = gamma_svdmpe(qr)
        assert abs(weights.gamma.sum() - 1.0) <= 1e-12

    def test_mpe_degenerate_sum_raises(self):
        qr = QrFactorization(
            Q=np.eye(2), R=np.array([[1.0, 1.0], [0.0, 0.5]]), effective_rank=2, rank_tolerance=1e-12
        )
        with pytest.raises(DegenerateSum):
            gamma_mpe(qr)  # c = (-1, 1), sum is 0

    def test_rank_deficient_precondition(self):
        qr = QrFactorization(Q=np.eye(3), R=np.eye(3), effective_rank=2, rank_tolerance=1e-12)
        for rule in (gamma_mpe, gamma_rre, gamma_svdmpe):
            with pytest.raises(RankDeficient):
                rule(qr)

    def test_mpe_solves_constrained_least_squares(self):
        # independent oracle: min ||U c|| with the last coefficient pinned to 1
        w = random_full_rank_window(seed=12, n=25, kappa=3)
        u = build_difference_matrix(w)
        weights = gamma_mpe(mgs_qr(u))
        c_prime, *_ = np.linalg.lstsq(u[:, :3], -u[:, 3], rcond=None)
        oracle = np.append(c_prime, 1.0)
        oracle /= oracle.sum()
        assert np.allclose(weights.gamma, oracle, atol=1e-10)

    def test_rre_solves_constrained_least_squares(self):
        # independent oracle: min ||U g|| s.t. sum(g) = 1 via KKT system
        w = random_full_rank_window(seed=13, n=25, kappa=3)
        u = build_difference_matrix(w)
        weights = gamma_rre(mgs_qr(u))
        k = u.shape[1]
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * u.T @ u
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        oracle = np.linalg.solve(kkt, rhs)[:k]
        assert np.allclose(weights.gamma, oracle, atol=1e-9)
        assert u @ weights.gamma @ (u @ weights.gamma) <= u @ oracle @ (u @ oracle) + 1e-12

    def test_svdmpe_matches_svd_of_differences(self):
        # the right singular vectors of R coincide with those of U = Q R
        w = random_full_rank_window(seed=14, n=25, kappa=3)
        u = build_difference_matrix(w)
        weights = gamma_svdmpe(mgs_qr(u))
        _, _, vt = np.linalg.svd(u, full_matrices=False)
        oracle = vt[-1] / vt[-1].sum()
        assert np.allclose(weights.gamma, oracle, atol=1e-9)

    def test_aitken_weights_single_mode(self):
        # single geometric mode, lambda = 0.5: gamma = (-1, 2)
        v = np.array([1.0, -1.0, 2.0])
        star = np.array([5.0, 1.0, 0.0])
        iterates = [star + v * 0.5**k for k in range(3)]
        result = extrapolate_once(VectorSequenceWindow.from_iterates(iterates), "mpe")
        assert np.allclose(result.weights.gamma, [-1.0, 2.0], atol=1e-10)
        assert np.allclose(result.vector, star, atol=1e-12)


class TestReconstruct:
    def test_gamma_e1_returns_first_vector(self):
        w = random_full_rank_window()
        qr = mgs_qr(build_difference_matrix(w))
        gamma = np.zeros(w.kappa + 1)
        gamma[0] = 1.0
        weights = _weights_from(gamma)
        assert np.array_equal(reconstruct(w, qr, weights), w.vectors[0])

    def test_gamma_e2_returns_second_vector(self):
        w = random_full_rank_window(seed=7, kappa=2)
        qr = mgs_qr(build_difference_matrix(w))
        weights = _weights_from(np.array([0.0, 1.0, 0.0]))
        out = reconstruct(w, qr, weights)
        assert np.linalg.norm(out - w.vectors[1]) <= 1e-12 * np.linalg.norm(w.vectors[1])

    def test_equivalence_with_direct_weighted_sum(self):
        rng = np.random.default_rng(8)
        for seed in range(5):
            w = random_full_rank_window(seed=seed)
            qr = mgs_qr(build_difference_matrix(w))
            gamma = rng.standard_normal(w.kappa + 1)
            gamma /= gamma.sum()
            direct = gamma @ w.vectors[: w.kappa + 1]
            via_qr = reconstruct(w, qr, _weights_from(gamma))
            assert np.linalg.norm(via_qr - direct) <= 1e-10 * np.linalg.norm(direct)

    def test_xi_recursion(self):
        gamma = np.array([0.2, 0.5, 0.3])
        coeffs = reconstruction_coefficients(gamma, np.eye(3))
        assert np.allclose(coeffs.xi, [1 - 0.2, 1 - 0.2 - 0.5])


def _weights_from(gamma):
    from redve.extrapolation import ExtrapolationWeights

    return ExtrapolationWeights(
        method="mpe", c=gamma.copy(), gamma=gamma, stability_sum=float(np.abs(gamma).sum())
    )


class TestExtrapolateOnce:
    def test_stationary_window_converged(self):
        w = VectorSequenceWindow(np.tile(np.array([1.0, 2.0, 3.0]), (4, 1)))
        result = extrapolate_once(w)
        assert result.converged and not result.extrapolated
        assert np.array_equal(result.vector, w.vectors[0])

    @pytest.mark.parametrize("method", METHODS)
    def test_diag_oracle_exact(self, method):
        w, star = diag_window()
        result = extrapolate_once(w, method)
        assert np.linalg.norm(result.vector - star) <= 1e-10
        assert abs(result.weights.gamma.sum() - 1.0) <= 1e-12

    def test_rank_one_window_shrinks_to_kappa_one(self):
        v = np.array([1.0, 2.0, -1.0, 0.5])
        star = np.array([10.0, -3.0, 5.0, 2.0])
        seq = [star + v * 0.6**k for k in range(6)]
        wide = extrapolate_once(VectorSequenceWindow.from_iterates(seq[:5]), "mpe")
        narrow = extrapolate_once(VectorSequenceWindow.from_iterates(seq[:3]), "mpe")
        assert wide.kappa_used == 1
        assert np.linalg.norm(wide.vector - narrow.vector) <= 1e-8
        assert np.linalg.norm(wide.vector - star) <= 1e-8

    def test_mpe_degeneracy_falls_back_to_rre(self):
        # u_0 = (1, 0), u_1 = (1, 0.5): MPE coefficients sum to zero
        x0 = np.zeros(2)
        x1 = x0 + np.array([1.0, 0.0])
        x2 = x1 + np.array([1.0, 0.5])
        result = extrapolate_once(VectorSequenceWindow(np.array([x0, x1, x2])), "mpe")
        assert result.extrapolated
        assert result.weights.method == "rre"
        assert result.weights.fallback_from == "mpe"

    @pytest.mark.parametrize("method", METHODS)
    def test_affine_shift_equivariance(self, method):
        w = random_full_rank_window(seed=9, kappa=3)
        shift = 7.25
        shifted = VectorSequenceWindow(w.vectors + shift)
        base = extrapolate_once(w, method)
        moved = extrapolate_once(shifted, method)
        scale = np.linalg.norm(base.vector) + 1.0
        assert np.linalg.norm(moved.vector - (base.vector + shift)) <= 1e-9 * scale


class TestLinearExactness:
    @pytest.mark.parametrize("method", METHODS)
    def test_exact_at_minimal_polynomial_degree(self, method):
        # four eigen-components in the initial error, kappa = 4
        rng = np.random.default_rng(10)
        basis, _ = np.linalg.qr(rng.standard_normal((9, 9)))
        eigs = np.array([0.85, 0.6, 0.35, 0.15, 0, 0, 0, 0, 0])
        a = basis @ np.diag(eigs) @ basis.T
        b = rng.standard_normal(9)
        lin = LinearFixedPointProblem(a, b)
        star = lin.solve()
        x = star + basis[:, :4] @ np.array([1.0, -2.0, 0.5, 1.5])
        iterates = [x]
        for _ in range(6):
            x = lin.step(x)
            iterates.append(x)
        window = VectorSequenceWindow.from_iterates(iterates[:6])
        result = extrapolate_once(window, method)
        assert np.linalg.norm(result.vector - star) <= 1e-8 * np.linalg.norm(star)
