import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from dendrite_opt import eigen
from dendrite_opt.errors import ConfigError, EigenSolverError
from dendrite_opt.model import TaperProfile, inner_product_a, lateral_integral, random_admissible_profile


def secular_mu1(a0, ell, params):
    """mu1 of the cylinder from (a0^2/A) b sinh(b ell) = (gamma - a0 b^2) cosh(b ell), mu1 = -a0 b^2."""
    A, gamma = params.A, params.gamma
    F = lambda b: (a0**2 / A) * b * np.tanh(b * ell) - (gamma - a0 * b**2)
    return -a0 * brentq(F, 1e-12, np.sqrt(gamma / a0), xtol=1e-15, rtol=1e-15) ** 2


def dense_oracle(a, params, n_cells):
    """K and M by adaptive quadrature of every basis product."""
    grid = np.linspace(0, a.ell, n_cells + 1)
    h = grid[1] - grid[0]
    n = n_cells + 1
    K, M = np.zeros((n, n)), np.zeros((n, n))
    w = lambda x: a(x) * np.sqrt(1 + a.derivative(x) ** 2)
    for e in range(n_cells):
        lo, hi = grid[e], grid[e + 1]
        pts = [p for p in a.x if lo < p < hi] or None
        basis = [lambda x: (hi - x) / h, lambda x: (x - lo) / h]
        dbasis = [-1 / h, 1 / h]
        for i in range(2):
            for j in range(2):
                kij = quad(lambda x: a(x) ** 2 * dbasis[i] * dbasis[j], lo, hi, points=pts, epsrel=1e-13)[0]
                mij = quad(lambda x: w(x) * basis[i](x) * basis[j](x), lo, hi, points=pts, epsrel=1e-13)[0]
                K[e + i, e + j] += kij
                M[e + i, e + j] += mij
    K[0, 0] -= params.A * params.gamma
    M[0, 0] += params.A
    return K, M


def test_assembly_matches_quadrature_oracle(params, rng):
    a = TaperProfile(np.array([0.0, 0.23, 0.5, 0.81, 1.0]), rng.uniform(1.0, 1.6, 5))
    sys = eigen.assemble(a, params, 16)
    K, M = dense_oracle(a, params, 16)
    np.testing.assert_allclose(sys.K.toarray(), K, rtol=0, atol=1e-10 * np.abs(K).max())
    np.testing.assert_allclose(sys.M.toarray(), M, rtol=0, atol=1e-10 * np.abs(M).max())


def test_assembly_structure(params, rng):
    sys = eigen.assemble(random_admissible_profile(rng, 1.0, 1.0, 2.0), params, 64)
    K, M = sys.K.toarray(), sys.M.toarray()
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0


def test_assemble_rejects_coarse_grid(params, cylinder):
    with pytest.raises(ConfigError):
        eigen.assemble(cylinder, params, 4)


def test_rayleigh_of_constant(params, params_g0, rng):
    a = random_admissible_profile(rng, 1.0, 1.0, 2.0)
    n = 257
    assert eigen.rayleigh(TaperProfile.constant(1.0, 1.0), params_g0, np.ones(n)) == pytest.approx(0.0, abs=1e-13)
    expected = -params.A * params.gamma / (lateral_integral(a) + params.A)
    assert eigen.rayleigh(a, params, np.ones(n)) == pytest.approx(expected, rel=1e-12)
    cyl = -params.A * params.gamma / (1.0 + params.A)
    assert eigen.rayleigh(TaperProfile.constant(1.0, 1.0), params, np.ones(n)) == pytest.approx(cyl, rel=1e-13)


def test_cylinder_gamma_zero(params_g0, cylinder):
    pair = eigen.solve_spectrum(eigen.assemble(cylinder, params_g0, 512), 2)[0]
    assert abs(pair.mu) <= 1e-8
    np.testing.assert_allclose(pair.phi, (params_g0.A + 1.0) ** -0.5, rtol=1e-8)


@pytest.mark.parametrize("a0,ell", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5)])
def test_cylinder_matches_secular_equation(params, a0, ell):
    mu = eigen.first_eigenvalue(TaperProfile.constant(a0, ell), params, 2048)
    assert mu == pytest.approx(secular_mu1(a0, ell, params), rel=1e-6)


def test_cylinder_eigenfunction_is_cosh(params, cylinder):
    pair = eigen.solve_spectrum(eigen.assemble(cylinder, params, 1024), 1)[0]
    beta = np.sqrt(-pair.mu)
    shape = np.cosh(beta * (1.0 - pair.x))
    np.testing.assert_allclose(pair.phi / pair.phi[0], shape / shape[0], rtol=1e-6)


def test_spectrum_order_normalisation_and_residuals(params, rng):
    for a in (TaperProfile.bump(1.0, 1.0), random_admissible_profile(rng, 1.0, 1.0, 2.0)):
        sys = eigen.assemble(a, params, 2048)
        pairs = eigen.solve_spectrum(sys, 64)
        mus = np.array([p.mu for p in pairs])
        V = np.array([p.phi for p in pairs]).T
        assert [p.n for p in pairs] == list(range(1, 65))
        assert np.all(np.diff(mus) > 0)
        assert all(p.phi_at_0 >= 0 for p in pairs)
        assert eigen.relative_residuals(sys, mus, V).max() <= 1e-8
        np.testing.assert_allclose(V.T @ (sys.M @ V), np.eye(64), atol=1e-10)
        # the trapezoid inner product converges to the same Gram matrix under refinement
        assert inner_product_a(V[:, 0], V[:, 0], a, params.A, sys.x) == pytest.approx(1.0, abs=1e-8)
        gram = np.array(
            [[inner_product_a(V[:, i], V[:, j], a, params.A, sys.x, refine=64) for j in range(6)] for i in range(6)]
        )
        np.testing.assert_allclose(gram, np.eye(6), atol=1e-8)


def test_sparse_and_dense_agree(params, rng):
    sys = eigen.assemble(random_admissible_profile(rng, 1.0, 1.0, 2.0), params, 256)
    sparse = eigen.solve_spectrum(sys, 8, "sparse")
    dense = eigen.solve_spectrum(sys, 8, "dense")
    for s, d in zip(sparse, dense):
        assert s.mu == pytest.approx(d.mu, rel=1e-9, abs=1e-9)
        np.testing.assert_allclose(s.phi, d.phi, atol=1e-7)


def test_solve_spectrum_errors(params, cylinder, monkeypatch):
    sys = eigen.assemble(cylinder, params, 16)
    with pytest.raises(ConfigError):
        eigen.solve_spectrum(sys, 0)
    with pytest.raises(ValueError):
        eigen.solve_spectrum(sys, 2, method="magic")
    monkeypatch.setattr(eigen, "BACKWARD_TOL", -1.0)
    with pytest.raises(EigenSolverError) as info:
        eigen.solve_spectrum(sys, 3)
    assert info.value.residuals.shape == (3,)


def test_sign_bounds_random_profiles(params, rng):
    for _ in range(10):
        pairs = eigen.solve_spectrum(eigen.assemble(random_admissible_profile(rng, 1.0, 1.0, 2.0), params, 1024), 2)
        assert -params.gamma < pairs[0].mu < 0
        assert pairs[1].mu > 0


def test_rayleigh_bounded_below_by_mu1(params, rng):
    a = TaperProfile.bump(1.0, 1.0)
    sys = eigen.assemble(a, params, 256)
    pair = eigen.solve_spectrum(sys, 1)[0]
    assert eigen.rayleigh_quotient(sys, pair.phi) == pytest.approx(pair.mu, rel=1e-12)
    samples = [eigen.rayleigh_quotient(sys, rng.normal(size=sys.size)) for _ in range(100)]
    smooth = [eigen.rayleigh_quotient(sys, np.polyval(rng.normal(size=4), sys.x)) for _ in range(100)]
    assert min(samples + smooth) >= pair.mu - 1e-10
    with pytest.raises(ValueError):
        eigen.rayleigh_quotient(sys, np.zeros(sys.size))


def test_compare_mu1(params, cylinder):
    assert eigen.compare_mu1(cylinder, 1.0, params, 512).margin == 0.0
    assert eigen.compare_mu1(TaperProfile.bump(1.0, 1.0), 1.0, params, 512).margin > 0
    with pytest.raises(ConfigError):
        eigen.compare_mu1(TaperProfile.constant(0.9, 1.0), 1.0, params, 64)


def test_numerator_and_denominator_inequalities(params, rng):
    """With phi1 of a, replacing a by a0 lowers both parts of the Rayleigh quotient."""
    for _ in range(5):
        a = random_admissible_profile(rng, 1.0, 1.0, 2.0)
        sys = eigen.assemble(a, params, 512)
        cyl = eigen.assemble(TaperProfile.constant(1.0, 1.0), params, 512)
        phi = eigen.solve_spectrum(sys, 1)[0].phi
        num_a, den_a = eigen.rayleigh_parts(sys, phi)
        num_c, den_c = eigen.rayleigh_parts(cyl, phi)
        assert num_a >= num_c and den_a >= den_c


def test_mu1_gradient_matches_finite_differences(params, rng):
    a = random_admissible_profile(rng, 1.0, 1.0, 2.0, n_nodes=6)
    mu, grad = eigen.mu1_gradient(a, params, 512)
    eps = 1e-5
    fd = []
    for i in range(a.x.size):
        e = np.zeros(a.x.size)
        e[i] = eps
        fd.append(
            (eigen.first_eigenvalue(a.with_radii(a.a + e), params, 512) - eigen.first_eigenvalue(a.with_radii(a.a - e), params, 512))
            / (2 * eps)
        )
    np.testing.assert_allclose(grad, fd, rtol=1e-5, atol=1e-8)


def test_mu1_gradient_nonnegative_at_cylinder(params):
    # every feasible direction from the cylinder raises the radius, so no component may be negative
    _, grad = eigen.mu1_gradient(TaperProfile.constant(1.0, 1.0, n_nodes=9), params, 512)
    assert np.all(grad > 0)


def test_grid_convergence_second_order(params):
    a = TaperProfile.from_function(lambda x: 1 + 0.5 * x, 1.0, 2)
    mus = [eigen.first_eigenvalue(a, params, n) for n in (64, 128, 256, 512)]
    d = np.diff(mus)
    ratios = d[:-1] / d[1:]
    assert np.all((3.5 <= ratios) & (ratios <= 4.5)), ratios
