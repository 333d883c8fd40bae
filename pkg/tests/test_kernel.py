import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from soundfield.acoustics import ObservationSet, make_array, wavenumber
from soundfield.errors import DomainError
from soundfield.harness.metrics import FDGrid, helmholtz_residual, nmse
from soundfield.kernel import (KernelSpec, gram_matrix, kernel_fit, kernel_matrix, kernel_predict, kernel_value,
                               load_kernel_solution, save_kernel_solution, select_lambda)
from soundfield.specfun import fibonacci_ball, fibonacci_directions

XI = (0.0, 0.6, 0.8)


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def ball_points(m, radius, seed):
    return make_array("random_in_region", {"count": m, "radius": radius}, seed=seed)


def random_obs(seed, m=12, k=6.0, radius=0.4):
    rng = np.random.default_rng(seed)
    pos = ball_points(m, radius, seed)
    return ObservationSet(k=k, positions=pos, pressures=crandn(rng, m))


def specs(k=6.0):
    return [KernelSpec("uniform_helmholtz", k), KernelSpec("directional_helmholtz", k, XI, 3.0),
            KernelSpec("gaussian_baseline", k)]


class TestKernelValue:
    def test_uniform_diagonal(self):
        assert kernel_value(KernelSpec("uniform_helmholtz", 4.0), [1, 2, 3], [1, 2, 3]) == 1

    def test_directional_diagonal(self):
        # j0(j beta) = sinh(beta) / beta = C(beta)
        v = kernel_value(KernelSpec("directional_helmholtz", 4.0, XI, 2.0), [1, 2, 3], [1, 2, 3])
        assert v == pytest.approx(1.0, abs=1e-14)

    def test_directional_beta_zero_is_uniform(self):
        rng = np.random.default_rng(0)
        r, rp = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
        a = kernel_value(KernelSpec("directional_helmholtz", 7.0, XI, 0.0), r, rp)
        b = kernel_value(KernelSpec("uniform_helmholtz", 7.0), r, rp)
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_gaussian(self):
        v = kernel_value(KernelSpec("gaussian_baseline", 3.0, sigma=2.0), [0, 0, 0], [0.3, 0, 0.4])
        assert v == pytest.approx(np.exp(-4 * 0.25), rel=1e-15)
        assert KernelSpec("gaussian_baseline", 3.0).sigma == 3.0

    def test_invalid_specs(self):
        with pytest.raises(DomainError):
            KernelSpec("matern", 1.0)
        with pytest.raises(DomainError):
            KernelSpec("uniform_helmholtz", 0.0)
        with pytest.raises(DomainError):
            KernelSpec("directional_helmholtz", 1.0, (1, 1, 0), 1.0)
        with pytest.raises(DomainError):
            KernelSpec("directional_helmholtz", 1.0, XI, -1.0)

    @pytest.mark.parametrize("spec", specs(), ids=lambda s: s.family)
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_hermitian(self, spec, seed):
        rng = np.random.default_rng(seed)
        r, rp = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
        assert abs(kernel_value(spec, r, rp) - np.conj(kernel_value(spec, rp, r))) <= 1e-12

    def test_directional_imaginary_sign(self):
        spec = KernelSpec("directional_helmholtz", 6.0, XI, 3.0)
        d = 0.1 * np.array(XI)
        assert np.sign(kernel_value(spec, d, 0 * d).imag) == -np.sign(kernel_value(spec, -d, 0 * d).imag) != 0

    def test_branch_independence(self):
        rng = np.random.default_rng(3)
        spec = KernelSpec("directional_helmholtz", 5.0, XI, 4.0)
        for _ in range(20):
            d = rng.normal(size=3) * 0.5
            z2 = spec.k**2 * d @ d - spec.beta**2 - 2j * spec.beta * spec.k * (d @ np.array(XI))
            z = np.sqrt(z2)
            both = [np.sin(s) / s for s in (z, -z)]
            expect = both[0] / (np.sinh(spec.beta) / spec.beta)
            assert both[0] == pytest.approx(both[1], rel=1e-14)
            assert kernel_value(spec, d, np.zeros(3)) == pytest.approx(expect, rel=1e-10)

    def test_uniform_quadrature(self):
        q = 10_000
        eta = fibonacci_directions(q)
        rng = np.random.default_rng(4)
        k = 5.0
        for _ in range(30):
            d = rng.normal(size=3)
            d *= rng.uniform(0, 10 / k) / np.linalg.norm(d)
            quad = np.mean(np.exp(-1j * k * eta @ d))
            assert abs(quad - kernel_value(KernelSpec("uniform_helmholtz", k), d, np.zeros(3))) <= 1e-3

    def test_directional_quadrature_convention(self):
        # the kernel is the vMF-weighted average of exp(+jk<eta, r - r'>), so its
        # functions are waves exp(+jk<xi, r>) travelling along xi
        q = 10_000
        eta = fibonacci_directions(q)
        k, beta = 5.0, 3.0
        spec = KernelSpec("directional_helmholtz", k, XI, beta)
        w = np.exp(beta * eta @ np.array(XI)) / (np.sinh(beta) / beta)
        rng = np.random.default_rng(5)
        for _ in range(20):
            d = rng.normal(size=3) * 0.4
            quad = np.mean(w * np.exp(1j * k * eta @ d))
            assert abs(quad - kernel_value(spec, d, np.zeros(3))) <= 1e-3


class TestGram:
    def test_single_point(self):
        assert np.array_equal(gram_matrix(KernelSpec("uniform_helmholtz", 2.0), [[0.1, 0.2, 0.3]]),
                              np.ones((1, 1), dtype=complex))

    def test_uniform_real_symmetric(self):
        g = gram_matrix(KernelSpec("uniform_helmholtz", 8.0), np.random.default_rng(0).normal(size=(15, 3)))
        assert np.all(g.imag == 0) and np.array_equal(g, g.T) and np.all(np.diag(g) == 1)

    def test_directional_psd(self):
        rng = np.random.default_rng(1)
        g = gram_matrix(KernelSpec("directional_helmholtz", 6.0, XI, 3.0), rng.uniform(-0.5, 0.5, (8, 3)))
        ev = np.linalg.eigvalsh(g)
        assert ev.min() >= -1e-8 * ev.max()
        assert np.array_equal(g, g.conj().T)

    def test_duplicate_warns(self):
        with pytest.warns(RuntimeWarning):
            gram_matrix(KernelSpec("uniform_helmholtz", 2.0), np.zeros((2, 3)))

    def test_matches_kernel_matrix(self):
        pts = np.random.default_rng(2).normal(size=(6, 3))
        spec = specs()[1]
        assert np.allclose(gram_matrix(spec, pts), kernel_matrix(spec, pts, pts), rtol=0, atol=1e-15)


class TestFit:
    def test_zero_data(self):
        obs = random_obs(0)
        obs = ObservationSet(k=obs.k, positions=obs.positions, pressures=np.zeros(12, complex))
        assert np.all(kernel_fit(specs()[0], obs, 0.1).weights == 0)

    def test_scalar(self):
        obs = ObservationSet(k=1.0, positions=np.zeros((1, 3)), pressures=np.array([1 + 0j]))
        assert kernel_fit(KernelSpec("uniform_helmholtz", 1.0), obs, 1.0).weights[0] == pytest.approx(0.5, rel=1e-15)

    @pytest.mark.parametrize("spec", specs(), ids=lambda s: s.family)
    def test_dense_inverse_oracle(self, spec):
        obs = random_obs(1)
        sol = kernel_fit(spec, obs, 0.05)
        g = kernel_matrix(spec, obs.positions, obs.positions)
        ref = np.linalg.inv(g + 0.05 * np.eye(12)) @ obs.pressures
        assert np.linalg.norm(sol.weights - ref) <= 1e-10 * np.linalg.norm(ref)

    def test_residual_identity_at_mics(self):
        obs = random_obs(2)
        spec = specs()[1]
        sol = kernel_fit(spec, obs, 0.01)
        pred = kernel_predict(sol, obs.positions)
        assert np.max(np.abs(pred - (obs.pressures - 0.01 * sol.weights))) <= 1e-9

    def test_zero_weights_predict_zero(self):
        obs = random_obs(3)
        sol = kernel_fit(specs()[0], obs, 0.1)
        sol.weights = np.zeros_like(sol.weights)
        assert np.all(kernel_predict(sol, np.ones((4, 3))) == 0)

    def test_errors(self):
        obs = random_obs(4)
        with pytest.raises(DomainError):
            kernel_fit(specs()[0], obs, 0.0)

    def test_default_lambda(self):
        obs = random_obs(5)
        assert kernel_fit(specs()[0], obs).lam == pytest.approx(1e-3)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), a=st.complex_numbers(max_magnitude=5),
           b=st.complex_numbers(max_magnitude=5))
    def test_linear_in_observations(self, seed, a, b):
        obs = random_obs(seed, m=10)
        rng = np.random.default_rng(seed + 1)
        y2 = crandn(rng, 10)
        spec = specs()[1]
        pts = rng.normal(size=(5, 3)) * 0.3

        def predict(y):
            return kernel_predict(kernel_fit(spec, ObservationSet(k=obs.k, positions=obs.positions, pressures=y),
                                             0.01), pts)

        lhs = predict(a * obs.pressures + b * y2)
        rhs = a * predict(obs.pressures) + b * predict(y2)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), 1.0)

    def test_select_lambda_on_grid(self):
        obs = random_obs(6)
        grid = [1e-4, 1e-2, 1.0]
        assert select_lambda(specs()[0], obs, grid) in grid


def plane_wave_problem(positions, k, direction):
    return np.exp(-1j * k * positions @ np.asarray(direction))


class TestPlaneWaveReconstruction:
    k = wavenumber(800)

    def score(self, positions, seed=0):
        direction = fibonacci_directions(7)[3]
        obs = ObservationSet(k=self.k, positions=positions, pressures=plane_wave_problem(positions, self.k, direction))
        sol = kernel_fit(KernelSpec("uniform_helmholtz", self.k), obs, 1e-6)
        pts = ball_points(100, 0.4, seed + 100)
        return nmse(kernel_predict(sol, pts), plane_wave_problem(pts, self.k, direction))

    @pytest.mark.xfail(strict=True, reason="30 microphones undersample a 0.4 m ball at 800 Hz "
                                            "(about (e k R / 2 + 1)^2 = 81 degrees of freedom)")
    def test_thirty_mics_reach_minus_30db(self):
        pos = ball_points(30, 0.4, 0)
        assert self.score(pos) <= -30

    def test_dense_sampling_reaches_minus_30db(self):
        pos = ball_points(100, 0.4, 0)
        assert self.score(pos) <= -30

    def test_smaller_ball_thirty_mics(self):
        # the same 30 microphones suffice when the region is 0.2 m
        direction = fibonacci_directions(7)[3]
        pos = ball_points(30, 0.2, 0)
        obs = ObservationSet(k=self.k, positions=pos, pressures=plane_wave_problem(pos, self.k, direction))
        sol = kernel_fit(KernelSpec("uniform_helmholtz", self.k), obs, 1e-6)
        pts = fibonacci_ball(100, 0.2)
        assert nmse(kernel_predict(sol, pts), plane_wave_problem(pts, self.k, direction)) <= -20

    def test_directional_prefers_its_propagation_direction(self):
        xi = np.array(XI)
        pos = ball_points(20, 0.4, 1)
        pts = fibonacci_ball(100, 0.4)
        spec = KernelSpec("directional_helmholtz", self.k, tuple(xi), 10.0)
        scores = []
        # exp(-jk<eta, r>) arrives from eta, so eta = -xi travels along xi
        for eta in (-xi, xi):
            obs = ObservationSet(k=self.k, positions=pos, pressures=plane_wave_problem(pos, self.k, eta))
            sol = kernel_fit(spec, obs, 1e-6)
            scores.append(nmse(kernel_predict(sol, pts), plane_wave_problem(pts, self.k, eta)))
        assert scores[0] < scores[1] - 10


class TestHelmholtzCompliance:
    @pytest.mark.parametrize("family", ["uniform_helmholtz", "directional_helmholtz"])
    def test_exact_families(self, family):
        k = wavenumber(500)
        obs = random_obs(7, m=20, k=k)
        spec = KernelSpec(family, k, XI, 5.0 if family != "uniform_helmholtz" else 0.0)
        sol = kernel_fit(spec, obs, 1e-3)
        grid = FDGrid((0.05, 0.0, -0.05), 2 * np.pi / k / 400)
        assert helmholtz_residual(lambda p: kernel_predict(sol, p), k, grid) <= 1e-4

    def test_gaussian_violates(self):
        k = wavenumber(500)
        obs = random_obs(7, m=20, k=k)
        sol = kernel_fit(KernelSpec("gaussian_baseline", k), obs, 1e-3)
        grid = FDGrid((0.05, 0.0, -0.05), 2 * np.pi / k / 400)
        assert helmholtz_residual(lambda p: kernel_predict(sol, p), k, grid) > 1e-4


def test_save_load_round_trip(tmp_path):
    obs = random_obs(8)
    sol = kernel_fit(specs()[1], obs, 0.02)
    save_kernel_solution(tmp_path / "a.json", sol)
    back = load_kernel_solution(tmp_path / "a.json")
    assert back.spec == sol.spec and back.lam == sol.lam
    assert np.array_equal(back.weights, sol.weights) and np.array_equal(back.positions, sol.positions)
    save_kernel_solution(tmp_path / "b.json", back)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
