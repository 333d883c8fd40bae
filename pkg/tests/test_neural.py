import types

import numpy as np
import pytest

from soundfield.acoustics import ObservationSet, RegionSpec, RoomSpec, Scene, make_array, wavenumber
from soundfield.errors import DomainError, InfeasibleError, ModelCorruptError, TrainingDivergedError, UnsupportedForPDEError
from soundfield.expansion import BasisSpec
from soundfield.harness.metrics import FDGrid, helmholtz_residual
from soundfield.neural import mlp
from soundfield.neural.mlp import MlpModel, init_mlp, load_model, mlp_forward, mlp_laplacian, save_model
from soundfield.neural.pinn import (PinnConfig, default_collocation, init_field_model, pinn_loss, pinn_train,
                                    write_trace_csv)
from soundfield.neural.supervised import (NetConfig, SupervisedDataset, generate_training_set, sample_source,
                                          supervised_train)
from soundfield.specfun import fibonacci_ball


def small_scene(m=12):
    region = RegionSpec("ball", (2.0, 2.5, 1.5), radius=0.3)
    mics = make_array("random_in_region", {"count": m, "radius": 0.3, "center": region.center}, seed=3)
    return Scene(RoomSpec((4.0, 5.0, 3.0), 0.5), (0.5, 0.5, 0.5), region, mics, snr_db=30.0, max_order=3)


def zero_model(widths, act="tanh"):
    return MlpModel(widths, [act] * (len(widths) - 2) + ["identity"],
                    [np.zeros((widths[i + 1], widths[i])) for i in range(len(widths) - 1)],
                    [np.zeros(w) for w in widths[1:]])


def plane_wave_model(k, eta):
    # hidden sin(k<eta,r> + pi/2) = cos and sin(k<eta,r>); output cos - j sin
    w1 = k * np.array([eta, eta])
    return MlpModel([3, 2, 2], ["sine", "identity"], [w1, np.array([[1.0, 0.0], [0.0, -1.0]])],
                    [np.array([np.pi / 2, 0.0]), np.zeros(2)])


class TestForward:
    def test_zero_model(self):
        assert mlp_forward(zero_model([3, 4, 2]), [0.3, -1, 2]) == 0

    def test_affine(self):
        w = np.array([[1.0, -2.0, 0.5], [0.25, 3.0, -1.0]])
        b = np.array([0.1, -0.2])
        c, s = np.array([1.0, 2.0, 3.0]), 2.0
        model = MlpModel([3, 2], ["identity"], [w], [b], center=c, scale=s)
        r = np.array([0.4, -0.7, 1.9])
        out = w @ ((r - c) / s) + b
        assert mlp_forward(model, r) == complex(out[0], out[1])

    def test_deterministic(self):
        pts = np.random.default_rng(0).normal(size=(10, 3))
        a = mlp_forward(init_mlp([3, 8, 5, 2], "sine", seed=11), pts)
        b = mlp_forward(init_mlp([3, 8, 5, 2], "sine", seed=11), pts)
        assert np.array_equal(a, b)

    def test_corrupt_parameters(self):
        model = init_mlp([3, 4, 2], "tanh")
        model.weights[0][0, 0] = np.nan
        with pytest.raises(ModelCorruptError):
            mlp_forward(model, np.zeros(3))

    def test_inconsistent_shapes(self):
        with pytest.raises(ModelCorruptError):
            MlpModel([3, 2], ["identity"], [np.zeros((3, 2))], [np.zeros(2)])
        with pytest.raises(ModelCorruptError):
            MlpModel([3, 2], ["swish"], [np.zeros((2, 3))], [np.zeros(2)])

    def test_non_finite_input(self):
        with pytest.raises(DomainError):
            mlp_forward(init_mlp([3, 4, 2], "tanh"), [np.inf, 0, 0])


class TestLaplacian:
    def test_linear(self):
        model = init_mlp([3, 2], "identity", seed=1)
        assert np.all(mlp_laplacian(model, np.random.default_rng(0).normal(size=(5, 3))) == 0)

    def test_single_sine_unit(self):
        k, scale = 9.0, 0.5
        model = MlpModel([3, 1, 2], ["sine", "identity"], [np.array([[k * scale, 0, 0]]), np.array([[1.0], [0.0]])],
                         [np.zeros(1), np.zeros(2)], center=np.zeros(3), scale=scale)
        pts = np.random.default_rng(1).uniform(-1, 1, (20, 3))
        g = mlp_forward(model, pts)
        assert np.allclose(g, np.sin(k * pts[:, 0]), rtol=0, atol=1e-15)
        assert np.max(np.abs(mlp_laplacian(model, pts) + k * k * g)) <= 1e-10 * k * k

    def test_plane_wave_pair(self):
        k = wavenumber(700)
        eta = np.array([0.48, -0.6, 0.64])
        model = plane_wave_model(k, eta)
        pts = np.random.default_rng(2).uniform(-1, 1, (30, 3))
        g = mlp_forward(model, pts)
        assert np.allclose(g, np.exp(-1j * k * pts @ eta), atol=1e-14)
        assert np.all(np.abs(mlp_laplacian(model, pts) + k * k * g) <= 1e-8 * k * k * np.abs(g))

    @pytest.mark.parametrize("act", ["tanh", "sine"])
    def test_finite_difference_oracle(self, act):
        scale = 0.4
        model = init_mlp([3, 8, 5, 2], act, seed=4, center=np.array([1.0, 1.0, 1.0]), scale=scale)
        rng = np.random.default_rng(5)
        h = 1e-4 * scale
        for r in rng.uniform(0.6, 1.4, (5, 3)):
            f0 = mlp_forward(model, r)
            fd = sum(mlp_forward(model, r + h * e) + mlp_forward(model, r - h * e) - 2 * f0 for e in np.eye(3)) / h**2
            lap = mlp_laplacian(model, r)
            assert abs(lap - fd) <= 1e-4 * abs(lap)

    def test_relu_unsupported(self):
        with pytest.raises(UnsupportedForPDEError):
            mlp_laplacian(init_mlp([3, 4, 2], "relu"), np.zeros(3))


class TestPinnLoss:
    def test_gradient_check(self):
        rng = np.random.default_rng(6)
        model = init_mlp([3, 8, 5, 2], "tanh", seed=7, scale=0.5)
        pos = rng.uniform(-0.5, 0.5, (5, 3))
        y = rng.normal(size=5) + 1j * rng.normal(size=5)
        colloc = rng.uniform(-0.5, 0.5, (5, 3))
        k, eps = 4.0, 0.3
        _, _, grads = pinn_loss(model, pos, y, colloc, k, eps)

        def total(params):
            jd, jp, _ = pinn_loss(model.with_params(params), pos, y, colloc, k, eps, with_grad=False)
            return jd + eps * jp

        params = model.params()
        flat_fd, flat_an = [], []
        h = 1e-6
        for i, p in enumerate(params):
            for idx in np.ndindex(p.shape):
                up = [q.copy() for q in params]
                dn = [q.copy() for q in params]
                up[i][idx] += h
                dn[i][idx] -= h
                flat_fd.append((total(up) - total(dn)) / (2 * h))
                flat_an.append(grads[i][idx])
        flat_fd, flat_an = np.array(flat_fd), np.array(flat_an)
        assert np.linalg.norm(flat_an - flat_fd) <= 1e-4 * np.linalg.norm(flat_fd)

    def test_eps_zero_skips_pde(self):
        model = init_mlp([3, 4, 2], "sine", seed=0)
        jd, jp, _ = pinn_loss(model, np.zeros((1, 3)), np.ones(1), np.ones((3, 3)), 2.0, 0.0)
        assert np.isnan(jp) and jd > 0


def plane_wave_obs(m, radius, freq, seed=0):
    k = wavenumber(freq)
    pos = make_array("random_in_region", {"count": m, "radius": radius}, seed=seed)
    eta = np.array([0.0, 0.6, -0.8])
    return ObservationSet(k=k, positions=pos, pressures=np.exp(-1j * k * pos @ eta))


class TestPinnTrain:
    def test_plain_nn_never_takes_laplacian(self):
        obs = plane_wave_obs(10, 0.3, 500)
        init = init_field_model(np.zeros(3), 0.3, obs.k, seed=1)
        before = mlp.laplacian_calls
        pinn_train(obs, PinnConfig(fibonacci_ball(20, 0.3), eps=0.0, iterations=50), init)
        assert mlp.laplacian_calls == before
        pinn_train(obs, PinnConfig(fibonacci_ball(20, 0.3), eps=1.0, iterations=5), init)
        assert mlp.laplacian_calls > before

    def test_zero_problem_is_noop(self):
        obs = ObservationSet(k=3.0, positions=fibonacci_ball(5, 0.3), pressures=np.zeros(5))
        init = zero_model([3, 8, 2], "sine")
        res = pinn_train(obs, PinnConfig(fibonacci_ball(10, 0.3), eps=1.0, iterations=20), init)
        assert res.trace[0][1] == 0 and res.trace[0][2] == 0
        assert all(np.array_equal(a, b) for a, b in zip(res.model.params(), init.params()))

    def test_deterministic(self):
        obs = plane_wave_obs(10, 0.3, 500)
        init = init_field_model(np.zeros(3), 0.3, obs.k, seed=2)
        cfg = PinnConfig(fibonacci_ball(20, 0.3), eps=None, iterations=100)
        assert pinn_train(obs, cfg, init).trace == pinn_train(obs, cfg, init).trace

    def test_auto_eps(self):
        obs = plane_wave_obs(10, 0.3, 500)
        init = init_field_model(np.zeros(3), 0.3, obs.k, seed=2)
        colloc = fibonacci_ball(20, 0.3)
        res = pinn_train(obs, PinnConfig(colloc, iterations=0), init)
        jd, jp, _ = pinn_loss(init, obs.positions, obs.pressures, colloc, obs.k, 1.0, with_grad=False)
        assert res.eps == pytest.approx(1e-2 * jd / jp, rel=1e-12)
        assert len(res.trace) == 1

    def test_smoke_plane_wave(self):
        obs = plane_wave_obs(25, 0.3, 600, seed=4)
        region = RegionSpec("ball", (0, 0, 0), radius=0.3)
        init = init_field_model(region.center, 0.3, obs.k, seed=0)
        res = pinn_train(obs, PinnConfig(default_collocation(region, 56), eps=1.0, iterations=5000), init)
        j = res.j_data + res.eps * res.j_pde
        assert j[-1] < 0.05 * j[0]
        assert res.j_pde[-1] < res.j_pde[0]

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_reports_checkpoint(self):
        obs = plane_wave_obs(10, 0.3, 500)
        init = init_field_model(np.zeros(3), 0.3, obs.k, seed=1)
        cfg = PinnConfig(fibonacci_ball(20, 0.3), eps=1.0, lr=1e12, optimizer="sgd", iterations=200)
        with pytest.raises(TrainingDivergedError) as info:
            pinn_train(obs, cfg, init)
        assert info.value.checkpoint is not None
        info.value.checkpoint.check_finite()

    def test_shape_checks(self):
        obs = plane_wave_obs(5, 0.3, 500)
        with pytest.raises(DomainError):
            pinn_train(obs, PinnConfig(np.zeros((1, 3))), init_mlp([3, 4, 3], "sine"))
        with pytest.raises(DomainError):
            PinnConfig(np.zeros((1, 3)), eps=-1.0)

    def test_trace_csv(self, tmp_path):
        write_trace_csv(tmp_path / "t.csv", [(0, 1.5, float("nan")), (1, 0.5, float("nan"))])
        assert (tmp_path / "t.csv").read_text().splitlines() == ["iteration,j_data,j_pde", "0,1.5,nan", "1,0.5,nan"]


class TestSupervised:
    def dataset(self, d=1, targets=None, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(d, 4)) + 1j * rng.normal(size=(d, 4))
        t = rng.normal(size=(d, 6)) + 1j * rng.normal(size=(d, 6)) if targets is None else targets
        return SupervisedDataset(x, t, "field_samples", 1.0, np.zeros((4, 3)), np.zeros((6, 3)))

    def test_memorise_single_pair(self):
        model = supervised_train(self.dataset(1), config=NetConfig(hidden=(32,), iterations=2000))
        assert model.loss_trace[-1] < 1e-3 * model.loss_trace[0]

    def test_zero_targets(self):
        data = self.dataset(3, targets=np.zeros((3, 6)))
        zero = zero_model([8, 6])
        assert np.sum(np.abs(mlp.forward(zero, np.ones((3, 8))))) == 0
        model = supervised_train(data, config=NetConfig(hidden=(8,), iterations=100))
        assert model.loss_trace[-1] <= model.loss_trace[0]

    def test_convex_surrogate_monotone(self):
        data = self.dataset(5, seed=1)
        for opt, lr in [("sgd", 1e-3), ("adam", 1e-3)]:
            trace = np.array(supervised_train(data, config=NetConfig(hidden=(), iterations=300, lr=lr,
                                                                     optimizer=opt)).loss_trace)
            assert np.all(np.diff(trace) <= 1e-12 * trace[0]), opt

    def test_inconsistent_pairs(self):
        with pytest.raises(DomainError):
            SupervisedDataset(np.ones((2, 4)), np.ones((3, 6)), "field_samples", 1.0, np.zeros((4, 3)),
                              np.zeros((6, 3)))
        with pytest.raises(DomainError):
            SupervisedDataset(np.ones((2, 4)), np.ones((2, 6)), "field_samples", 1.0, np.zeros((5, 3)),
                              np.zeros((6, 3)))
        with pytest.raises(DomainError):
            supervised_train(self.dataset(1), target_kind="expansion_coeffs")


class TestTrainingSet:
    def test_single_pair(self):
        scene = small_scene()
        data = generate_training_set(scene, wavenumber(400), 1, seed=5)
        assert len(data) == 1 and data.inputs.shape == (1, 12)
        assert data.targets.shape == (1, len(scene.region.grid(7)))

    def test_deterministic(self):
        scene = small_scene()
        a = generate_training_set(scene, wavenumber(400), 3, seed=5)
        b = generate_training_set(scene, wavenumber(400), 3, seed=5)
        assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.targets, b.targets)

    def test_targets_match_clean_observations(self):
        scene = small_scene()
        data = generate_training_set(scene, wavenumber(400), 4, seed=6, target_points=scene.mics)
        assert np.max(np.abs(data.targets - data.clean_inputs)) <= 1e-10
        assert not np.array_equal(data.inputs, data.clean_inputs)

    def test_sources_outside_region(self):
        scene = small_scene()
        data = generate_training_set(scene, wavenumber(300), 10, seed=7)
        dist = np.linalg.norm(data.sources - np.array(scene.region.center), axis=1)
        assert np.all(dist > scene.region.circumradius + 0.1)
        assert np.all(scene.room.contains(data.sources, margin=0.2))

    def test_infeasible(self):
        fake = types.SimpleNamespace(room=RoomSpec((1.0, 1.0, 1.0)),
                                     region=RegionSpec("ball", (0.5, 0.5, 0.5), radius=2.0))
        with pytest.raises(InfeasibleError):
            sample_source(fake, np.random.default_rng(0))

    def test_pcnn_field_is_helmholtz(self):
        scene = small_scene()
        k = wavenumber(400)
        basis = BasisSpec.plane_waves(30)
        data = generate_training_set(scene, k, 8, seed=8, target_kind="expansion_coeffs",
                                     target_points=scene.region.grid(5), basis=basis)
        model = supervised_train(data, config=NetConfig(hidden=(16,), iterations=50))
        y = scene.observe(k, seed=1).pressures
        grid = FDGrid(scene.region.center, 2 * np.pi / k / 400)
        assert helmholtz_residual(lambda p: model.predict_field(y, p), k, grid) <= 1e-4

    def test_field_model_has_no_continuous_field(self):
        model = supervised_train(TestSupervised().dataset(1), config=NetConfig(hidden=(4,), iterations=1))
        with pytest.raises(DomainError):
            model.predict_field(np.ones(4), np.zeros((1, 3)))


def test_model_round_trip(tmp_path):
    model = init_mlp([3, 8, 5, 2], "sine", seed=3, center=np.array([1.0, 2.0, 3.0]), scale=0.4, first_omega=5.0)
    save_model(tmp_path / "m.json", model)
    back = load_model(tmp_path / "m.json")
    pts = np.random.default_rng(0).normal(size=(7, 3))
    assert np.array_equal(mlp_forward(back, pts), mlp_forward(model, pts))
    save_model(tmp_path / "n.json", back)
    assert (tmp_path / "m.json").read_bytes() == (tmp_path / "n.json").read_bytes()
