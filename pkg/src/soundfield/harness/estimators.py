"""Registry of sound field estimators with a common fit interface.

Each estimator takes an :class:`ObservationSet`, a :class:`FitContext` and a
parameter mapping, and returns a :class:`Fitted` holding a serialisable
solution payload and a predictor over arbitrary positions.
"""
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DomainError
from ..expansion import (BasisSpec, build_dictionary, default_plane_wave_count, fista_l1, ridge_solve,
                         truncation_order)
from ..kernel import KernelSpec, kernel_fit, kernel_solution_to_dict, select_lambda
from ..neural import mlp, pinn
from ..neural.supervised import NetConfig, generate_training_set, supervised_train
from . import io


@dataclass
class FitContext:
    """What an estimator may know besides the observations."""

    scene: object
    k: float
    freq_hz: float
    seed: int = 0
    eval_points: np.ndarray = None


@dataclass
class Fitted:
    payload: dict
    predict: object
    # the predicted field is an exact Helmholtz solution by construction
    exact: bool = True
    diagnostics: dict = field(default_factory=dict)


def _rel_lambda(gram_trace, size, params, default_rel):
    if params.get("lambda") is not None:
        return float(params["lambda"])
    return float(params.get("lambda_rel", default_rel)) * gram_trace / size


def _radius(ctx):
    return ctx.scene.region.circumradius


def _ridge(obs, spec, params):
    d = build_dictionary(spec, obs.positions, obs.k)
    lam = _rel_lambda(float(np.sum(np.abs(d.matrix) ** 2)), spec.size, params, 1e-3)
    sol = ridge_solve(d, obs.pressures, lam)
    payload = io.expansion_payload(spec, sol.coefficients, obs.k, lam)
    return Fitted(payload, io.predictor(payload), diagnostics={"lambda": lam})


def fit_plane_wave_ridge(obs, ctx, params):
    n = int(params.get("n_directions") or default_plane_wave_count(obs.k, _radius(ctx)))
    return _ridge(obs, BasisSpec.plane_waves(n), params)


def fit_spherical_wave_ridge(obs, ctx, params):
    order = params.get("order")
    if order is None:
        order = truncation_order(obs.k, _radius(ctx), params.get("rule", "ceil_ekR_over_2"))
    return _ridge(obs, BasisSpec.spherical_waves(int(order), ctx.scene.region.center), params)


def fit_equivalent_source_ridge(obs, ctx, params):
    n = int(params.get("n_sources") or default_plane_wave_count(obs.k, _radius(ctx)))
    return _ridge(obs, BasisSpec.equivalent_sources(ctx.scene.region, n), params)


def fit_plane_wave_l1(obs, ctx, params):
    n = int(params.get("n_directions") or 2 * default_plane_wave_count(obs.k, _radius(ctx)))
    spec = BasisSpec.plane_waves(n)
    d = build_dictionary(spec, obs.positions, obs.k)
    if params.get("lambda") is not None:
        lam = float(params["lambda"])
    else:
        # fraction of the smallest weight that zeroes every coefficient
        lam = float(params.get("lambda_rel", 1e-2)) * 2.0 * np.max(np.abs(d.matrix.conj().T @ obs.pressures))
    sol = fista_l1(d, obs.pressures, lam, max_iter=int(params.get("max_iter", 2000)))
    payload = io.expansion_payload(spec, sol.coefficients, obs.k, lam)
    return Fitted(payload, io.predictor(payload),
                  diagnostics={"lambda": lam, "iterations": sol.iterations, "converged": sol.converged})


def _kernel(obs, spec, params):
    lam = params.get("lambda")
    if lam is None and params.get("select_lambda", False):
        lam = select_lambda(spec, obs)
    sol = kernel_fit(spec, obs, lam)
    payload = kernel_solution_to_dict(sol)
    return Fitted(payload, io.predictor(payload), exact=spec.family != "gaussian_baseline",
                  diagnostics={"lambda": sol.lam})


def fit_uniform_kernel(obs, ctx, params):
    return _kernel(obs, KernelSpec("uniform_helmholtz", obs.k), params)


def source_direction(scene):
    """Unit vector from the source towards the region centre.

    This is the propagation direction of the direct sound, which is the
    direction the directional kernel emphasises.
    """
    d = np.asarray(scene.region.center) - np.asarray(scene.source)
    return d / np.linalg.norm(d)


def fit_directional_kernel(obs, ctx, params):
    direction = params.get("direction")
    direction = source_direction(ctx.scene) if direction is None else np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    spec = KernelSpec("directional_helmholtz", obs.k, direction=tuple(direction),
                      beta=float(params.get("beta", 5.0)))
    return _kernel(obs, spec, params)


def fit_gaussian_kernel(obs, ctx, params):
    return _kernel(obs, KernelSpec("gaussian_baseline", obs.k, sigma=params.get("sigma")), params)


def _neural_field(obs, ctx, params, eps):
    region = ctx.scene.region
    hidden = tuple(params.get("hidden", pinn.DEFAULT_HIDDEN))
    colloc = pinn.default_collocation(region, int(params.get("collocation", pinn.DEFAULT_COLLOCATION)))
    out_scale = float(np.sqrt(np.mean(np.abs(obs.pressures) ** 2))) or 1.0
    init = pinn.init_field_model(region.center, region.circumradius, obs.k, seed=ctx.seed, hidden=hidden,
                                 activation=params.get("activation", "sine"), output_scale=out_scale)
    if eps is None and params.get("eps") is not None:
        eps = float(params["eps"])
    if eps is None:
        j_data0, _, _ = pinn.pinn_loss(init, obs.positions, obs.pressures, colloc, obs.k, 0.0, with_grad=False)
        eps = float(params.get("eps_rel", 1e-2)) * j_data0 / pinn.pde_loss(init, colloc, obs.k)
    config = pinn.PinnConfig(colloc, eps=eps, lr=float(params.get("lr", 1e-3)),
                             iterations=int(params.get("iterations", 3000)),
                             optimizer=params.get("optimizer", "adam"), seed=ctx.seed)
    result = pinn.pinn_train(obs, config, init)
    model = result.model
    diagnostics = {"eps": result.eps, "j_data": result.trace[-1][1]}
    if model.activations[0] != "relu":
        diagnostics["pde_residual_per_point"] = pinn.pde_loss(model, colloc, obs.k) / len(colloc)
    payload = {"type": "mlp", **mlp.model_to_dict(model)}
    return Fitted(payload, io.predictor(payload), exact=False, diagnostics=diagnostics)


def fit_pinn(obs, ctx, params):
    return _neural_field(obs, ctx, params, None)


def fit_nn(obs, ctx, params):
    return _neural_field(obs, ctx, params, 0.0)


def _net_config(params, ctx):
    return NetConfig(hidden=tuple(params.get("hidden", (64, 64))), activation=params.get("activation", "tanh"),
                     iterations=int(params.get("iterations", 2000)), lr=float(params.get("lr", 1e-3)),
                     optimizer=params.get("optimizer", "adam"), seed=ctx.seed)


def _training_seed(ctx):
    return int(np.random.SeedSequence([ctx.seed, int(round(ctx.freq_hz * 1000)), 1]).generate_state(1)[0])


def fit_pcnn(obs, ctx, params):
    scene = ctx.scene
    n = int(params.get("n_directions") or default_plane_wave_count(obs.k, _radius(ctx)))
    basis = BasisSpec.plane_waves(n)
    targets = scene.region.grid(int(params.get("target_grid", 5)))
    data = generate_training_set(scene, obs.k, int(params.get("n_pairs", 64)), seed=_training_seed(ctx),
                                 target_kind="expansion_coeffs", target_points=targets, basis=basis,
                                 lam=float(params.get("target_lambda", 1e-6)))
    model = supervised_train(data, config=_net_config(params, ctx))
    gamma = model.predict(obs.pressures)
    payload = io.expansion_payload(basis, gamma, obs.k)
    return Fitted(payload, io.predictor(payload), diagnostics={"train_loss": model.loss_trace[-1]})


def fit_supervised_field(obs, ctx, params):
    if ctx.eval_points is None:
        raise DomainError("grid-sample networks need evaluation points")
    data = generate_training_set(ctx.scene, obs.k, int(params.get("n_pairs", 64)), seed=_training_seed(ctx),
                                 target_kind="field_samples", target_points=ctx.eval_points)
    model = supervised_train(data, config=_net_config(params, ctx))
    payload = io.samples_payload(ctx.eval_points, model.predict(obs.pressures), obs.k)
    return Fitted(payload, io.predictor(payload), exact=False, diagnostics={"train_loss": model.loss_trace[-1]})


_LAMBDA = {"lambda", "lambda_rel"}
_NET = {"hidden", "activation", "iterations", "lr", "optimizer", "n_pairs"}
_FIELD_NET = {"hidden", "activation", "iterations", "lr", "optimizer", "collocation"}

# name -> (fit function, accepted parameter names)
ESTIMATORS = {
    "plane_wave_ridge": (fit_plane_wave_ridge, _LAMBDA | {"n_directions"}),
    "spherical_wave_ridge": (fit_spherical_wave_ridge, _LAMBDA | {"order", "rule"}),
    "equivalent_source_ridge": (fit_equivalent_source_ridge, _LAMBDA | {"n_sources"}),
    "plane_wave_l1": (fit_plane_wave_l1, _LAMBDA | {"n_directions", "max_iter"}),
    "uniform_kernel": (fit_uniform_kernel, {"lambda", "select_lambda"}),
    "directional_kernel": (fit_directional_kernel, {"lambda", "select_lambda", "beta", "direction"}),
    "gaussian_kernel": (fit_gaussian_kernel, {"lambda", "select_lambda", "sigma"}),
    "pinn": (fit_pinn, _FIELD_NET | {"eps", "eps_rel"}),
    "nn": (fit_nn, _FIELD_NET),
    "pcnn": (fit_pcnn, _NET | {"n_directions", "target_grid", "target_lambda"}),
    "supervised_field": (fit_supervised_field, _NET),
}


def validate_params(name, params, location=""):
    if name not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {name!r}", location)
    if not isinstance(params, dict):
        raise ConfigError("estimator parameters must be a mapping", location)
    unknown = sorted(set(params) - ESTIMATORS[name][1])
    if unknown:
        raise ConfigError(f"unknown parameter(s) {', '.join(unknown)} for {name}", location)


def fit_estimator(name, obs, ctx, params=None):
    params = params or {}
    validate_params(name, params)
    fitted = ESTIMATORS[name][0](obs, ctx, params)
    fitted.payload["estimator"] = name
    fitted.payload["frequency_hz"] = float(ctx.freq_hz)
    return fitted
