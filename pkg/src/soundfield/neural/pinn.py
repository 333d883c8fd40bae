"""Implicit neural field fitted to microphone data with a Helmholtz penalty.

The loss is ``J_data + eps * J_PDE`` with

* ``J_data = sum_m |s_m - g(r_m)|^2`` over microphones and
* ``J_PDE = sum_n |(lap + k^2) g(r_n)|^2`` over collocation points.

With ``eps = 0`` the Laplacian is never evaluated and the fit is a plain
neural-network interpolator.
"""
import csv
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, TrainingDivergedError
from ..specfun import fibonacci_ball
from . import mlp
from .optim import make_optimizer

DEFAULT_HIDDEN = (8, 8, 5)
DEFAULT_COLLOCATION = 56


@dataclass
class PinnConfig:
    """Training settings.

    ``eps=None`` selects ``1e-2 * J_data / J_PDE`` measured at initialisation.
    """

    collocation: np.ndarray
    eps: float = None
    k: float = None
    lr: float = 1e-3
    iterations: int = 5000
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        self.collocation = np.asarray(self.collocation, dtype=float).reshape(-1, 3)
        if self.eps is not None and self.eps < 0:
            raise DomainError("PDE weight must be nonnegative")
        if self.iterations < 0:
            raise DomainError("iteration count must be nonnegative")


@dataclass
class PinnResult:
    model: mlp.MlpModel
    eps: float
    # rows of (iteration, J_data, J_PDE)
    trace: list

    @property
    def j_data(self):
        return np.array([row[1] for row in self.trace])

    @property
    def j_pde(self):
        return np.array([row[2] for row in self.trace])


def default_collocation(region, n=DEFAULT_COLLOCATION):
    """Fixed Fibonacci-ball collocation set filling the region's circumscribed ball."""
    return fibonacci_ball(n, region.circumradius, region.center)


def init_field_model(center, scale, k, seed=0, hidden=DEFAULT_HIDDEN, activation="sine", output_scale=1.0):
    """Network ``R^3 -> (Re, Im)`` whose first sine layer spans wavenumbers near ``k``.

    ``output_scale`` should match the magnitude of the observed pressures.
    """
    widths = [3, *hidden, 2]
    acts = [activation] * len(hidden) + ["identity"]
    omega = k * scale if activation == "sine" else None
    return mlp.init_mlp(widths, acts, seed=seed, center=center, scale=scale, first_omega=omega,
                        output_scale=output_scale)


def pinn_loss(model, positions, pressures, collocation, k, eps, with_grad=True):
    """Return ``(J_data, J_PDE, grads)``; ``grads`` is None unless requested.

    ``J_PDE`` is skipped entirely (and reported as NaN) when ``eps == 0``.
    """
    cache = [] if with_grad else None
    out = mlp.forward(model, positions, cache)
    err = out[:, 0] + 1j * out[:, 1] - pressures
    j_data = float(np.sum(err.real**2 + err.imag**2))
    grads = None
    if with_grad:
        g_out = 2.0 * np.stack([err.real, err.imag], axis=-1)
        grads = mlp.backward(model, cache, g_out)
    j_pde = float("nan")
    if eps > 0 and len(collocation):
        tcache = [] if with_grad else None
        val, lap = mlp.taylor_forward(model, collocation, tcache)
        res = lap + k * k * val
        j_pde = float(np.sum(res * res))
        if with_grad:
            g_res = 2.0 * eps * res
            pde_grads = mlp.taylor_backward(model, tcache, k * k * g_res, g_res)
            grads = [g + h for g, h in zip(grads, pde_grads)]
    return j_data, j_pde, grads


def pde_loss(model, collocation, k):
    """Unweighted ``J_PDE`` of a model."""
    val, lap = mlp.taylor_forward(model, np.asarray(collocation, dtype=float))
    res = lap + k * k * val
    return float(np.sum(res * res))


def pinn_train(obs, config, init):
    """Minimise ``J_data + eps J_PDE`` by full-batch first-order descent.

    Parameters
    ----------
    obs : ObservationSet
    config : PinnConfig
    init : MlpModel
        Starting network (copied, never modified).

    Returns
    -------
    PinnResult
        Final model, the weight actually used and the per-iteration trace.
        The trace has ``iterations + 1`` rows; row ``i`` holds the losses of
        the parameters before update ``i + 1``.

    Raises
    ------
    TrainingDivergedError
        When the loss becomes non-finite; ``checkpoint`` holds the last
        finite model.
    """
    init.check_finite()
    if init.widths[0] != 3 or init.widths[-1] != 2:
        raise DomainError("field models map 3 inputs to 2 outputs")
    k = obs.k if config.k is None else config.k
    positions, pressures = obs.positions, obs.pressures
    colloc = config.collocation
    eps = config.eps
    if eps is None:
        j_data0, _, _ = pinn_loss(init, positions, pressures, colloc, k, 0.0, with_grad=False)
        j_pde0 = pde_loss(init, colloc, k) if len(colloc) else 0.0
        eps = 1e-2 * j_data0 / j_pde0 if j_pde0 > 0 else 0.0
    opt = make_optimizer(config.optimizer, config.lr)
    model = init.copy()
    last_good = model
    trace = []
    for it in range(config.iterations + 1):
        j_data, j_pde, grads = pinn_loss(model, positions, pressures, colloc, k, eps,
                                         with_grad=it < config.iterations)
        if not np.isfinite(j_data) or (eps > 0 and not np.isfinite(j_pde)):
            raise TrainingDivergedError(f"loss diverged at iteration {it}", checkpoint=last_good)
        last_good = model
        trace.append((it, j_data, j_pde))
        if it == config.iterations:
            break
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise TrainingDivergedError(f"gradient diverged at iteration {it}", checkpoint=last_good)
        model = model.with_params(opt.step(model.params(), grads))
    model.meta = {"eps": eps, "k": k}
    return PinnResult(model=model, eps=eps, trace=trace)


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "j_data", "j_pde"])
        for it, jd, jp in trace:
            writer.writerow([it, repr(jd), repr(jp)])
