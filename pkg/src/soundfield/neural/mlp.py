"""Dense networks with exact input Laplacians.

The Laplacian is obtained by pushing second-order Taylor streams through the
network, one stream per input axis: each stream carries the value, the first
and the second directional derivative along that axis. Parameter gradients
of losses that involve the Laplacian are computed by a hand-written reverse
pass through those streams.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, ModelCorruptError, UnsupportedForPDEError


def _sine(z):
    s, c = np.sin(z), np.cos(z)
    return s, c, -s, -c


def _tanh(z):
    t = np.tanh(z)
    d1 = 1.0 - t * t
    return t, d1, -2.0 * t * d1, -2.0 * d1 * (1.0 - 3.0 * t * t)


def _relu(z):
    pos = (z > 0).astype(float)
    zero = np.zeros_like(z)
    return z * pos, pos, zero, zero


def _identity(z):
    one = np.ones_like(z)
    zero = np.zeros_like(z)
    return z, one, zero, zero


# each entry returns (f, f', f'', f''') evaluated at z
ACTIVATIONS = {"sine": _sine, "tanh": _tanh, "relu": _relu, "identity": _identity}
SMOOTH = {"sine", "tanh", "identity"}

laplacian_calls = 0


@dataclass
class MlpModel:
    """Fully connected network ``x -> out`` with affine input normalisation.

    Inputs are mapped to ``(x - center) / scale`` before the first layer and
    outputs are multiplied by ``output_scale``. For implicit field
    representations the input width is 3 and the two outputs are the real
    and imaginary parts of the pressure.
    """

    widths: list
    activations: list
    weights: list
    biases: list
    center: np.ndarray = None
    scale: float = 1.0
    output_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.widths = [int(w) for w in self.widths]
        if len(self.activations) != len(self.widths) - 1:
            raise ModelCorruptError("one activation per layer is required")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ModelCorruptError(f"unknown activation {act!r}")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[i + 1], self.widths[i]) or b.shape != (self.widths[i + 1],):
                raise ModelCorruptError(f"layer {i} has inconsistent shapes")
        if self.center is None:
            self.center = np.zeros(self.widths[0])
        self.center = np.asarray(self.center, dtype=float).reshape(self.widths[0])
        self.scale = float(self.scale)
        self.output_scale = float(self.output_scale)

    @property
    def n_layers(self):
        return len(self.weights)

    def params(self):
        return self.weights + self.biases

    def with_params(self, params):
        n = self.n_layers
        return MlpModel(self.widths, list(self.activations), [p.copy() for p in params[:n]],
                        [p.copy() for p in params[n:]], self.center.copy(), self.scale,
                        self.output_scale, dict(self.meta))

    def copy(self):
        return self.with_params(self.params())

    def check_finite(self):
        vals = self.params() + [self.center, np.array([self.scale, self.output_scale])]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ModelCorruptError("model parameters are not finite")
        if self.scale == 0:
            raise ModelCorruptError("input scale must be nonzero")


def init_mlp(widths, activations, seed=0, center=None, scale=1.0, first_omega=None, output_scale=1.0):
    """Randomly initialised network.

    Hidden layers use the uniform ``sqrt(6 / fan_in)`` bound. When
    ``first_omega`` is given the first layer weights are random directions
    with norms drawn from ``[first_omega / 2, first_omega]``, which for sine
    activations yields spatial frequencies comparable to ``first_omega``.
    """
    rng = np.random.default_rng(seed)
    if isinstance(activations, str):
        activations = [activations] * (len(widths) - 2) + ["identity"]
    weights, biases = [], []
    for i in range(len(widths) - 1):
        fan_in, fan_out = widths[i], widths[i + 1]
        if i == 0 and first_omega is not None:
            dirs = rng.normal(size=(fan_out, fan_in))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            w = dirs * rng.uniform(0.5 * first_omega, first_omega, size=(fan_out, 1))
            b = rng.uniform(-np.pi, np.pi, size=fan_out)
        else:
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b = np.zeros(fan_out)
        weights.append(w)
        biases.append(b)
    return MlpModel(list(widths), list(activations), weights, biases, center, scale, output_scale)


def _as_points(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != model.widths[0]:
        raise DomainError(f"expected inputs of width {model.widths[0]}, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise DomainError("network inputs must be finite")
    return x, single


def forward(model, x, cache=None):
    """Real network outputs of shape (P, n_out) for inputs of shape (P, n_in)."""
    a = (x - model.center) / model.scale
    for w, b, act in zip(model.weights, model.biases, model.activations):
        z = a @ w.T + b
        if cache is not None:
            cache.append((a, z))
        a = ACTIVATIONS[act](z)[0]
    return a * model.output_scale


def backward(model, cache, grad_out):
    """Parameter gradients given dLoss/d(outputs) for a :func:`forward` cache."""
    g = grad_out * model.output_scale
    gw, gb = [None] * model.n_layers, [None] * model.n_layers
    for layer in range(model.n_layers - 1, -1, -1):
        a, z = cache[layer]
        gz = g * ACTIVATIONS[model.activations[layer]](z)[1]
        gw[layer] = gz.T @ a
        gb[layer] = gz.sum(axis=0)
        g = gz @ model.weights[layer]
    return gw + gb


def taylor_forward(model, x, cache=None):
    """Outputs and input Laplacians, both of shape (P, n_out).

    Raises
    ------
    UnsupportedForPDEError
        If any layer uses a non-smooth activation.
    """
    global laplacian_calls
    for act in model.activations:
        if act not in SMOOTH:
            raise UnsupportedForPDEError(f"activation {act!r} has no second derivative")
    laplacian_calls += 1
    n_in = model.widths[0]
    p = len(x)
    a = (x - model.center) / model.scale
    da = np.broadcast_to(np.eye(n_in)[:, None, :] / model.scale, (n_in, p, n_in))
    d2a = np.zeros((n_in, p, n_in))
    for w, b, act in zip(model.weights, model.biases, model.activations):
        z = a @ w.T + b
        dz = da @ w.T
        d2z = d2a @ w.T
        f0, f1, f2, f3 = ACTIVATIONS[act](z)
        if cache is not None:
            cache.append((a, da, d2a, z, dz, d2z, f1, f2, f3))
        a = f0
        da = f1 * dz
        d2a = f2 * dz * dz + f1 * d2z
    return a * model.output_scale, d2a.sum(axis=0) * model.output_scale


def taylor_backward(model, cache, grad_value, grad_laplacian):
    """Parameter gradients given dLoss/d(outputs) and dLoss/d(Laplacian)."""
    n_in = model.widths[0]
    gh = grad_value * model.output_scale
    gdh = np.zeros((n_in,) + gh.shape)
    gd2h = np.broadcast_to(grad_laplacian * model.output_scale, (n_in,) + gh.shape)
    gw, gb = [None] * model.n_layers, [None] * model.n_layers
    for layer in range(model.n_layers - 1, -1, -1):
        a, da, d2a, z, dz, d2z, f1, f2, f3 = cache[layer]
        g_d2z = f1 * gd2h
        g_dz = 2.0 * f2 * dz * gd2h + f1 * gdh
        g_z = gh * f1 + np.sum(f3 * dz * dz * gd2h + f2 * d2z * gd2h + f2 * dz * gdh, axis=0)
        w = model.weights[layer]
        gw[layer] = g_z.T @ a + np.einsum("ipo,ipn->on", g_dz, da) + np.einsum("ipo,ipn->on", g_d2z, d2a)
        gb[layer] = g_z.sum(axis=0)
        gh = g_z @ w
        gdh = g_dz @ w
        gd2h = g_d2z @ w
    return gw + gb


def _to_complex(out):
    if out.shape[-1] != 2:
        raise DomainError("complex interpretation needs exactly two outputs")
    return out[:, 0] + 1j * out[:, 1]


def mlp_forward(model, r):
    """Complex field value ``out[0] + j out[1]`` at position(s) ``r``."""
    model.check_finite()
    x, single = _as_points(model, r)
    val = _to_complex(forward(model, x))
    return val[0] if single else val


def mlp_laplacian(model, r):
    """Exact Laplacian of the complex network output with respect to ``r``."""
    model.check_finite()
    x, single = _as_points(model, r)
    lap = _to_complex(taylor_forward(model, x)[1])
    return lap[0] if single else lap


def model_to_dict(model):
    return {
        "widths": model.widths,
        "activations": model.activations,
        "center": model.center.tolist(),
        "scale": model.scale,
        "output_scale": model.output_scale,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "meta": model.meta,
    }


def model_from_dict(payload):
    return MlpModel(payload["widths"], payload["activations"], payload["weights"], payload["biases"],
                    payload["center"], payload["scale"], payload.get("output_scale", 1.0),
                    payload.get("meta", {}))


def save_model(path, model):
    with open(path, "w") as fh:
        json.dump({"type": "mlp", **model_to_dict(model)}, fh, indent=1)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
