"""Solution files: JSON documents tagged with a ``type`` field.

``expansion``
    basis description, wavenumber and complex coefficients.
``kernel``
    kernel spec, regulariser, microphone positions and representer weights.
``mlp``
    network parameters of an implicit neural field.
``samples``
    field values at fixed points (networks that only predict a grid).

Every file may also carry ``frequency_hz`` and ``estimator``.
"""
import json

import numpy as np

from ..errors import ConfigError, DomainError
from ..expansion import BasisSpec, evaluate_expansion
from ..kernel import kernel_predict, kernel_solution_from_dict
from ..neural.mlp import mlp_forward, model_from_dict

SOLUTION_TYPES = ("expansion", "kernel", "mlp", "samples")


def complex_to_lists(z):
    z = np.asarray(z, dtype=complex)
    return z.real.tolist(), z.imag.tolist()


def basis_to_dict(spec):
    out = {"kind": spec.kind}
    if spec.kind == "plane_wave":
        out["directions"] = spec.directions.tolist()
    elif spec.kind == "spherical_wave":
        out["order"] = spec.order
        out["center"] = spec.center.tolist()
    else:
        out["sources"] = spec.sources.tolist()
    return out


def basis_from_dict(payload):
    return BasisSpec(**payload)


def expansion_payload(spec, coefficients, k, lam=None):
    re, im = complex_to_lists(coefficients)
    return {"type": "expansion", "k": float(k), "basis": basis_to_dict(spec), "lambda": lam,
            "coefficients_real": re, "coefficients_imag": im}


def samples_payload(points, values, k):
    re, im = complex_to_lists(values)
    return {"type": "samples", "k": float(k), "points": np.asarray(points).tolist(),
            "values_real": re, "values_imag": im}


def save_solution(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_solution(path):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read solution ({exc})", str(path)) from None
    if not isinstance(payload, dict) or payload.get("type") not in SOLUTION_TYPES:
        raise ConfigError("not a solution file (missing or unknown 'type')", str(path))
    return payload


def solution_wavenumber(payload):
    if payload["type"] == "kernel":
        return float(payload["spec"]["k"])
    if payload["type"] == "mlp":
        return float(payload["meta"]["k"])
    return float(payload["k"])


def predictor(payload):
    """Callable mapping (N, 3) positions to complex pressures."""
    kind = payload["type"]
    if kind == "kernel":
        sol = kernel_solution_from_dict(payload)
        return lambda pts: kernel_predict(sol, pts)
    if kind == "expansion":
        spec = basis_from_dict(payload["basis"])
        gamma = np.asarray(payload["coefficients_real"]) + 1j * np.asarray(payload["coefficients_imag"])
        k = payload["k"]
        return lambda pts: evaluate_expansion(spec, gamma, pts, k)
    if kind == "mlp":
        model = model_from_dict(payload)
        return lambda pts: mlp_forward(model, pts)
    if kind == "samples":
        ref = np.asarray(payload["points"], dtype=float)
        values = np.asarray(payload["values_real"]) + 1j * np.asarray(payload["values_imag"])

        def lookup(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            if pts.shape == ref.shape and np.allclose(pts, ref, rtol=0, atol=1e-12):
                return values.copy()
            raise DomainError("a grid-sample solution can only be evaluated at its own grid")

        return lookup
    raise DomainError(f"unknown solution type {kind!r}")
