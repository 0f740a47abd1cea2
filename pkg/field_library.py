"""
Field Library
Named vector fields used by the norm, degree and verification commands.
"""
import re
from typing import Callable, Dict, List, Tuple

import numpy as np

from domain_field import VectorField, Smoothness
from errors import FieldLookupError, ConfigError, InvalidParameterError
from options import parse_option_string, parse_value, take


def identity_field(n: int = 2) -> VectorField:
    n = int(n)
    return VectorField(
        name="identity" if n == 2 else f"identity:n={n}",
        dim_in=n,
        dim_out=n,
        evaluator=lambda x: x.copy(),
        jacobian=lambda x: np.broadcast_to(np.eye(n), (len(x), n, n)).copy(),
        lipschitz=1.0,
    )


def affine_field(A=None, b=None) -> VectorField:
    """x ↦ Ax + b"""
    A = np.array([[2.0, 1.0], [0.0, 1.0]]) if A is None else np.asarray(A, dtype=float)
    if A.ndim == 1:
        side = int(round(np.sqrt(A.size)))
        if side * side != A.size:
            raise InvalidParameterError(f"Affine matrix needs n² entries, got {A.size}")
        A = A.reshape(side, side)
    n = A.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise InvalidParameterError(f"Affine offset must have {n} entries")
    name = "affine:a=" + ",".join(f"{v:g}" for v in A.ravel()) + ":b=" + ",".join(f"{v:g}" for v in b)
    return VectorField(
        name=name,
        dim_in=n,
        dim_out=n,
        evaluator=lambda x: x @ A.T + b,
        jacobian=lambda x: np.broadcast_to(A, (len(x), n, n)).copy(),
        lipschitz=float(np.linalg.norm(A, 2)),
    )


def winding_field(k: int = 1) -> VectorField:
    """w_k(r, θ) = (r cos kθ, r sin kθ); det ∇w_k = k away from the origin"""
    k = int(k)

    def evaluate(x):
        r = np.hypot(x[:, 0], x[:, 1])
        theta = np.arctan2(x[:, 1], x[:, 0])
        return np.stack([r * np.cos(k * theta), r * np.sin(k * theta)], axis=1)

    def jac(x):
        theta = np.arctan2(x[:, 1], x[:, 0])
        c, s = np.cos(theta), np.sin(theta)
        ck, sk = np.cos(k * theta), np.sin(k * theta)
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = ck * c + k * sk * s
        g[:, 0, 1] = ck * s - k * sk * c
        g[:, 1, 0] = sk * c - k * ck * s
        g[:, 1, 1] = sk * s + k * ck * c
        return g

    return VectorField(
        name=f"winding:k={k}",
        dim_in=2,
        dim_out=2,
        evaluator=evaluate,
        jacobian=jac,
        lipschitz=float(max(1, abs(k))),
    )


def perturbation_field(eps: float = 0.1) -> VectorField:
    """x + ε(sin πx₂, sin πx₁)"""
    eps = float(eps)

    def evaluate(x):
        return x + eps * np.stack([np.sin(np.pi * x[:, 1]), np.sin(np.pi * x[:, 0])], axis=1)

    def jac(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = 1.0
        g[:, 1, 1] = 1.0
        g[:, 0, 1] = eps * np.pi * np.cos(np.pi * x[:, 1])
        g[:, 1, 0] = eps * np.pi * np.cos(np.pi * x[:, 0])
        return g

    return VectorField(f"perturbation:eps={eps:g}", 2, 2, evaluate, jac, lipschitz=1.0 + abs(eps) * np.pi)


def quadratic_field() -> VectorField:
    """(x₁², x₂)"""
    def jac(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = 2.0 * x[:, 0]
        g[:, 1, 1] = 1.0
        return g

    return VectorField("quadratic", 2, 2, lambda x: np.stack([x[:, 0] ** 2, x[:, 1]], axis=1), jac)


def mixed_field() -> VectorField:
    """(x₁², x₁x₂)"""
    def jac(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = 2.0 * x[:, 0]
        g[:, 1, 0] = x[:, 1]
        g[:, 1, 1] = x[:, 0]
        return g

    return VectorField("mixed", 2, 2, lambda x: np.stack([x[:, 0] ** 2, x[:, 0] * x[:, 1]], axis=1), jac)


def trig_field() -> VectorField:
    """(sin x₁ cos x₂, x₁x₂)"""
    def evaluate(x):
        return np.stack([np.sin(x[:, 0]) * np.cos(x[:, 1]), x[:, 0] * x[:, 1]], axis=1)

    def jac(x):
        g = np.empty((len(x), 2, 2))
        g[:, 0, 0] = np.cos(x[:, 0]) * np.cos(x[:, 1])
        g[:, 0, 1] = -np.sin(x[:, 0]) * np.sin(x[:, 1])
        g[:, 1, 0] = x[:, 1]
        g[:, 1, 1] = x[:, 0]
        return g

    return VectorField("trig", 2, 2, evaluate, jac)


def holder_field(alpha: float = 0.6, level: int = 8, amplitude: float = 0.1,
                 base: str = "identity") -> VectorField:
    """
    Lacunary Hölder field

    base(x) + A·Σ_{j=1..L} 2^{-αj} (sin(2^j x₂), sin(2^j x₁)). The partial
    sums are smooth; the tag records the limiting exponent α.

    Args:
        alpha: Hölder exponent in (0, 1)
        level: truncation level L
        amplitude: A
        base: "identity" or "zero"
    """
    alpha = float(alpha)
    level = int(level)
    amplitude = float(amplitude)
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"holder alpha must lie in (0, 1), got {alpha}")
    if level < 1:
        raise InvalidParameterError(f"holder level must be >= 1, got {level}")
    if base not in ("identity", "zero"):
        raise InvalidParameterError(f"holder base must be identity or zero, got {base!r}")
    freqs = 2.0 ** np.arange(1, level + 1)
    coeffs = amplitude * freqs ** (-alpha)
    shift = 1.0 if base == "identity" else 0.0

    def evaluate(x):
        s1 = np.sin(np.outer(x[:, 1], freqs)) @ coeffs
        s2 = np.sin(np.outer(x[:, 0], freqs)) @ coeffs
        return shift * x + np.stack([s1, s2], axis=1)

    def jac(x):
        g = np.zeros((len(x), 2, 2))
        g[:, 0, 0] = shift
        g[:, 1, 1] = shift
        g[:, 0, 1] = np.cos(np.outer(x[:, 1], freqs)) @ (coeffs * freqs)
        g[:, 1, 0] = np.cos(np.outer(x[:, 0], freqs)) @ (coeffs * freqs)
        return g

    name = f"holder:alpha={alpha:g}:level={level}:amplitude={amplitude:g}:base={base}"
    return VectorField(name, 2, 2, evaluate, jac, smoothness=Smoothness.holder(alpha))


def fold_field() -> VectorField:
    """
    Radial fold x(1 - |x|²)

    On the unit disk the boundary collapses to the origin and the critical
    circle |x| = 1/√3 separates a sign-+ branch from a sign-- branch, so the
    degree is 0 off the critical image.
    """
    def evaluate(x):
        return x * (1.0 - np.sum(x ** 2, axis=1))[:, None]

    def jac(x):
        r2 = np.sum(x ** 2, axis=1)
        g = (1.0 - r2)[:, None, None] * np.eye(2)[None] - 2.0 * np.einsum("ni,nj->nij", x, x)
        return g

    return VectorField("fold", 2, 2, evaluate, jac)


# name -> (builder, positional parameter names)
_BUILDERS: Dict[str, Tuple[Callable[..., VectorField], List[str]]] = {
    "identity": (identity_field, ["n"]),
    "affine": (affine_field, ["a", "b"]),
    "winding": (winding_field, ["k"]),
    "perturbation": (perturbation_field, ["eps"]),
    "quadratic": (quadratic_field, []),
    "mixed": (mixed_field, []),
    "trig": (trig_field, []),
    "holder": (holder_field, ["alpha", "level", "amplitude", "base"]),
    "fold": (fold_field, []),
}

_KEYWORDS = {"affine": {"a": "A", "b": "b"}}


def field_library() -> Dict[str, VectorField]:
    """
    Default members of the field library, keyed by display name

    Returns:
        dict with identity, affine, winding(-2..3), perturbation, quadratic,
        mixed, trig, holder(0.6, level=8) and fold
    """
    library = {
        "identity": identity_field(),
        "affine": affine_field(),
        "perturbation": perturbation_field(),
        "quadratic": quadratic_field(),
        "mixed": mixed_field(),
        "trig": trig_field(),
        "holder": holder_field(0.6, 8),
        "fold": fold_field(),
    }
    for k in range(-2, 4):
        library[f"winding({k})"] = winding_field(k)
    return library


def get_field(name: str, **options) -> VectorField:
    """
    Build a library field by name

    Raises:
        FieldLookupError: unknown name
        ConfigError: unknown option for that field
    """
    key = name.strip().lower()
    if key not in _BUILDERS:
        raise FieldLookupError(f"Unknown field '{name}'. Available: {', '.join(sorted(_BUILDERS))}")
    builder, params = _BUILDERS[key]
    renames = _KEYWORDS.get(key, {})
    kwargs = {}
    for opt, value in options.items():
        if opt not in params:
            raise ConfigError(f"Unknown option '{opt}' for field '{key}'", key=opt)
        kwargs[renames.get(opt, opt)] = value
    return builder(**kwargs)


_CALL_FORM = re.compile(r"^\s*([A-Za-z_]+)\s*\((.*)\)\s*$")


def parse_field_spec(spec: str) -> VectorField:
    """
    Parse ``winding:k=2``, ``winding(2)`` or ``holder(0.6, level=8)``

    Raises:
        FieldLookupError: unknown field name
        ConfigError: malformed options
    """
    match = _CALL_FORM.match(spec or "")
    if match:
        name = match.group(1).lower()
        if name not in _BUILDERS:
            raise FieldLookupError(f"Unknown field '{name}'")
        positional = _BUILDERS[name][1]
        options = {}
        args = [a.strip() for a in match.group(2).split(",") if a.strip()]
        for i, arg in enumerate(args):
            if "=" in arg:
                key, value = arg.split("=", 1)
                options[key.strip().lower()] = parse_value(value)
            elif i < len(positional):
                options[positional[i]] = parse_value(arg)
            else:
                raise ConfigError(f"Too many arguments in {spec!r}", key=arg)
        return get_field(name, **options)

    name, options = parse_option_string(spec)
    if name not in _BUILDERS:
        raise FieldLookupError(f"Unknown field '{name}' in {spec!r}")
    take(options, spec, set(_BUILDERS[name][1]))
    return get_field(name, **options)
