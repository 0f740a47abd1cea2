"""
Jacobian Core
The field j u, the distributional pairing <Ju, ψ>, sphere projections u^a,
the cofactor identity and the mollified half-cylinder extension U(x, t).
"""
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import quad
from scipy.special import exp1, gamma

import config
from domain_field import (
    Domain,
    VectorField,
    Smoothness,
    as_points,
    cofactor,
    determinant,
    gradient,
)
from errors import (
    InvalidParameterError,
    SingularPointError,
    UnsupportedTestFunctionError,
    ConfigError,
)
from options import parse_option_string, take


@dataclass(frozen=True, eq=False)
class TestFunction:
    """
    Test function ψ: a C¹ compactly supported function or an indicator χ_E.

    Args:
        name: display name
        kind: "smooth" or "indicator"
        evaluator: (N, n) -> (N,)
        grad: (N, n) -> (N, n); zero for indicators
        sup_bound: declared bound on |ψ|
        support: (center, radius) ball containing supp ψ, if known
        region: the set E for indicators
    """
    __test__ = False

    name: str
    kind: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    sup_bound: float = 1.0
    support: Optional[Tuple[Tuple[float, ...], float]] = None
    region: Optional[object] = None

    def __call__(self, x) -> np.ndarray:
        pts, single = as_points(x)
        out = np.asarray(self.evaluator(pts), dtype=float).reshape(len(pts))
        return out[0] if single else out

    def gradient(self, x) -> np.ndarray:
        pts, single = as_points(x)
        out = np.asarray(self.grad(pts), dtype=float).reshape(pts.shape)
        return out[0] if single else out

    @property
    def is_smooth(self) -> bool:
        return self.kind == "smooth"

    def scaled(self, factor: float) -> "TestFunction":
        factor = float(factor)
        base = self
        return TestFunction(
            name=f"{factor:g}*{base.name}",
            kind=base.kind,
            evaluator=lambda x: factor * base(x),
            grad=lambda x: factor * base.gradient(x),
            sup_bound=abs(factor) * base.sup_bound,
            support=base.support,
            region=base.region,
        )

    def multiply(self, g: Callable, grad_g: Callable, name: str = None,
                 bound: float = None) -> "TestFunction":
        """ψ·g with gradient g∇ψ + ψ∇g"""
        base = self

        def grad(x):
            return g(x)[:, None] * base.gradient(x) + base(x)[:, None] * grad_g(x)

        return TestFunction(
            name=name or f"{base.name}*g",
            kind=base.kind,
            evaluator=lambda x: base(x) * g(x),
            grad=grad,
            sup_bound=base.sup_bound * (bound if bound is not None else 1.0),
            support=base.support,
            region=base.region,
        )

    def check_support(self, domain: Domain, tol: float = 1e-12):
        """
        Raises:
            InvalidParameterError: ψ or ∇ψ does not vanish on ∂Ω
        """
        if not self.is_smooth:
            return
        vals = np.abs(self(domain.boundary_nodes))
        grads = np.linalg.norm(self.gradient(domain.boundary_nodes), axis=1)
        if np.max(vals, initial=0.0) > tol or np.max(grads, initial=0.0) > tol:
            raise InvalidParameterError(f"Test function '{self.name}' is not supported inside the domain")


def bump(center=(0.0, 0.0), radius: float = 0.3, height: float = 1.0) -> TestFunction:
    """ψ(x) = h·max(0, 1 - |x - c|²/r²)³"""
    center = np.asarray(center, dtype=float)
    radius = float(radius)
    height = float(height)
    if radius <= 0:
        raise InvalidParameterError(f"bump radius must be positive, got {radius}")

    def evaluate(x):
        q = np.maximum(0.0, 1.0 - np.sum((x - center) ** 2, axis=1) / radius ** 2)
        return height * q ** 3

    def grad(x):
        q = np.maximum(0.0, 1.0 - np.sum((x - center) ** 2, axis=1) / radius ** 2)
        return (height * 3.0 * q ** 2 * (-2.0 / radius ** 2))[:, None] * (x - center)

    name = f"bump:r={radius:g}:c=" + ",".join(f"{v:g}" for v in center)
    if height != 1.0:
        name += f":h={height:g}"
    return TestFunction(name, "smooth", evaluate, grad, abs(height), (tuple(center), radius))


def bump_integral(radius: float, height: float = 1.0, n: int = 2) -> float:
    """∫ h(1 - |x|²/r²)³ dx = h·r^n·|S^{n-1}|·∫_0^1 (1-ρ²)³ρ^{n-1} dρ"""
    sphere = 2.0 * np.pi ** (n / 2) / gamma(n / 2)
    radial, _ = quad(lambda r: (1 - r * r) ** 3 * r ** (n - 1), 0.0, 1.0)
    return float(height * radius ** n * sphere * radial)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_slope(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


def plateau(lo, hi, ramp: float, height: float = 1.0) -> TestFunction:
    """
    C¹ smoothed indicator of the box [lo, hi]

    Equal to ``height`` on [lo + ramp, hi - ramp], zero outside [lo, hi].
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    ramp = float(ramp)
    if ramp <= 0 or np.any(hi - lo < 2 * ramp):
        raise InvalidParameterError(f"plateau needs 0 < 2*ramp <= side, got ramp={ramp}")

    def factors(x):
        a = (x - lo) / ramp
        b = (hi - x) / ramp
        return _smoothstep(a) * _smoothstep(b), (
            _smoothstep_slope(a) * _smoothstep(b) - _smoothstep(a) * _smoothstep_slope(b)) / ramp

    def evaluate(x):
        f, _ = factors(x)
        return height * np.prod(f, axis=1)

    def grad(x):
        f, df = factors(x)
        out = np.empty_like(x)
        for i in range(x.shape[1]):
            others = np.prod(np.delete(f, i, axis=1), axis=1)
            out[:, i] = df[:, i] * others
        return height * out

    center = tuple(((lo + hi) / 2).tolist())
    return TestFunction(
        name="plateau:lo=" + ",".join(f"{v:g}" for v in lo) + ":hi=" + ",".join(f"{v:g}" for v in hi),
        kind="smooth",
        evaluator=evaluate,
        grad=grad,
        sup_bound=abs(height),
        support=(center, float(np.linalg.norm(hi - lo) / 2)),
    )


def indicator(region) -> TestFunction:
    """χ_E for a set exposing ``contains`` (see degree.LipschitzSet)"""
    return TestFunction(
        name=f"indicator:{getattr(region, 'name', 'E')}",
        kind="indicator",
        evaluator=lambda x: region.contains(x).astype(float),
        grad=lambda x: np.zeros_like(x),
        sup_bound=1.0,
        region=region,
    )


def zero_test(n: int = 2) -> TestFunction:
    return TestFunction("zero", "smooth", lambda x: np.zeros(len(x)), lambda x: np.zeros_like(x), 0.0)


def parse_test_spec(spec: str, domain: Domain = None) -> TestFunction:
    """
    Parse ``bump:r=0.3:c=0.5,0.5``, ``plateau:lo=..:hi=..:ramp=..`` or ``zero``

    The bump center defaults to the middle of the domain's bounding box.
    """
    name, opts = parse_option_string(spec)
    if domain is not None:
        lo, hi = domain.bounding_box()
        middle = tuple((np.asarray(lo) + np.asarray(hi)) / 2)
    else:
        middle = (0.0, 0.0)
    if name == "bump":
        take(opts, spec, {"r", "c", "h"})
        center = opts.get("c", middle)
        if not isinstance(center, tuple):
            raise ConfigError(f"Bump center in {spec!r} must be a comma vector", key="c")
        return bump(center, float(opts.get("r", 0.3)), float(opts.get("h", 1.0)))
    if name == "plateau":
        take(opts, spec, {"lo", "hi", "ramp", "h"})
        if "lo" not in opts or "hi" not in opts:
            raise ConfigError(f"plateau needs lo and hi in {spec!r}", key="lo")
        return plateau(opts["lo"], opts["hi"], float(opts.get("ramp", 0.05)), float(opts.get("h", 1.0)))
    if name == "zero":
        take(opts, spec, set())
        return zero_test()
    raise ConfigError(f"Unknown test function '{name}' in {spec!r}", key="test")


def j_field(u: VectorField, x, mode: str = "auto", domain: Domain = None) -> np.ndarray:
    """
    j u(x) = (1/n) cof(∇u(x))^T u(x)

    Returns:
        (n,) for one point, (N, n) for a batch
    """
    pts, single = as_points(x)
    g = gradient(u, pts, mode=mode, domain=domain)
    n = g.shape[-1]
    out = np.einsum("kji,kj->ki", cofactor(g), u(pts)) / n
    return out[0] if single else out


def _active_nodes(psi: TestFunction, domain: Domain) -> np.ndarray:
    vals = psi(domain.nodes)
    grads = psi.gradient(domain.nodes)
    return (np.abs(vals) > 0) | (np.linalg.norm(grads, axis=1) > 0)


def jacobian_pairing(u: VectorField, psi: TestFunction, domain: Domain,
                     mode: str = "divergence", gradient_mode: str = "auto") -> float:
    """
    <Ju, ψ> by quadrature

    Args:
        mode: "divergence" for -Σ w j u·∇ψ, "direct" for Σ w det∇u ψ

    Raises:
        UnsupportedTestFunctionError: indicator ψ in divergence mode
    """
    if mode == "divergence" and not psi.is_smooth:
        raise UnsupportedTestFunctionError(
            "Indicators pair with Ju through boundary integrals, not the divergence form")
    active = _active_nodes(psi, domain)
    if not np.any(active):
        return 0.0
    nodes = domain.nodes[active]
    weights = domain.weights[active]
    if mode == "divergence":
        ju = j_field(u, nodes, mode=gradient_mode, domain=domain)
        return float(-np.sum(weights * np.einsum("ki,ki->k", ju, psi.gradient(nodes))))
    if mode == "direct":
        det = determinant(gradient(u, nodes, mode=gradient_mode, domain=domain))
        return float(np.sum(weights * det * psi(nodes)))
    raise InvalidParameterError(f"Unknown pairing mode '{mode}'")


def pairing_both(u: VectorField, psi: TestFunction, domain: Domain) -> Dict[str, float]:
    """Both pairing modes and their gap"""
    div = jacobian_pairing(u, psi, domain, "divergence")
    direct = jacobian_pairing(u, psi, domain, "direct")
    return {"divergence": div, "direct": direct, "gap": abs(div - direct)}


@dataclass(frozen=True, eq=False)
class SphereField(VectorField):
    """u^a = (u - a)/|u - a| with its singular-fiber threshold"""
    base: Optional[VectorField] = None
    target: Optional[np.ndarray] = None
    eps_sing: float = 0.0

    def singular_mask(self, x) -> np.ndarray:
        pts, single = as_points(x)
        mask = np.linalg.norm(self.base(pts) - self.target, axis=1) < self.eps_sing
        return mask[0] if single else mask


def sphere_projection(u: VectorField, a, range_diameter: float = 1.0) -> SphereField:
    """
    Sphere projection u^a with analytic chain-rule gradient

    Nodes with |u(x) - a| below ``SINGULAR_FIBER_FACTOR·range_diameter`` are
    reported by ``singular_mask``; evaluation exactly on the fiber raises.
    """
    a = np.asarray(a, dtype=float)

    def offsets(x):
        v = u(x) - a
        r = np.linalg.norm(v, axis=1)
        if np.any(r == 0):
            hit = x[np.argmax(r == 0)]
            raise SingularPointError(f"u(x) = a at x = {hit.tolist()}")
        return v, r

    def evaluate(x):
        v, r = offsets(x)
        return v / r[:, None]

    def jac(x):
        v, r = offsets(x)
        w = v / r[:, None]
        m = v.shape[1]
        proj = np.eye(m)[None] - np.einsum("ki,kj->kij", w, w)
        return np.einsum("kij,kjl->kil", proj, gradient(u, x)) / r[:, None, None]

    return SphereField(
        name=f"sphere({u.name};a=" + ",".join(f"{v:g}" for v in a) + ")",
        dim_in=u.dim_in,
        dim_out=u.dim_out,
        evaluator=evaluate,
        jacobian=jac,
        smoothness=u.smoothness,
        fd_step=u.fd_step,
        base=u,
        target=a,
        eps_sing=config.SINGULAR_FIBER_FACTOR * range_diameter,
    )


def field_range_diameter(u: VectorField, domain: Domain) -> float:
    """Diameter of the bounding box of u over the interior nodes"""
    vals = u(domain.nodes)
    return float(np.linalg.norm(vals.max(axis=0) - vals.min(axis=0))) or 1.0


def sphere_pairing(u: VectorField, a, psi: TestFunction, domain: Domain) -> Tuple[float, int]:
    """
    <Ju^a, ψ> in divergence form

    Returns:
        (value, number of excluded singular-fiber nodes)
    """
    ua = sphere_projection(u, a, field_range_diameter(u, domain))
    active = _active_nodes(psi, domain)
    singular = ua.singular_mask(domain.nodes) & active
    keep = active & ~singular
    if np.any(singular):
        logger.warning(f"sphere_pairing: {int(singular.sum())} nodes on the singular fiber excluded")
    if not np.any(keep):
        return 0.0, int(singular.sum())
    nodes = domain.nodes[keep]
    ju = j_field(ua, nodes)
    value = -np.sum(domain.weights[keep] * np.einsum("ki,ki->k", ju, psi.gradient(nodes)))
    return float(value), int(singular.sum())


def cofactor_identity_residual(u: VectorField, psi: TestFunction, x) -> float:
    """
    max_i |Σ_j cof(∇u)_ij ∂_jψ - det(∇u with row i replaced by ∇ψ)|

    Accepts one point or a batch; returns the max over all of them.
    """
    pts, _ = as_points(x)
    g = gradient(u, pts)
    dpsi = psi.gradient(pts)
    lhs = np.einsum("kij,kj->ki", cofactor(g), dpsi)
    n = g.shape[-1]
    rhs = np.empty_like(lhs)
    for i in range(n):
        replaced = g.copy()
        replaced[:, i, :] = dpsi
        rhs[:, i] = np.linalg.det(replaced)
    return float(np.max(np.abs(lhs - rhs)))


def unit_ball_volume(n: int) -> float:
    """ω_n = π^{n/2} / Γ(n/2 + 1)"""
    return float(np.pi ** (n / 2) / gamma(n / 2 + 1))


assert abs(unit_ball_volume(2) - np.pi) < 1e-14
assert abs(unit_ball_volume(3) - 4.0 * np.pi / 3.0) < 1e-14


def _raw_profile(profile: str, r2: np.ndarray) -> np.ndarray:
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    if profile == "exponential":
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    else:
        out[inside] = (1.0 - r2[inside]) ** 4
    return out


def _raw_profile_slope(profile: str, r2: np.ndarray) -> np.ndarray:
    """d(profile)/d(r²)"""
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    if profile == "exponential":
        s = 1.0 - r2[inside]
        out[inside] = -np.exp(-1.0 / s) / s ** 2
    else:
        out[inside] = -4.0 * (1.0 - r2[inside]) ** 3
    return out


@lru_cache(maxsize=None)
def mollifier_constant(n: int, profile: str = "exponential") -> float:
    """Normalization c with ∫ c·profile = 1 over the unit ball"""
    if n == 2 and profile == "exponential":
        return float(1.0 / (np.pi * (np.exp(-1.0) - exp1(1.0))))
    if n == 2 and profile == "polynomial":
        return 5.0 / np.pi
    sphere = 2.0 * np.pi ** (n / 2) / gamma(n / 2)
    radial, _ = quad(lambda r: _raw_profile(profile, np.array([r * r]))[0] * r ** (n - 1), 0.0, 1.0)
    return float(1.0 / (sphere * radial))


@dataclass(frozen=True)
class Mollifier:
    """
    Radial bump η with unit mass and support in the unit ball.

    Profiles: "exponential" c·exp(-1/(1-|z|²)) and "polynomial" c·(1-|z|²)^4.
    """
    dimension: int = 2
    profile: str = "exponential"
    scale: Optional[float] = None

    def __post_init__(self):
        if self.profile not in ("exponential", "polynomial"):
            raise InvalidParameterError(f"Unknown mollifier profile '{self.profile}'")
        if self.scale is not None:
            check_scale(self.scale)

    @property
    def constant(self) -> float:
        return mollifier_constant(self.dimension, self.profile)

    def eta(self, z) -> np.ndarray:
        pts, single = as_points(z)
        out = self.constant * _raw_profile(self.profile, np.sum(pts ** 2, axis=1))
        return out[0] if single else out

    def grad_eta(self, z) -> np.ndarray:
        pts, single = as_points(z)
        slope = self.constant * _raw_profile_slope(self.profile, np.sum(pts ** 2, axis=1))
        out = 2.0 * slope[:, None] * pts
        return out[0] if single else out

    def eta_t(self, x, t: float = None) -> np.ndarray:
        """η_t(x) = t^{-n} η(x/t)"""
        t = check_scale(self.scale if t is None else t)
        return self.eta(np.asarray(x, dtype=float) / t) / t ** self.dimension

    def mass(self, t: float = None) -> float:
        """∫ η_t by radial quadrature"""
        t = check_scale(self.scale if t is None else t)
        n = self.dimension
        sphere = 2.0 * np.pi ** (n / 2) / gamma(n / 2)
        radial, _ = quad(
            lambda r: self.constant * _raw_profile(self.profile, np.array([(r / t) ** 2]))[0]
            * r ** (n - 1) / t ** n,
            0.0, t, epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(sphere * radial)

    def kernel_weights(self, points_per_axis: int = None):
        """
        Midpoint stencil of the unit ball

        Returns:
            (z, w, g, tau): nodes (K, n), value weights summing to 1, gradient
            weights with Σ g⊗z = -I, and t-derivative weights
            tau = -(n·w + z·g), so that for U(x,t) = Σ w ũ(x - t z):
            ∇U ≈ (1/t) Σ g ũ(x - t z), ∂_t U ≈ (1/t) Σ tau ũ(x - t z)
        """
        return _kernel_stencil(self.dimension, self.profile,
                               int(points_per_axis or config.KERNEL_POINTS_PER_AXIS))


@lru_cache(maxsize=None)
def _kernel_stencil(n: int, profile: str, points: int):
    if points < 16:
        raise InvalidParameterError(f"Kernel stencil needs >= 16 points per axis, got {points}")
    axis = -1.0 + (np.arange(points) + 0.5) * 2.0 / points
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    z = np.stack([m.ravel() for m in mesh], axis=1)
    r2 = np.sum(z ** 2, axis=1)
    raw = _raw_profile(profile, r2)
    keep = raw > 0
    z, r2, raw = z[keep], r2[keep], raw[keep]
    w = raw / raw.sum()
    g = 2.0 * (_raw_profile_slope(profile, r2) / raw.sum())[:, None] * z
    moment = np.einsum("ki,kj->ij", g, z)
    g = g @ (-np.linalg.inv(moment)).T
    tau = -(n * w + np.einsum("ki,ki->k", z, g))
    for arr in (z, w, g, tau):
        arr.setflags(write=False)
    return z, w, g, tau


def check_scale(t: float) -> float:
    """
    Raises:
        InvalidParameterError: t outside (0, 1)
    """
    t = float(t)
    if not 0 < t < 1:
        raise InvalidParameterError(f"Mollifier scale t must lie in (0, 1), got {t}")
    return t


class ExtensionField:
    """
    Half-cylinder extension U(x, t) = (η_t * ũ)(x).

    ũ reflects u evenly across ∂Ω inside a collar and is constant in the
    normal direction beyond it. Slices U(·, t) are cached per t.
    """

    def __init__(self, u: VectorField, mollifier: Mollifier, domain: Domain,
                 points_per_axis: int = None, collar: float = None):
        """
        Initialize the extension

        Args:
            u: base field on Ω
            mollifier: radial kernel
            domain: Ω (rectangle or disk)
            points_per_axis: kernel stencil density
            collar: reflection collar width (default: one cell)
        """
        if mollifier.dimension != domain.dimension:
            raise InvalidParameterError("Mollifier and domain dimensions differ")
        self.u = u
        self.mollifier = mollifier
        self.domain = domain
        self.collar = float(collar if collar is not None else domain.spacing)
        self.z, self.w, self.g, self.tau = mollifier.kernel_weights(points_per_axis)
        self.dimension = domain.dimension
        self.dim_out = u.dim_out
        self.name = f"ext({u.name})"
        self._lock = threading.Lock()
        self._slices: Dict[float, VectorField] = {}
        self.cache: Dict[Tuple, object] = {}
        logger.debug(f"ExtensionField over {domain.describe()} with {len(self.w)} kernel nodes")

    def extend(self, x) -> np.ndarray:
        """ũ at arbitrary points of ℝⁿ"""
        pts, single = as_points(x)
        out = self.u(self.fold_back(pts))
        return out[0] if single else out

    def fold_back(self, pts: np.ndarray) -> np.ndarray:
        """Map points of ℝⁿ to the point of Ω̄ whose value ũ copies"""
        d = self.domain
        if d.kind == "rectangle":
            lo = np.asarray(d.params["lo"])
            hi = np.asarray(d.params["hi"])
            below = np.minimum(np.maximum(lo - pts, 0.0), self.collar)
            above = np.minimum(np.maximum(pts - hi, 0.0), self.collar)
            inside = np.clip(pts, lo, hi)
            return inside + below - above
        c = np.asarray(d.params["center"])
        radius = d.params["radius"]
        v = pts - c
        r = np.linalg.norm(v, axis=1)
        outside = r > radius
        if not np.any(outside):
            return pts
        folded = pts.copy()
        excess = np.minimum(r[outside] - radius, self.collar)
        folded[outside] = c + v[outside] * ((radius - excess) / r[outside])[:, None]
        return folded

    def _stencil(self, pts: np.ndarray, t: np.ndarray, want_grad: bool, want_dt: bool):
        K = len(self.w)
        n = self.dimension
        values = np.empty((len(pts), self.dim_out))
        grads = np.empty((len(pts), self.dim_out, n)) if want_grad else None
        dts = np.empty((len(pts), self.dim_out)) if want_dt else None
        block = max(1, 400000 // K)
        for i0 in range(0, len(pts), block):
            p = pts[i0:i0 + block]
            tb = t[i0:i0 + block]
            shifted = p[:, None, :] - tb[:, None, None] * self.z[None, :, :]
            samples = self.extend(shifted.reshape(-1, n)).reshape(len(p), K, self.dim_out)
            values[i0:i0 + block] = np.einsum("k,pkm->pm", self.w, samples)
            if want_grad:
                grads[i0:i0 + block] = np.einsum("kj,pkm->pmj", self.g, samples) / tb[:, None, None]
            if want_dt:
                dts[i0:i0 + block] = np.einsum("k,pkm->pm", self.tau, samples) / tb[:, None]
        return values, grads, dts

    def _prepare(self, x, t):
        pts, single = as_points(x)
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), (len(pts),)).astype(float)
        if np.any(t_arr <= 0) or np.any(t_arr >= 1):
            check_scale(float(t_arr[(t_arr <= 0) | (t_arr >= 1)][0]))
        return pts, t_arr, single

    def evaluate(self, x, t) -> np.ndarray:
        """U(x, t)"""
        pts, t_arr, single = self._prepare(x, t)
        values, _, _ = self._stencil(pts, t_arr, False, False)
        return values[0] if single else values

    def spatial_gradient(self, x, t) -> np.ndarray:
        pts, t_arr, single = self._prepare(x, t)
        _, grads, _ = self._stencil(pts, t_arr, True, False)
        return grads[0] if single else grads

    def evaluate_with_joint_gradient(self, x, t):
        """(U, ∇̃U) with ∇̃U = (∇U | ∂_t U) of shape (N, m, n + 1)"""
        pts, t_arr, single = self._prepare(x, t)
        values, grads, dts = self._stencil(pts, t_arr, True, True)
        joint = np.concatenate([grads, dts[:, :, None]], axis=2)
        return (values[0], joint[0]) if single else (values, joint)

    def joint_gradient(self, x, t) -> np.ndarray:
        return self.evaluate_with_joint_gradient(x, t)[1]

    def slice(self, t: float) -> VectorField:
        """The smooth field u_t = U(·, t), cached per t"""
        t = check_scale(t)
        with self._lock:
            cached = self._slices.get(t)
        if cached is not None:
            return cached
        ext = self
        sliced = VectorField(
            name=f"{self.u.name}@t={t:g}",
            dim_in=self.dimension,
            dim_out=self.dim_out,
            evaluator=lambda x: ext.evaluate(x, t),
            jacobian=lambda x: ext.spatial_gradient(x, t),
            smoothness=Smoothness(),
        )
        with self._lock:
            return self._slices.setdefault(t, sliced)

    def cached(self, key: Tuple, build: Callable):
        """Per-key cache for derived slice data (seed grids, boundary samples)"""
        with self._lock:
            if key in self.cache:
                return self.cache[key]
        value = build()
        with self._lock:
            return self.cache.setdefault(key, value)


def mollified_extension(u: VectorField, mollifier: Mollifier, domain: Domain,
                        points_per_axis: int = None) -> ExtensionField:
    """Build the extension U(x, t) of u over Ω × (0, 1)"""
    return ExtensionField(u, mollifier, domain, points_per_axis)


def mollify(u: VectorField, domain: Domain, t: float, profile: str = "exponential",
            points_per_axis: int = None) -> VectorField:
    """u_t = η_t * ũ as a smooth field"""
    ext = mollified_extension(u, Mollifier(domain.dimension, profile), domain, points_per_axis)
    return ext.slice(t)
