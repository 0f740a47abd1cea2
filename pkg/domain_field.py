"""
Domains and Vector Fields
Quadrature domains (rectangles, boxes, disks), vector fields with value and
gradient access, and the cofactor/determinant algebra of their derivatives.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Dict, Any

import numpy as np
from loguru import logger
from scipy.interpolate import RegularGridInterpolator

import config
from errors import (
    InvalidGeometryError,
    InvalidParameterError,
    BoundaryProximityError,
    ConfigError,
)
from options import parse_option_string, take


def as_points(x) -> Tuple[np.ndarray, bool]:
    """
    Coerce a point or an array of points to shape (N, n)

    Returns:
        (points, single) where ``single`` marks a 1-D input
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


@dataclass(frozen=True, eq=False)
class Domain:
    """
    Bounded region with interior and boundary quadrature.

    Rectangles (any n >= 2) use the tensor midpoint rule; disks (n = 2) use
    the polar midpoint rule. All arrays are read-only after construction.
    """
    kind: str
    dimension: int
    params: Dict[str, Any]
    resolution: int
    nodes: np.ndarray
    weights: np.ndarray
    boundary_nodes: np.ndarray
    boundary_normals: np.ndarray
    boundary_weights: np.ndarray
    spacing: float
    cell_diameter: float

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.bounding_box()[0])

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.bounding_box()[1])

    def volume(self) -> float:
        if self.kind == "rectangle":
            return float(np.prod(np.asarray(self.params["hi"]) - np.asarray(self.params["lo"])))
        return float(np.pi * self.params["radius"] ** 2)

    def perimeter(self) -> float:
        """Perimeter (n = 2) or surface area of the boundary"""
        if self.kind == "rectangle":
            sides = np.asarray(self.params["hi"]) - np.asarray(self.params["lo"])
            total = 0.0
            for i in range(self.dimension):
                total += 2.0 * float(np.prod(np.delete(sides, i)))
            return total
        return float(2.0 * np.pi * self.params["radius"])

    def diameter(self) -> float:
        if self.kind == "rectangle":
            return float(np.linalg.norm(np.asarray(self.params["hi"]) - np.asarray(self.params["lo"])))
        return float(2.0 * self.params["radius"])

    def bounding_box(self) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
        if self.kind == "rectangle":
            return tuple(self.params["lo"]), tuple(self.params["hi"])
        c = np.asarray(self.params["center"])
        r = self.params["radius"]
        return tuple(c - r), tuple(c + r)

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        """Boolean mask of points strictly inside Ω shrunk by ``margin``"""
        pts, single = as_points(points)
        if self.kind == "rectangle":
            lo = np.asarray(self.params["lo"]) + margin
            hi = np.asarray(self.params["hi"]) - margin
            mask = np.all((pts > lo) & (pts < hi), axis=1)
        else:
            c = np.asarray(self.params["center"])
            mask = np.linalg.norm(pts - c, axis=1) < self.params["radius"] - margin
        return mask[0] if single else mask

    def distance_to_boundary(self, points) -> np.ndarray:
        """Analytic dist(x, ∂Ω) for points in Ω̄ (0 outside)"""
        pts, single = as_points(points)
        if self.kind == "rectangle":
            lo = np.asarray(self.params["lo"])
            hi = np.asarray(self.params["hi"])
            d = np.min(np.minimum(pts - lo, hi - pts), axis=1)
        else:
            c = np.asarray(self.params["center"])
            d = self.params["radius"] - np.linalg.norm(pts - c, axis=1)
        d = np.maximum(d, 0.0)
        return d[0] if single else d

    def integrate(self, values) -> float:
        """Interior quadrature of nodal values (shape (N,) or (N, ...))"""
        values = np.asarray(values, dtype=float)
        total = np.tensordot(self.weights, values, axes=(0, 0))
        return float(total) if values.ndim == 1 else total

    def boundary_point(self, s) -> np.ndarray:
        """
        Arc-length parametrization of ∂Ω for n = 2

        Args:
            s: parameter(s) in [0, 1), counterclockwise from the lower-left
               corner (rectangle) or from angle 0 (disk)

        Returns:
            points on ∂Ω, shape (len(s), 2)
        """
        if self.dimension != 2:
            raise InvalidParameterError("boundary_point is only defined for n = 2")
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), 1.0)
        if self.kind == "disk":
            c = np.asarray(self.params["center"])
            theta = 2.0 * np.pi * s
            return c + self.params["radius"] * np.stack([np.cos(theta), np.sin(theta)], axis=1)

        (x0, y0), (x1, y1) = self.params["lo"], self.params["hi"]
        w, h = x1 - x0, y1 - y0
        arc = s * 2.0 * (w + h)
        out = np.empty((len(s), 2))
        bottom = arc < w
        right = (~bottom) & (arc < w + h)
        top = (~bottom) & (~right) & (arc < 2 * w + h)
        left = ~(bottom | right | top)
        out[bottom] = np.stack([x0 + arc[bottom], np.full(bottom.sum(), y0)], axis=1)
        out[right] = np.stack([np.full(right.sum(), x1), y0 + arc[right] - w], axis=1)
        out[top] = np.stack([x1 - (arc[top] - w - h), np.full(top.sum(), y1)], axis=1)
        out[left] = np.stack([np.full(left.sum(), x0), y1 - (arc[left] - 2 * w - h)], axis=1)
        return out

    def grid_axes(self, resolution: Optional[int] = None):
        """Midpoint axes covering the bounding box (used for sampling and contouring)"""
        res = resolution or self.resolution
        lo, hi = self.bounding_box()
        return [lo[i] + (np.arange(res) + 0.5) * (hi[i] - lo[i]) / res for i in range(self.dimension)]

    def describe(self) -> str:
        if self.kind == "rectangle":
            return f"rectangle:lo={_fmt(self.params['lo'])}:hi={_fmt(self.params['hi'])}:res={self.resolution}"
        return (f"disk:center={_fmt(self.params['center'])}:r={self.params['radius']:g}"
                f":res={self.resolution}")


def _fmt(vec) -> str:
    return ",".join(f"{v:g}" for v in vec)


def _readonly(*arrays):
    for arr in arrays:
        arr.setflags(write=False)


def _rectangle(lo: Sequence[float], hi: Sequence[float], resolution: int) -> Domain:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    if n < 2 or len(hi) != n:
        raise InvalidGeometryError(f"Rectangle needs matching corners in n >= 2, got {lo}, {hi}")
    if np.any(hi <= lo):
        raise InvalidGeometryError(f"Degenerate or inverted rectangle: lo={lo.tolist()}, hi={hi.tolist()}")

    h = (hi - lo) / resolution
    axes = [lo[i] + (np.arange(resolution) + 0.5) * h[i] for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    weights = np.full(len(nodes), float(np.prod(h)))

    b_nodes, b_normals, b_weights = [], [], []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        face_mesh = np.meshgrid(*[axes[j] for j in others], indexing="ij")
        face = np.stack([m.ravel() for m in face_mesh], axis=1)
        face_weight = float(np.prod(h[others]))
        for side, value in ((-1.0, lo[i]), (1.0, hi[i])):
            pts = np.empty((len(face), n))
            pts[:, others] = face
            pts[:, i] = value
            normal = np.zeros(n)
            normal[i] = side
            b_nodes.append(pts)
            b_normals.append(np.tile(normal, (len(face), 1)))
            b_weights.append(np.full(len(face), face_weight))

    domain = Domain(
        kind="rectangle",
        dimension=n,
        params={"lo": tuple(lo.tolist()), "hi": tuple(hi.tolist())},
        resolution=resolution,
        nodes=nodes,
        weights=weights,
        boundary_nodes=np.concatenate(b_nodes),
        boundary_normals=np.concatenate(b_normals),
        boundary_weights=np.concatenate(b_weights),
        spacing=float(np.max(h)),
        cell_diameter=float(np.linalg.norm(h)),
    )
    return domain


def _disk(center: Sequence[float], radius: float, resolution: int) -> Domain:
    center = np.asarray(center, dtype=float)
    if len(center) != 2:
        raise InvalidGeometryError(f"Disks are supported in n = 2 only, got center {center.tolist()}")
    if not radius > 0:
        raise InvalidGeometryError(f"Disk radius must be positive, got {radius}")

    n_r = max(resolution // 2, 2)
    n_theta = 2 * resolution
    dr = radius / n_r
    dtheta = 2.0 * np.pi / n_theta
    r = (np.arange(n_r) + 0.5) * dr
    theta = (np.arange(n_theta) + 0.5) * dtheta
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    nodes = center + np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
    weights = (rr * dr * dtheta).ravel()

    n_b = 4 * resolution
    phi = (np.arange(n_b) + 0.5) * 2.0 * np.pi / n_b
    normals = np.stack([np.cos(phi), np.sin(phi)], axis=1)

    return Domain(
        kind="disk",
        dimension=2,
        params={"center": tuple(center.tolist()), "radius": float(radius)},
        resolution=resolution,
        nodes=nodes,
        weights=weights,
        boundary_nodes=center + radius * normals,
        boundary_normals=normals,
        boundary_weights=np.full(n_b, 2.0 * np.pi * radius / n_b),
        spacing=float(max(dr, radius * dtheta)),
        cell_diameter=float(np.hypot(dr, radius * dtheta)),
    )


def make_domain(kind: str, params: Dict[str, Any], resolution: int = None) -> Domain:
    """
    Build a quadrature domain

    Args:
        kind: "rectangle" (alias "box") or "disk"
        params: rectangle: ``lo``, ``hi`` corners; disk: ``center``, ``radius``
        resolution: nodes per axis (rectangle) / angular half-count (disk)

    Returns:
        Domain with deterministic node layout

    Raises:
        InvalidGeometryError: degenerate geometry
        InvalidParameterError: resolution below the minimum
    """
    resolution = config.DEFAULT_RESOLUTION if resolution is None else int(resolution)
    if resolution < config.MIN_RESOLUTION:
        raise InvalidParameterError(f"resolution must be >= {config.MIN_RESOLUTION}, got {resolution}")

    kind = kind.lower()
    if kind in ("rectangle", "box", "square"):
        domain = _rectangle(params["lo"], params["hi"], resolution)
    elif kind == "disk":
        domain = _disk(params.get("center", (0.0, 0.0)), float(params["radius"]), resolution)
    else:
        raise InvalidGeometryError(f"Unknown domain kind '{kind}'")

    _readonly(domain.nodes, domain.weights, domain.boundary_nodes,
              domain.boundary_normals, domain.boundary_weights)
    logger.debug(f"Domain built: {domain.describe()} ({len(domain.nodes)} nodes)")
    return domain


def parse_domain_spec(spec: str, resolution: int = None) -> Domain:
    """
    Build a domain from an option string

    Examples: ``square``, ``square:a=-1:b=1:res=128``,
    ``rectangle:lo=0,0:hi=2,1``, ``box:lo=0,0,0:hi=1,1,1``, ``disk:r=1:res=64``.
    """
    name, opts = parse_option_string(spec)
    res = int(opts.pop("res", resolution or config.DEFAULT_RESOLUTION))
    if name == "square":
        take(opts, spec, {"a", "b"})
        a, b = float(opts.get("a", 0.0)), float(opts.get("b", 1.0))
        return make_domain("rectangle", {"lo": (a, a), "hi": (b, b)}, res)
    if name in ("rectangle", "box"):
        take(opts, spec, {"lo", "hi"})
        default_dim = 3 if name == "box" else 2
        lo = opts.get("lo", (0.0,) * default_dim)
        hi = opts.get("hi", (1.0,) * default_dim)
        if not isinstance(lo, tuple) or not isinstance(hi, tuple):
            raise ConfigError(f"Corners in {spec!r} must be comma vectors", key="lo")
        return make_domain("rectangle", {"lo": lo, "hi": hi}, res)
    if name == "disk":
        take(opts, spec, {"r", "center", "cx", "cy"})
        center = opts.get("center", (float(opts.get("cx", 0.0)), float(opts.get("cy", 0.0))))
        return make_domain("disk", {"center": center, "radius": float(opts.get("r", 1.0))}, res)
    raise ConfigError(f"Unknown domain '{name}' in {spec!r}", key="domain")


@dataclass(frozen=True)
class Smoothness:
    """Regularity tag of a field: smooth, holder(alpha) or sobolev(s, p)"""
    kind: str = "smooth"
    alpha: Optional[float] = None
    s: Optional[float] = None
    p: Optional[float] = None

    @classmethod
    def holder(cls, alpha: float) -> "Smoothness":
        return cls(kind="holder", alpha=float(alpha))

    @classmethod
    def sobolev(cls, s: float, p: float) -> "Smoothness":
        return cls(kind="sobolev", s=float(s), p=float(p))

    @property
    def is_smooth(self) -> bool:
        return self.kind == "smooth"


@dataclass(frozen=True, eq=False)
class VectorField:
    """
    Map u: ℝⁿ → ℝᵐ with vectorized evaluation.

    Args:
        name: display name (option-string form when built from the library)
        dim_in: n
        dim_out: m
        evaluator: (N, n) -> (N, m)
        jacobian: optional (N, n) -> (N, m, n) analytic gradient
        smoothness: regularity tag
        lipschitz: optional global Lipschitz bound
        fd_step: finite-difference step used when no domain is supplied
    """
    name: str
    dim_in: int
    dim_out: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smoothness: Smoothness = field(default_factory=Smoothness)
    lipschitz: Optional[float] = None
    fd_step: Optional[float] = None

    def __call__(self, x) -> np.ndarray:
        pts, single = as_points(x)
        out = np.asarray(self.evaluator(pts), dtype=float).reshape(len(pts), self.dim_out)
        return out[0] if single else out

    @property
    def has_gradient(self) -> bool:
        return self.jacobian is not None

    def compose(self, outer: "VectorField", name: str = None) -> "VectorField":
        """outer ∘ self, gradient by the chain rule"""
        inner = self

        def evaluate(pts):
            return outer(inner(pts))

        def jac(pts):
            g_in = gradient(inner, pts)
            g_out = gradient(outer, inner(pts))
            return np.einsum("nij,njk->nik", g_out, g_in)

        return VectorField(
            name=name or f"({outer.name})∘({inner.name})",
            dim_in=inner.dim_in,
            dim_out=outer.dim_out,
            evaluator=evaluate,
            jacobian=jac if (inner.has_gradient and outer.has_gradient) else None,
            smoothness=inner.smoothness,
            fd_step=inner.fd_step,
        )

    def __add__(self, other: "VectorField") -> "VectorField":
        return self.combine(other, 1.0)

    def scaled(self, factor: float) -> "VectorField":
        factor = float(factor)
        base = self
        return VectorField(
            name=f"{factor:g}*({base.name})",
            dim_in=base.dim_in,
            dim_out=base.dim_out,
            evaluator=lambda pts: factor * base(pts),
            jacobian=(lambda pts: factor * base.jacobian(pts)) if base.has_gradient else None,
            smoothness=base.smoothness,
            fd_step=base.fd_step,
        )

    def combine(self, other: "VectorField", eps: float) -> "VectorField":
        """self + eps·other"""
        eps = float(eps)
        base = self
        if other.dim_in != base.dim_in or other.dim_out != base.dim_out:
            raise InvalidParameterError("Cannot add fields of different shapes")
        both = base.has_gradient and other.has_gradient
        return VectorField(
            name=f"({base.name})+{eps:g}*({other.name})",
            dim_in=base.dim_in,
            dim_out=base.dim_out,
            evaluator=lambda pts: base(pts) + eps * other(pts),
            jacobian=(lambda pts: base.jacobian(pts) + eps * other.jacobian(pts)) if both else None,
            smoothness=base.smoothness,
            fd_step=base.fd_step,
        )

    @classmethod
    def from_samples(cls, axes: Sequence[np.ndarray], values: np.ndarray, name: str = "sampled",
                     smoothness: Smoothness = None) -> "VectorField":
        """
        Grid-sampled field with multilinear interpolation

        Args:
            axes: one 1-D coordinate array per input dimension
            values: samples of shape (len(axes[0]), ..., m)
        """
        values = np.asarray(values, dtype=float)
        n = len(axes)
        m = values.shape[-1]
        interp = RegularGridInterpolator(tuple(np.asarray(a) for a in axes), values,
                                         bounds_error=False, fill_value=None)
        steps = [float(np.min(np.diff(a))) for a in axes]
        return cls(
            name=name,
            dim_in=n,
            dim_out=m,
            evaluator=lambda pts: interp(pts),
            smoothness=smoothness or Smoothness(),
            fd_step=0.5 * min(steps),
        )


def default_fd_step(domain: Domain) -> float:
    """h = diameter / (8 · resolution)"""
    return domain.diameter() / (8.0 * domain.resolution)


def gradient(u: VectorField, x, mode: str = "auto", h: float = None,
             domain: Optional[Domain] = None) -> np.ndarray:
    """
    Matrix of partials ∂_j u_i at one point or a batch

    Args:
        u: field
        x: point (n,) or points (N, n)
        mode: "analytic", "fd" or "auto" (analytic when available)
        h: finite-difference step (default from domain, then field)
        domain: when given, fd stencils must stay inside it

    Returns:
        (m, n) or (N, m, n)

    Raises:
        InvalidParameterError: analytic mode without an analytic gradient
        BoundaryProximityError: fd stencil within h of ∂Ω
    """
    pts, single = as_points(x)
    if mode == "auto":
        mode = "analytic" if u.has_gradient else "fd"

    if mode == "analytic":
        if not u.has_gradient:
            raise InvalidParameterError(f"Field '{u.name}' has no analytic gradient")
        g = np.asarray(u.jacobian(pts), dtype=float).reshape(len(pts), u.dim_out, u.dim_in)
    elif mode == "fd":
        if h is None:
            h = default_fd_step(domain) if domain is not None else (u.fd_step or 1e-5)
        if domain is not None:
            bad = (domain.distance_to_boundary(pts) <= h) | ~np.asarray(domain.contains(pts), dtype=bool)
            if np.any(bad):
                raise BoundaryProximityError(
                    f"Finite-difference stencil (h={h:.3g}) leaves the domain at "
                    f"{pts[np.argmax(bad)].tolist()}"
                )
        g = np.empty((len(pts), u.dim_out, u.dim_in))
        for j in range(u.dim_in):
            e = np.zeros(u.dim_in)
            e[j] = h
            g[:, :, j] = (u(pts + e) - u(pts - e)) / (2.0 * h)
    else:
        raise InvalidParameterError(f"Unknown gradient mode '{mode}'")
    return g[0] if single else g


def cofactor(M) -> np.ndarray:
    """
    Cofactor matrix (cof M)_{ij} = (-1)^{i+j} minor_{ij}(M)

    Works on a single (n, n) matrix or a batch (..., n, n); defined for
    singular matrices too.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if M.shape[-2] != n:
        raise InvalidParameterError(f"cofactor needs square matrices, got {M.shape}")
    if n == 1:
        return np.ones_like(M)
    if n == 2:
        cof = np.empty_like(M)
        cof[..., 0, 0] = M[..., 1, 1]
        cof[..., 0, 1] = -M[..., 1, 0]
        cof[..., 1, 0] = -M[..., 0, 1]
        cof[..., 1, 1] = M[..., 0, 0]
        return cof
    if n == 3:
        r0, r1, r2 = M[..., 0, :], M[..., 1, :], M[..., 2, :]
        return np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)], axis=-2)

    cof = np.empty_like(M)
    for i in range(n):
        rows = np.delete(M, i, axis=-2)
        for j in range(n):
            minor = np.delete(rows, j, axis=-1)
            cof[..., i, j] = (-1.0) ** (i + j) * np.linalg.det(minor)
    return cof


def determinant(M) -> np.ndarray:
    """Determinant by cofactor expansion along the first row"""
    M = np.asarray(M, dtype=float)
    return np.sum(M[..., 0, :] * cofactor(M)[..., 0, :], axis=-1)
