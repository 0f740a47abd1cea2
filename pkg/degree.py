"""
Degree Module
Brouwer degree by signed preimages, by the boundary integral of j u^a·ν and
by change of variables; pairings <Ju^a, χ_E> over Lipschitz sets and
sublevel sets of test functions.
"""
import itertools
from dataclasses import dataclass, field, asdict
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

import config
from domain_field import Domain, VectorField, as_points, cofactor, determinant, gradient
from errors import (
    BoundaryValueError,
    ConfigError,
    CriticalLevelError,
    InvalidGeometryError,
    InvalidParameterError,
    SingularValueError,
)
from jacobian_core import TestFunction, bump, bump_integral, unit_ball_volume
from options import parse_option_string, take


@dataclass(frozen=True, eq=False)
class LipschitzSet:
    """
    Polygonal region E given by closed loops (outer loops counterclockwise,
    holes clockwise) with a boundary quadrature.
    """
    name: str
    loops: Tuple[np.ndarray, ...]
    boundary_nodes: np.ndarray
    boundary_normals: np.ndarray
    boundary_weights: np.ndarray

    @property
    def is_empty(self) -> bool:
        return len(self.loops) == 0

    def perimeter(self) -> float:
        return float(np.sum(self.boundary_weights))

    def area(self) -> float:
        """Shoelace area over all loops"""
        total = 0.0
        for loop in self.loops:
            x, y = loop[:, 0], loop[:, 1]
            total += 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        return total

    def boundary_spacing(self) -> float:
        return float(np.max(self.boundary_weights)) if len(self.boundary_weights) else 0.0

    def contains(self, x) -> np.ndarray:
        """Even-odd rule over all loops"""
        pts, single = as_points(x)
        inside = np.zeros(len(pts), dtype=bool)
        for loop in self.loops:
            a = loop
            b = np.roll(loop, -1, axis=0)
            px = pts[:, 0][:, None]
            py = pts[:, 1][:, None]
            straddle = (a[:, 1][None, :] > py) != (b[:, 1][None, :] > py)
            dy = b[:, 1] - a[:, 1]
            safe = np.where(dy == 0, 1.0, dy)
            x_cross = a[:, 0][None, :] + (py - a[:, 1][None, :]) * (b[:, 0] - a[:, 0])[None, :] / safe[None, :]
            hits = straddle & (px < x_cross)
            inside ^= (np.sum(hits, axis=1) % 2).astype(bool)
        return inside[0] if single else inside

    def bounding_box(self):
        if self.is_empty:
            return None
        allv = np.concatenate(self.loops)
        return allv.min(axis=0), allv.max(axis=0)

    def check_inside(self, domain: Domain):
        """
        Raises:
            InvalidGeometryError: closure of E not strictly inside Ω
        """
        if self.is_empty:
            return
        allv = np.concatenate(self.loops + (self.boundary_nodes,))
        if not np.all(domain.contains(allv)) or np.min(domain.distance_to_boundary(allv)) <= 0:
            raise InvalidGeometryError(f"Set '{self.name}' is not compactly contained in the domain")


_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)


def _orient_ccw(loop: np.ndarray) -> np.ndarray:
    x, y = loop[:, 0], loop[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return loop if signed > 0 else loop[::-1].copy()


def from_loops(loops: Sequence[np.ndarray], name: str = "E",
               normal_fn: Callable[[np.ndarray], np.ndarray] = None,
               gauss: bool = True) -> LipschitzSet:
    """
    Build a set from oriented loops with per-segment Gauss quadrature

    Args:
        loops: closed polylines (no repeated closing vertex)
        normal_fn: optional outward unit normals at quadrature nodes
        gauss: 4-point Gauss per segment (else one midpoint)
    """
    loops = tuple(np.asarray(l, dtype=float) for l in loops if len(l) >= 3)
    nodes, normals, weights = [], [], []
    t_nodes = (_GAUSS_NODES + 1.0) / 2.0 if gauss else np.array([0.5])
    t_weights = _GAUSS_WEIGHTS / 2.0 if gauss else np.array([1.0])
    for loop in loops:
        a = loop
        b = np.roll(loop, -1, axis=0)
        edge = b - a
        length = np.linalg.norm(edge, axis=1)
        good = length > 0
        a, edge, length = a[good], edge[good], length[good]
        outward = np.stack([edge[:, 1], -edge[:, 0]], axis=1) / length[:, None]
        for tn, tw in zip(t_nodes, t_weights):
            nodes.append(a + tn * edge)
            normals.append(outward)
            weights.append(tw * length)
    if nodes:
        b_nodes = np.concatenate(nodes)
        b_normals = np.concatenate(normals)
        b_weights = np.concatenate(weights)
        if normal_fn is not None:
            b_normals = normal_fn(b_nodes)
    else:
        b_nodes = np.zeros((0, 2))
        b_normals = np.zeros((0, 2))
        b_weights = np.zeros(0)
    return LipschitzSet(name, loops, b_nodes, b_normals, b_weights)


def disk_set(center=(0.0, 0.0), radius: float = 0.3, nodes: int = 512) -> LipschitzSet:
    """Disk with exact circle quadrature (nodes on the circle, exact normals)"""
    if radius <= 0:
        raise InvalidGeometryError(f"Disk radius must be positive, got {radius}")
    center = np.asarray(center, dtype=float)
    phi = (np.arange(nodes) + 0.5) * 2.0 * np.pi / nodes
    normals = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    verts = center + radius * np.stack([np.cos(phi - np.pi / nodes), np.sin(phi - np.pi / nodes)], axis=1)
    return LipschitzSet(
        name=f"disk:c={center[0]:g},{center[1]:g}:r={radius:g}",
        loops=(verts,),
        boundary_nodes=center + radius * normals,
        boundary_normals=normals,
        boundary_weights=np.full(nodes, 2.0 * np.pi * radius / nodes),
    )


def polygon_set(vertices, name: str = "polygon") -> LipschitzSet:
    vertices = np.asarray(vertices, dtype=float)
    if len(vertices) < 3:
        raise InvalidGeometryError("A polygon needs at least 3 vertices")
    loop = _orient_ccw(vertices)
    x, y = loop[:, 0], loop[:, 1]
    if abs(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)) == 0:
        raise InvalidGeometryError("Degenerate polygon with zero area")
    return from_loops([loop], name=name)


def annulus_sector_set(r_in: float = 0.3, r_out: float = 0.7, theta0: float = -np.pi / 4,
                       theta1: float = 5 * np.pi / 4, segments: int = 256,
                       center=(0.0, 0.0)) -> LipschitzSet:
    """{r_in < r < r_out, theta0 < θ < theta1} as a polygon"""
    if not 0 < r_in < r_out or not theta0 < theta1 or theta1 - theta0 >= 2 * np.pi:
        raise InvalidGeometryError("Invalid annulus sector parameters")
    center = np.asarray(center, dtype=float)
    th = np.linspace(theta0, theta1, segments + 1)
    outer = np.stack([r_out * np.cos(th), r_out * np.sin(th)], axis=1)
    inner = np.stack([r_in * np.cos(th[::-1]), r_in * np.sin(th[::-1])], axis=1)
    return polygon_set(center + np.concatenate([outer, inner]),
                       name=f"sector:r={r_in:g}-{r_out:g}:theta={theta0:.3g}-{theta1:.3g}")


def parse_set_spec(spec: str) -> LipschitzSet:
    """
    Parse ``disk:c=0,0:r=0.3``, ``sector:r_in=0.3:r_out=0.7:theta0=0:theta1=3``
    or ``polygon:v=x1,y1,x2,y2,...``
    """
    name, opts = parse_option_string(spec)
    if name == "disk":
        take(opts, spec, {"c", "r", "nodes"})
        center = opts.get("c", (0.0, 0.0))
        if not isinstance(center, tuple):
            raise ConfigError(f"Disk center in {spec!r} must be a comma vector", key="c")
        return disk_set(center, float(opts.get("r", 0.3)), int(opts.get("nodes", 512)))
    if name == "sector":
        take(opts, spec, {"r_in", "r_out", "theta0", "theta1", "c"})
        return annulus_sector_set(float(opts.get("r_in", 0.3)), float(opts.get("r_out", 0.7)),
                                  float(opts.get("theta0", -np.pi / 4)), float(opts.get("theta1", 5 * np.pi / 4)),
                                  center=opts.get("c", (0.0, 0.0)))
    if name == "polygon":
        take(opts, spec, {"v"})
        flat = opts.get("v")
        if not isinstance(flat, tuple) or len(flat) % 2 or len(flat) < 6:
            raise ConfigError(f"polygon needs v=x1,y1,x2,y2,x3,y3,... in {spec!r}", key="v")
        return polygon_set(np.asarray(flat, dtype=float).reshape(-1, 2), name=spec)
    raise ConfigError(f"Unknown set '{name}' in {spec!r}", key="set")


@dataclass
class DegreeReport:
    """Result of one degree evaluation"""
    target: List[float]
    degree: int
    raw: float
    method: str
    min_abs_det: Optional[float] = None
    boundary_distance: Optional[float] = None
    accepted: bool = True
    preimages: Optional[List[List[float]]] = None

    def __post_init__(self):
        self.accepted = bool(abs(self.raw - round(self.raw)) < config.DEGREE_ACCEPT_GAP)
        if not self.accepted:
            logger.warning(f"Non-integer degree {self.raw:.4f} ({self.method}) at a={self.target}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """u and ∇u sampled on a boundary quadrature, with its clearance tolerance"""
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    grads: np.ndarray
    tolerance: float

    @classmethod
    def sample(cls, u: VectorField, nodes, normals, weights, lipschitz: float = None) -> "BoundaryData":
        nodes = np.asarray(nodes, dtype=float)
        values = u(nodes) if len(nodes) else np.zeros((0, u.dim_out))
        grads = gradient(u, nodes) if len(nodes) else np.zeros((0, u.dim_out, u.dim_in))
        if lipschitz is None:
            lipschitz = u.lipschitz if u.lipschitz is not None else (
                float(np.max(np.linalg.norm(grads, ord=2, axis=(1, 2)))) if len(nodes) else 1.0)
        spacing = float(np.max(weights)) if len(weights) else 0.0
        return cls(nodes, np.asarray(normals), np.asarray(weights), values, grads,
                   2.0 * spacing * lipschitz)

    @classmethod
    def for_domain(cls, u: VectorField, domain: Domain, lipschitz: float = None) -> "BoundaryData":
        return cls.sample(u, domain.boundary_nodes, domain.boundary_normals,
                          domain.boundary_weights, lipschitz)

    @classmethod
    def for_set(cls, u: VectorField, region: LipschitzSet, lipschitz: float = None) -> "BoundaryData":
        return cls.sample(u, region.boundary_nodes, region.boundary_normals,
                          region.boundary_weights, lipschitz)

    def distances(self, targets: np.ndarray) -> np.ndarray:
        """dist(a, u(boundary nodes)) per target"""
        if len(self.values) == 0:
            return np.full(len(targets), np.inf)
        out = np.empty(len(targets))
        for i0 in range(0, len(targets), 512):
            chunk = targets[i0:i0 + 512]
            diff = self.values[None, :, :] - chunk[:, None, :]
            out[i0:i0 + 512] = np.min(np.linalg.norm(diff, axis=2), axis=1)
        return out

    def flux(self, targets: np.ndarray) -> np.ndarray:
        """∫ j u^a · ν over the boundary for each target a"""
        targets = np.atleast_2d(np.asarray(targets, dtype=float))
        if len(self.values) == 0:
            return np.zeros(len(targets))
        n = self.grads.shape[-1]
        m = self.values.shape[1]
        out = np.empty(len(targets))
        eye = np.eye(m)
        for i0 in range(0, len(targets), 128):
            chunk = targets[i0:i0 + 128]
            v = self.values[None, :, :] - chunk[:, None, :]
            r = np.linalg.norm(v, axis=2)
            r = np.where(r == 0, np.inf, r)
            w = v / r[:, :, None]
            proj = eye[None, None] - np.einsum("tbi,tbj->tbij", w, w)
            g_a = np.einsum("tbij,bjk->tbik", proj, self.grads) / r[:, :, None, None]
            j = np.einsum("tbji,tbj->tbi", cofactor(g_a), w) / n
            out[i0:i0 + 128] = np.einsum("tbi,bi,b->t", j, self.normals, self.weights)
        return out


def _target(a) -> np.ndarray:
    return np.asarray(a, dtype=float).ravel()


class SeedGrid:
    """
    Image of a vertex grid under u, used to seed Newton for preimages.

    A cell seeds Newton from its center when the bounding box of its corner
    images, inflated by a quarter of its size, contains the target.
    """

    def __init__(self, u: VectorField, lo, hi, resolution: int):
        """
        Args:
            u: field
            lo, hi: corners of the seeding box
            resolution: cells per axis
        """
        self.u = u
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        n = len(lo)
        self.resolution = int(resolution)
        self.cell_size = float(np.max((hi - lo) / self.resolution))
        axes = [np.linspace(lo[i], hi[i], self.resolution + 1) for i in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        verts = np.stack([m.ravel() for m in mesh], axis=1)
        values = u(verts).reshape(tuple([self.resolution + 1] * n) + (u.dim_out,))

        corner_values = []
        for offset in itertools.product((0, 1), repeat=n):
            sl = tuple(slice(o, o + self.resolution) for o in offset)
            corner_values.append(values[sl])
        stack = np.stack(corner_values)
        vmin = stack.min(axis=0).reshape(-1, u.dim_out)
        vmax = stack.max(axis=0).reshape(-1, u.dim_out)
        margin = 0.25 * (vmax - vmin)
        self.cell_lo = vmin - margin
        self.cell_hi = vmax + margin

        h = (hi - lo) / self.resolution
        centers = [lo[i] + (np.arange(self.resolution) + 0.5) * h[i] for i in range(n)]
        cmesh = np.meshgrid(*centers, indexing="ij")
        self.centers = np.stack([m.ravel() for m in cmesh], axis=1)

    @classmethod
    def for_region(cls, u: VectorField, region: Union[Domain, LipschitzSet],
                   resolution: int = None) -> "SeedGrid":
        if isinstance(region, Domain):
            lo, hi = region.bounding_box()
            res = resolution or region.resolution
        else:
            lo, hi = region.bounding_box()
            res = resolution or config.DEFAULT_RESOLUTION
        return cls(u, lo, hi, res)

    def seeds(self, a: np.ndarray) -> np.ndarray:
        mask = np.all((self.cell_lo <= a) & (self.cell_hi >= a), axis=1)
        return self.centers[mask]


def newton_solve(u: VectorField, seeds: np.ndarray, targets: np.ndarray):
    """
    Batched Newton with pseudo-inverse steps

    Returns:
        (points, converged mask)
    """
    x = np.array(seeds, dtype=float)
    active = np.ones(len(x), dtype=bool)
    converged = np.zeros(len(x), dtype=bool)
    for _ in range(config.NEWTON_MAX_ITER):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        xa = x[idx]
        residual = u(xa) - targets[idx]
        J = gradient(u, xa)
        step = np.einsum("kij,kj->ki", np.linalg.pinv(J), residual)
        step = np.where(np.isfinite(step), step, 0.0)
        x[idx] = xa - step
        norms = np.linalg.norm(step, axis=1)
        done = norms < config.NEWTON_STEP_TOL * max(1.0, float(np.max(np.abs(xa))))
        blown = ~np.isfinite(x[idx]).all(axis=1) | (np.linalg.norm(x[idx], axis=1) > 1e6)
        converged[idx[done]] = True
        active[idx[done | blown]] = False
    final = np.isfinite(x).all(axis=1)
    residual = np.full(len(x), np.inf)
    if np.any(final):
        residual[final] = np.linalg.norm(u(x[final]) - targets[final], axis=1)
    scale = max(1.0, float(np.max(np.abs(targets)))) if len(targets) else 1.0
    converged = final & (residual < 1e-9 * scale)
    return x, converged


def _dedupe(points: np.ndarray, radius: float) -> np.ndarray:
    kept = []
    for p in points:
        if all(np.linalg.norm(p - q) >= radius for q in kept):
            kept.append(p)
    return np.array(kept).reshape(-1, points.shape[1] if points.ndim == 2 else 0)


def find_preimages_many(u: VectorField, region: Union[Domain, LipschitzSet], targets,
                        seed_grid: SeedGrid = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Preimages inside ``region`` for many targets in one batched Newton run

    Returns:
        per target: (points (k, n), det ∇u at those points)
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    grid = seed_grid or SeedGrid.for_region(u, region)
    seed_list, owner = [], []
    for i, a in enumerate(targets):
        s = grid.seeds(a)
        seed_list.append(s)
        owner.append(np.full(len(s), i))
    results = [(np.zeros((0, u.dim_in)), np.zeros(0)) for _ in targets]
    if not seed_list or sum(len(s) for s in seed_list) == 0:
        return results
    seeds = np.concatenate(seed_list)
    owner = np.concatenate(owner)
    roots, ok = newton_solve(u, seeds, targets[owner])
    inside = np.zeros(len(roots), dtype=bool)
    if np.any(ok):
        inside[ok] = region.contains(roots[ok])
    keep = ok & inside
    for i in range(len(targets)):
        pts = _dedupe(roots[keep & (owner == i)], grid.cell_size)
        if len(pts):
            results[i] = (pts, determinant(gradient(u, pts)))
    return results


def find_preimages(u: VectorField, region, a, seed_grid: SeedGrid = None):
    """Preimages of a single target inside ``region`` with their determinants"""
    return find_preimages_many(u, region, _target(a)[None, :], seed_grid)[0]


def check_boundary_clearance(data: BoundaryData, a: np.ndarray) -> float:
    """
    Raises:
        BoundaryValueError: dist(a, u(∂)) below the clearance tolerance
    """
    dist = float(data.distances(a[None, :])[0])
    if dist < data.tolerance:
        raise BoundaryValueError(
            f"Target {a.tolist()} is {dist:.3g} from the boundary image (tolerance {data.tolerance:.3g})")
    return dist


def check_regular(dets: np.ndarray, a: np.ndarray) -> Optional[float]:
    """
    Raises:
        SingularValueError: some preimage has |det ∇u| <= REGULAR_DET_FLOOR
    """
    if len(dets) == 0:
        return None
    smallest = float(np.min(np.abs(dets)))
    if smallest <= config.REGULAR_DET_FLOOR:
        raise SingularValueError(f"Target {a.tolist()} is a singular value (|det| = {smallest:.3g})")
    return smallest


def degree_preimage(u: VectorField, domain: Domain, a, seed_grid: SeedGrid = None,
                    boundary: BoundaryData = None) -> DegreeReport:
    """
    deg(u, Ω, a) = Σ_{x ∈ u^{-1}(a)} sgn det ∇u(x)

    Raises:
        BoundaryValueError: a too close to u(∂Ω)
        SingularValueError: a not a regular value
    """
    a = _target(a)
    data = boundary or BoundaryData.for_domain(u, domain)
    dist = check_boundary_clearance(data, a)
    points, dets = find_preimages(u, domain, a, seed_grid)
    smallest = check_regular(dets, a)
    raw = float(np.sum(np.sign(dets)))
    return DegreeReport(a.tolist(), int(round(raw)), raw, "preimage", smallest, dist,
                        preimages=points.tolist())


def degree_boundary(u: VectorField, domain: Domain, a, boundary: BoundaryData = None) -> DegreeReport:
    """
    deg(u, Ω, a) = (1/ω_n) ∫_{∂Ω} j u^a · ν

    Raises:
        BoundaryValueError: a too close to u(∂Ω)
    """
    a = _target(a)
    data = boundary or BoundaryData.for_domain(u, domain)
    dist = check_boundary_clearance(data, a)
    raw = float(data.flux(a[None, :])[0]) / unit_ball_volume(domain.dimension)
    return DegreeReport(a.tolist(), int(round(raw)), raw, "boundary", None, dist)


def degree_boundary_many(u: VectorField, domain: Domain, targets,
                         boundary: BoundaryData = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Boundary-integral degrees for many targets

    Returns:
        (raw values, clear mask); targets failing the clearance rule get NaN
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    data = boundary or BoundaryData.for_domain(u, domain)
    clear = data.distances(targets) >= data.tolerance
    raw = np.full(len(targets), np.nan)
    if np.any(clear):
        raw[clear] = data.flux(targets[clear]) / unit_ball_volume(domain.dimension)
    return raw, clear


def degree_changevar(u: VectorField, domain: Domain, psi: TestFunction) -> float:
    """∫_Ω ψ(u(x)) det ∇u(x) dx"""
    values = u(domain.nodes)
    weights_psi = psi(values)
    active = weights_psi != 0
    if not np.any(active):
        return 0.0
    det = determinant(gradient(u, domain.nodes[active]))
    return float(np.sum(domain.weights[active] * weights_psi[active] * det))


def degree_weighted_integral(u: VectorField, domain: Domain, psi: TestFunction,
                             resolution: int = 64) -> float:
    """
    ∫ deg(u, Ω, y) ψ(y) dy with boundary-integral degrees on a target grid

    Targets too close to u(∂Ω) use the unrounded boundary integral.
    """
    if psi.support is None:
        raise InvalidParameterError("degree_weighted_integral needs a test function with known support")
    center, radius = psi.support
    center = np.asarray(center)
    h = 2.0 * radius / resolution
    axis = (np.arange(resolution) + 0.5) * h - radius
    mesh = np.meshgrid(*([axis] * len(center)), indexing="ij")
    ys = center + np.stack([m.ravel() for m in mesh], axis=1)
    values = psi(ys)
    ys, values = ys[values != 0], values[values != 0]
    if len(ys) == 0:
        return 0.0
    data = BoundaryData.for_domain(u, domain)
    raw = data.flux(ys) / unit_ball_volume(domain.dimension)
    clear = data.distances(ys) >= data.tolerance
    deg = np.where(clear & (np.abs(raw - np.round(raw)) < config.DEGREE_ACCEPT_GAP), np.round(raw), raw)
    return float(np.sum(deg * values) * h ** len(center))


def pair_Jua_indicator(u: VectorField, region: LipschitzSet, a,
                       boundary: BoundaryData = None) -> float:
    """
    <Ju^a, χ_E> = ∫_{∂E} j u^a · ν, which is ω_n·deg(u, E, a) for smooth u

    Raises:
        BoundaryValueError: a too close to u(∂E)
    """
    a = _target(a)
    if region.is_empty:
        return 0.0
    data = boundary or BoundaryData.for_set(u, region)
    check_boundary_clearance(data, a)
    return float(data.flux(a[None, :])[0])


def degree_all(u: VectorField, domain: Domain, a, bump_radius: float = 0.2) -> Dict:
    """All three degree values at a, with the agreement diagnostic"""
    a = _target(a)
    data = BoundaryData.for_domain(u, domain)
    pre = degree_preimage(u, domain, a, boundary=data)
    bnd = degree_boundary(u, domain, a, boundary=data)
    psi = bump(a, bump_radius)
    changevar = degree_changevar(u, domain, psi)
    mass = bump_integral(bump_radius, n=domain.dimension)
    return {
        "preimage": pre.to_dict(),
        "boundary": bnd.to_dict(),
        "changevar": {"value": changevar, "bump_mass": mass, "ratio": changevar / mass},
        "agree": bool(pre.degree == bnd.degree and abs(bnd.raw - pre.raw) < 1e-2
                      and abs(changevar - pre.degree * mass) <= 0.02 * max(mass, abs(pre.degree) * mass)),
    }


def _marching_segments(F: np.ndarray, t: float):
    """Cell segments as pairs of edge keys; keys are ('h', i, j) or ('v', i, j)"""
    R = F.shape[0] - 1
    inside = F > t
    segments = []
    case = (inside[:-1, :-1].astype(int) + 2 * inside[1:, :-1] + 4 * inside[1:, 1:] + 8 * inside[:-1, 1:])
    for i, j in zip(*np.nonzero((case != 0) & (case != 15))):
        b = (inside[i, j], inside[i + 1, j], inside[i + 1, j + 1], inside[i, j + 1])
        edges = (("h", i, j), ("v", i + 1, j), ("h", i, j + 1), ("v", i, j))
        crossing = [k for k in range(4) if b[k] != b[(k + 1) % 4]]
        if len(crossing) == 2:
            segments.append((edges[crossing[0]], edges[crossing[1]]))
            continue
        center = 0.25 * (F[i, j] + F[i + 1, j] + F[i + 1, j + 1] + F[i, j + 1]) > t
        if center == b[0]:
            segments.append((edges[0], edges[1]))
            segments.append((edges[2], edges[3]))
        else:
            segments.append((edges[3], edges[0]))
            segments.append((edges[1], edges[2]))
    return segments


def _stitch(segments) -> List[List]:
    neighbours: Dict = {}
    for p, q in segments:
        neighbours.setdefault(p, []).append(q)
        neighbours.setdefault(q, []).append(p)
    seen = set()
    loops = []
    for start in neighbours:
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        prev, cur = None, start
        while True:
            options = [k for k in neighbours[cur] if k != prev]
            if not options:
                raise InvalidParameterError("Level line is not closed inside the grid")
            nxt = options[0]
            if nxt == start:
                break
            if nxt in seen:
                raise InvalidParameterError("Level line self-intersects on the grid")
            loop.append(nxt)
            seen.add(nxt)
            prev, cur = cur, nxt
        loops.append(loop)
    return loops


def sublevel_set(psi: TestFunction, t: float, domain: Domain, resolution: int = None) -> LipschitzSet:
    """
    E_t = {x ∈ Ω : ψ(x) > t} by marching squares with linear interpolation

    Raises:
        InvalidParameterError: t <= 0
        CriticalLevelError: |∇ψ| below 1e-8 on the level line
    """
    if t <= 0:
        raise InvalidParameterError(f"Level t must be positive so that E_t is compactly contained, got {t}")
    if domain.dimension != 2:
        raise InvalidParameterError("sublevel_set supports n = 2 only")
    res = int(resolution or 2 * domain.resolution)
    lo, hi = (np.asarray(v) for v in domain.bounding_box())
    xs = np.linspace(lo[0], hi[0], res + 1)
    ys = np.linspace(lo[1], hi[1], res + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    F = psi(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(X.shape)
    name = f"{{{psi.name} > {t:g}}}"
    if t >= float(F.max()):
        return LipschitzSet(name, (), np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))

    def crossing(key):
        kind, i, j = key
        if kind == "h":
            f0, f1 = F[i, j], F[i + 1, j]
            s = (t - f0) / (f1 - f0)
            return np.array([xs[i] + s * (xs[i + 1] - xs[i]), ys[j]])
        f0, f1 = F[i, j], F[i, j + 1]
        s = (t - f0) / (f1 - f0)
        return np.array([xs[i], ys[j] + s * (ys[j + 1] - ys[j])])

    loops = []
    for keys in _stitch(_marching_segments(F, t)):
        pts = np.array([crossing(k) for k in keys])
        grads = psi.gradient(pts)
        norms = np.linalg.norm(grads, axis=1)
        if np.min(norms) < 1e-8:
            raise CriticalLevelError(f"t = {t:g} is numerically critical for {psi.name}")
        tangent = np.roll(pts, -1, axis=0) - np.roll(pts, 1, axis=0)
        right = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1)
        if np.sum(np.einsum("ki,ki->k", right, -grads)) < 0:
            pts = pts[::-1].copy()
        loops.append(pts)

    def normals(points):
        g = -psi.gradient(points)
        return g / np.linalg.norm(g, axis=1)[:, None]

    region = from_loops(loops, name=name, normal_fn=normals)
    region.check_inside(domain)
    return region


def layer_cake_area(psi: TestFunction, domain: Domain, levels: int = 100, resolution: int = None) -> float:
    """Σ_k Δt·area(E_{t_k}) over midpoint levels in (0, sup ψ)"""
    top = psi.sup_bound
    dt = top / levels
    total = 0.0
    for k in range(levels):
        total += dt * sublevel_set(psi, (k + 0.5) * dt, domain, resolution).area()
    return total
