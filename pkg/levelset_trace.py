"""
Level-Set Tracing
Predictor-corrector continuation of the curves U^{-1}(a) in the slab
Ω × (t_lo, t_hi), their lengths, endpoint audits, and the Cauchy and
coarea checks built on them. Restricted to n = 2.
"""
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

import config
from degree import SeedGrid, check_regular, find_preimages, newton_solve
from domain_field import Domain, Smoothness, VectorField, as_points, determinant, gradient
from errors import (
    IncompleteTraceError,
    InvalidParameterError,
    SingularCurveError,
    SingularValueError,
)
from jacobian_core import check_scale, field_range_diameter, unit_ball_volume
from measures import AtomicMeasure, flat_norm
from workers import ordered_map

BOTTOM = "bottom"
TOP = "top"
LATERAL = "lateral"
LOOP = "loop"
ENDPOINT_CLASSES = (BOTTOM, TOP, LATERAL, LOOP)


class AnalyticSlabField:
    """
    Closed-form U(x, t) sharing the ExtensionField interface.

    Used for slabs with known level curves, such as preimages drifting
    out of Ω as t grows.
    """

    def __init__(self, domain: Domain, evaluator: Callable, joint: Callable,
                 dim_out: int = None, name: str = "slab"):
        """
        Args:
            domain: Ω
            evaluator: (pts (N, n), t (N,)) -> (N, m)
            joint: (pts, t) -> (N, m, n + 1), the joint gradient (∇U | ∂_t U)
            dim_out: m (default n)
            name: display name
        """
        self.domain = domain
        self.dimension = domain.dimension
        self.dim_out = dim_out or domain.dimension
        self.name = name
        self._evaluator = evaluator
        self._joint = joint
        self._lock = threading.Lock()
        self._slices: Dict[float, VectorField] = {}
        self.cache: Dict[Tuple, object] = {}

    def _prepare(self, x, t):
        pts, single = as_points(x)
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), (len(pts),)).astype(float)
        return pts, t_arr, single

    def evaluate(self, x, t) -> np.ndarray:
        pts, t_arr, single = self._prepare(x, t)
        out = np.asarray(self._evaluator(pts, t_arr), dtype=float)
        return out[0] if single else out

    def evaluate_with_joint_gradient(self, x, t):
        pts, t_arr, single = self._prepare(x, t)
        values = np.asarray(self._evaluator(pts, t_arr), dtype=float)
        joint = np.asarray(self._joint(pts, t_arr), dtype=float)
        return (values[0], joint[0]) if single else (values, joint)

    def joint_gradient(self, x, t) -> np.ndarray:
        return self.evaluate_with_joint_gradient(x, t)[1]

    def spatial_gradient(self, x, t) -> np.ndarray:
        return self.joint_gradient(x, t)[..., :-1]

    def slice(self, t: float) -> VectorField:
        t = float(t)
        with self._lock:
            if t in self._slices:
                return self._slices[t]
        slab = self
        sliced = VectorField(
            name=f"{self.name}@t={t:g}",
            dim_in=self.dimension,
            dim_out=self.dim_out,
            evaluator=lambda x: slab.evaluate(x, t),
            jacobian=lambda x: slab.spatial_gradient(x, t),
            smoothness=Smoothness(),
        )
        with self._lock:
            return self._slices.setdefault(t, sliced)

    def cached(self, key: Tuple, build: Callable):
        with self._lock:
            if key in self.cache:
                return self.cache[key]
        value = build()
        with self._lock:
            return self.cache.setdefault(key, value)


def drifting_slab(domain: Domain, velocity=(1.0, 0.0)) -> AnalyticSlabField:
    """U(x, t) = x - t·c, whose level curves move with velocity c"""
    c = np.asarray(velocity, dtype=float)
    n = domain.dimension
    joint = np.concatenate([np.eye(n), -c[:, None]], axis=1)
    return AnalyticSlabField(
        domain,
        evaluator=lambda x, t: x - t[:, None] * c,
        joint=lambda x, t: np.broadcast_to(joint, (len(x), n, n + 1)).copy(),
        name="drift:c=" + ",".join(f"{v:g}" for v in c),
    )


def static_slab(u: VectorField, domain: Domain) -> AnalyticSlabField:
    """U(x, t) = u(x) for every t"""
    def joint(x, t):
        g = gradient(u, x)
        return np.concatenate([g, np.zeros((len(x), u.dim_out, 1))], axis=2)

    return AnalyticSlabField(domain, lambda x, t: u(x), joint, u.dim_out, name=f"static({u.name})")


@dataclass
class LevelCurve:
    """
    Polyline on U^{-1}(a) in Ω × (t_lo, t_hi).

    Vertices are (x, t) rows. ``classes`` and ``signs`` describe the start and
    end of the curve; signs are sgn det ∇_x U at bottom/top endpoints, 0 elsewhere.
    """
    vertices: np.ndarray
    classes: Tuple[str, str] = (LOOP, LOOP)
    signs: Tuple[int, int] = (0, 0)
    complete: bool = True

    @property
    def length(self) -> float:
        return curve_length(self)

    @property
    def is_loop(self) -> bool:
        return self.classes[0] == LOOP

    def to_dict(self) -> dict:
        return {
            "vertices": np.asarray(self.vertices).tolist(),
            "classes": list(self.classes),
            "signs": list(self.signs),
            "length": self.length,
            "complete": self.complete,
        }


def curve_length(curve: LevelCurve) -> float:
    """Polyline length; loops include the closing segment"""
    v = np.asarray(curve.vertices, dtype=float)
    if len(v) < 2:
        return 0.0
    length = float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1)))
    if curve.is_loop:
        length += float(np.linalg.norm(v[-1] - v[0]))
    return length


@dataclass
class TraceResult:
    """Curves of one target with the end-slice atomic measures"""
    target: List[float]
    t_lo: float
    t_hi: float
    curves: List[LevelCurve] = field(default_factory=list)
    bottom: Optional[AtomicMeasure] = None
    top: Optional[AtomicMeasure] = None
    unmatched: List[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.unmatched and all(c.complete for c in self.curves)

    @property
    def total_length(self) -> float:
        return float(sum(c.length for c in self.curves))


def slice_atoms(U, t: float, a: np.ndarray) -> AtomicMeasure:
    """
    Atomic measure of U(·, t) at a, without the boundary-clearance rule

    Raises:
        SingularValueError: a preimage with |det ∇_x U| below the floor
    """
    field_t = U.slice(t)
    grid = U.cached(("seed", float(t)), lambda: SeedGrid.for_region(field_t, U.domain))
    points, dets = find_preimages(field_t, U.domain, a, grid)
    check_regular(dets, a)
    return AtomicMeasure(points.reshape(-1, U.dimension), np.sign(dets), unit_ball_volume(U.dimension))


def _tangent(J: np.ndarray) -> Tuple[np.ndarray, float]:
    """Kernel direction of the n × (n+1) joint gradient and its smallest singular value"""
    _, sv, vt = np.linalg.svd(J)
    return vt[-1], float(sv[-1])


class _Tracer:
    """Continuation state shared by the curves of one (U, a, slab)"""

    def __init__(self, U, a: np.ndarray, t_lo: float, t_hi: float, step_scale: float = 1.0):
        self.U = U
        self.a = a
        self.t_lo = t_lo
        self.t_hi = t_hi
        self.domain = U.domain
        self.step_scale = float(step_scale)
        diameter = U.cached(("range", float(t_lo)),
                            lambda: field_range_diameter(U.slice(t_lo), U.domain))
        self.tol = config.TRACE_TOL_FACTOR * diameter
        self.match_radius = 1e-5 * max(1.0, self.domain.diameter())

    def residual(self, X: np.ndarray):
        val, J = self.U.evaluate_with_joint_gradient(X[:-1], X[-1])
        return val - self.a, J

    def correct(self, X: np.ndarray) -> Tuple[np.ndarray, bool]:
        """Gauss-Newton back onto U = a along the row space of ∇̃U"""
        Y = X.copy()
        for _ in range(config.NEWTON_MAX_ITER):
            Y[-1] = min(max(Y[-1], 1e-9), 1.0 - 1e-9)
            r, J = self.residual(Y)
            if np.linalg.norm(r) < self.tol:
                return Y, True
            Y = Y - np.linalg.pinv(J) @ r
            if not np.all(np.isfinite(Y)):
                return X, False
        r, _ = self.residual(Y)
        return Y, bool(np.linalg.norm(r) < self.tol)

    def inside(self, X: np.ndarray) -> bool:
        return bool(self.domain.contains(X[:-1]))

    def slice_endpoint(self, P: np.ndarray, t: float) -> Optional[Tuple[np.ndarray, int]]:
        """Polish P onto U(·, t) = a; returns the point and sgn det ∇_x U"""
        field_t = self.U.slice(t)
        roots, ok = newton_solve(field_t, P[None, :-1], self.a[None, :])
        if not ok[0] or not self.domain.contains(roots[0]):
            return None
        det = float(determinant(field_t.jacobian(roots[:1]))[0])
        return np.append(roots[0], t), int(np.sign(det))

    def lateral_crossing(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """Bisect between X (inside) and Y (outside) to the exit through ∂Ω"""
        lo, hi = X, Y
        for _ in range(60):
            if np.linalg.norm(hi - lo) < 1e-12:
                break
            mid = 0.5 * (lo + hi)
            corrected, ok = self.correct(mid)
            mid = corrected if ok else mid
            if self.inside(mid) and self.t_lo <= mid[-1] <= self.t_hi:
                lo = mid
            else:
                hi = mid
        return lo

    def follow(self, start: np.ndarray, orient: Callable[[np.ndarray], np.ndarray],
               start_class: str, start_sign: int) -> LevelCurve:
        """
        Continue from ``start`` until the curve leaves the slab

        Raises:
            SingularCurveError: ∇̃U loses rank on the curve
        """
        X = start.copy()
        vertices = [X.copy()]
        tau_prev = None
        for _ in range(config.TRACE_MAX_STEPS):
            _, J = self.residual(X)
            tau, smallest = _tangent(J)
            if smallest < config.TRACE_SINGULAR_FLOOR:
                raise SingularCurveError(
                    f"Joint gradient singular (σ_min = {smallest:.3g}) at {X.tolist()}", point=X.tolist())
            tau = orient(tau) if tau_prev is None else (tau if tau @ tau_prev >= 0 else -tau)
            h = min(config.TRACE_STEP_CAP, config.TRACE_STEP_GAIN / np.linalg.norm(J, 2)) * self.step_scale

            Y, ok = None, False
            for _ in range(10):
                Y, ok = self.correct(X + h * tau)
                if ok and np.linalg.norm(Y - X) < 2.0 * h:
                    break
                h *= 0.5
                ok = False
            if not ok:
                logger.warning(f"Corrector failed near {X.tolist()}; curve left incomplete")
                return LevelCurve(np.array(vertices), (start_class, LATERAL), (start_sign, 0), complete=False)

            end = self.classify_step(X, Y)
            if end is not None:
                point, end_class, end_sign = end
                vertices.append(point)
                return LevelCurve(np.array(vertices), (start_class, end_class), (start_sign, end_sign))
            vertices.append(Y.copy())
            tau_prev = tau
            X = Y
        logger.warning(f"Step budget exhausted after {config.TRACE_MAX_STEPS} steps")
        return LevelCurve(np.array(vertices), (start_class, LATERAL), (start_sign, 0), complete=False)

    def classify_step(self, X: np.ndarray, Y: np.ndarray):
        """None while Y stays in the open slab, else (endpoint, class, sign)"""
        crossed = None
        if Y[-1] >= self.t_hi:
            crossed = (self.t_hi, TOP)
        elif Y[-1] <= self.t_lo:
            crossed = (self.t_lo, BOTTOM)
        if crossed is None:
            if self.inside(Y):
                return None
            return self.lateral_crossing(X, Y), LATERAL, 0
        t_end, end_class = crossed
        lam = (t_end - X[-1]) / (Y[-1] - X[-1])
        P = X + lam * (Y - X)
        if self.inside(P):
            hit = self.slice_endpoint(P, t_end)
            if hit is not None:
                return hit[0], end_class, hit[1]
        return self.lateral_crossing(X, P), LATERAL, 0

    def lateral_seeds(self, samples: int = 128, levels: int = 16) -> np.ndarray:
        """Points of U^{-1}(a) on ∂Ω × (t_lo, t_hi) found from a scan of the lateral surface"""
        U = self.U
        s_axis = np.arange(samples + 1) / samples
        t_axis = np.linspace(self.t_lo, self.t_hi, levels + 1)

        def scan():
            bpts = self.domain.boundary_point(s_axis)
            pts = np.repeat(bpts, len(t_axis), axis=0)
            ts = np.tile(t_axis, len(s_axis))
            return U.evaluate(pts, ts).reshape(len(s_axis), len(t_axis), -1)

        values = U.cached(("lateral", self.t_lo, self.t_hi, samples, levels), scan)
        corners = np.stack([values[:-1, :-1], values[1:, :-1], values[:-1, 1:], values[1:, 1:]])
        vmin, vmax = corners.min(axis=0), corners.max(axis=0)
        margin = 0.25 * (vmax - vmin)
        hit = np.all((vmin - margin <= self.a) & (vmax + margin >= self.a), axis=-1)
        seeds = []
        ds = 1e-7
        for i, j in zip(*np.nonzero(hit)):
            q = np.array([(s_axis[i] + s_axis[i + 1]) / 2, (t_axis[j] + t_axis[j + 1]) / 2])
            for _ in range(config.NEWTON_MAX_ITER):
                x = self.domain.boundary_point(q[0])[0]
                dx = (self.domain.boundary_point(q[0] + ds)[0] - self.domain.boundary_point(q[0] - ds)[0]) / (2 * ds)
                val, J = U.evaluate_with_joint_gradient(x, min(max(q[1], 1e-9), 1 - 1e-9))
                r = val - self.a
                if np.linalg.norm(r) < self.tol:
                    break
                M = np.column_stack([J[:, :-1] @ dx, J[:, -1]])
                q = q - np.linalg.pinv(M) @ r
            x = self.domain.boundary_point(q[0])[0]
            if not self.t_lo < q[1] < self.t_hi:
                continue
            r = U.evaluate(x, q[1]) - self.a
            if np.linalg.norm(r) < self.tol:
                point = np.append(x, q[1])
                if all(np.linalg.norm(point - p) >= self.match_radius for p in seeds):
                    seeds.append(point)
        return np.array(seeds).reshape(-1, self.domain.dimension + 1)

    def inward(self, X: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        def orient(tau):
            d = 1e-4 * self.domain.diameter()
            ahead = self.domain.distance_to_boundary(X[:-1] + d * tau[:-1])
            behind = self.domain.distance_to_boundary(X[:-1] - d * tau[:-1])
            return tau if ahead >= behind else -tau
        return orient


def _check_slab(U, t_lo: float, t_hi: float):
    if U.dimension != 2:
        raise InvalidParameterError("Level-set tracing is restricted to n = 2")
    if t_lo > t_hi:
        raise InvalidParameterError(f"Slab needs t_lo <= t_hi, got ({t_lo}, {t_hi})")
    check_scale(t_lo)
    check_scale(t_hi)


def trace_family(U, a, t_lo: float, t_hi: float, step_scale: float = 1.0,
                 strict: bool = False, lateral_samples: int = 128) -> TraceResult:
    """
    Trace every curve of U^{-1}(a) reachable from the end slices and the lateral surface

    Args:
        U: ExtensionField or AnalyticSlabField
        a: target in ℝ²
        t_lo, t_hi: slab
        step_scale: multiplier of the continuation step (0.5 halves it)
        strict: raise instead of warning when atoms stay unmatched

    Raises:
        SingularValueError: a singular for an end slice
        SingularCurveError: rank loss on a traced curve
        IncompleteTraceError: unmatched atoms with ``strict``
    """
    _check_slab(U, t_lo, t_hi)
    a = np.asarray(a, dtype=float).ravel()
    result = TraceResult(a.tolist(), float(t_lo), float(t_hi))
    if t_lo == t_hi:
        return result
    tracer = _Tracer(U, a, float(t_lo), float(t_hi), step_scale)
    result.bottom = slice_atoms(U, t_lo, a)
    result.top = slice_atoms(U, t_hi, a)

    endpoints: List[np.ndarray] = []

    def seen(point: np.ndarray) -> bool:
        return any(np.linalg.norm(point - p) < tracer.match_radius for p in endpoints)

    def record(curve: LevelCurve):
        result.curves.append(curve)
        endpoints.append(curve.vertices[0])
        endpoints.append(curve.vertices[-1])

    for loc, sign in zip(result.bottom.locations, result.bottom.signs):
        start = np.append(loc, t_lo)
        if not seen(start):
            record(tracer.follow(start, lambda tau: tau if tau[-1] > 0 else -tau, BOTTOM, int(sign)))
    for loc, sign in zip(result.top.locations, result.top.signs):
        start = np.append(loc, t_hi)
        if not seen(start):
            record(tracer.follow(start, lambda tau: tau if tau[-1] < 0 else -tau, TOP, int(sign)))
    for start in tracer.lateral_seeds(lateral_samples):
        if not seen(start):
            record(tracer.follow(start, tracer.inward(start), LATERAL, 0))

    for name, measure, t in ((BOTTOM, result.bottom, t_lo), (TOP, result.top, t_hi)):
        for loc, sign in zip(measure.locations, measure.signs):
            point = np.append(loc, t)
            hits = sum(np.linalg.norm(point - p) < tracer.match_radius for p in endpoints)
            if hits != 1:
                result.unmatched.append({"slice": name, "x": loc.tolist(), "sign": int(sign), "hits": int(hits)})
    if result.unmatched:
        message = f"{len(result.unmatched)} slice atoms not matched to exactly one curve endpoint at a={a.tolist()}"
        if strict:
            raise IncompleteTraceError(message, result.unmatched)
        logger.warning(message)
    logger.debug(f"Traced {len(result.curves)} curves at a={a.tolist()} on ({t_lo}, {t_hi})")
    return result


def trace_level_set(U, a, t_lo: float, t_hi: float, step_scale: float = 1.0,
                    strict: bool = False) -> List[LevelCurve]:
    """Curves of U^{-1}(a) ∩ (Ω × (t_lo, t_hi)); see ``trace_family``"""
    return trace_family(U, a, t_lo, t_hi, step_scale, strict).curves


def audit_endpoints(curves: List[LevelCurve], bottom: AtomicMeasure, top: AtomicMeasure,
                    t_lo: float, t_hi: float, match_radius: float = 1e-5) -> Dict:
    """
    Endpoint conservation and the crossing sign rules

    Returns:
        counts of endpoints per class, unmatched and multiply matched atoms,
        sign-rule violations and whether the bottom signs balance
    """
    counts = {c: 0 for c in ENDPOINT_CLASSES}
    violations = []
    bottom_sum = 0
    ends = []
    for idx, curve in enumerate(curves):
        for k in (0, 1):
            counts[curve.classes[k]] += 1
            if curve.classes[k] in (BOTTOM, TOP):
                ends.append(np.asarray(curve.vertices[0 if k == 0 else -1]))
            if curve.classes[k] == BOTTOM:
                bottom_sum += curve.signs[k]
        first, last = curve.classes
        if first == last and first in (BOTTOM, TOP) and curve.signs[0] != -curve.signs[1]:
            violations.append({"curve": idx, "rule": "same-slice curves join opposite signs"})
        if {first, last} == {BOTTOM, TOP} and curve.signs[0] != curve.signs[1]:
            violations.append({"curve": idx, "rule": "crossing curves keep their sign"})

    def match(measure: AtomicMeasure, t: float):
        unmatched, multiple = 0, 0
        for loc in measure.locations:
            point = np.append(loc, t)
            hits = sum(np.linalg.norm(point - e) < match_radius for e in ends)
            unmatched += hits == 0
            multiple += hits > 1
        return int(unmatched), int(multiple)

    bottom_unmatched, bottom_multiple = match(bottom, t_lo)
    top_unmatched, top_multiple = match(top, t_hi)
    conserved = bottom_sum == int(round(bottom.total_sign))
    return {
        "endpoints": counts,
        "unmatched": bottom_unmatched + top_unmatched,
        "multiply_matched": bottom_multiple + top_multiple,
        "sign_violations": violations,
        "bottom_sign_sum": int(bottom_sum),
        "bottom_atom_sign_sum": int(round(bottom.total_sign)),
        "conserved": bool(conserved and bottom_unmatched == 0 and top_unmatched == 0
                          and bottom_multiple == 0 and top_multiple == 0),
    }


def cauchy_gap_check(U, a, t_k: float, t_l: float, step_scale: float = 1.0) -> Tuple[float, float]:
    """
    (‖Ju_k^a - Ju_l^a‖_flat, ω_n·traced length) for the slab (t_k, t_l)

    Raises:
        as ``trace_family``
    """
    if t_k == t_l:
        return 0.0, 0.0
    lo, hi = min(t_k, t_l), max(t_k, t_l)
    family = trace_family(U, a, lo, hi, step_scale)
    lhs = flat_norm(family.bottom.difference(family.top), U.domain).value
    rhs = unit_ball_volume(U.dimension) * family.total_length
    return float(lhs), float(rhs)


def joint_jacobian_magnitude(joint: np.ndarray) -> np.ndarray:
    """|JU| = (Σ over n×n minors of the n×(n+1) joint gradient, squared)^{1/2}"""
    joint = np.asarray(joint, dtype=float)
    cols = joint.shape[-1]
    total = np.zeros(joint.shape[:-2])
    for k in range(cols):
        minor = np.delete(joint, k, axis=-1)
        total = total + determinant(minor) ** 2
    return np.sqrt(total)


def slab_jacobian_integral(U, t_lo: float, t_hi: float, t_points: int = 8) -> float:
    """∫_{Ω × (t_lo, t_hi)} |JU| with domain quadrature in x and Gauss-Legendre in t"""
    if t_hi <= t_lo:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(t_points)
    ts = 0.5 * (t_hi - t_lo) * nodes + 0.5 * (t_hi + t_lo)
    tw = 0.5 * (t_hi - t_lo) * weights
    total = 0.0
    for t, w in zip(ts, tw):
        joint = U.joint_gradient(U.domain.nodes, t)
        total += w * U.domain.integrate(joint_jacobian_magnitude(joint))
    return float(total)


@dataclass
class SlabCoarea:
    """Both sides of the slab coarea identity with the MC standard error"""
    lhs: float
    rhs: float
    stderr: float
    samples: int
    skipped: int

    @property
    def skip_fraction(self) -> float:
        return self.skipped / self.samples if self.samples else 0.0

    @property
    def unreliable(self) -> bool:
        return self.skip_fraction > config.UNRELIABLE_SKIP_FRACTION


def coarea_extension_check(U, slab: Tuple[float, float], sampler, samples: int = 2000,
                           workers: int = 1) -> SlabCoarea:
    """
    Monte Carlo ∫ H¹(U^{-1}(a)) da against ∫ |JU| over the slab

    Args:
        U: extension or analytic slab field
        slab: (t_lo, t_hi)
        sampler: object with ``draw(N)`` and ``volume`` covering the range of U
        samples: number of targets
        workers: threads for the per-target traces
    """
    t_lo, t_hi = slab
    if t_hi == t_lo:
        return SlabCoarea(0.0, 0.0, 0.0, 0, 0)
    _check_slab(U, t_lo, t_hi)
    logger.info(f"Slab coarea check on {U.name}, slab ({t_lo}, {t_hi}), {samples} samples")
    targets = sampler.draw(samples)

    def one(a):
        try:
            family = trace_family(U, a, t_lo, t_hi)
        except (SingularValueError, SingularCurveError) as e:
            logger.debug(f"Skipping a={np.round(a, 6).tolist()}: {e}")
            return None
        return family.total_length if family.complete else None

    lengths = ordered_map(one, list(targets), workers)
    kept = np.array([v for v in lengths if v is not None], dtype=float)
    skipped = len(lengths) - len(kept)
    volume = sampler.volume
    lhs = float(volume * kept.mean()) if len(kept) else 0.0
    stderr = float(volume * kept.std(ddof=1) / np.sqrt(len(kept))) if len(kept) > 1 else 0.0
    result = SlabCoarea(lhs, slab_jacobian_integral(U, t_lo, t_hi), stderr, len(lengths), skipped)
    if result.unreliable:
        logger.warning(f"Unreliable slab coarea estimate: {result.skip_fraction:.1%} of samples skipped")
    return result


def dump_curves(curves: List[LevelCurve], path) -> Path:
    """Write polylines as JSON for external plotting"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([c.to_dict() for c in curves], sort_keys=True, indent=2))
    except OSError as e:
        logger.error(f"Error writing curve dump {path}: {e}")
        raise
    logger.info(f"Wrote {len(curves)} curves to {path}")
    return path
