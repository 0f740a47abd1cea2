"""
Fractional Norms
L^p norms, Gagliardo seminorms and grid Hölder norms over domain quadrature.
"""
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Union

import numpy as np
from loguru import logger
from scipy.spatial.distance import cdist

import config
from domain_field import Domain, VectorField, make_domain
from errors import InvalidParameterError
from workers import ordered_map

FieldLike = Union[VectorField, np.ndarray]


@dataclass(frozen=True)
class NormParams:
    """Exponents of a norm evaluation"""
    s: float = 0.5
    p: float = 2.0
    alpha: Optional[float] = None
    cutoff: Optional[float] = None

    def validate(self):
        _check_sp(self.s, self.p)
        if self.alpha is not None:
            _check_alpha(self.alpha)
        return self

    def in_weak_range(self, n: int) -> bool:
        """s > (n-1)/n and sp > n-1"""
        return self.s > (n - 1) / n and self.s * self.p > n - 1


def _check_p(p: float):
    if not p >= 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")


def _check_sp(s: float, p: float):
    _check_p(p)
    if not 0 < s < 1:
        raise InvalidParameterError(f"s must lie in (0, 1), got {s}")


def _check_alpha(alpha: float):
    if not 0 < alpha <= 1:
        raise InvalidParameterError(f"alpha must lie in (0, 1], got {alpha}")


def nodal_values(u: FieldLike, domain: Domain) -> np.ndarray:
    """Values at the interior nodes, shape (N, m)"""
    if isinstance(u, VectorField):
        return u(domain.nodes)
    values = np.asarray(u, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if len(values) != len(domain.nodes):
        raise InvalidParameterError(
            f"Expected {len(domain.nodes)} nodal values, got {len(values)}")
    return values


def lp_norm(u: FieldLike, domain: Domain, p: float) -> float:
    """
    (Σ_x w_x |u(x)|^p)^{1/p}; p = inf gives the nodal max

    Raises:
        InvalidParameterError: p < 1
    """
    _check_p(p)
    mags = np.linalg.norm(nodal_values(u, domain), axis=1)
    if np.isinf(p):
        return float(np.max(mags)) if len(mags) else 0.0
    return float(np.sum(domain.weights * mags ** p) ** (1.0 / p))


def _row_blocks(count: int, rows: int) -> List[range]:
    return [range(i, min(i + rows, count)) for i in range(0, count, rows)]


def seminorm_pairs(values: np.ndarray, domain: Domain, s: float, p: float,
                   cutoff: float = None, workers: int = 1) -> float:
    """
    Ordered-pair sum Σ_{i<j, |x_i-x_j|>=cutoff} w_i w_j |Δu|^p / |Δx|^{n+sp}

    Row blocks are fixed by PAIR_BLOCK_ROWS so the reduction order does not
    depend on ``workers``.
    """
    nodes = domain.nodes
    weights = domain.weights
    n = domain.dimension
    cutoff = domain.cell_diameter if cutoff is None else cutoff
    exponent = n + s * p
    count = len(nodes)

    def block_sum(rows: range) -> float:
        i0, i1 = rows.start, rows.stop
        dist = cdist(nodes[i0:i1], nodes[i0:])
        diff = cdist(values[i0:i1], values[i0:])
        upper = np.arange(i0, count)[None, :] > np.arange(i0, i1)[:, None]
        mask = upper & (dist >= cutoff)
        ratio = np.zeros_like(dist)
        ratio[mask] = diff[mask] ** p / dist[mask] ** exponent
        return float(weights[i0:i1] @ ratio @ weights[i0:])

    partials = ordered_map(block_sum, _row_blocks(count, config.PAIR_BLOCK_ROWS), workers)
    return 2.0 * float(np.sum(partials))


def fractional_seminorm(u: FieldLike, domain: Domain, s: float, p: float,
                        cutoff: float = None, workers: int = 1) -> float:
    """
    Gagliardo seminorm [u]_{W^{s,p}} with the diagonal strip omitted

    Pairs closer than one cell diameter are skipped, so the value is a lower
    estimate at fixed resolution.

    Raises:
        InvalidParameterError: s outside (0, 1) or p < 1
    """
    _check_sp(s, p)
    start = time.perf_counter()
    values = nodal_values(u, domain)
    total = seminorm_pairs(values, domain, s, p, cutoff, workers)
    logger.debug(f"seminorm s={s} p={p} on {len(values)} nodes "
                 f"in {1000 * (time.perf_counter() - start):.0f} ms")
    return float(total ** (1.0 / p))


def sobolev_norm(u: FieldLike, domain: Domain, s: float, p: float, workers: int = 1) -> float:
    """‖u‖_{W^{s,p}} = ‖u‖_{L^p} + [u]_{W^{s,p}}"""
    return lp_norm(u, domain, p) + fractional_seminorm(u, domain, s, p, workers=workers)


def extrapolated_seminorm(u: Union[VectorField, Callable[[Domain], np.ndarray]], domain: Domain,
                          s: float, p: float, workers: int = 1) -> float:
    """
    Richardson extrapolation of the seminorm in the resolution

    The omitted diagonal mass scales like h^{p(1-s)}; the p-th powers at
    resolutions r and 2r are combined to cancel that term.

    Args:
        u: field, or callable returning nodal values for a domain
        domain: coarse domain (resolution r)
    """
    _check_sp(s, p)
    fine = make_domain(domain.kind, domain.params, 2 * domain.resolution)
    coarse_vals = u(domain.nodes) if isinstance(u, VectorField) else u(domain)
    fine_vals = u(fine.nodes) if isinstance(u, VectorField) else u(fine)
    coarse = seminorm_pairs(nodal_values(coarse_vals, domain), domain, s, p, workers=workers)
    refined = seminorm_pairs(nodal_values(fine_vals, fine), fine, s, p, workers=workers)
    factor = 2.0 ** (p * (1.0 - s))
    value = (factor * refined - coarse) / (factor - 1.0)
    return float(max(value, 0.0) ** (1.0 / p))


def holder_seminorm(u: FieldLike, domain: Domain, alpha: float, workers: int = 1) -> float:
    """max over node pairs of |u(x) - u(y)| / |x - y|^alpha"""
    _check_alpha(alpha)
    nodes = domain.nodes
    values = nodal_values(u, domain)
    count = len(nodes)

    def block_max(rows: range) -> float:
        i0, i1 = rows.start, rows.stop
        dist = cdist(nodes[i0:i1], nodes[i0:])
        diff = cdist(values[i0:i1], values[i0:])
        mask = dist > 0
        if not np.any(mask):
            return 0.0
        return float(np.max(diff[mask] / dist[mask] ** alpha))

    partials = ordered_map(block_max, _row_blocks(count, config.PAIR_BLOCK_ROWS), workers)
    return float(max(partials)) if partials else 0.0


def holder_norm(u: FieldLike, domain: Domain, alpha: float, workers: int = 1) -> float:
    """
    Grid Hölder norm ‖u‖_{C^{0,α}} = max|u| + grid Hölder seminorm

    Raises:
        InvalidParameterError: alpha outside (0, 1]
    """
    _check_alpha(alpha)
    return lp_norm(u, domain, np.inf) + holder_seminorm(u, domain, alpha, workers)


def compute_norm(u: FieldLike, domain: Domain, params: NormParams, workers: int = 1) -> dict:
    """Seminorm (and the grid Hölder norm when alpha is given) as a record"""
    start = time.perf_counter()
    record = {
        "s": params.s,
        "p": params.p,
        "resolution": domain.resolution,
        "value": fractional_seminorm(u, domain, params.s, params.p, params.cutoff, workers),
        "lp": lp_norm(u, domain, params.p),
    }
    if params.alpha is not None:
        record["alpha"] = params.alpha
        record["holder"] = holder_norm(u, domain, params.alpha, workers)
    record["runtime_ms"] = round(1000 * (time.perf_counter() - start), 3)
    return record
