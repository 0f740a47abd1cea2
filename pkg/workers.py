"""
Worker pool helpers
Order-preserving parallel map over fixed chunks.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

from loguru import logger

from errors import ConfigError


def resolve_workers(flag: Optional[int] = None) -> int:
    """
    Resolve the worker count: explicit flag, then FRACJAC_WORKERS, then CPU count

    Raises:
        ConfigError: non-positive or non-integer values
    """
    if flag is not None:
        value, source = flag, "--workers"
    elif os.getenv("FRACJAC_WORKERS"):
        value, source = os.getenv("FRACJAC_WORKERS"), "FRACJAC_WORKERS"
    else:
        return max(1, os.cpu_count() or 1)
    try:
        workers = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{source} must be an integer, got {value!r}", key="workers")
    if workers < 1:
        raise ConfigError(f"{source} must be >= 1, got {workers}", key="workers")
    return workers


def ordered_map(fn: Callable, items: Iterable, workers: int = 1) -> List:
    """
    Apply ``fn`` to every item and return results in input order

    Args:
        fn: pure function of one item
        items: inputs
        workers: thread count; 1 runs inline

    Returns:
        list of results, same order as ``items``
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug(f"ordered_map: {len(items)} items on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
