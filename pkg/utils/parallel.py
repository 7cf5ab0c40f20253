import logging
from concurrent.futures import ProcessPoolExecutor

LOG = logging.getLogger(__name__)


def run_parallel(fn, items, jobs=1):
    """Map a module-level function over items, keeping input order.

    Every item carries its own seed, so results do not depend on `jobs`.
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(int(jobs), len(items))
    LOG.debug("Running %d tasks on %d worker processes", len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
