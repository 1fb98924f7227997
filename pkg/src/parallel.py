import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence

from tqdm import tqdm

import config

logger = logging.getLogger(__name__)


def parallel_map(
    fn: Callable,
    items: Iterable,
    threads: int = 1,
    initializer: Optional[Callable] = None,
    initargs: Sequence = (),
    desc: Optional[str] = None,
) -> List:
    """
    Ordered map over ``items`` on up to ``threads`` worker processes.

    ``initializer(*initargs)`` runs once per worker (or once in-process when
    running serially) so large shared arrays are not pickled per item. Results
    come back in input order whatever the worker count.
    """
    items = list(items)
    show = config.SHOW_PROGRESS and desc is not None
    if threads <= 1 or len(items) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show)]

    chunksize = max(1, len(items) // (8 * threads))
    logger.debug(f"{desc or 'map'}: {len(items)} tasks on {threads} processes (chunk {chunksize})")
    with ProcessPoolExecutor(max_workers=threads, initializer=initializer, initargs=tuple(initargs)) as pool:
        return list(
            tqdm(pool.map(fn, items, chunksize=chunksize), total=len(items), desc=desc, disable=not show)
        )
