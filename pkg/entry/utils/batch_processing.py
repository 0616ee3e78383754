"""
Thread-pooled batches for independent checks (probe starts, embedding verifications).
"""
import concurrent.futures
from typing import Any, Callable, List, Sequence, TypeVar

from loguru import logger

T = TypeVar("T")
R = TypeVar("R")


def chunk_list(items: Sequence[T], chunk_size: int) -> List[List[T]]:
    """
    Split items into consecutive chunks.

    Args:
        items: Items to split
        chunk_size: Largest chunk length

    Returns:
        Chunks in order; the last one may be shorter
    """
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be at least 1, got {chunk_size}")
    return [list(items[i:i + chunk_size]) for i in range(0, len(items), chunk_size)]


def _run_chunk(chunk: List[T], processor_func: Callable[[T], R], batch_name: str, offset: int) -> List[R]:
    results = []
    for i, item in enumerate(chunk):
        try:
            results.append(processor_func(item))
        except Exception as e:
            logger.error(f"❌ Failed on {batch_name} item {offset + i}: {e}")
            raise
    return results


def parallel_process_batch(
    items: Sequence[T],
    processor_func: Callable[[T], R],
    max_workers: int = 4,
    chunk_size: int = 10,
    batch_name: str = "items",
) -> List[R]:
    """
    Apply processor_func to every item, chunked over a thread pool.

    Args:
        items: Independent work items
        processor_func: Function applied to each item
        max_workers: Pool size; 1 runs inline
        chunk_size: Items per submitted task
        batch_name: Name used in log lines

    Returns:
        Results in input order. The first failing item re-raises its error.
    """
    items = list(items)
    if max_workers <= 1 or len(items) <= chunk_size:
        logger.debug(f"🔄 Processing {len(items)} {batch_name} inline")
        return _run_chunk(items, processor_func, batch_name, 0)

    chunks = chunk_list(items, chunk_size)
    logger.debug(f"🔄 Processing {len(items)} {batch_name} in {len(chunks)} chunks with {max_workers} workers")
    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [
            executor.submit(_run_chunk, chunk, processor_func, batch_name, n * chunk_size)
            for n, chunk in enumerate(chunks)
        ]
        results: List[Any] = []
        for future in futures:
            results.extend(future.result())
    return results
