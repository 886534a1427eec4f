"""Order-preserving map over independent trials."""

from concurrent.futures import ThreadPoolExecutor


def pmap(fn, items, workers=1):
    """``list(map(fn, items))``, optionally spread over a thread pool.

    Results come back in input order, so any reduction the caller performs is
    independent of ``workers``. numpy's linear algebra releases the GIL, which
    is where these trials spend their time.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
