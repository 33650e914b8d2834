"""Content-keyed cache for derived matrices (Gram blocks, squared distances).

Tuning revisits the same training subsets many times (grid points over one
fold, stacking banks over one training set), recomputing identical kernel
and distance matrices.  Keys hash the input arrays' bytes, so a hit is a
bitwise-identical recomputation -- results cannot depend on cache state.
Cached arrays are returned read-only; callers that mutate must copy.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict

import numpy as np

__all__ = ["MatrixCache", "array_key"]

MAX_CACHED_ELEMENTS = 20_000_000  # ~160 MB of float64 per entry
MAX_ENTRIES = 2


def array_key(*parts) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(str(part.shape).encode())
            h.update(np.ascontiguousarray(part).tobytes())
        else:
            h.update(repr(part).encode())
        h.update(b"\x1f")
    return h.digest()


class MatrixCache:
    def __init__(self, max_entries: int = MAX_ENTRIES, max_elements: int = MAX_CACHED_ELEMENTS):
        self.max_entries = max_entries
        self.max_elements = max_elements
        self._store: OrderedDict[bytes, np.ndarray] = OrderedDict()

    def get_or_compute(self, key: bytes, size: int, compute) -> np.ndarray:
        """Return the cached matrix for ``key`` or compute, cache and return it.

        Matrices larger than the element cap are computed fresh every time
        (and returned writable).
        """
        if size > self.max_elements:
            return compute()
        hit = self._store.get(key)
        if hit is not None:
            self._store.move_to_end(key)
            return hit
        value = compute()
        value.flags.writeable = False
        self._store[key] = value
        while len(self._store) > self.max_entries:
            self._store.popitem(last=False)
        return value
