"""numpy implementations of the hot loops, used when the extension is not built."""

import numpy as np

_SIGN = np.uint64(1 << 63)


def sortable_keys(scores):
    bits = (np.ascontiguousarray(scores, dtype=np.float64) + 0.0).view(np.uint64)
    neg = (bits & _SIGN) != 0
    return np.where(neg, ~bits, bits | _SIGN)


def prefix_histogram(keys, prefix, prefix_bits, bits):
    keys = np.asarray(keys, dtype=np.uint64)
    if prefix_bits > 0:
        keys = keys[(keys >> np.uint64(64 - prefix_bits)) == np.uint64(prefix)]
    shift = np.uint64(64 - prefix_bits - bits)
    buckets = (keys >> shift) & np.uint64((1 << bits) - 1)
    return np.bincount(buckets.astype(np.int64), minlength=1 << bits).astype(np.int64)


def top_k_mask(scores, ids, k):
    n = len(scores)
    out = np.zeros(n, dtype=bool)
    if k <= 0:
        return out
    if k >= n:
        out[:] = True
        return out
    order = np.lexsort((np.asarray(ids), -(np.asarray(scores) + 0.0)))
    out[order[:k]] = True
    return out


def token_counts(texts):
    return np.fromiter((len(t.split()) for t in texts), dtype=np.int64, count=len(texts))


def char_counts(texts):
    return np.fromiter(
        (sum(1 for c in t if not c.isspace()) for t in texts), dtype=np.int64, count=len(texts)
    )
