"""Hot numeric loops, each in two flavours.

``*_jit`` variants are compiled with numba; ``*_numpy`` variants are pure
numpy with the same floating-point operation order, so both paths return
bit-identical results. The public names (``knn_mean_labels``,
``select_routes``, ``blur_residual``, ``assignment_sums``) point at
the compiled path unless numba is unavailable or ``COSTROUTE_NO_NUMBA`` is
set to a truthy value before import.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("COSTROUTE_NO_NUMBA", "").lower() not in (
    "1",
    "true",
    "yes",
    "on",
)


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


# --------------------------------------------------------------------------
# reflect-101 index mapping

def _reflect101(i, n):
    if n == 1:
        return 0
    period = 2 * n - 2
    i = i % period
    if i >= n:
        i = period - i
    return i


_reflect101_jit = _njit(_reflect101)


def reflect101_indices(idx: np.ndarray, n: int) -> np.ndarray:
    """Vectorized reflect-101 (edge pixel not repeated) index mapping."""
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


# --------------------------------------------------------------------------
# exact k-nearest-neighbour label averaging

@_njit
def _stable_argsort(key, order, tmp):
    # bottom-up merge sort of row indices by key; equal keys keep row order.
    # numba's own argsort(kind="mergesort") costs seconds of cold compile.
    n = key.shape[0]
    for i in range(n):
        order[i] = i
    width = 1
    while width < n:
        lo = 0
        while lo < n:
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            a, b, t = lo, mid, lo
            while a < mid and b < hi:
                if key[order[b]] < key[order[a]]:
                    tmp[t] = order[b]
                    b += 1
                else:
                    tmp[t] = order[a]
                    a += 1
                t += 1
            while a < mid:
                tmp[t] = order[a]
                a += 1
                t += 1
            while b < hi:
                tmp[t] = order[b]
                b += 1
                t += 1
            lo = hi
        for i in range(n):
            order[i] = tmp[i]
        width *= 2


@_njit
def knn_mean_labels_jit(train_x, train_y, queries, k):
    n, d = train_x.shape
    m = train_y.shape[1]
    nq = queries.shape[0]
    out = np.empty((nq, m))
    dist = np.empty(n)
    order = np.empty(n, dtype=np.int64)
    tmp = np.empty(n, dtype=np.int64)
    chosen = np.empty(n, dtype=np.bool_)
    for q in range(nq):
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = queries[q, j] - train_x[i, j]
                acc += diff * diff
            dist[i] = acc
        _stable_argsort(dist, order, tmp)
        chosen[:] = False
        for t in range(k):
            chosen[order[t]] = True
        for c in range(m):
            out[q, c] = 0.0
        # neighbours summed in ascending row order, as in the numpy path
        for row in range(n):
            if chosen[row]:
                for c in range(m):
                    out[q, c] += train_y[row, c]
        for c in range(m):
            out[q, c] = out[q, c] / k
    return out


def knn_mean_labels_numpy(train_x, train_y, queries, k, chunk=256):
    n, d = train_x.shape
    m = train_y.shape[1]
    nq = queries.shape[0]
    out = np.empty((nq, m))
    for start in range(0, nq, chunk):
        q = queries[start:start + chunk]
        dist = np.zeros((q.shape[0], n))
        for j in range(d):
            diff = q[:, j:j + 1] - train_x[None, :, j]
            dist += diff * diff
        order = np.argsort(dist, axis=1, kind="stable")
        nearest = np.sort(order[:, :k], axis=1)
        acc = np.zeros((q.shape[0], m))
        for t in range(k):
            acc += train_y[nearest[:, t]]
        out[start:start + q.shape[0]] = acc / k
    return out


# --------------------------------------------------------------------------
# argmax of adjusted scores, ties -> lower cost, then lower index

@_njit
def select_routes_jit(adjusted, costs):
    n, m = adjusted.shape
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = 0
        for j in range(1, m):
            a = adjusted[i, j]
            b = adjusted[i, best]
            if a > b or (a == b and costs[j] < costs[best]):
                best = j
        out[i] = best
    return out


def select_routes_numpy(adjusted, costs):
    top = adjusted.max(axis=1, keepdims=True)
    tied = adjusted == top
    tied_cost = np.where(tied, costs[None, :], np.inf)
    cheapest = tied & (tied_cost == tied_cost.min(axis=1, keepdims=True))
    return np.argmax(cheapest, axis=1).astype(np.int64)


# --------------------------------------------------------------------------
# 2-D correlation with reflect-101 padding, per channel
#
# Returns the residual sum_k w_k * (x_k - x_center); the blurred image is
# x + residual. Differencing against the centre keeps constant regions
# exactly fixed regardless of rounding in the weights.

@_njit
def blur_residual_jit(img, kernel):
    h, w, ch = img.shape
    size = kernel.shape[0]
    r = size // 2
    out = np.empty_like(img)
    for y in range(h):
        for x in range(w):
            for c in range(ch):
                centre = img[y, x, c]
                acc = 0.0
                for dy in range(size):
                    yy = _reflect101_jit(y + dy - r, h)
                    for dx in range(size):
                        xx = _reflect101_jit(x + dx - r, w)
                        acc += kernel[dy, dx] * (img[yy, xx, c] - centre)
                out[y, x, c] = acc
    return out


def blur_residual_numpy(img, kernel):
    h, w, _ = img.shape
    size = kernel.shape[0]
    r = size // 2
    rows = [reflect101_indices(np.arange(h) + dy - r, h) for dy in range(size)]
    cols = [reflect101_indices(np.arange(w) + dx - r, w) for dx in range(size)]
    acc = np.zeros_like(img)
    for dy in range(size):
        band = img[rows[dy]]
        for dx in range(size):
            acc = acc + kernel[dy, dx] * (band[:, cols[dx]] - img)
    return acc


# --------------------------------------------------------------------------
# cost/quality sums of prompt->model assignments, for exhaustive enumeration
#
# Assignment ``code`` maps prompt i to model (code // M**i) % M. Sums are
# taken over the ascending-sorted per-prompt terms so that two assignments
# contributing the same multiset of values get bit-identical totals.

@_njit
def _insertion_sort(buf):
    # in place; n is tiny here and np.sort would allocate per assignment
    for i in range(1, buf.shape[0]):
        v = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > v:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = v


@_njit
def assignment_sums_jit(labels, costs, start, stop):
    n, m = labels.shape
    count = stop - start
    cost_sum = np.empty(count)
    qual_sum = np.empty(count)
    qbuf = np.empty(n)
    cbuf = np.empty(n)
    for t in range(count):
        code = start + t
        for i in range(n):
            j = code % m
            code //= m
            qbuf[i] = labels[i, j]
            cbuf[i] = costs[j]
        _insertion_sort(qbuf)
        _insertion_sort(cbuf)
        qa = 0.0
        ca = 0.0
        for i in range(n):
            qa += qbuf[i]
            ca += cbuf[i]
        qual_sum[t] = qa
        cost_sum[t] = ca
    return cost_sum, qual_sum


def assignment_sums_numpy(labels, costs, start, stop):
    n, m = labels.shape
    codes = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((codes.size, n), dtype=np.int64)
    rest = codes.copy()
    for i in range(n):
        digits[:, i] = rest % m
        rest //= m
    q = np.sort(labels[np.arange(n)[None, :], digits], axis=1)
    c = np.sort(costs[digits], axis=1)
    qa = np.zeros(codes.size)
    ca = np.zeros(codes.size)
    for i in range(n):
        qa = qa + q[:, i]
        ca = ca + c[:, i]
    return ca, qa


if USE_NUMBA:
    knn_mean_labels = knn_mean_labels_jit
    select_routes = select_routes_jit
    blur_residual = blur_residual_jit
    assignment_sums = assignment_sums_jit
else:
    knn_mean_labels = knn_mean_labels_numpy
    select_routes = select_routes_numpy
    blur_residual = blur_residual_numpy
    assignment_sums = assignment_sums_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
