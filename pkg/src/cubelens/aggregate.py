"""Vectorized group-by/fold kernel shared by query execution and the MQO
post-processing stage.

Keys are one int64 column per grouper.  When the cross product of the key
domains fits in an int64 the columns are packed into a single key; small key
spaces additionally use dense accumulation buffers instead of sorting.
Integer aggregates are computed exactly (int64 accumulation or float64 sums
that stay below 2**52, which are exact for integers).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

AGG_FUNCTIONS = ("sum", "min", "max", "count")

_PACK_LIMIT = 1 << 62
_DENSE_SPACE_LIMIT = 1 << 22
_DENSE_AT_ROW_LIMIT = 500_000
_EXACT_FLOAT_SUM = float(1 << 52)


def _pack(cols: Sequence[np.ndarray], sizes: Sequence[int]):
    """Pack key columns into one int64 key, or None when it would overflow."""
    total = 1
    for s in sizes:
        total *= max(int(s), 1)
        if total > _PACK_LIMIT:
            return None, None
    keys = cols[0].astype(np.int64, copy=True)
    for col, size in zip(cols[1:], sizes[1:]):
        keys *= max(int(size), 1)
        keys += col
    return keys, total


def _unpack(keys: np.ndarray, sizes: Sequence[int]) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    rest = keys
    for size in reversed([max(int(s), 1) for s in sizes[1:]]):
        out.append(rest % size)
        rest = rest // size
    out.append(rest)
    out.reverse()
    return out

def _sum_exact(keys, values, minlength):
    """Per-key sums, exact for int64 inputs."""
    if values.dtype.kind == "f":
        return np.bincount(keys, weights=values, minlength=minlength)
    bound = float(np.abs(values).max()) * len(values) if len(values) else 0.0
    if bound < _EXACT_FLOAT_SUM:
        sums = np.bincount(keys, weights=values.astype(np.float64), minlength=minlength)
        return np.rint(sums).astype(np.int64)
    acc = np.zeros(minlength, dtype=np.int64)
    np.add.at(acc, keys, values)
    return acc


def group_reduce(
    cols: Sequence[np.ndarray],
    sizes: Sequence[int],
    values: np.ndarray | None,
    op: str,
):
    """Group rows by the key columns and fold ``values`` with ``op``.

    Returns (unique key columns, folded values); groups appear only for keys
    present in the input.  ``values`` is ignored for op == 'count'.
    """
    if op not in AGG_FUNCTIONS:
        raise ValueError(f"unsupported aggregate {op!r}")
    n = len(cols[0]) if cols else 0
    if n == 0:
        empty_vals = np.empty(0, dtype=np.int64 if op == "count" else
                              (values.dtype if values is not None else np.int64))
        return [np.empty(0, dtype=np.int64) for _ in cols], empty_vals

    keys, space = _pack(cols, sizes)
    dense_ok = (keys is not None and space <= _DENSE_SPACE_LIMIT
                and space <= max(4 * n, 1 << 16)  # buffer passes must stay amortized
                and (op in ("sum", "count") or n <= _DENSE_AT_ROW_LIMIT))
    if dense_ok:
        return _dense_reduce(keys, space, sizes, values, op)
    if keys is not None:
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        new_group = np.empty(n, dtype=bool)
        new_group[0] = True
        np.not_equal(sorted_keys[1:], sorted_keys[:-1], out=new_group[1:])
        bounds = np.flatnonzero(new_group)
        uniq_cols = _unpack(sorted_keys[bounds], sizes)
    else:
        order = np.lexsort(tuple(reversed([np.asarray(c) for c in cols])))
        new_group = np.zeros(n, dtype=bool)
        new_group[0] = True
        for col in cols:
            sc = col[order]
            new_group[1:] |= sc[1:] != sc[:-1]
        bounds = np.flatnonzero(new_group)
        uniq_cols = [col[order][bounds] for col in cols]
    vals = _reduce_sorted(values, order, bounds, n, op)
    return uniq_cols, vals


def _reduce_sorted(values, order, bounds, n, op):
    if op == "count":
        return np.diff(np.append(bounds, n)).astype(np.int64)
    sorted_vals = values[order]
    if op == "sum":
        return np.add.reduceat(sorted_vals, bounds)
    if op == "min":
        return np.minimum.reduceat(sorted_vals, bounds)
    return np.maximum.reduceat(sorted_vals, bounds)


def _dense_reduce(keys, space, sizes, values, op):
    if op == "count":
        acc = np.bincount(keys, minlength=space)
        uniq = np.flatnonzero(acc)
        return _unpack(uniq, sizes), acc[uniq].astype(np.int64)
    if op == "sum":
        acc = _sum_exact(keys, values, space)
        touched = np.zeros(space, dtype=bool)
        touched[keys] = True
        uniq = np.flatnonzero(touched)
        return _unpack(uniq, sizes), acc[uniq]
    if values.dtype.kind == "f":
        sentinel = np.inf if op == "min" else -np.inf
        acc = np.full(space, sentinel, dtype=values.dtype)
    else:
        info = np.iinfo(values.dtype)
        acc = np.full(space, info.max if op == "min" else info.min, dtype=values.dtype)
    (np.minimum if op == "min" else np.maximum).at(acc, keys, values)
    touched = np.zeros(space, dtype=bool)
    touched[keys] = True
    uniq = np.flatnonzero(touched)
    return _unpack(uniq, sizes), acc[uniq]
