"""Reference implementations of the hot kernels in plain Python/numpy."""

from __future__ import annotations

import numpy as np


def scan_match(tags: np.ndarray, tokens: np.ndarray) -> np.ndarray:
    """Indices of ``tags`` found in the sorted array ``tokens`` (one pass)."""
    if tokens.size == 0 or tags.size == 0:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(np.isin(tags, tokens)).astype(np.int64)


def lambda_count(limits: list[int], n_secondary: int) -> int:
    """Bijections from secondary bins to positions with ``pos(B) < limits[B]``."""
    total = 1
    for i, lim in enumerate(sorted(limits)):
        f = min(lim, n_secondary) - i
        if f <= 0:
            return 0
        total *= f
    return total


_FACT = [1]
for _i in range(1, 64):
    _FACT.append(_FACT[-1] * _i)


def enumerate_assignments(
    allowed: np.ndarray,
    k: int,
    weighted: int,
    ref_bin: np.ndarray,
    val_bin: np.ndarray,
    ref_primary: bool,
    ref_bin_size: np.ndarray,
    val_bin_size: np.ndarray,
):
    """Weighted enumeration of partial injections refs -> values with ``k`` pairs.

    ``allowed[e, v]`` says whether ref ``e`` may map to value ``v``; column
    ``n`` stands for "no partner". With ``weighted == 1`` each assignment is
    weighted by the number of bin layouts that realize it given the bin
    partition (``ref_bin``, ``val_bin``), and at most one pair per bin pair
    is allowed. ``weighted == 2`` counts every realizable assignment once.
    ``weighted == 0`` counts every allowed assignment once.

    Returns ``(counts, total, joint_e, joint_v)``: weighted counts of
    ``e -> v``, the total weight, and weighted counts of both refs (resp.
    both values) having a partner.
    """
    m, n1 = allowed.shape
    n = n1 - 1
    nrb = len(ref_bin_size)
    nvb = len(val_bin_size)
    counts = np.zeros((m, n), dtype=np.int64)
    joint_e = np.zeros((m, m), dtype=np.int64)
    joint_v = np.zeros((n, n), dtype=np.int64)
    total = 0
    cell = [[0] * nvb for _ in range(nrb)]
    r_used = [0] * nrb
    v_used = [0] * nvb
    sigma = [-1] * m
    taken = [False] * n
    allowed_l = allowed.tolist()
    rb = [int(b) for b in ref_bin]
    vb = [int(b) for b in val_bin]
    rsz = [int(s) for s in ref_bin_size]
    vsz = [int(s) for s in val_bin_size]

    def weight() -> int:
        if not weighted:
            return 1
        w = 1
        for a in range(nrb):
            w *= _FACT[rsz[a] - r_used[a]]
        for b in range(nvb):
            w *= _FACT[vsz[b] - v_used[b]]
        if ref_primary:
            limits = [
                min([rsz[a] for a in range(nrb) if cell[a][b]], default=nvb) for b in range(nvb)
            ]
            w *= lambda_count(limits, nvb)
        else:
            limits = [min([vsz[b] for b in range(nvb) if cell[a][b]], default=nrb) for a in range(nrb)]
            w *= lambda_count(limits, nrb)
        return min(w, 1) if weighted == 2 else w

    def leaf() -> None:
        nonlocal total
        w = weight()
        if w == 0:
            return
        total += w
        mapped = [e for e in range(m) if sigma[e] >= 0]
        for e in mapped:
            counts[e, sigma[e]] += w
        for e in mapped:
            for f in mapped:
                joint_e[e, f] += w
                joint_v[sigma[e], sigma[f]] += w

    def dfs(e: int, left: int) -> None:
        if left > m - e:
            return
        if e == m:
            leaf()
            return
        if allowed_l[e][n] and left <= m - e - 1:
            dfs(e + 1, left)
        if left == 0:
            return
        a = rb[e]
        for v in range(n):
            if taken[v] or not allowed_l[e][v]:
                continue
            b = vb[v]
            if weighted and cell[a][b]:
                continue
            taken[v] = True
            sigma[e] = v
            cell[a][b] += 1
            r_used[a] += 1
            v_used[b] += 1
            dfs(e + 1, left - 1)
            cell[a][b] -= 1
            r_used[a] -= 1
            v_used[b] -= 1
            sigma[e] = -1
            taken[v] = False

    dfs(0, k)
    return counts, total, joint_e, joint_v
