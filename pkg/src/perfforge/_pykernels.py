"""Pure-Python versions of the compiled alignment kernels.

Same signatures and the same floating-point operation order as
``_ckernels.pyx`` so both backends return identical arrays.
"""

import numpy as np

MATCH, SKIP_SCORE, SKIP_PERF = 0, 1, 2


def jaccard_matrix(a, b):
    a_masks = [int(lo) | (int(hi) << 64) for lo, hi in np.asarray(a, dtype=np.uint64)]
    b_masks = [int(lo) | (int(hi) << 64) for lo, hi in np.asarray(b, dtype=np.uint64)]
    out = np.empty((len(a_masks), len(b_masks)), dtype=np.float64)
    for i, x in enumerate(a_masks):
        out[i] = [1.0 - (x & y).bit_count() / (x | y).bit_count() for y in b_masks]
    return out


def dtw_fill(dist, gap):
    dist = np.asarray(dist, dtype=np.float64).tolist()
    gap = float(gap)
    n = len(dist)
    m = len(dist[0]) if n else 0
    prev = [0.0] * (m + 1)
    prev_step = [-1] + [SKIP_PERF] * m
    for j in range(1, m + 1):
        prev[j] = prev[j - 1] + gap
    cost_rows, step_rows = [prev], [prev_step]
    for i in range(1, n + 1):
        row_d = dist[i - 1]
        cur = [prev[0] + gap] + [0.0] * m
        cur_step = [SKIP_SCORE] + [MATCH] * m
        for j in range(1, m + 1):
            best = prev[j - 1] + row_d[j - 1]
            choice = MATCH
            cand = prev[j] + gap
            if cand < best:
                best, choice = cand, SKIP_SCORE
            cand = cur[j - 1] + gap
            if cand < best:
                best, choice = cand, SKIP_PERF
            cur[j] = best
            cur_step[j] = choice
        cost_rows.append(cur)
        step_rows.append(cur_step)
        prev = cur
    return np.array(cost_rows, dtype=np.float64), np.array(step_rows, dtype=np.int8)
