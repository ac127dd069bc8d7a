"""Independent coordinate-level reference for the spiral-array features.

Positions come from numpy trigonometry rather than a lookup table, and
windows are built by brute-force clipping of each note interval.
"""

import numpy as np

H = np.sqrt(2 / 15)


def position(pc):
    k = (7 * pc) % 12
    return np.array([np.sin(k * np.pi / 2), np.cos(k * np.pi / 2), k * H])


def ce(weights):
    """weights: dict pc -> weight."""
    pcs = [pc for pc, w in weights.items() if w > 0]
    if not pcs:
        return None
    w = np.array([weights[pc] for pc in pcs])
    pts = np.array([position(pc) for pc in pcs])
    return (w[:, None] * pts).sum(axis=0) / w.sum()


def diameter(pcs):
    pts = [position(pc) for pc in set(pcs)]
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = max(best, float(np.linalg.norm(pts[i] - pts[j])))
    return best


def series(notes, window=1.0, hop=0.5):
    """notes: (onset, duration, pitch); duration weighting only."""
    end = max(o + d for o, d, _ in notes)
    total = {}
    for o, d, p in notes:
        total[p % 12] = total.get(p % 12, 0.0) + d
    key = ce(total)
    out, prev, k = [], None, 0
    while k == 0 or k * hop < end:
        a, b = k * hop, k * hop + window
        w, present = {}, []
        for o, d, p in notes:
            overlap = min(o + d, b) - max(o, a)
            if overlap > 0 or (d == 0 and a <= o < b):
                present.append(p % 12)
                w[p % 12] = w.get(p % 12, 0.0) + max(overlap, 0.0)
        c = ce(w)
        if c is None:
            out.append((a + window / 2, diameter(present), 0.0, 0.0))
        else:
            mom = 0.0 if prev is None else float(np.linalg.norm(c - prev))
            out.append((a + window / 2, diameter(present), mom, float(np.linalg.norm(c - key))))
        prev = c
        k += 1
    return out
