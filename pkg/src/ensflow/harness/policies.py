"""Measurement policies: where to sense next."""

from dataclasses import dataclass

import numpy as np

from ..kernels import as_positions

KINDS = ("uniform", "subspace", "active")


@dataclass(frozen=True, eq=False)
class PolicyConfig:
    """Policy kind, candidate positions, and the rectangle used by ``subspace``.

    ``rect`` is ``(xmin, xmax, ymin, ymax)``; it must contain at least one
    candidate.
    """

    kind: str
    candidates: np.ndarray
    rect: tuple = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {KINDS}")
        C = as_positions(self.candidates)
        object.__setattr__(self, "candidates", C)
        if self.kind == "subspace":
            if self.rect is None:
                raise ValueError("subspace policy needs a rectangle")
            if not np.any(self.in_rect()):
                raise ValueError("subspace rectangle contains no candidate positions")

    def in_rect(self):
        x0, x1, y0, y1 = self.rect
        C = self.candidates
        return (C[:, 0] >= x0) & (C[:, 0] <= x1) & (C[:, 1] >= y0) & (C[:, 1] <= y1)


def predicted_uncertainty(Hs, P):
    """``trace(H(x) P H(x)^T)`` for each stacked ``H`` of shape ``(N, 2, N_W)``."""
    return np.einsum("nik,kl,nil->n", Hs, P, Hs)


def next_measurement_position(p, s, M, rng, H_candidates=None):
    """Pick the next sensing position from ``p.candidates``.

    ``uniform`` draws any candidate, ``subspace`` draws a candidate inside the
    rectangle, and ``active`` takes the candidate with the largest predicted
    flow variance (first index on ties).  ``H_candidates`` may carry
    precomputed ``H`` blocks for the candidates.
    """
    C = p.candidates
    if p.kind == "uniform":
        return C[rng.integers(C.shape[0])]
    if p.kind == "subspace":
        idx = np.flatnonzero(p.in_rect())
        return C[idx[rng.integers(idx.size)]]
    Hs = M.H_stack(C) if H_candidates is None else H_candidates
    return C[int(np.argmax(predicted_uncertainty(Hs, s.P)))]


def default_subspace_rect(M, s, candidates=None, fraction=0.25):
    """Axis-aligned window of about ``fraction`` of the candidates with the most prior uncertainty.

    The window spans ``ceil(sqrt(fraction) * n)`` distinct coordinate values
    along each axis and is slid over every offset; the offset maximising the
    summed ``trace(H P H^T)`` of the enclosed candidates wins.
    """
    C = M.positions if candidates is None else as_positions(candidates)
    score = predicted_uncertainty(M.H_stack(C), s.P)
    xs = np.unique(C[:, 0])
    ys = np.unique(C[:, 1])
    side = np.sqrt(fraction)
    wx = max(1, int(np.ceil(side * xs.size)))
    wy = max(1, int(np.ceil(side * ys.size)))
    best, best_rect = -np.inf, None
    for i in range(xs.size - wx + 1):
        for j in range(ys.size - wy + 1):
            rect = (xs[i], xs[i + wx - 1], ys[j], ys[j + wy - 1])
            inside = (C[:, 0] >= rect[0]) & (C[:, 0] <= rect[1]) & (C[:, 1] >= rect[2]) & (C[:, 1] <= rect[3])
            total = score[inside].sum()
            if total > best:
                best, best_rect = total, rect
    return tuple(float(v) for v in best_rect)
