"""Window-sequence decision rules shared by the GGM and SVM pipelines."""
from __future__ import annotations

import numpy as np


def memory_classify(scores, alpha: float):
    """Blend each window's class scores with the previous window's.

    ``P(w_i) = alpha * f(w_i) + (1 - alpha) * f(w_{i-1})`` and
    ``P(w_1) = f(w_1)``. Returns ``(P, kstar)``; argmax ties go to the lowest
    class index.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    f = np.atleast_2d(np.asarray(scores, dtype=float))
    P = f.copy()
    if len(f) > 1:
        P[1:] = alpha * f[1:] + (1.0 - alpha) * f[:-1]
    # np.argmax returns the first maximum
    return P, P.argmax(1)


def majority_vote(kstar) -> int:
    """Most frequent class index; ties go to the lowest index."""
    k = np.asarray(kstar, dtype=np.int64)
    if len(k) == 0:
        raise ValueError("no windows to vote with")
    return int(np.bincount(k).argmax())
