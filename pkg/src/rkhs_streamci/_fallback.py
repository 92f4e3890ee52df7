"""Pure numpy implementation of the compiled inner loops in ``_core``.

Same layouts as the compiled version: ``phit`` is (D, cap), ``coef`` is
(cap, R), ``mult`` is (stop - start, R). Predictions are formed in fixed
column blocks so a column's arithmetic does not depend on the requested
column range, as long as ranges start on a block boundary.
"""
import numpy as np

BACKEND = "python"
COL_BLOCK = 64


def advance(phit, mu, coef, y, gammas, mult, start, stop, c0=0, c1=-1):
    R = coef.shape[1]
    if c1 < 0:
        c1 = R
    if not 0 <= c0 <= c1 <= R:
        raise ValueError("bad column range")
    if stop > phit.shape[1] or stop > coef.shape[0] or mult.shape[0] < stop - start:
        raise ValueError("arrival range exceeds storage")
    if mult.shape[1] != R:
        raise ValueError("multiplier columns do not match trajectories")
    if mu.shape[0] != phit.shape[0]:
        raise ValueError("eigenvalue vector does not match feature rows")
    edges = list(range(c0, c1, COL_BLOCK)) + [c1]
    for i in range(start, stop):
        krow = (mu * phit[:, i]) @ phit[:, :i]
        resid = np.empty(c1 - c0)
        for a, b in zip(edges[:-1], edges[1:]):
            resid[a - c0:b - c0] = y[i] - krow @ coef[:i, a:b]
        coef[i, c0:c1] = gammas[i] * mult[i - start, c0:c1] * resid
