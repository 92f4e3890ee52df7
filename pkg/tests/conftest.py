import numpy as np
import pytest

from rkhs_streamci.mercer import MercerBasis


@pytest.fixture
def periodic():
    return MercerBasis(alpha=2.0, truncation=50)


@pytest.fixture
def cosine():
    return MercerBasis(alpha=2.0, truncation=60, include_constant=True, pairing="cosine")


@pytest.fixture
def rng():
    return np.random.default_rng(20240)


def brute_force_iterates(basis, xs, ys, gammas, ws=None, grid=None):
    """Function-space recursion on a grid, storing every iterate.

    f_i = f_{i-1} + gamma_i w_i (y_i - f_{i-1}(x_i)) K(x_i, .). Iterates are
    kept as values on ``grid`` plus their values at the design points, so the
    evaluation f_{i-1}(x_i) never uses the coefficient representation.
    """
    grid = np.linspace(0, 1, 200) if grid is None else grid
    pts = np.concatenate([grid, xs])
    ws = np.ones(len(xs)) if ws is None else ws
    K = basis.gram(xs, pts)  # row i: K(x_i, .)
    f = np.zeros(pts.size)
    iterates = []
    for i in range(len(xs)):
        fi_at_xi = f[grid.size + i]
        f = f + gammas[i] * ws[i] * (ys[i] - fi_at_xi) * K[i]
        iterates.append(f[: grid.size].copy())
    return grid, np.array(iterates)
