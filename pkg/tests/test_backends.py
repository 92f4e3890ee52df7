import os
import subprocess
import sys

import numpy as np
import pytest

from rkhs_streamci import _backend
from rkhs_streamci.bootstrap import BootstrapEnsemble
from rkhs_streamci.mercer import MercerBasis

compiled = pytest.mark.skipif("compiled" not in _backend.BACKENDS, reason="extension not built")


def problem(seed=0, d=21, n=90, r=70):
    rng = np.random.default_rng(seed)
    basis = MercerBasis(2.0, d - 1, True, "cosine")
    x = rng.random(n)
    phit = np.ascontiguousarray(basis.features(x).T)
    return (phit, np.ascontiguousarray(basis.weights), np.zeros((n, r)), rng.normal(size=n),
            0.2 * np.arange(1, n + 1) ** -0.5, rng.normal(1, 1, size=(n, r)))


def advance_all(core, args, chunks, cols=None):
    phit, mu, coef, y, g, mult = (np.array(a, copy=True) for a in args)
    edges = [0, *chunks, phit.shape[1]]
    for a, b in zip(edges[:-1], edges[1:]):
        if cols is None:
            core.advance(phit, mu, coef, y, g, np.ascontiguousarray(mult[a:b]), a, b)
        else:
            for c0, c1 in cols:
                core.advance(phit, mu, coef, y, g, np.ascontiguousarray(mult[a:b]), a, b, c0, c1)
    return coef


class TestSelection:
    def test_default_backend_known(self):
        assert _backend.BACKEND in ("compiled", "python")
        assert _backend.get() is _backend.core

    def test_unknown(self):
        with pytest.raises(ValueError):
            _backend.get("fortran")

    def test_env_forces_fallback(self):
        code = "import rkhs_streamci as r; print(r.BACKEND)"
        env = dict(os.environ, RKHS_STREAMCI_BACKEND="python")
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"


class TestAdvance:
    def test_python_reference(self):
        phit, mu, coef, y, g, mult = problem(r=3, n=12)
        out = advance_all(_backend.get("python"), (phit, mu, coef, y, g, mult), [])
        k = (phit.T * mu) @ phit
        ref = np.zeros_like(coef)
        for i in range(12):
            ref[i] = g[i] * mult[i] * (y[i] - k[i, :i] @ ref[:i])
        np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-14)

    @compiled
    def test_compiled_matches_python(self):
        args = problem(1)
        a = advance_all(_backend.get("compiled"), args, [30, 31, 77])
        b = advance_all(_backend.get("python"), args, [30, 31, 77])
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13)

    @pytest.mark.parametrize("name", sorted(_backend.BACKENDS))
    def test_chunk_and_column_split_invariance(self, name):
        core = _backend.get(name)
        args = problem(2)
        whole = advance_all(core, args, [])
        split = advance_all(core, args, [5, 40, 41], cols=[(0, 64), (64, 70)])
        np.testing.assert_array_equal(whole, split)

    @pytest.mark.parametrize("name", sorted(_backend.BACKENDS))
    def test_bad_ranges(self, name):
        core = _backend.get(name)
        phit, mu, coef, y, g, mult = problem(n=10, r=4)
        with pytest.raises(ValueError):
            core.advance(phit, mu, coef, y, g, mult, 0, 11)
        with pytest.raises(ValueError):
            core.advance(phit, mu, coef, y, g, mult, 0, 10, 3, 2)


@compiled
class TestEnsembleBackends:
    def test_ensemble_agrees(self, cosine, rng):
        x, y = rng.random(150), rng.normal(size=150)
        grid = np.linspace(0, 1, 13)
        a = BootstrapEnsemble(cosine, 40, seed=9, backend="compiled").ingest_many(x, y, 0.15)
        b = BootstrapEnsemble(cosine, 40, seed=9, backend="python").ingest_many(x, y, 0.15)
        np.testing.assert_allclose(a.eval_averaged_all(grid), b.eval_averaged_all(grid), rtol=1e-10, atol=1e-12)
