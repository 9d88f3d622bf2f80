import os
import subprocess
import sys

import numpy as np
import pytest

from cfx import _kernels
from cfx.models import TreeEnsembleClassifier

from test_models import random_tree


@pytest.fixture
def restore_backend():
    before = _kernels.active_backend()
    yield
    _kernels.set_backend(before)


class TestSelection:
    def test_numpy_always_available(self):
        assert "numpy" in _kernels.available_backends()

    def test_numba_available_here(self):
        assert "numba" in _kernels.available_backends()

    def test_set_and_query(self, restore_backend):
        _kernels.set_backend("numpy")
        assert _kernels.active_backend() == "numpy"
        _kernels.set_backend("numba")
        assert _kernels.active_backend() == "numba"

    def test_unknown_backend_rejected(self):
        with pytest.raises(ValueError, match="unknown backend"):
            _kernels.set_backend("cuda")

    def test_env_var_forces_numpy(self):
        code = "import cfx._kernels as k; print(k.active_backend())"
        out = subprocess.run([sys.executable, "-c", code],
                             env={**os.environ, "CFX_BACKEND": "numpy"},
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "numpy"

    def test_env_var_garbage_falls_back(self):
        code = "import cfx._kernels as k; print(k.active_backend())"
        out = subprocess.run([sys.executable, "-c", code],
                             env={**os.environ, "CFX_BACKEND": "abacus"},
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() in ("numba", "numpy")


class TestCrossBackendAgreement:
    """The numba kernels must reproduce the numpy results bit for bit."""

    def _model_and_inputs(self, rng, n_trees=30, nf=7):
        trees = [random_tree(rng, nf, 6) for _ in range(n_trees)]
        m = TreeEnsembleClassifier(trees, n_features=nf)
        X = rng.uniform(-3, 3, size=(400, nf))
        X[::5] = np.round(X[::5], 3)  # exact threshold hits
        return m, X

    def test_full_prediction(self, rng, restore_backend):
        m, X = self._model_and_inputs(rng)
        _kernels.set_backend("numpy")
        ref_naive = m.predict_naive(X)
        ref_qs = m.predict(X)
        _kernels.set_backend("numba")
        np.testing.assert_array_equal(m.predict_naive(X), ref_naive)
        np.testing.assert_array_equal(m.predict(X), ref_qs)

    def test_specialized_prediction(self, rng, restore_backend):
        m, X = self._model_and_inputs(rng)
        x = X[0]
        changed = np.array([1, 3, 5])
        cols = X[:100][:, changed].copy()
        _kernels.set_backend("numpy")
        ref = m.specialize(x, changed).predict_partial(cols)
        _kernels.set_backend("numba")
        got = m.specialize(x, changed).predict_partial(cols)
        np.testing.assert_array_equal(got, ref)

    def test_qs_equals_naive_on_both_backends(self, rng, restore_backend):
        m, X = self._model_and_inputs(rng, n_trees=12, nf=4)
        for backend in _kernels.available_backends():
            _kernels.set_backend(backend)
            np.testing.assert_array_equal(m.predict(X), m.predict_naive(X))
