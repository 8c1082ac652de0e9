import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eegaffect import _core

try:
    CY = _core.backend("cython")
except ImportError:
    CY = None
PY = _core.backend("python")
needs_ext = pytest.mark.skipif(CY is None, reason="compiled extension not built")


def problem(seed, n=80, d=5, k=3):
    rng = np.random.default_rng(seed)
    X = np.round(rng.normal(size=(n, d)), 1)      # rounding creates tied values
    y = rng.integers(0, k, n).astype(np.int64)
    w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)
    return np.ascontiguousarray(X), y, w


@needs_ext
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5), st.integers(1, 4))
def test_tree_bit_identical(seed, mtry, min_leaf):
    X, y, w = problem(seed)
    a = CY.grow_tree(X, y, w, 3, mtry, min_leaf, seed)
    b = PY.grow_tree(X, y, w, 3, mtry, min_leaf, seed)
    for u, v in zip(a, b):
        assert u.dtype == v.dtype and u.tobytes() == v.tobytes()
    assert np.array_equal(CY.tree_leaf_votes(*a, X), PY.tree_leaf_votes(*b, X))


@needs_ext
@given(st.integers(0, 2 ** 32 - 1))
def test_svm_backends_agree(seed):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(np.c_[rng.normal(size=(50, 3)), np.ones(50)])
    y = np.where(X[:, 0] + rng.normal(size=50) > 0, 1.0, -1.0)
    a = CY.svm_dual_cd(X, y, 1.0, 3000, 1e-4, seed)
    b = PY.svm_dual_cd(X, y, 1.0, 3000, 1e-4, seed)
    assert a[4] == b[4] and a[5] == b[5]
    np.testing.assert_allclose(a[0], b[0], rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(a[2], b[2], rtol=1e-9)


def test_pure_python_switch():
    code = "import eegaffect._core as c; print(c.BACKEND)"
    env = {**os.environ, "EEGAFFECT_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _core.backend("fortran")
