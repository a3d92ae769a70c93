from __future__ import annotations

import numpy as np
import pytest

from oamspdc import kernels
from oamspdc.kernels import available_backends
from oamspdc.spectrum import ModeWindow, _laguerre_rule, _window_pairs, _z_tables, default_crystal

BACKENDS = sorted(available_backends())


def _workload(n_r=48, n_z=24):
    c = default_crystal()
    rows = [(L, pp) + key for L in (-2, 0, 3) for pp in (0, 1) for key in _window_pairs(L, ModeWindow(4, 2))]
    _, zw, w, kappa, gouy = _z_tables(c, n_z)
    x, xw = _laguerre_rule(n_r)
    return np.array(rows, dtype=np.int64), (w, kappa, gouy, zw, x, xw)


def test_selected_backend_is_listed():
    assert kernels.BACKEND in BACKENDS


@pytest.mark.parametrize("name", BACKENDS)
def test_backend_parity(name):
    rows, tables = _workload()
    ref = available_backends()["python"].overlap_batch(rows, *tables)
    got = available_backends()[name].overlap_batch(rows, *tables)
    assert got.dtype == np.complex128 and got.shape == (len(rows),)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


@pytest.mark.parametrize("name", BACKENDS)
def test_backend_empty_batch(name):
    _, tables = _workload()
    out = available_backends()[name].overlap_batch(np.zeros((0, 6), dtype=np.int64), *tables)
    assert out.shape == (0,)


def test_compiled_backend_built():
    # the editable install compiles the extension; the fallback must still import alone
    assert "python" in BACKENDS
    if kernels.BACKEND == "python":
        pytest.skip("compiled extension not built in this environment")
    assert "cython" in BACKENDS
