import numpy as np
import pytest

from qsuff import _gs_fallback, kernels


def _run(fn, Q0, k, C, tol):
    Q = Q0.copy()
    k2 = fn(Q, k, np.ascontiguousarray(C), tol)
    return Q, k2


def _backends():
    out = [_gs_fallback.gs_extend]
    try:
        from qsuff import _gs_kernel
        out.append(_gs_kernel.gs_extend)
    except ImportError:
        pass
    return out


@pytest.mark.parametrize("fn", _backends())
def test_extends_to_orthonormal_basis(fn, rng):
    n = 12
    Q = np.zeros((n, n))
    C = rng.standard_normal((5, n))
    C[3] = C[0] + 2 * C[1]  # dependent row
    Q, k = _run(fn, Q, 0, C, 1e-10)
    assert k == 4
    assert np.abs(Q[:k] @ Q[:k].T - np.eye(k)).max() < 1e-13
    # the span is unchanged
    R = C - (C @ Q[:k].T) @ Q[:k]
    assert np.abs(R).max() < 1e-12


@pytest.mark.parametrize("fn", _backends())
def test_respects_existing_rows_and_capacity(fn, rng):
    n = 6
    Q = np.zeros((n, n))
    Q[0] = np.eye(n)[0]
    C = np.vstack([np.eye(n)[0] * 3.0, rng.standard_normal((10, n))])
    Q, k = _run(fn, Q, 1, C, 1e-10)
    assert k == n
    assert np.abs(Q @ Q.T - np.eye(n)).max() < 1e-12
    assert np.abs(Q[0] - np.eye(n)[0]).max() == 0


@pytest.mark.parametrize("fn", _backends())
def test_absolute_tolerance(fn):
    Q = np.zeros((3, 3))
    C = np.array([[1e-9, 0, 0], [0, 1.0, 0]])
    Q, k = _run(fn, Q, 0, C, 1e-8)
    assert k == 1
    Q, k = _run(fn, np.zeros((3, 3)), 0, C, 1e-10)
    assert k == 2


@pytest.mark.parametrize("fn", _backends())
def test_largest_candidate_first(fn):
    Q = np.zeros((2, 2))
    C = np.array([[1.0, 0.0], [0.0, 5.0]])
    Q, k = _run(fn, Q, 0, C, 1e-10)
    assert k == 2 and abs(Q[0, 1]) == 1.0


@pytest.mark.parametrize("fn", _backends())
def test_empty_candidates(fn):
    Q = np.zeros((3, 3))
    assert fn(Q, 0, np.zeros((0, 3)), 1e-10) == 0


def test_backends_identical(rng):
    fns = _backends()
    if len(fns) < 2:
        pytest.skip("compiled kernel not built")
    n = 50
    for trial in range(5):
        C = rng.standard_normal((40, n)) @ np.diag(rng.random(n))
        C[::7] *= 1e-11
        a = _run(fns[0], np.zeros((n, n)), 0, C, 1e-10)
        b = _run(fns[1], np.zeros((n, n)), 0, C, 1e-10)
        assert a[1] == b[1]
        assert np.abs(a[0] - b[0]).max() < 1e-10


def test_dispatch_and_selection():
    assert kernels.BACKEND in kernels.available_backends()
    prev = kernels.set_backend("python")
    try:
        assert kernels.BACKEND == "python"
        Q = np.zeros((2, 2))
        assert kernels.gs_extend(Q, 0, [[1.0, 0.0]], 1e-10) == 1
    finally:
        kernels.set_backend(prev)
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")
