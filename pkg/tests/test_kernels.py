import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from cavgraph import kernels, spin1
from cavgraph.kernels import _numba, _numpy


def test_backend_selected():
    assert kernels.BACKEND in ("numba", "numpy")


def test_env_flag_forces_numpy():
    env = dict(os.environ, CAVGRAPH_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from cavgraph import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


@pytest.mark.parametrize("N", [1, 2, 5, 13])
def test_fock_index_and_occupations_agree(N):
    a, b = _numpy.occupations(N), _numba.occupations(N)
    assert np.array_equal(a, b)
    for k, (n_plus, n_zero, _) in enumerate(a):
        assert _numpy.fock_index(N, n_plus, n_zero) == k == _numba.fock_index(N, int(n_plus), int(n_zero))


@pytest.mark.parametrize("label", ["fx", "fy", "qyz", "q0", "qxy"])
def test_collective_coo_agree(label):
    N = 7
    op = np.ascontiguousarray(spin1.build_operator(label))
    dim = spin1.subspace_dim(N)
    mats = []
    for impl in (_numpy, _numba):
        r, c, v = impl.collective_coo(N, op)
        mats.append(sp.csr_matrix((v, (r, c)), shape=(dim, dim)).toarray())
    assert np.allclose(mats[0], mats[1], atol=1e-14)


def test_rk4_agree():
    H = spin1.hamiltonian(6, -1.0, 1.0).tocsr()
    H.sort_indices()
    psi = spin1.all_zero_state(6).amplitudes
    args = (H.indptr.astype(np.int64), H.indices.astype(np.int64), H.data.astype(np.complex128), psi, 0.01, 50)
    assert np.allclose(_numpy.rk4_propagate(*args), _numba.rk4_propagate(*args), atol=1e-13)


def test_loo_covariances_agree_and_match_bruteforce():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((12, 3))
    a, b = _numpy.loo_covariances(X), _numba.loo_covariances(X)
    assert np.allclose(a, b, atol=1e-13)
    for i in range(X.shape[0]):
        assert np.allclose(a[i], np.cov(np.delete(X, i, axis=0), rowvar=False), atol=1e-13)
