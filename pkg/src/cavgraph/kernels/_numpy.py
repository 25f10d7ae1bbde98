"""Pure-numpy versions of the hot kernels.

Each function here has a twin with the same signature in ``_numba``.
"""

import numpy as np


def fock_index(N, n_plus, n_zero):
    # lexicographic in (n_plus, n_zero); n_minus = N - n_plus - n_zero
    return n_plus * (N + 1) - (n_plus * (n_plus - 1)) // 2 + n_zero


def occupations(N):
    """All (n_plus, n_zero, n_minus) triples in basis order, shape (dim, 3)."""
    n_plus = np.repeat(np.arange(N + 1), np.arange(N + 1, 0, -1))
    starts = fock_index(N, n_plus, 0)
    n_zero = np.arange(n_plus.size) - starts
    return np.stack([n_plus, n_zero, N - n_plus - n_zero], axis=1).astype(np.int64)


def collective_coo(N, op):
    """COO triplets of sum_ab op[a, b] a_a^dag a_b on the symmetric subspace."""
    occ = occupations(N)
    cols = np.arange(occ.shape[0], dtype=np.int64)
    rows_out, cols_out, vals_out = [], [], []
    for a in range(3):
        for b in range(3):
            coeff = op[a, b]
            if coeff == 0:
                continue
            n_b = occ[:, b]
            if a == b:
                mask = n_b > 0
                rows_out.append(cols[mask])
                cols_out.append(cols[mask])
                vals_out.append(coeff * n_b[mask].astype(np.complex128))
                continue
            mask = n_b > 0
            new = occ[mask].copy()
            amp = np.sqrt(new[:, b].astype(float))
            new[:, b] -= 1
            amp = amp * np.sqrt(new[:, a] + 1.0)
            new[:, a] += 1
            rows_out.append(fock_index(N, new[:, 0], new[:, 1]))
            cols_out.append(cols[mask])
            vals_out.append(coeff * amp)
    if not rows_out:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.complex128)
    return (
        np.concatenate(rows_out),
        np.concatenate(cols_out),
        np.concatenate(vals_out).astype(np.complex128),
    )


def _csr_matvec(indptr, indices, data, v):
    out = np.zeros(indptr.size - 1, dtype=np.complex128)
    row = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))
    np.add.at(out, row, data * v[indices])
    return out


def rk4_propagate(indptr, indices, data, psi, dt, nsteps):
    """Integrate d psi/dt = -i H psi with classical RK4, H given in CSR form."""
    psi = psi.astype(np.complex128).copy()
    h = -1j * dt
    for _ in range(nsteps):
        k1 = _csr_matvec(indptr, indices, data, psi)
        k2 = _csr_matvec(indptr, indices, data, psi + 0.5 * h * k1)
        k3 = _csr_matvec(indptr, indices, data, psi + 0.5 * h * k2)
        k4 = _csr_matvec(indptr, indices, data, psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


def loo_covariances(X):
    """Leave-one-out sample covariances (ddof=1) for every row of X, shape (n, d, d)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    mean = X.mean(axis=0)
    D = X - mean
    scatter = D.T @ D
    out = scatter[None, :, :] - (n / (n - 1.0)) * np.einsum("ni,nj->nij", D, D)
    return out / (n - 2.0)
