import numpy as np
from numba import njit


@njit(cache=True)
def fock_index(N, n_plus, n_zero):
    return n_plus * (N + 1) - (n_plus * (n_plus - 1)) // 2 + n_zero


@njit(cache=True)
def occupations(N):
    dim = (N + 1) * (N + 2) // 2
    occ = np.empty((dim, 3), dtype=np.int64)
    k = 0
    for a in range(N + 1):
        for b in range(N + 1 - a):
            occ[k, 0] = a
            occ[k, 1] = b
            occ[k, 2] = N - a - b
            k += 1
    return occ


@njit(cache=True)
def collective_coo(N, op):
    occ = occupations(N)
    dim = occ.shape[0]
    nnz_max = 9 * dim
    rows = np.empty(nnz_max, dtype=np.int64)
    cols = np.empty(nnz_max, dtype=np.int64)
    vals = np.empty(nnz_max, dtype=np.complex128)
    n = np.empty(3, dtype=np.int64)
    k = 0
    # emit in the same (a, b)-major order as the numpy twin
    for a in range(3):
        for b in range(3):
            coeff = op[a, b]
            if coeff == 0:
                continue
            for j in range(dim):
                nb = occ[j, b]
                if nb == 0:
                    continue
                if a == b:
                    rows[k] = j
                    cols[k] = j
                    vals[k] = coeff * nb
                    k += 1
                    continue
                n[0] = occ[j, 0]
                n[1] = occ[j, 1]
                n[2] = occ[j, 2]
                amp = np.sqrt(n[b] * 1.0)
                n[b] -= 1
                amp *= np.sqrt(n[a] + 1.0)
                n[a] += 1
                rows[k] = fock_index(N, n[0], n[1])
                cols[k] = j
                vals[k] = coeff * amp
                k += 1
    return rows[:k].copy(), cols[:k].copy(), vals[:k].copy()


@njit(cache=True)
def _csr_matvec_into(indptr, indices, data, v, out):
    for i in range(indptr.size - 1):
        acc = 0.0 + 0.0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * v[indices[p]]
        out[i] = acc


@njit(cache=True)
def rk4_propagate(indptr, indices, data, psi, dt, nsteps):
    dim = psi.size
    y = psi.astype(np.complex128).copy()
    tmp = np.empty(dim, dtype=np.complex128)
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    h = -1j * dt
    for _ in range(nsteps):
        _csr_matvec_into(indptr, indices, data, y, k1)
        for i in range(dim):
            tmp[i] = y[i] + 0.5 * h * k1[i]
        _csr_matvec_into(indptr, indices, data, tmp, k2)
        for i in range(dim):
            tmp[i] = y[i] + 0.5 * h * k2[i]
        _csr_matvec_into(indptr, indices, data, tmp, k3)
        for i in range(dim):
            tmp[i] = y[i] + h * k3[i]
        _csr_matvec_into(indptr, indices, data, tmp, k4)
        for i in range(dim):
            y[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return y


@njit(cache=True)
def loo_covariances(X):
    n, d = X.shape
    mean = np.zeros(d)
    for i in range(n):
        for a in range(d):
            mean[a] += X[i, a]
    mean /= n
    scatter = np.zeros((d, d))
    for i in range(n):
        for a in range(d):
            da = X[i, a] - mean[a]
            for b in range(d):
                scatter[a, b] += da * (X[i, b] - mean[b])
    out = np.empty((n, d, d))
    w = n / (n - 1.0)
    for i in range(n):
        for a in range(d):
            da = X[i, a] - mean[a]
            for b in range(d):
                out[i, a, b] = (scatter[a, b] - w * da * (X[i, b] - mean[b])) / (n - 2.0)
    return out
