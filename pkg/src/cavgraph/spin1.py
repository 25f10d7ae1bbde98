"""Exact spin-1 algebra and brute-force collective dynamics.

Single-atom basis order is (m=+1, m=0, m=-1). Collective states of N atoms
live in the permutation-symmetric subspace, indexed by Zeeman occupations
(N+, N0, N-) in lexicographic order of (N+, N0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import kernels

MAX_ATOMS = 200
DENSE_DIM_LIMIT = 2000
NORM_TOL = 1e-10

_S2 = math.sqrt(2.0)

_FX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _S2
_FY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _S2
_FZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
_DIPOLES = {"x": _FX, "y": _FY, "z": _FZ}

OPERATOR_KINDS = ("fx", "fy", "fz", "qxx", "qyy", "qzz", "qxy", "qyz", "qxz", "q0")


def _normalize_kind(kind: str) -> str:
    key = kind.replace("^", "").replace("{", "").replace("}", "").replace("⁰", "0")
    return key.strip().lower()


def build_operator(kind: str) -> np.ndarray:
    """Return the 3x3 matrix of a single-atom dipole or quadrupole operator.

    Quadrupoles follow q^{ab} = f^a f^b + f^b f^a - (4/3) delta_ab and
    q^0 = q^{zz} + 1/3. Labels such as ``"f^x"``, ``"q^{yz}"`` or ``"qyz"``
    are all accepted.
    """
    key = _normalize_kind(kind)
    if key in ("fx", "fy", "fz"):
        return _DIPOLES[key[1]].copy()
    if key == "q0":
        return build_operator("qzz") + np.eye(3) / 3.0
    if len(key) == 3 and key[0] == "q" and key[1] in "xyz" and key[2] in "xyz":
        a, b = _DIPOLES[key[1]], _DIPOLES[key[2]]
        out = a @ b + b @ a
        if key[1] == key[2]:
            out = out - (4.0 / 3.0) * np.eye(3)
        return out
    raise ValueError(f"unknown spin-1 operator label {kind!r}; expected one of {OPERATOR_KINDS}")


def subspace_dim(N: int) -> int:
    return (N + 1) * (N + 2) // 2


def _check_atoms(N: int) -> None:
    if int(N) != N or N < 1:
        raise ValueError(f"atom number must be a positive integer, got {N}")
    if N > MAX_ATOMS:
        raise ValueError(f"N={N} exceeds the symmetric-subspace guard MAX_ATOMS={MAX_ATOMS}")


@lru_cache(maxsize=64)
def _collective_cached(kind_bytes: bytes, N: int) -> sp.csr_matrix:
    op = np.frombuffer(kind_bytes, dtype=np.complex128).reshape(3, 3)
    rows, cols, vals = kernels.collective_coo(N, np.ascontiguousarray(op))
    dim = subspace_dim(N)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=np.complex128)
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def collective_operator(op, N: int) -> sp.csr_matrix:
    """Sum of a single-atom operator over N atoms, restricted to the symmetric subspace.

    ``op`` is a 3x3 matrix or a label understood by :func:`build_operator`.
    The result is a sparse Hermitian matrix (for Hermitian ``op``).
    """
    _check_atoms(N)
    if isinstance(op, str):
        op = build_operator(op)
    op = np.ascontiguousarray(np.asarray(op, dtype=np.complex128))
    if op.shape != (3, 3):
        raise ValueError(f"single-atom operator must be 3x3, got {op.shape}")
    return _collective_cached(op.tobytes(), int(N)).copy()


def d_operator(N: int) -> sp.csr_matrix:
    """D = (Q^zz + Q^yy - Q^xx)/4 + N/3, the correction closing the {F^x, Q^yz, Q^0} algebra."""
    dim = subspace_dim(N)
    q = collective_operator("qzz", N) + collective_operator("qyy", N) - collective_operator("qxx", N)
    return (q / 4.0 + (N / 3.0) * sp.identity(dim, dtype=complex, format="csr")).tocsr()


@dataclass(frozen=True)
class CollectiveSpinState:
    atom_count: int
    amplitudes: np.ndarray

    def __post_init__(self):
        _check_atoms(self.atom_count)
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (subspace_dim(self.atom_count),):
            raise ValueError(
                f"expected {subspace_dim(self.atom_count)} amplitudes for N={self.atom_count}, got {amps.shape}"
            )
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def expectation(self, op) -> complex:
        return complex(np.vdot(self.amplitudes, op @ self.amplitudes))

    def population(self, n_plus: int, n_zero: int) -> float:
        idx = kernels.fock_index(self.atom_count, n_plus, n_zero)
        return float(abs(self.amplitudes[idx]) ** 2)


def fock_state(N: int, n_plus: int, n_zero: int) -> CollectiveSpinState:
    if min(n_plus, n_zero) < 0 or n_plus + n_zero > N:
        raise ValueError(f"invalid occupations ({n_plus}, {n_zero}) for N={N}")
    amps = np.zeros(subspace_dim(N), dtype=np.complex128)
    amps[kernels.fock_index(N, n_plus, n_zero)] = 1.0
    return CollectiveSpinState(N, amps)


def all_zero_state(N: int) -> CollectiveSpinState:
    """Every atom in m=0: the polarized initial state of the squeezing protocol."""
    return fock_state(N, 0, N)


def hamiltonian(N: int, chi: float, q: float) -> sp.csr_matrix:
    """H = (chi/2N)(F^x F^x + F^y F^y) + (q/2) Q^0 in the symmetric subspace."""
    if not (np.isfinite(chi) and np.isfinite(q)):
        raise ValueError("chi and q must be finite")
    Fx = collective_operator("fx", N)
    Fy = collective_operator("fy", N)
    Q0 = collective_operator("q0", N)
    H = (chi / (2.0 * N)) * (Fx @ Fx + Fy @ Fy) + 0.5 * q * Q0
    return H.tocsr()


class Propagator:
    """exp(-iHt) for the collective Hamiltonian, reusable across times.

    Dense diagonalization is used up to ``DENSE_DIM_LIMIT``; above that a
    fixed-step RK4 integrator runs on the sparse Hamiltonian with the step
    chosen so the accumulated norm drift stays below ``NORM_TOL``.
    """

    def __init__(self, N: int, chi: float, q: float):
        _check_atoms(N)
        self.N = int(N)
        self.chi = float(chi)
        self.q = float(q)
        self.H = hamiltonian(self.N, self.chi, self.q)
        self.dense = self.H.shape[0] <= DENSE_DIM_LIMIT
        if self.dense:
            # H is real symmetric in this basis (F^y F^y is real)
            Hd = self.H.toarray()
            self.energies, self.vectors = np.linalg.eigh(Hd.real)
        else:
            self.H.sort_indices()
            self._spectral_bound = float(abs(self.H).sum(axis=1).max())

    def rk4_steps(self, t: float) -> int:
        # RK4 on a unitary flow loses norm ~ (h|E|)^6/72 per step
        phase = abs(t) * self._spectral_bound
        if phase == 0.0:
            return 0
        z_max = min(0.1, (72.0 * NORM_TOL * 0.1 / phase) ** 0.2)
        return max(1, int(math.ceil(phase / z_max)))

    def apply(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        if t == 0.0:
            return np.array(amplitudes, dtype=np.complex128, copy=True)
        if self.dense:
            V = self.vectors
            coeff = V.T @ amplitudes
            return V @ (np.exp(-1j * self.energies * t) * coeff)
        nsteps = self.rk4_steps(t)
        dt = t / nsteps
        return kernels.rk4_propagate(
            self.H.indptr.astype(np.int64),
            self.H.indices.astype(np.int64),
            self.H.data.astype(np.complex128),
            np.ascontiguousarray(amplitudes, dtype=np.complex128),
            dt,
            nsteps,
        )


def evolve_exact(state: CollectiveSpinState, chi: float, q: float, t: float) -> CollectiveSpinState:
    """Evolve a collective state under the cavity Hamiltonian for time ``t``."""
    if not all(np.isfinite(v) for v in (chi, q, t)):
        raise ValueError("chi, q and t must be finite")
    prop = Propagator(state.atom_count, chi, q)
    return CollectiveSpinState(state.atom_count, prop.apply(state.amplitudes, t))


def observable_variance(state: CollectiveSpinState, observable, tol: float = 1e-9) -> float:
    """<O^2> - <O>^2 for a Hermitian collective observable."""
    O = observable if sp.issparse(observable) else np.asarray(observable)
    diff = O - O.conj().T
    scale = max(1.0, abs(O).max())
    if abs(diff).max() > tol * scale:
        raise ValueError("observable is not Hermitian")
    psi = state.amplitudes
    v = O @ psi
    mean = np.vdot(psi, v).real
    second = np.vdot(v, v).real
    return float(second - mean**2)


def quadrature_operator(N: int, phi: float) -> sp.csr_matrix:
    """cos(phi) F^x - sin(phi) Q^yz, the observable read out at spinor phase phi."""
    return (math.cos(phi) * collective_operator("fx", N) - math.sin(phi) * collective_operator("qyz", N)).tocsr()


def squeezed_variance_series(N: int, chi: float, q: float, times, phi: float) -> np.ndarray:
    """Normalized variance Var(F_phi)/N of the all-m0 state along a time grid."""
    prop = Propagator(N, chi, q)
    psi0 = all_zero_state(N).amplitudes
    O = quadrature_operator(N, phi)
    out = []
    for t in times:
        psi = CollectiveSpinState(N, prop.apply(psi0, float(t)))
        out.append(observable_variance(psi, O) / N)
    return np.array(out)


def gaussian_comparison(N: int, chi: float, q: float, times) -> dict:
    """Exact vs Gaussian variance of the squeezed quadrature at each time.

    The quadrature angle at each time is the one minimizing the Gaussian
    prediction. Returns arrays keyed by "times", "phi", "exact", "gaussian"
    and "relative_deviation".
    """
    from .dynamics import finite_time_squeezing

    prop = Propagator(N, chi, q)
    psi0 = all_zero_state(N).amplitudes
    fx = collective_operator("fx", N)
    qyz = collective_operator("qyz", N)
    rows = []
    for t in np.asarray(times, dtype=float):
        zmin, _, phi = finite_time_squeezing(chi, q, float(t))
        psi = CollectiveSpinState(N, prop.apply(psi0, float(t)))
        O = (math.cos(phi) * fx - math.sin(phi) * qyz).tocsr()
        exact = observable_variance(psi, O) / N
        rows.append((t, phi, exact, zmin, abs(exact - zmin) / zmin))
    arr = np.array(rows, dtype=float).reshape(-1, 5)
    keys = ("times", "phi", "exact", "gaussian", "relative_deviation")
    return {k: arr[:, i] for i, k in enumerate(keys)}
