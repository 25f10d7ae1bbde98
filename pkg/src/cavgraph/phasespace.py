"""Multimode Gaussian states over site quadratures.

Quadratures are ordered (x_1..x_M, p_1..p_M) with x = F^x/sqrt(N) and
p = Q^yz/sqrt(N) per site, so the vacuum (coherent spin state) has identity
covariance and Var(x) Var(p) >= 1.

Spinor rotation convention: rotating by +phi maps x -> x cos(phi) - p sin(phi)
and p -> x sin(phi) + p cos(phi) on the addressed sites. At 90 degrees this
sends x -> -p and p -> x, carrying a state squeezed along F^x over to Q^yz.
The readout quadrature at spinor phase phi is x cos(phi) - p sin(phi).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SYMPLECTIC_TOL = 1e-9
ORTHO_TOL = 1e-9
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.cov, dtype=float)
        if mean.size % 2 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"inconsistent shapes: mean {mean.shape}, cov {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-10 * max(1.0, np.abs(cov).max())):
            raise ValueError("covariance matrix is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def mode_count(self) -> int:
        return self.mean.size // 2

    def symplectic_eigenvalues(self) -> np.ndarray:
        M = self.mode_count
        ev = np.linalg.eigvals(1j * symplectic_form(M) @ self.cov)
        return np.sort(np.abs(ev))[::2]

    def is_physical(self, tol: float = 1e-9) -> bool:
        if np.linalg.eigvalsh(self.cov).min() < -tol:
            return False
        return bool(self.symplectic_eigenvalues().min() >= 1.0 - tol)

    def validate(self, tol: float = 1e-9) -> "GaussianState":
        if not self.is_physical(tol):
            nu = self.symplectic_eigenvalues().min()
            raise ValueError(f"unphysical Gaussian state: smallest symplectic eigenvalue {nu:.6g} < 1")
        return self

    def to_dict(self) -> dict:
        return {"mode_count": self.mode_count, "mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianState":
        return cls(np.array(data["mean"], dtype=float), np.array(data["cov"], dtype=float))


def symplectic_form(M: int) -> np.ndarray:
    I = np.eye(M)
    Z = np.zeros((M, M))
    return np.block([[Z, I], [-I, Z]])


def vacuum(M: int) -> GaussianState:
    if int(M) != M or M < 1:
        raise ValueError(f"mode count must be a positive integer, got {M}")
    return GaussianState(np.zeros(2 * M), np.eye(2 * M))


def _sites(M: int, sites: Iterable[int] | None) -> np.ndarray:
    if sites is None:
        return np.arange(M)
    idx = np.array(sorted(set(int(s) for s in sites)), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= M):
        raise IndexError(f"site index out of range for {M} sites: {idx.tolist()}")
    return idx


def symplectic_violation(S: np.ndarray) -> float:
    """Max-norm of S J S^T - J."""
    M = S.shape[0] // 2
    J = symplectic_form(M)
    return float(np.abs(S @ J @ S.T - J).max())


def apply_symplectic(state: GaussianState, S: np.ndarray, tol: float = SYMPLECTIC_TOL) -> GaussianState:
    S = np.asarray(S, dtype=float)
    n = state.mean.size
    if S.shape != (n, n):
        raise ValueError(f"symplectic matrix must be {n}x{n}, got {S.shape}")
    err = symplectic_violation(S)
    if err > tol:
        raise ValueError(f"matrix is not symplectic: max|S J S^T - J| = {err:.3g} > {tol:g}")
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def rotation_matrix(M: int, phi: float, sites=None) -> np.ndarray:
    """Phase-space map of a spinor rotation by ``phi`` on ``sites`` (all if None)."""
    idx = _sites(M, sites)
    S = np.eye(2 * M)
    c, s = np.cos(phi), np.sin(phi)
    S[idx, idx] = c
    S[idx, idx + M] = -s
    S[idx + M, idx] = s
    S[idx + M, idx + M] = c
    return S


def local_pi_flip(state: GaussianState, sites) -> GaussianState:
    """180 degree rotation about F^z on ``sites``: x_i -> -x_i, p_i -> -p_i."""
    M = state.mode_count
    idx = _sites(M, sites)
    d = np.ones(2 * M)
    d[idx] = -1.0
    d[idx + M] = -1.0
    return GaussianState(d * state.mean, state.cov * np.outer(d, d))


def spinor_rotation(state: GaussianState, phi: float, sites=None) -> GaussianState:
    S = rotation_matrix(state.mode_count, phi, sites)
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def unit_mode(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValueError("mode vector must be nonzero")
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"mode vector must have unit norm, got {norm:.15g}")
    return w


def mode_rows(mode, M: int) -> np.ndarray:
    """2 x 2M matrix extracting (x~, p~) for a mode with site weights ``mode``."""
    v = unit_mode(mode)
    if v.size != M:
        raise ValueError(f"mode has {v.size} weights but state has {M} sites")
    T = np.zeros((2, 2 * M))
    T[0, :M] = v
    T[1, M:] = v
    return T


def mode_covariance(state: GaussianState, mode) -> np.ndarray:
    T = mode_rows(mode, state.mode_count)
    return T @ state.cov @ T.T


def quadrature_direction(phi: float) -> np.ndarray:
    return np.array([np.cos(phi), -np.sin(phi)])


def mode_quadrature_variance(state: GaussianState, mode, phi: float) -> float:
    """Var(x~ cos(phi) - p~ sin(phi)) for the collective mode with weights ``mode``."""
    u = quadrature_direction(phi)
    return float(u @ mode_covariance(state, mode) @ u)


def principal_variances(cov2: np.ndarray) -> tuple[float, float, float]:
    """(zeta2_min, zeta2_max, phi_min) of a 2x2 mode covariance.

    phi_min is the spinor phase of the squeezed quadrature, folded into [0, pi).
    """
    cov2 = np.asarray(cov2, dtype=float)
    w, U = np.linalg.eigh(cov2)
    u = U[:, 0]
    # u = (cos phi, -sin phi)
    phi = np.arctan2(-u[1], u[0]) % np.pi
    return float(w[0]), float(w[1]), float(phi)


def basis_change(state: GaussianState, V) -> GaussianState:
    """Re-express quadratures in the mode basis whose modes are the columns of V.

    Mode m has quadratures x~_m = sum_i V[i, m] x_i (and likewise for p), so
    the new state's site m is the old collective mode V[:, m].
    """
    V = np.asarray(V, dtype=float)
    M = state.mode_count
    if V.shape != (M, M):
        raise ValueError(f"basis matrix must be {M}x{M}, got {V.shape}")
    err = np.abs(V @ V.T - np.eye(M)).max()
    if err > ORTHO_TOL:
        raise ValueError(f"basis matrix is not orthogonal: max|V V^T - I| = {err:.3g}")
    Z = np.zeros((M, M))
    S = np.block([[V.T, Z], [Z, V.T]])
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def loss_channel(state: GaussianState, mode, transmission: float) -> GaussianState:
    """Mix one collective mode with vacuum on a beam splitter of given transmission."""
    t = float(transmission)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {t}")
    M = state.mode_count
    v = unit_mode(mode)
    if v.size != M:
        raise ValueError(f"mode has {v.size} weights but state has {M} sites")
    P1 = np.outer(v, v)
    Z = np.zeros((M, M))
    P = np.block([[P1, Z], [Z, P1]])
    X = np.eye(2 * M) - (1.0 - np.sqrt(t)) * P
    return GaussianState(X @ state.mean, X @ state.cov @ X.T + (1.0 - t) * P)


def local_loss(state: GaussianState, transmission: float, sites=None) -> GaussianState:
    """Independent vacuum admixture on each addressed site."""
    t = float(transmission)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {t}")
    M = state.mode_count
    idx = _sites(M, sites)
    d = np.ones(2 * M)
    d[idx] = np.sqrt(t)
    d[idx + M] = np.sqrt(t)
    noise = np.zeros(2 * M)
    noise[idx] = 1.0 - t
    noise[idx + M] = 1.0 - t
    return GaussianState(d * state.mean, state.cov * np.outer(d, d) + np.diag(noise))


def linear_covariance(state_or_cov, rows: np.ndarray) -> np.ndarray:
    """Covariance of the linear combinations ``rows @ r`` of the quadrature vector r."""
    cov = state_or_cov.cov if isinstance(state_or_cov, GaussianState) else np.asarray(state_or_cov, float)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return rows @ cov @ rows.T


def _pinv_psd(A: np.ndarray) -> np.ndarray:
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    cutoff = PINV_RTOL * max(w.max(initial=0.0), 0.0)
    inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
    return (U * inv) @ U.T


def conditional_covariance(
    state_or_cov, targets: Sequence[int], conditioners: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Schur complement of the conditioner block and the optimal linear inference gains.

    Returns ``(cond_cov, gains)`` where ``gains[t, c]`` minimizes
    Var(r_t - sum_c gains[t, c] r_c). A singular conditioner block is handled
    with an eigenvalue-thresholded pseudo-inverse.
    """
    cov = state_or_cov.cov if isinstance(state_or_cov, GaussianState) else np.asarray(state_or_cov, float)
    T = np.asarray(list(targets), dtype=int)
    C = np.asarray(list(conditioners), dtype=int)
    if set(T.tolist()) & set(C.tolist()):
        raise ValueError("target and conditioner index sets overlap")
    S_tt = cov[np.ix_(T, T)]
    if C.size == 0:
        return S_tt.copy(), np.zeros((T.size, 0))
    S_tc = cov[np.ix_(T, C)]
    S_cc = cov[np.ix_(C, C)]
    gains = S_tc @ _pinv_psd(S_cc)
    cond = S_tt - gains @ S_tc.T
    return 0.5 * (cond + cond.T), gains
