"""Graph-state compiler: adjacency matrix -> squeezing pulse sequence -> Gaussian state.

The cavity couples only to the symmetric mode (1, ..., 1)/sqrt(M). Other
eigenmodes are squeezed by flipping the sign of selected sites (a 180 degree
rotation about F^z) so that the wanted sign pattern maps onto the coupled
mode for the duration of its pulse. Global spinor rotations between pulses
set each mode's final squeezing angle.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq, minimize_scalar

from . import dynamics
from .errors import InputError, NumericalError, UnroutableGraphError
from .phasespace import (
    GaussianState,
    local_pi_flip,
    loss_channel,
    mode_covariance,
    principal_variances,
    rotation_matrix,
    vacuum,
)
from .stats import covariance_jackknife

SYM_TOL = 1e-12
EIG_TOL = 1e-9
ANGLE_TOL_DEG = 0.5
MAX_PATTERN_SITES = 16
DEFAULT_Q = 2 * math.pi * 1.2e3
# beyond this, squeezed and antisqueezed variances differ by more than double precision resolves
MAX_SQUEEZE_STRENGTH = 7.0


# -- graphs ---------------------------------------------------------------


@dataclass(frozen=True)
class GraphSpec:
    adjacency: np.ndarray

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InputError(f"adjacency must be a non-empty square matrix, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InputError("adjacency contains non-finite entries")
        if np.abs(A - A.T).max() > SYM_TOL:
            raise InputError("adjacency matrix is not symmetric")
        if np.abs(np.diag(A)).max() > SYM_TOL:
            raise InputError("adjacency matrix must have zero diagonal")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @property
    def size(self) -> int:
        return self.adjacency.shape[0]

    @property
    def column_weights(self) -> np.ndarray:
        """c_j = sum_i A_ij^2."""
        return (self.adjacency**2).sum(axis=0)

    def to_dict(self) -> dict:
        return {"size": self.size, "adjacency": self.adjacency.tolist()}

    @classmethod
    def from_text(cls, text: str) -> "GraphSpec":
        stripped = text.lstrip()
        if stripped.startswith("{") or stripped.startswith("["):
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InputError(exc.msg, exc.lineno, exc.colno) from None
            rows = data.get("adjacency") if isinstance(data, dict) else data
            if rows is None:
                raise InputError("JSON graph needs an 'adjacency' field")
            try:
                return cls(np.array(rows, dtype=float))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, InputError):
                    raise
                raise InputError(f"adjacency is not a numeric matrix: {exc}") from None
        rows, width = [], None
        for lineno, line in enumerate(text.splitlines(), start=1):
            body = line.split("#", 1)[0]
            if not body.strip():
                continue
            row = []
            col = 0
            for tok in body.split():
                col = body.index(tok, col) + 1
                try:
                    row.append(float(tok))
                except ValueError:
                    raise InputError(f"not a number: {tok!r}", lineno, col) from None
                col += len(tok) - 1
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InputError(f"expected {width} entries, found {len(row)}", lineno, 1)
            rows.append(row)
        if not rows:
            raise InputError("empty adjacency matrix")
        return cls(np.array(rows))

    @classmethod
    def from_file(cls, path) -> "GraphSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def epr_graph() -> GraphSpec:
    return GraphSpec(np.array([[0.0, 1.0], [1.0, 0.0]]))


def square_graph() -> GraphSpec:
    return GraphSpec(np.array([[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float))


# -- eigenmodes -----------------------------------------------------------


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > EIG_TOL)
    return -v if nz.size and v[nz[0]] < 0 else v


def _sign_pattern_basis(Q: np.ndarray) -> np.ndarray:
    """Rotate an orthonormal eigenspace basis onto +-1/sqrt(M) vectors where possible."""
    M, k = Q.shape
    if M > MAX_PATTERN_SITES:
        return Q
    chosen: list[np.ndarray] = []
    for tail in itertools.product((1.0, -1.0), repeat=M - 1):
        s = np.array((1.0,) + tail) / math.sqrt(M)
        if abs(np.linalg.norm(Q.T @ s) - 1.0) > 1e-9:
            continue
        if all(abs(s @ c) < 1e-9 for c in chosen):
            chosen.append(s)
            if len(chosen) == k:
                break
    if len(chosen) == k:
        return np.column_stack(chosen)
    basis = list(chosen)
    for j in range(k):
        v = Q[:, j].copy()
        for b in basis:
            v -= (b @ v) * b
        n = np.linalg.norm(v)
        if n > 1e-6:
            basis.append(_fix_sign(v / n))
        if len(basis) == k:
            break
    return np.column_stack(basis)


def eigenmodes(graph: GraphSpec) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal V (modes as columns) and eigenvalues, sorted descending.

    Degenerate eigenspaces are re-expressed in a sign-pattern basis when one
    exists, since sign flips are the only routing operation available. The
    edgeless graph returns the site basis.
    """
    A = graph.adjacency
    if not np.any(A):
        return np.eye(graph.size), np.zeros(graph.size)
    w, U = np.linalg.eigh(A)
    order = sorted(range(w.size), key=lambda i: (-round(w[i], 9), i))
    w, U = w[order], U[:, order]
    V = np.empty_like(U)
    i = 0
    while i < w.size:
        j = i + 1
        while j < w.size and abs(w[j] - w[i]) < 1e-8:
            j += 1
        block = U[:, i:j]
        if j - i > 1:
            block = _sign_pattern_basis(block)
        V[:, i:j] = np.column_stack([_fix_sign(block[:, c]) for c in range(j - i)])
        i = j
    lam = np.einsum("im,ij,jm->m", V, A, V)
    # integer-weight graphs often have integer spectra; drop the eigensolver roundoff
    nearest = np.round(lam)
    snap = np.abs(lam - nearest) < 1e-12 * max(1.0, float(np.abs(A).max()))
    lam[snap] = nearest[snap]
    return V, lam


def target_angles(eigenvalues) -> np.ndarray:
    """Squeezing angles arccot(lambda) in radians, in (0, pi]."""
    lam = np.asarray(eigenvalues, dtype=float)
    phi = np.arctan2(1.0, lam)
    return np.where(phi <= 0, phi + np.pi, phi)


def is_sign_pattern(v: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(np.abs(v) * math.sqrt(v.size) - 1.0) < tol))


# -- pulse sequences ------------------------------------------------------


@dataclass(frozen=True)
class Squeeze:
    duration: float
    chi: float
    q: float
    noisy: bool = True
    kind: str = field(default="squeeze", init=False)


@dataclass(frozen=True)
class GlobalSpinor:
    angle: float
    kind: str = field(default="global_spinor", init=False)


@dataclass(frozen=True)
class LocalPiFlip:
    sites: tuple
    kind: str = field(default="local_pi_flip", init=False)


@dataclass(frozen=True)
class LocalSpinor:
    sites: tuple
    angle: float
    kind: str = field(default="local_spinor", init=False)


@dataclass(frozen=True)
class ReadoutRotation:
    sites: tuple
    kind: str = field(default="readout_rotation", init=False)


Step = Union[Squeeze, GlobalSpinor, LocalPiFlip, LocalSpinor, ReadoutRotation]
_STEP_TYPES = {cls.__dataclass_fields__["kind"].default: cls for cls in (Squeeze, GlobalSpinor, LocalPiFlip, LocalSpinor, ReadoutRotation)}


@dataclass(frozen=True)
class PulseSequence:
    mode_count: int
    steps: tuple = ()

    def __post_init__(self):
        steps = tuple(self.steps)
        for st in steps:
            if isinstance(st, Squeeze) and not st.duration >= 0:
                raise ValueError(f"squeeze duration must be >= 0, got {st.duration}")
            if hasattr(st, "sites"):
                bad = [s for s in st.sites if not 0 <= int(s) < self.mode_count]
                if bad:
                    raise IndexError(f"site(s) {bad} out of range for {self.mode_count} sites")
        object.__setattr__(self, "steps", steps)

    def __len__(self):
        return len(self.steps)

    def pulses(self) -> list[Squeeze]:
        return [s for s in self.steps if isinstance(s, Squeeze)]

    def to_dict(self) -> dict:
        out = []
        for st in self.steps:
            d = {"kind": st.kind}
            for name in st.__dataclass_fields__:
                if name == "kind":
                    continue
                v = getattr(st, name)
                d[name] = list(v) if isinstance(v, tuple) else v
            out.append(d)
        return {"mode_count": self.mode_count, "steps": out}

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSequence":
        steps = []
        for d in data["steps"]:
            d = dict(d)
            kind = d.pop("kind")
            if kind not in _STEP_TYPES:
                raise InputError(f"unknown step kind {kind!r}")
            if "sites" in d:
                d["sites"] = tuple(int(s) for s in d["sites"])
            steps.append(_STEP_TYPES[kind](**d))
        return cls(int(data["mode_count"]), tuple(steps))

    def listing(self) -> str:
        lines = []
        for i, st in enumerate(self.steps, start=1):
            if isinstance(st, Squeeze):
                desc = (
                    f"squeeze      tau={st.duration * 1e6:.3f} us  chi/2pi={st.chi / (2 * math.pi):.1f} Hz"
                    f"  q/2pi={st.q / (2 * math.pi):.1f} Hz" + ("" if st.noisy else "  (noise off)")
                )
            elif isinstance(st, GlobalSpinor):
                desc = f"spinor       phi={math.degrees(st.angle):.3f} deg"
            elif isinstance(st, LocalPiFlip):
                desc = f"pi-flip      sites={list(st.sites)}"
            elif isinstance(st, LocalSpinor):
                desc = f"local-spinor sites={list(st.sites)} phi={math.degrees(st.angle):.3f} deg"
            else:
                desc = f"readout      sites={list(st.sites)}"
            lines.append(f"{i:3d}  {desc}")
        return "\n".join(lines)


# -- simulation -----------------------------------------------------------


def symmetric_mode(M: int) -> np.ndarray:
    return np.full(M, 1.0 / math.sqrt(M))


def squeeze_drift(M: int, chi: float, q: float) -> np.ndarray:
    """Drift matrix on (x, p): the coupled mode feels chi, every mode feels q."""
    P = np.full((M, M), 1.0 / M)
    Z = np.zeros((M, M))
    return np.block([[Z, -q * np.eye(M)], [q * np.eye(M) + 2.0 * chi * P, Z]])


def squeeze_step_matrix(M: int, chi: float, q: float, tau: float) -> np.ndarray:
    """Symplectic map of one pulse: squeeze_map on the coupled mode, rotation by q*tau elsewhere."""
    P = np.full((M, M), 1.0 / M)
    S2 = dynamics.squeeze_map(chi, q, tau)
    c, s = math.cos(q * tau), math.sin(q * tau)
    R2 = np.array([[c, -s], [s, c]])
    return np.kron(S2, P) + np.kron(R2, np.eye(M) - P)


def _van_loan(A: np.ndarray, Q: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    n = A.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = -A
    big[:n, n:] = Q
    big[n:, n:] = A.T
    E = expm(big * tau)
    Phi = E[n:, n:].T
    Qd = Phi @ E[:n, n:]
    return Phi, 0.5 * (Qd + Qd.T)


@dataclass(frozen=True)
class NoiseModel:
    """Dissipation applied during noisy Squeeze steps.

    ``gamma_coll`` adds isotropic diffusion to the coupled mode. ``gamma_sc``
    relaxes every site toward vacuum at rate 2*gamma_sc. ``coupling_variation``
    mixes the coupled mode with vacuum after each pulse (transmission 1 - value).
    """

    gamma_coll: float = 0.0
    gamma_sc: float = 0.0
    coupling_variation: float = 0.0

    @classmethod
    def from_dissipation(cls, params: dynamics.DissipationParams, coupling_variation: float = 0.0) -> "NoiseModel":
        return cls(params.gamma_coll, params.gamma_sc, coupling_variation)


def _noisy_squeeze(state: GaussianState, st: Squeeze, noise: NoiseModel) -> GaussianState:
    M = state.mode_count
    P = np.full((M, M), 1.0 / M)
    Z = np.zeros((M, M))
    gamma_loc = dynamics.WORST_CASE_SCATTER_FACTOR * noise.gamma_sc
    A = squeeze_drift(M, st.chi, st.q) - 0.5 * gamma_loc * np.eye(2 * M)
    D = noise.gamma_coll * np.block([[P, Z], [Z, P]]) + gamma_loc * np.eye(2 * M)
    Phi, Qd = _van_loan(A, D, st.duration)
    out = GaussianState(Phi @ state.mean, Phi @ state.cov @ Phi.T + Qd)
    if noise.coupling_variation > 0:
        out = loss_channel(out, symmetric_mode(M), 1.0 - noise.coupling_variation)
    return out


def simulate(
    sequence: PulseSequence,
    initial: GaussianState | None = None,
    noise: NoiseModel | dynamics.DissipationParams | None = None,
) -> GaussianState:
    """Run a pulse sequence on a Gaussian state (vacuum by default)."""
    M = sequence.mode_count
    state = vacuum(M) if initial is None else initial
    if state.mode_count != M:
        raise ValueError(f"sequence is for {M} sites but the state has {state.mode_count}")
    if isinstance(noise, dynamics.DissipationParams):
        noise = NoiseModel.from_dissipation(noise)
    frozen: set[int] = set()
    for st in sequence.steps:
        if isinstance(st, Squeeze):
            if frozen:
                raise ValueError(f"cannot squeeze after readout rotation on sites {sorted(frozen)}")
            if noise is not None and st.noisy:
                state = _noisy_squeeze(state, st, noise)
            else:
                S = squeeze_step_matrix(M, st.chi, st.q, st.duration)
                state = GaussianState(S @ state.mean, S @ state.cov @ S.T)
        elif isinstance(st, GlobalSpinor):
            sites = [i for i in range(M) if i not in frozen]
            S = rotation_matrix(M, st.angle, sites)
            state = GaussianState(S @ state.mean, S @ state.cov @ S.T)
        elif isinstance(st, LocalSpinor):
            sites = [i for i in st.sites if i not in frozen]
            S = rotation_matrix(M, st.angle, sites)
            state = GaussianState(S @ state.mean, S @ state.cov @ S.T)
        elif isinstance(st, LocalPiFlip):
            state = local_pi_flip(state, st.sites)
        elif isinstance(st, ReadoutRotation):
            frozen.update(int(s) for s in st.sites)
        else:
            raise TypeError(f"unknown step {st!r}")
    return state


# -- compiler -------------------------------------------------------------


@dataclass(frozen=True)
class CompilationResult:
    graph: GraphSpec
    modes: np.ndarray
    eigenvalues: np.ndarray
    angles: np.ndarray
    order: tuple
    durations: tuple
    spinor_angles: tuple
    sequence: PulseSequence
    achieved_angles: np.ndarray
    squeeze_strengths: np.ndarray

    @property
    def relative_phases(self) -> np.ndarray:
        """Angle between squeezed axes of consecutively squeezed modes, in [0, pi)."""
        a = self.angles[list(self.order)]
        return np.mod(np.diff(a), np.pi)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "eigenvalues": self.eigenvalues.tolist(),
            "modes": self.modes.tolist(),
            "angles_deg": np.degrees(self.angles).tolist(),
            "achieved_angles_deg": np.degrees(self.achieved_angles).tolist(),
            "pulse_order": list(self.order),
            "durations_s": list(self.durations),
            "spinor_angles_deg": [math.degrees(a) for a in self.spinor_angles],
            "relative_phases_deg": np.degrees(self.relative_phases).tolist(),
            "squeeze_strengths": self.squeeze_strengths.tolist(),
            "sequence": self.sequence.to_dict(),
        }


def duration_for_squeezing(chi: float, q: float, r: float) -> float:
    """Pulse length giving minimum variance exp(-2r) on vacuum."""
    if r < 0:
        raise ValueError("squeeze strength must be >= 0")
    if r == 0:
        return 0.0
    if r > MAX_SQUEEZE_STRENGTH:
        raise NumericalError(f"squeeze strength r={r} exceeds the resolvable limit {MAX_SQUEEZE_STRENGTH}")
    lam = dynamics.squeezing_rate(chi, q).require_unstable()
    target = math.exp(-2.0 * r)

    def gap(t):
        return dynamics.finite_time_squeezing(chi, q, t)[0] - target

    hi = r / lam
    while gap(hi) > 0:
        hi *= 2.0
        if hi * lam > 200:
            raise NumericalError(f"cannot reach squeeze strength r={r}")
    return brentq(gap, 0.0, hi, xtol=1e-15, rtol=1e-14)


def _angle_diff(a, b):
    """Signed difference a - b folded into [-pi/2, pi/2)."""
    return (np.asarray(a) - np.asarray(b) + np.pi / 2) % np.pi - np.pi / 2


def compile_graph(
    graph: GraphSpec,
    squeeze_strength=1.0,
    chi: float | None = None,
    q: float = DEFAULT_Q,
    angles: Sequence[float] | None = None,
    verify: bool = True,
) -> CompilationResult:
    """Compile ``graph`` into a pulse sequence squeezing each eigenmode by ``squeeze_strength``.

    ``squeeze_strength`` is r (minimum variance exp(-2r)), scalar or per mode
    in eigenvalue order. ``chi`` defaults to -q. ``angles`` overrides the
    target squeezing angles (radians, eigenvalue order).
    """
    chi = -q if chi is None else chi
    M = graph.size
    V, lam = eigenmodes(graph)
    if not np.any(graph.adjacency):
        # every basis diagonalizes the edgeless graph; pick a routable one
        V = _sign_pattern_basis(V)
    bad = [m for m in range(M) if not is_sign_pattern(V[:, m])]
    if bad:
        raise UnroutableGraphError(bad)
    phi_t = target_angles(lam) if angles is None else np.asarray(angles, dtype=float)
    if phi_t.shape != (M,):
        raise ValueError(f"expected {M} target angles, got {phi_t.shape}")
    r = np.broadcast_to(np.asarray(squeeze_strength, dtype=float), (M,)).copy()

    order = tuple(range(M - 1, -1, -1))
    taus = [duration_for_squeezing(chi, q, r[m]) for m in order]
    intrinsic = [dynamics.finite_time_squeezing(chi, q, t)[2] if t > 0 else 0.0 for t in taus]
    resid = [intrinsic[k] - phi_t[m] for k, m in enumerate(order)]
    spinors = []
    for k in range(M):
        if k == M - 1:
            spinors.append(resid[k])
        else:
            spinors.append(resid[k] - resid[k + 1] - q * taus[k + 1])
    spinors = [float(np.mod(a + np.pi / 2, np.pi) - np.pi / 2) for a in spinors]

    signs = [np.sign(V[:, m]) for m in order]
    steps: list = []
    for k in range(M):
        steps.append(Squeeze(float(taus[k]), float(chi), float(q)))
        if abs(spinors[k]) > 0:
            steps.append(GlobalSpinor(spinors[k]))
        nxt = signs[k + 1] if k + 1 < M else np.ones(M)
        flip = tuple(int(i) for i in np.flatnonzero(signs[k] != nxt))
        if flip:
            steps.append(LocalPiFlip(flip))
    seq = PulseSequence(M, tuple(steps))

    achieved = np.full(M, np.nan)
    if verify:
        final = simulate(seq)
        for m in range(M):
            if r[m] == 0:
                achieved[m] = phi_t[m]
                continue
            achieved[m] = principal_variances(mode_covariance(final, V[:, m]))[2]
        err = np.degrees(np.abs(_angle_diff(achieved, phi_t)))
        if np.nanmax(err) > ANGLE_TOL_DEG:
            raise NumericalError(f"compiled angles miss targets by up to {err.max():.3f} deg")
        achieved = phi_t + _angle_diff(achieved, phi_t)
    return CompilationResult(graph, V, lam, phi_t, order, tuple(taus), tuple(spinors), seq, achieved, r)


# -- reconstruction -------------------------------------------------------


def _cov_of(state_or_cov) -> np.ndarray:
    if isinstance(state_or_cov, GaussianState):
        return state_or_cov.cov
    return np.asarray(state_or_cov, dtype=float)


def adjacency_from_covariance(cov: np.ndarray, method: str = "elementwise") -> np.ndarray:
    """Adjacency estimate from a (batch of) covariance matrices, symmetrized.

    ``elementwise``: A_ij = Cov(p_i, x_j)/Var(x_j), exact only when the x
    quadratures are uncorrelated. ``regression``: Cov(p, x) Cov(x, x)^-1, the
    full minimizer of Var(p - A x).
    """
    M = cov.shape[-1] // 2
    cxx = cov[..., :M, :M]
    var_x = np.diagonal(cxx, axis1=-2, axis2=-1)
    if np.any(var_x <= 0):
        raise ValueError("every Var(x_j) must be positive to reconstruct the adjacency")
    if method == "elementwise":
        A = cov[..., M:, :M] / var_x[..., None, :]
    elif method == "regression":
        A = np.swapaxes(np.linalg.solve(cxx, np.swapaxes(cov[..., M:, :M], -1, -2)), -1, -2)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def reconstruct_adjacency(state_or_cov, method: str = "elementwise") -> np.ndarray:
    return adjacency_from_covariance(_cov_of(state_or_cov), method)


def reconstruct_adjacency_samples(samples, method: str = "elementwise") -> tuple[np.ndarray, np.ndarray]:
    """Adjacency estimate and jackknife 1 s.d. per entry from quadrature samples (n, 2M)."""
    return covariance_jackknife(samples, lambda c: adjacency_from_covariance(c, method))


def mode_covariance_from_principal(zeta2_min: float, zeta2_max: float, phi_min: float) -> np.ndarray:
    if zeta2_min <= 0 or zeta2_max <= 0:
        raise ValueError("principal variances must be positive")
    u = np.array([math.cos(phi_min), -math.sin(phi_min)])
    w = np.array([math.sin(phi_min), math.cos(phi_min)])
    return zeta2_min * np.outer(u, u) + zeta2_max * np.outer(w, w)


def site_covariance_from_modes(per_mode, V) -> np.ndarray:
    """Full site covariance from independent eigenmodes with given principal variances."""
    V = np.asarray(V, dtype=float)
    M = V.shape[0]
    if V.shape != (M, M) or np.abs(V @ V.T - np.eye(M)).max() > 1e-9:
        raise ValueError("V must be an orthogonal square matrix")
    C = np.zeros((2 * M, 2 * M))
    for m, (zmin, zmax, phi) in enumerate(per_mode):
        c = mode_covariance_from_principal(zmin, zmax, phi)
        C[m, m], C[m, M + m], C[M + m, m], C[M + m, M + m] = c[0, 0], c[0, 1], c[1, 0], c[1, 1]
    Z = np.zeros((M, M))
    T = np.block([[V, Z], [Z, V]])
    return T @ C @ T.T


def correlation_matrix(per_mode, V) -> np.ndarray:
    """Corr(x_i, p_j) assuming independent eigenmodes (columns of V)."""
    C = site_covariance_from_modes(per_mode, V)
    M = C.shape[0] // 2
    sx = np.sqrt(np.diag(C)[:M])
    sp = np.sqrt(np.diag(C)[M:])
    return C[:M, M:] / np.outer(sx, sp)


# -- separability ---------------------------------------------------------


def _separable_weights(graph: GraphSpec) -> tuple[np.ndarray, np.ndarray]:
    A2 = graph.adjacency**2
    M = graph.size
    denom = M * (1.0 + A2.sum(axis=1))
    a = 1.0 / denom
    b = (A2 / denom[:, None]).sum(axis=0)
    return a, b


def separability_bound(graph: GraphSpec, method: str = "closed") -> float:
    """Lower bound on the mean normalized nullifier variance over separable states.

    For product states the objective splits into per-site terms
    a_j Var(p_j) + b_j Var(x_j) with Var(x_j) Var(p_j) >= 1.
    ``method="closed"`` uses the per-site minimum 2 sqrt(a_j b_j);
    ``method="numeric"`` minimizes each site term by a bounded line search.
    """
    a, b = _separable_weights(graph)
    if method == "closed":
        return float(np.sum(2.0 * np.sqrt(a * b)))
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")
    total = 0.0
    for aj, bj in zip(a, b):
        if bj == 0:
            continue
        res = minimize_scalar(
            lambda s: aj * math.exp(-s) + bj * math.exp(s),
            bounds=(-40.0, 40.0),
            method="bounded",
            options={"xatol": 1e-12},
        )
        total += res.fun
    return float(total)


def regular_separability_bound(graph: GraphSpec) -> float:
    """sum_j 2 sqrt(c_j) / sum_i (1 + c_i); equals the closed form when all c_j agree."""
    c = graph.column_weights
    return float(np.sum(2.0 * np.sqrt(c)) / np.sum(1.0 + c))
