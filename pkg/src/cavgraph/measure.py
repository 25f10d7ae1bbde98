"""Synthetic measurement records, imaging model and calibration fits."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericalError
from .graphc import GraphSpec
from .phasespace import GaussianState
from .stats import jackknife_ci  # noqa: F401  (re-exported)

SAMPLE_BLOCK = 4096


# -- sampling -------------------------------------------------------------


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(block)]))


def _derived_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(stream)]).generate_state(1)[0])


def standard_normals(n: int, dim: int, seed: int) -> np.ndarray:
    """(n, dim) standard normals; rows depend only on (seed, row index)."""
    out = np.empty((n, dim))
    for b, start in enumerate(range(0, n, SAMPLE_BLOCK)):
        stop = min(n, start + SAMPLE_BLOCK)
        out[start:stop] = _block_rng(seed, b).standard_normal((stop - start, dim))
    return out


def sample(state: GaussianState, n_trials: int, seed: int = 0) -> np.ndarray:
    """Draw ``n_trials`` quadrature vectors (x_1..x_M, p_1..p_M) from a Gaussian state."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    state.validate()
    w, U = np.linalg.eigh(state.cov)
    L = U * np.sqrt(np.clip(w, 0.0, None))
    z = standard_normals(int(n_trials), state.mean.size, seed)
    return state.mean + z @ L.T


def site_readout(samples: np.ndarray, angles) -> np.ndarray:
    """Per-site observable x_i cos(phi_i) - p_i sin(phi_i) for each trial."""
    X = np.asarray(samples, dtype=float)
    M = X.shape[1] // 2
    phi = np.broadcast_to(np.asarray(angles, dtype=float), (M,))
    return X[:, :M] * np.cos(phi) - X[:, M:] * np.sin(phi)


# -- populations and imaging ---------------------------------------------


@dataclass(frozen=True)
class ImagingCalibration:
    r: float
    g: float = 0.0
    a0: float = 0.0
    a2: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("counts per atom r must be positive")
        if min(self.g, self.a0, self.a2) < 0:
            raise ValueError("g, a0 and a2 must be >= 0")

    @property
    def a1(self) -> float:
        return self.r + self.g

    def to_dict(self) -> dict:
        return asdict(self)


def populations_from_readout(readout: np.ndarray, atoms_per_site: float, contrast: float = 1.0) -> np.ndarray:
    """Zeeman populations (N'+, N'0, N'-) after the readout rotation, shape (..., 3).

    F^x = x sqrt(C N) sets N'+ - N'-, and N'0 = N(1 - C)/3 fixes the contrast.
    """
    if not 0 < contrast <= 1:
        raise ValueError("contrast must lie in (0, 1]")
    N = float(atoms_per_site)
    fx = np.asarray(readout, dtype=float) * math.sqrt(contrast * N)
    n0 = np.full(fx.shape, N * (1.0 - contrast) / 3.0)
    side = N - n0
    n_plus = np.clip(0.5 * (side + fx), 0.0, None)
    n_minus = np.clip(0.5 * (side - fx), 0.0, None)
    return np.stack([n_plus, n0, n_minus], axis=-1)


def imaging_noise_variance(atoms, calib: ImagingCalibration) -> np.ndarray:
    """Per-state count variance; two states combine to a0 + g r n + a2 (r n)^2 at n+ = n-."""
    rn = calib.r * np.asarray(atoms, dtype=float)
    return 0.5 * calib.a0 + calib.g * rn + 2.0 * calib.a2 * rn**2


def imaging_forward(populations, calib: ImagingCalibration, seed: int = 0) -> np.ndarray:
    """Camera counts for each state population: r * atoms plus imaging noise, clipped at 0."""
    P = np.asarray(populations, dtype=float)
    mean = calib.r * P
    sd = np.sqrt(imaging_noise_variance(P, calib))
    flat = P.reshape(P.shape[0], -1) if P.ndim > 1 else P.reshape(-1, 1)
    z = standard_normals(flat.shape[0], flat.shape[1], seed).reshape(P.shape)
    return np.clip(mean + sd * z, 0.0, None)


def projection_noise_data(atom_numbers, n_trials: int, calib: ImagingCalibration, seed: int = 0):
    """Synthetic calibration runs: coherent +-1 superpositions imaged at each atom number.

    Returns (mean of c+ + c-, variance of c+ - c-) per setting.
    """
    means, variances = [], []
    for k, N in enumerate(atom_numbers):
        rng = _block_rng(seed, 10_000 + k)
        n_plus = rng.binomial(int(N), 0.5, size=n_trials).astype(float)
        pops = np.stack([n_plus, int(N) - n_plus], axis=1)
        counts = imaging_forward(pops, calib, seed=_derived_seed(seed, 20_000 + k))
        means.append(counts.sum(axis=1).mean())
        variances.append(np.var(counts[:, 0] - counts[:, 1], ddof=1))
    return np.array(means), np.array(variances)


@dataclass(frozen=True)
class PolynomialNoiseFit:
    calibration: ImagingCalibration
    coefficients: np.ndarray
    covariance: np.ndarray

    @property
    def r_sd(self) -> float:
        return float(math.sqrt(self.covariance[1, 1]))


def projection_noise_fit(mean_counts, var_counts, g: float, n_trials: int | None = None) -> PolynomialNoiseFit:
    """Weighted quadratic fit Var(c+ - c-) = a0 + a1 <c+ + c-> + a2 <c+ + c->^2; r = a1 - g."""
    m = np.asarray(mean_counts, dtype=float)
    v = np.asarray(var_counts, dtype=float)
    if m.shape != v.shape or m.ndim != 1:
        raise ValueError("mean and variance arrays must be 1-D and the same length")
    if np.unique(m).size < 4:
        raise ValueError("need at least 4 distinct atom-number settings")
    X = np.column_stack([np.ones_like(m), m, m * m])
    if n_trials is not None:
        sigma = np.abs(v) * math.sqrt(2.0 / (n_trials - 1))
        sigma = np.where(sigma > 0, sigma, 1.0)
    else:
        sigma = np.ones_like(v)
    Xw = X / sigma[:, None]
    vw = v / sigma
    scale = np.abs(Xw).max(axis=0)
    scale[scale == 0] = 1.0
    if np.linalg.matrix_rank(Xw / scale) < 3:
        raise ValueError("rank-deficient design for the quadratic noise fit")
    coef_s, *_ = np.linalg.lstsq(Xw / scale, vw, rcond=None)
    coef = coef_s / scale
    cov_s = np.linalg.inv((Xw / scale).T @ (Xw / scale))
    if n_trials is None:
        dof = max(1, m.size - 3)
        resid = vw - (Xw / scale) @ coef_s
        cov_s = cov_s * float(resid @ resid) / dof
    cov = cov_s / np.outer(scale, scale)
    a0, a1, a2 = coef
    calib = ImagingCalibration(r=float(a1 - g), g=float(g), a0=float(max(a0, 0.0)), a2=float(max(a2, 0.0)))
    return PolynomialNoiseFit(calib, coef, cov)


# -- Rabi contrast --------------------------------------------------------


@dataclass(frozen=True)
class RabiFit:
    amplitude: float
    dephasing: float
    rabi: float
    offset: float
    contrast: float
    residual_rms: float
    iterations: int

    def to_dict(self) -> dict:
        return asdict(self)


def rabi_model(t, A, gamma, omega, d):
    t = np.asarray(t, dtype=float)
    return A * np.exp(-((gamma * t) ** 2)) * np.cos(2.0 * omega * t) + d


def _rabi_jacobian(t, p):
    A, gamma, omega, _ = p
    env = np.exp(-((gamma * t) ** 2))
    c = np.cos(2.0 * omega * t)
    s = np.sin(2.0 * omega * t)
    return np.column_stack(
        [
            env * c,
            A * env * c * (-2.0 * gamma * t * t),
            -A * env * s * 2.0 * t,
            np.ones_like(t),
        ]
    )


def rabi_contrast(A: float, gamma: float, omega: float) -> float:
    """|y(pi/2 Omega) - y(0)|/2 for the damped model."""
    return abs(A) * (1.0 + math.exp(-((math.pi * gamma / (2.0 * omega)) ** 2))) / 2.0


def _gauss_newton(t, y, p0, max_iter=200, tol=1e-10):
    # wild trial steps can overflow the envelope; those steps are rejected by the cost check
    with np.errstate(over="ignore", invalid="ignore"):
        return _gauss_newton_loop(t, y, p0, max_iter, tol)


def _gauss_newton_loop(t, y, p0, max_iter, tol):
    p = np.array(p0, dtype=float)
    r = y - rabi_model(t, *p)
    cost = float(r @ r)
    mu = 1e-3
    for it in range(1, max_iter + 1):
        J = _rabi_jacobian(t, p)
        JTJ = J.T @ J
        g = J.T @ r
        while True:
            H = JTJ + mu * np.diag(np.diag(JTJ) + 1e-300)
            try:
                step = np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                mu *= 10.0
                if mu > 1e12:
                    return p, cost, it, False
                continue
            trial = p + step
            r_new = y - rabi_model(t, *trial)
            c_new = float(r_new @ r_new)
            if c_new <= cost:
                break
            mu *= 10.0
            if mu > 1e12:
                return p, cost, it, True
        p, r, cost_old, cost = trial, r_new, cost, c_new
        mu = max(mu / 10.0, 1e-12)
        if np.all(np.abs(step) <= tol * (np.abs(p) + 1e-30)) or cost == 0.0:
            return p, cost, it, True
        if cost_old - cost <= 1e-16 * max(cost_old, 1e-300) and cost > 0:
            return p, cost, it, True
    return p, cost, max_iter, False


def rabi_fit(times, imbalances, n_starts: int = 24) -> RabiFit:
    """Fit -Q0/N = A exp(-(gamma t)^2) cos(2 Omega t) + d by multi-start Gauss-Newton."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(imbalances, dtype=float)
    if t.size < 8 or t.shape != y.shape:
        raise ValueError("rabi_fit needs at least 8 matching time points")
    span = t.max() - t.min()
    if span <= 0:
        raise ValueError("time points must span a nonzero interval")
    dt = np.min(np.diff(np.unique(t))) if np.unique(t).size > 1 else span
    # cos(2 Omega t): half a period spans pi / (2 Omega)
    omegas = np.geomspace(math.pi / (4.0 * span), math.pi / (4.0 * dt), n_starts)
    best = None
    for om in omegas:
        c = np.cos(2.0 * om * t)
        B = np.column_stack([c, np.ones_like(t)])
        (A0, d0), *_ = np.linalg.lstsq(B, y, rcond=None)
        p, cost, it, ok = _gauss_newton(t, y, (A0, 0.1 / span, om, d0))
        if not ok or not np.all(np.isfinite(p)):
            continue
        if best is None or cost < best[1] - 1e-15 * max(best[1], 1e-300):
            best = (p, cost, it)
    if best is None:
        raise NumericalError("rabi_fit did not converge from any start")
    p, cost, it = best
    A, gamma, omega, d = p
    if omega < 0:
        omega = -omega
    rms = math.sqrt(cost / t.size)
    span_ok = omega * span >= math.pi / 4.0
    if not span_ok:
        raise NumericalError(f"fitted Rabi frequency does not cover half a period (rms={rms:.3g})")
    return RabiFit(float(A), abs(float(gamma)), float(omega), float(d), rabi_contrast(A, gamma, omega), rms, it)


# -- sinusoidal variance --------------------------------------------------


def sinusoidal_variance_fit(phis, zeta2) -> tuple[float, float, float]:
    """(zeta2_min, zeta2_max, phi_min) from variances at spinor phases, phi_min in [-pi/2, pi/2)."""
    phi = np.asarray(phis, dtype=float)
    z = np.asarray(zeta2, dtype=float)
    if phi.size < 5 or phi.shape != z.shape:
        raise ValueError("need at least 5 matching (phi, zeta2) points")
    # spread of the doubled angle on the circle must cover 180 degrees of doubled phase
    folded = np.sort(np.mod(phi, np.pi))
    gaps = np.diff(np.concatenate([folded, folded[:1] + np.pi]))
    if np.pi - gaps.max() < np.pi / 2 - 1e-9:
        raise ValueError("spinor phases must span at least 90 degrees")
    X = np.column_stack([np.ones_like(phi), np.cos(2 * phi), np.sin(2 * phi)])
    (a, b, c), *_ = np.linalg.lstsq(X, z, rcond=None)
    R = math.hypot(b, c)
    phi_min = 0.5 * math.atan2(-c, -b)
    phi_min = (phi_min + np.pi / 2) % np.pi - np.pi / 2
    return float(a - R), float(a + R), float(phi_min)


# -- nullifier readout ----------------------------------------------------


def bipartition(graph: GraphSpec) -> tuple[list[int], list[int]]:
    """2-colour the graph by BFS; returns (Q-read sites, P-read sites)."""
    A = graph.adjacency
    M = graph.size
    colour = [-1] * M
    for root in range(M):
        if colour[root] >= 0:
            continue
        colour[root] = 0
        queue = deque([root])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(A[i] != 0):
                if colour[j] < 0:
                    colour[j] = 1 - colour[i]
                    queue.append(j)
                elif colour[j] == colour[i]:
                    raise ValueError(f"graph is not bipartite (edge {i}-{j}); direct nullifier readout needs two site classes")
    return [i for i in range(M) if colour[i] == 0], [i for i in range(M) if colour[i] == 1]


def nullifier_readout_angles(graph: GraphSpec, phi: float) -> np.ndarray:
    """Per-site readout spinor phases: Q-sites at phi + pi, P-sites at phi - pi/2."""
    qset, pset = bipartition(graph)
    ang = np.empty(graph.size)
    ang[qset] = phi + np.pi
    ang[pset] = phi - np.pi / 2
    return ang


def nullifier_combinations(readout: np.ndarray, graph: GraphSpec) -> np.ndarray:
    """Combine per-site readouts (Q on Q-sites, P on P-sites) into the nullifier observables."""
    A = graph.adjacency
    qset, pset = bipartition(graph)
    R = np.asarray(readout, dtype=float)
    out = np.empty_like(R)
    for i in qset:
        out[:, i] = R[:, i] - R @ np.where(np.isin(np.arange(graph.size), pset), A[i], 0.0)
    for i in pset:
        out[:, i] = R[:, i] + R @ np.where(np.isin(np.arange(graph.size), qset), A[i], 0.0)
    return out


def nullifier_readout(state: GaussianState, graph: GraphSpec, phi: float, n_trials: int, seed: int = 0) -> np.ndarray:
    """Sampled nullifier observables at global spinor phase ``phi``, shape (n_trials, M).

    Q-sites give nullifiers at phi = 90 deg and P-sites at phi = 0.
    """
    if graph.size != state.mode_count:
        raise ValueError("graph size does not match the state")
    X = sample(state, n_trials, seed)
    return nullifier_combinations(site_readout(X, nullifier_readout_angles(graph, phi)), graph)


# -- witness record sets ----------------------------------------------------

SCAN_STEP_DEG = 15.0


def witness_settings(graph: GraphSpec, reference_angle: float, scan_step_deg: float = SCAN_STEP_DEG) -> list:
    """(name, per-site readout angles) for the standard witness measurement settings."""
    M = graph.size
    out = [("xprime", np.full(M, reference_angle)), ("pprime", np.full(M, reference_angle - math.pi / 2))]
    out += [("null000", nullifier_readout_angles(graph, 0.0)), ("null090", nullifier_readout_angles(graph, math.pi / 2))]
    for k in range(int(round(180.0 / scan_step_deg))):
        deg = k * scan_step_deg
        out.append((f"scan{int(round(deg)):03d}", np.full(M, math.radians(deg))))
    return out


def witness_records(
    state: GaussianState,
    graph: GraphSpec,
    n_trials: int,
    seed: int,
    atoms_per_site: float,
    contrast: float = 1.0,
    calib: ImagingCalibration | None = None,
    reference_angle: float = math.pi / 4,
) -> dict:
    """Synthetic records per setting: name -> (phi, populations (n, M, 3), counts or None).

    Each setting draws fresh trials from its own seed stream, so settings are
    independent and adding settings leaves existing ones unchanged.
    """
    if graph.size != state.mode_count:
        raise ValueError("graph size does not match the state")
    out = {}
    for s, (name, angles) in enumerate(witness_settings(graph, reference_angle)):
        X = sample(state, n_trials, seed=_derived_seed(seed, 2 * s))
        pops = populations_from_readout(site_readout(X, angles), atoms_per_site, contrast)
        counts = None if calib is None else imaging_forward(pops, calib, seed=_derived_seed(seed, 2 * s + 1))
        out[name] = (float(angles[0]), pops, counts)
    return out
