"""Squeezing and entanglement witnesses from Gaussian states or quadrature samples.

Sample inputs are arrays of shape (n_trials, 2M) in the (x..., p...) layout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graphc import GraphSpec, separability_bound
from .phasespace import GaussianState, conditional_covariance, principal_variances, rotation_matrix
from .stats import covariance_jackknife


def contrast_from_populations(n_plus, n_zero, n_minus, N=None) -> float:
    """C = |N'+ + N'- - 2 N'0| / N from post-rotation Zeeman populations (averaged over trials)."""
    n_plus, n_zero, n_minus = (float(np.mean(v)) for v in (n_plus, n_zero, n_minus))
    N = n_plus + n_zero + n_minus if N is None else float(np.mean(N))
    if N <= 0:
        raise ValueError("total atom number must be positive")
    C = abs(n_plus + n_minus - 2.0 * n_zero) / N
    if C > 1.0:
        warnings.warn(f"contrast {C:.4f} > 1: populations violate the readout precondition; clamped to 1")
        C = 1.0
    return C


def wineland(zeta2: float, contrast: float) -> float:
    if not 0 < contrast <= 1:
        raise ValueError("contrast must lie in (0, 1]")
    return zeta2 / contrast


def mancini(var_x_plus: float, var_p_minus: float) -> float:
    if var_x_plus < 0 or var_p_minus < 0:
        raise ValueError("variances must be >= 0")
    return var_x_plus * var_p_minus


def _split(source) -> tuple[np.ndarray, np.ndarray | None]:
    """(covariance, samples or None) for a GaussianState or an (n_trials, 2M) sample array."""
    if isinstance(source, GaussianState):
        return source.cov, None
    X = np.asarray(source, dtype=float)
    if X.ndim != 2 or X.shape[1] % 2 or X.shape[0] < 3:
        raise ValueError(f"samples must have shape (n_trials >= 3, 2M), got {X.shape}")
    return np.atleast_2d(np.cov(X, rowvar=False)), X


def _cov(source) -> np.ndarray:
    return _split(source)[0]


def rotated_covariance(cov: np.ndarray, angle: float) -> np.ndarray:
    """Covariance in the frame whose x axis is the quadrature at spinor phase ``angle``."""
    M = cov.shape[-1] // 2
    R = rotation_matrix(M, angle)
    return R @ cov @ R.T


def subsystem_rows(M: int, sites: Sequence[int], quadrature: str) -> np.ndarray:
    row = np.zeros(2 * M)
    off = 0 if quadrature == "x" else M
    row[[off + s for s in sites]] = 1.0 / math.sqrt(len(sites))
    return row


# -- steering ---------------------------------------------------------------


@dataclass(frozen=True)
class SteeringResult:
    product: float
    var_x: float
    var_p: float
    weights_x: np.ndarray
    weights_p: np.ndarray
    raw_product: float

    @property
    def steering(self) -> bool:
        return self.product < 1.0


def _conditional_on_cov(cov: np.ndarray, target, conditioners, quad: str):
    M = cov.shape[-1] // 2
    t_row = subsystem_rows(M, target, quad)
    off = 0 if quad == "x" else M
    c_idx = [off + c for c in conditioners]
    rows = np.vstack([t_row] + [np.eye(2 * M)[i] for i in c_idx])
    sub = rows @ cov @ rows.T
    cond, gains = conditional_covariance(sub, [0], list(range(1, len(c_idx) + 1)))
    return float(cond[0, 0]), gains[0]


def steering(source, target: Sequence[int], conditioners: Sequence[int], detection_noise: float = 0.0) -> SteeringResult:
    """Product Var(x_T | x_C) Var(p_T | p_C) of conditional variances.

    The target quadrature is the normalized sum over ``target`` sites; each
    conditioner site contributes its own inference weight. ``detection_noise``
    is subtracted from each conditional variance before forming the product.
    """
    cov = _cov(source)
    if set(target) & set(conditioners):
        raise ValueError("target and conditioner sites overlap")
    if not conditioners:
        raise ValueError("need at least one conditioning site")
    M = cov.shape[0] // 2
    for off in (0, M):
        idx = [off + c for c in conditioners]
        if np.linalg.cond(cov[np.ix_(idx, idx)]) > 1e12:
            warnings.warn("singular conditioning covariance; using the pseudo-inverse")
    vx, gx = _conditional_on_cov(cov, target, conditioners, "x")
    vp, gp = _conditional_on_cov(cov, target, conditioners, "p")
    return SteeringResult((vx - detection_noise) * (vp - detection_noise), vx - detection_noise,
                          vp - detection_noise, gx, gp, vx * vp)


def least_squares_weights(samples, target, conditioners, quad: str) -> np.ndarray:
    """Inference weights from an ordinary least-squares regression on samples."""
    X = np.asarray(samples, dtype=float)
    M = X.shape[1] // 2
    y = X @ subsystem_rows(M, target, quad)
    off = 0 if quad == "x" else M
    Z = X[:, [off + c for c in conditioners]]
    Zc = Z - Z.mean(axis=0)
    g, *_ = np.linalg.lstsq(Zc, y - y.mean(), rcond=None)
    return g


# -- nullifiers ------------------------------------------------------------


def nullifier_rows(graph: GraphSpec) -> np.ndarray:
    """Rows n_i = p_i - sum_j A_ij x_j in (x..., p...) layout, shape (M, 2M)."""
    M = graph.size
    return np.hstack([-graph.adjacency, np.eye(M)])


def _nullifier_v(cov: np.ndarray, graph: GraphSpec) -> np.ndarray:
    N = nullifier_rows(graph)
    var = np.einsum("ia,...ab,ib->...i", N, cov, N)
    return var / (1.0 + (graph.adjacency**2).sum(axis=1))


@dataclass(frozen=True)
class NullifierResult:
    v: np.ndarray
    mean: float
    bound: float
    v_sd: np.ndarray | None = None
    mean_sd: float | None = None

    @property
    def separable_excluded(self) -> bool:
        return self.mean < self.bound


def nullifier_variances(source, graph: GraphSpec, detection_noise: float = 0.0) -> NullifierResult:
    """Normalized nullifier variances v_i = Var(n_i)/(1 + sum_j A_ij^2) and their mean."""
    cov, X = _split(source)
    if cov.shape[0] != 2 * graph.size:
        raise ValueError(f"graph has {graph.size} sites but the data has {cov.shape[0] // 2}")
    v = _nullifier_v(cov, graph) - detection_noise
    bound = separability_bound(graph)
    if X is None:
        return NullifierResult(v, float(v.mean()), bound)

    def stat(C):
        vv = _nullifier_v(C, graph) - detection_noise
        return np.concatenate([vv, vv.mean(axis=-1, keepdims=True)], axis=-1)

    _, sd = covariance_jackknife(X, stat)
    return NullifierResult(v, float(v.mean()), bound, sd[:-1], float(sd[-1]))


# -- areas -----------------------------------------------------------------


def phase_space_areas(principal) -> tuple[np.ndarray, float]:
    """A_m = sqrt(zeta2_min zeta2_max) per mode and their product."""
    P = np.atleast_2d(np.asarray(principal, dtype=float))[:, :2]
    if np.any(P < 0):
        raise ValueError("principal variances must be >= 0")
    areas = np.sqrt(P[:, 0] * P[:, 1])
    return areas, float(np.prod(areas))


# -- report ----------------------------------------------------------------


def _symmetric_and_antisymmetric(M: int, left, right):
    plus = np.zeros(M)
    minus = np.zeros(M)
    plus[list(left) + list(right)] = 1.0
    minus[list(left)] = 1.0
    minus[list(right)] = -1.0
    return plus / np.linalg.norm(plus), minus / np.linalg.norm(minus)


def _quad_row(M: int, mode: np.ndarray, quad: str) -> np.ndarray:
    row = np.zeros(2 * M)
    if quad == "x":
        row[:M] = mode
    else:
        row[M:] = mode
    return row


def _core_stats(cov: np.ndarray, graph: GraphSpec, ref: float, left, right, detection_noise: float) -> np.ndarray:
    """Vector of covariance-only witnesses for one or many covariances (..., 2M, 2M)."""
    M = cov.shape[-1] // 2
    R = rotation_matrix(M, ref)
    C = R @ cov @ R.T
    plus, minus = _symmetric_and_antisymmetric(M, left, right)
    xp = _quad_row(M, plus, "x")
    pm = _quad_row(M, minus, "p")
    vx = np.einsum("a,...ab,b->...", xp, C, xp)
    vp = np.einsum("a,...ab,b->...", pm, C, pm)
    out = [vx, vp, vx * vp]
    for tgt, cnd in ((right, left), (left, right)):
        prods = []
        for q in ("x", "p"):
            t_row = subsystem_rows(M, tgt, q)
            off = 0 if q == "x" else M
            idx = [off + c for c in cnd]
            s_tt = np.einsum("a,...ab,b->...", t_row, C, t_row)
            s_tc = np.einsum("a,...ab->...b", t_row, C[..., :, idx])
            s_cc = C[..., idx, :][..., :, idx]
            g = np.einsum("...ij,...j->...i", np.linalg.pinv(s_cc, hermitian=True), s_tc)
            prods.append(s_tt - np.einsum("...i,...i->...", s_tc, g) - detection_noise)
        out.append(prods[0] * prods[1])
    v = _nullifier_v(cov, graph) - detection_noise
    out.extend(np.moveaxis(v, -1, 0))
    out.append(v.mean(axis=-1))
    return np.stack(out, axis=-1)


@dataclass
class WitnessReport:
    zeta2: float
    xi2: float
    C: float
    W: float
    var_x_plus: float
    var_p_minus: float
    steering_LR: float
    steering_RL: float
    weights: dict
    v: list
    V_avg: float
    separability_bound: float
    areas: list
    reference_angle_deg: float
    steering_table: list = field(default_factory=list)
    n_trials: int | None = None
    ci: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> dict:
        return {
            "squeezed_below_sql": self.xi2 < 1.0,
            "mancini_entangled": self.W < 1.0,
            "steering_LR": self.steering_LR < 1.0,
            "steering_RL": self.steering_RL < 1.0,
            "not_fully_separable": self.V_avg < self.separability_bound,
        }

    def to_dict(self) -> dict:
        d = {
            "zeta2": self.zeta2,
            "xi2": self.xi2,
            "C": self.C,
            "W": self.W,
            "var_x_plus": self.var_x_plus,
            "var_p_minus": self.var_p_minus,
            "steering_LR": self.steering_LR,
            "steering_RL": self.steering_RL,
            "weights": self.weights,
            "v": list(self.v),
            "V_avg": self.V_avg,
            "separability_bound": self.separability_bound,
            "areas": list(self.areas),
            "reference_angle_deg": self.reference_angle_deg,
            "steering_table": self.steering_table,
            "n_trials": self.n_trials,
            "ci": self.ci,
            "verdicts": self.verdicts,
        }
        return d


def default_halves(M: int) -> tuple[list[int], list[int]]:
    if M < 2:
        raise ValueError("need at least 2 sites for left/right witnesses")
    h = M // 2
    return list(range(h)), list(range(h, M))


def witness_report(
    source,
    graph: GraphSpec,
    reference_angle: float = math.pi / 4,
    contrast: float = 1.0,
    left: Sequence[int] | None = None,
    right: Sequence[int] | None = None,
    detection_noise: float = 0.0,
    principal=None,
    nullifiers: NullifierResult | None = None,
) -> WitnessReport:
    """Evaluate every witness on a state (exact) or on quadrature samples (with jackknife CIs).

    Mode witnesses (zeta2, W, steering) are evaluated in the frame rotated
    by ``reference_angle`` so that the symmetric mode is squeezed along x.
    Nullifiers use the unrotated frame.
    """
    cov, X = _split(source)
    M = cov.shape[0] // 2
    if graph.size != M:
        raise ValueError(f"graph has {graph.size} sites but the data has {M}")
    if left is None or right is None:
        left, right = default_halves(M)
    core = _core_stats(cov, graph, reference_angle, left, right, detection_noise)
    vx, vp, W, s_lr, s_rl = core[:5]
    v = core[5:5 + M]
    V_avg = core[5 + M]
    C = rotated_covariance(cov, reference_angle)
    weights: dict = {}
    table = []
    for label, tgt, cnd, tname, cname, product in (
        ("Left -> Right", right, left, "R", "L", s_lr),
        ("Right -> Left", left, right, "L", "R", s_rl),
    ):
        weights[f"{tname}|{cname}"] = {}
        for quad in ("p", "x"):
            var, g = _conditional_on_cov(C, tgt, cnd, quad)
            weights[f"{tname}|{cname}"][quad] = g.tolist()
            table.append({
                "direction": label,
                "inference": f"Var({quad}'_{tname}|{quad}'_{cname})",
                "value": var - detection_noise,
                "raw_value": var,
                "weights": {f"g{c}": float(w) for c, w in zip(cnd, g)},
                "witness": float(product),
            })
    if principal is None:
        plus, minus = _symmetric_and_antisymmetric(M, left, right)
        principal = []
        for mode in (plus, minus):
            T = np.vstack([_quad_row(M, mode, "x"), _quad_row(M, mode, "p")])
            principal.append(principal_variances(T @ cov @ T.T)[:2])
    areas, _ = phase_space_areas(principal)
    report = WitnessReport(
        zeta2=float(vx),
        xi2=wineland(float(vx), contrast),
        C=float(contrast),
        W=float(W),
        var_x_plus=float(vx),
        var_p_minus=float(vp),
        steering_LR=float(s_lr),
        steering_RL=float(s_rl),
        weights=weights,
        v=[float(a) for a in v],
        V_avg=float(V_avg),
        separability_bound=separability_bound(graph),
        areas=[float(a) for a in areas],
        reference_angle_deg=math.degrees(reference_angle),
        steering_table=table,
    )
    if X is not None:
        report.n_trials = int(X.shape[0])
        _, sd = covariance_jackknife(X, lambda Cs: _core_stats(Cs, graph, reference_angle, left, right, detection_noise))
        names = ["zeta2", "var_p_minus", "W", "steering_LR", "steering_RL"] + [f"v{i}" for i in range(M)] + ["V_avg"]
        report.ci = {k: float(s) for k, s in zip(names, sd)}
        report.ci["xi2"] = report.ci["zeta2"] / contrast
        for key in ("steering_LR", "steering_RL"):
            s = report.ci[key]
            report.ci[key + "_z"] = float((1.0 - getattr(report, key)) / s) if s > 0 else float("inf")
    if nullifiers is not None:
        report.v = [float(a) for a in nullifiers.v]
        report.V_avg = float(nullifiers.mean)
        for i in range(M):
            report.ci.pop(f"v{i}", None)
        report.ci.pop("V_avg", None)
        if nullifiers.v_sd is not None:
            report.ci.update({f"v{i}": float(s) for i, s in enumerate(nullifiers.v_sd)})
            report.ci["V_avg"] = float(nullifiers.mean_sd)
    return report


# -- measurement records ---------------------------------------------------


def readout_from_populations(n_plus, n_zero, n_minus) -> np.ndarray:
    """Per-site quadrature outcome (N'+ - N'-)/sqrt(N) from post-rotation populations."""
    n_plus, n_zero, n_minus = (np.asarray(v, dtype=float) for v in (n_plus, n_zero, n_minus))
    N = n_plus + n_zero + n_minus
    if np.any(N <= 0):
        raise ValueError("every record needs a positive total atom number")
    return (n_plus - n_minus) / np.sqrt(N)


def nullifiers_from_readout(readout_0, readout_90, graph: GraphSpec, detection_noise: float = 0.0) -> NullifierResult:
    """v_i from direct nullifier readout: Q-sites use the 90 deg setting, P-sites the 0 deg setting.

    ``readout_0`` and ``readout_90`` are (n_trials, M) per-site outcomes read
    at the bipartite angles produced by ``measure.nullifier_readout_angles``.
    """
    from .measure import bipartition, nullifier_combinations

    n = min(len(readout_0), len(readout_90))
    qset, _ = bipartition(graph)
    n0 = nullifier_combinations(np.asarray(readout_0, dtype=float)[:n], graph)
    n90 = nullifier_combinations(np.asarray(readout_90, dtype=float)[:n], graph)
    is_q = np.isin(np.arange(graph.size), qset)
    Nmat = np.where(is_q, n90, n0)
    norm = 1.0 + (graph.adjacency**2).sum(axis=1)

    def stat(C):
        v = np.diagonal(C, axis1=-2, axis2=-1) / norm - detection_noise
        return np.concatenate([v, v.mean(axis=-1, keepdims=True)], axis=-1)

    full, sd = covariance_jackknife(Nmat, stat)
    return NullifierResult(full[:-1], float(full[-1]), separability_bound(graph), sd[:-1], float(sd[-1]))


def principal_from_scan(phis, readouts, modes) -> np.ndarray:
    """(zmin, zmax, phi_min) per mode from readouts taken at a grid of spinor phases."""
    from .measure import sinusoidal_variance_fit

    out = []
    for mode in modes:
        var = [float(np.var(np.asarray(R, dtype=float) @ mode, ddof=1)) for R in readouts]
        out.append(sinusoidal_variance_fit(np.asarray(phis, dtype=float), np.array(var)))
    return np.array(out)


def witness_report_from_records(
    settings: dict,
    graph: GraphSpec,
    reference_angle: float = math.pi / 4,
    left: Sequence[int] | None = None,
    right: Sequence[int] | None = None,
    detection_noise: float = 0.0,
) -> WitnessReport:
    """Witnesses from per-setting population records.

    ``settings`` maps a setting name to ``(phi, populations)`` with
    populations of shape (n_trials, M, 3). Required names: "xprime" and
    "pprime" (reads at the reference angle and 90 deg before it) and
    "null000"/"null090" (direct nullifier readout). Optional "scan*" entries
    at five or more phases give phase-space areas. The contrast is estimated
    from the "xprime" populations.
    """
    missing = [k for k in ("xprime", "pprime", "null000", "null090") if k not in settings]
    if missing:
        raise ValueError(f"records lack required setting(s): {', '.join(missing)}")
    M = graph.size

    def readout(name):
        pops = np.asarray(settings[name][1], dtype=float)
        if pops.ndim != 3 or pops.shape[1:] != (M, 3):
            raise ValueError(f"setting {name!r}: expected populations of shape (n, {M}, 3), got {pops.shape}")
        return readout_from_populations(pops[..., 0], pops[..., 1], pops[..., 2])

    pops = np.asarray(settings["xprime"][1], dtype=float)
    C = contrast_from_populations(pops[..., 0].sum(), pops[..., 1].sum(), pops[..., 2].sum())
    xr, pr = readout("xprime"), readout("pprime")
    n = min(len(xr), len(pr))
    X = np.hstack([xr[:n], pr[:n]])
    if left is None or right is None:
        left, right = default_halves(M)
    nulls = nullifiers_from_readout(readout("null000"), readout("null090"), graph, detection_noise)
    scans = sorted((settings[k][0], k) for k in settings if k.startswith("scan"))
    principal = np.empty((0, 2))
    if len(scans) >= 5:
        plus, minus = _symmetric_and_antisymmetric(M, left, right)
        principal = principal_from_scan([a for a, _ in scans], [readout(k) for _, k in scans], (plus, minus))
    report = witness_report(
        X, graph, reference_angle=0.0, contrast=C, left=left, right=right,
        detection_noise=detection_noise, principal=principal, nullifiers=nulls,
    )
    report.reference_angle_deg = math.degrees(reference_angle)
    return report
