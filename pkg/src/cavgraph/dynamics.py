"""Spin-nematic squeezing dynamics, cavity parameters and noise budgets.

All frequencies are angular (rad/s) and all times are in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .phasespace import principal_variances

# free-space scattering suppression factor for this level scheme
SCATTER_LEVEL_FACTOR = 96.0
# added F^2 per scattering event when the atom is projected into m=0
WORST_CASE_SCATTER_FACTOR = 2.0


def _finite(*values) -> None:
    for v in values:
        if not np.isfinite(v):
            raise ValueError(f"parameter must be finite, got {v!r}")


@dataclass(frozen=True)
class CavityConfig:
    """Cavity, drive and atom parameters (angular frequencies in rad/s).

    ``delta_c`` is the drive detuning from the shifted cavity resonance so
    that the two Raman processes sit at ``delta_c -/+ omega_z``. Either the
    intracavity photon number ``n_photons`` or the input scale ``n_input``
    must be set. ``eta`` is the peak single-atom cooperativity; the thermal
    average used for scattering is ``eta * (stark_shift / peak_stark_shift)**2``.
    """

    kappa: float
    omega_z: float
    delta_c: float
    stark_shift: float
    atom_count: int
    q: float
    mode_count: int = 1
    g: float | None = None
    gamma: float | None = None
    delta: float | None = None
    eta: float | None = None
    peak_stark_shift: float | None = None
    n_photons: float | None = None
    n_input: float | None = None
    chi: float | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("cavity linewidth kappa must be positive")
        if not self.omega_z > 0:
            raise ValueError("Larmor frequency omega_z must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("atomic linewidth gamma must be positive")
        if self.delta is not None and not abs(self.delta) > 0:
            raise ValueError("atomic detuning delta must be nonzero")
        if self.atom_count < 1 or self.mode_count < 1:
            raise ValueError("atom_count and mode_count must be >= 1")
        if self.eta is not None and self.g is not None and self.gamma is not None:
            eta0 = 4.0 * self.g**2 / (self.kappa * self.gamma)
            if abs(eta0 - self.eta) > 1e-6 * max(1.0, abs(self.eta)):
                raise ValueError(f"eta={self.eta} inconsistent with 4 g^2/(kappa Gamma)={eta0:.9g}")

    @property
    def delta_minus(self) -> float:
        return self.delta_c + self.omega_z

    @property
    def delta_plus(self) -> float:
        return self.delta_c - self.omega_z

    @property
    def intracavity_photons(self) -> float:
        if self.n_photons is not None:
            return float(self.n_photons)
        if self.n_input is None:
            raise ValueError("either n_photons or n_input is required")
        half = 0.5 * self.kappa
        return self.n_input * half**2 / (self.delta_c**2 + half**2)

    @property
    def peak_cooperativity(self) -> float:
        if self.eta is not None:
            return float(self.eta)
        if self.g is None or self.gamma is None:
            raise ValueError("cooperativity requires eta or both g and gamma")
        return 4.0 * self.g**2 / (self.kappa * self.gamma)

    @property
    def thermal_cooperativity(self) -> float:
        peak = self.peak_stark_shift
        if peak is None:
            if self.g is None or self.delta is None:
                return self.peak_cooperativity
            peak = self.g**2 / (6.0 * abs(self.delta))
        return self.peak_cooperativity * (self.stark_shift / peak) ** 2

    @property
    def dispersive_shift(self) -> float:
        return 4.0 * self.stark_shift * self.atom_count

    def interaction(self) -> float:
        return float(self.chi) if self.chi is not None else interaction_strength(self)


def interaction_strength(cfg: CavityConfig) -> float:
    """Collective interaction chi = chi+ + chi- from the two Raman processes."""
    if cfg.kappa == 0:
        raise ValueError("kappa must be nonzero")
    n = cfg.intracavity_photons
    half2 = (0.5 * cfg.kappa) ** 2
    pref = cfg.atom_count * n * cfg.stark_shift**2 / 2.0
    total = 0.0
    for d in (cfg.delta_plus, cfg.delta_minus):
        _finite(d)
        total += pref * d / (d * d + half2)
    return total


@dataclass(frozen=True)
class SqueezingRate:
    """Eigenvalue magnitude of the (x, p) generator.

    ``regime`` is "unstable" (exponential squeezing at rate ``value``),
    "stable" (oscillation at angular frequency ``value``) or "marginal".
    """

    value: float
    regime: str

    @property
    def unstable(self) -> bool:
        return self.regime == "unstable"

    def require_unstable(self) -> float:
        if not self.unstable:
            raise ValueError(f"dynamics are not in the squeezing regime ({self.regime}, |rate|={self.value:.6g})")
        return self.value


def squeezing_rate(chi: float, q: float) -> SqueezingRate:
    _finite(chi, q)
    disc = -q * (q + 2.0 * chi)
    if disc > 0:
        return SqueezingRate(math.sqrt(disc), "unstable")
    if disc < 0:
        return SqueezingRate(math.sqrt(-disc), "stable")
    return SqueezingRate(0.0, "marginal")


def generator(chi: float, q: float) -> np.ndarray:
    return np.array([[0.0, -q], [q + 2.0 * chi, 0.0]])


def squeeze_map(chi: float, q: float, t: float) -> np.ndarray:
    """exp(G t) for the (x, p) generator G = [[0, -q], [q + 2 chi, 0]].

    Uses G^2 = lambda^2 I, so the exponential is closed-form in every regime.
    """
    _finite(chi, q, t)
    G = generator(chi, q)
    rate = squeezing_rate(chi, q)
    lt = rate.value * t
    if rate.regime == "unstable":
        c, s = math.cosh(lt), (math.sinh(lt) / rate.value if rate.value else t)
    elif rate.regime == "stable":
        c, s = math.cos(lt), math.sin(lt) / rate.value
    else:
        c, s = 1.0, t
    return c * np.eye(2) + s * G


def finite_time_squeezing(chi: float, q: float, t: float) -> tuple[float, float, float]:
    """(zeta2_min, zeta2_max, phi_min) of vacuum after squeeze_map; phi_min in [0, pi)."""
    S = squeeze_map(chi, q, t)
    return principal_variances(S @ S.T)


def asymptotic_squeezing(chi: float, q: float, t: float) -> tuple[float, float, float]:
    """Late-time (zeta2_max, zeta2_min, phi_min) with phi_min in (-pi/2, pi/2)."""
    lam = squeezing_rate(chi, q).require_unstable()
    zmax = (chi / lam) ** 2 * math.exp(2.0 * lam * t)
    return zmax, 1.0 / zmax, math.atan(-q / lam)


@dataclass(frozen=True)
class DissipationParams:
    gamma_coll: float = 0.0
    gamma_sc: float = 0.0
    gamma_plus: float | None = None
    gamma_minus: float | None = None
    atom_count: int | None = None

    def __post_init__(self):
        for name in ("gamma_coll", "gamma_sc", "gamma_plus", "gamma_minus"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.gamma_plus is not None and self.gamma_minus is not None and self.atom_count:
            expected = 2.0 * self.atom_count * (self.gamma_plus + self.gamma_minus)
            if abs(expected - self.gamma_coll) > 1e-9 * max(1.0, expected):
                raise ValueError(f"gamma_coll={self.gamma_coll} != 2N(gamma+ + gamma-)={expected}")


def collective_decay_rate(chi: float, kappa: float, delta_minus: float) -> float:
    """Gamma_coll = |chi| kappa / |delta_-|."""
    if delta_minus == 0:
        raise ValueError("delta_minus must be nonzero")
    return abs(chi) * kappa / abs(delta_minus)


def collective_decay_noise(chi: float, q: float, kappa: float, delta_minus: float) -> float:
    """Steady-state variance floor Gamma_coll / (2 lambda)."""
    lam = squeezing_rate(chi, q).require_unstable()
    return collective_decay_rate(chi, kappa, delta_minus) / (2.0 * lam)


def lindblad_variance(chi, q, gamma_coll, gamma_sc, M, t):
    """Squeezed-quadrature variance under collective decay and scattering, from 1 at t=0."""
    rate = squeezing_rate(chi, q)
    if not rate.unstable:
        raise ValueError("lindblad_variance needs a positive squeezing rate")
    lam = rate.value
    if gamma_coll < 0 or gamma_sc < 0:
        raise ValueError("dissipation rates must be >= 0")
    floor = (gamma_coll + WORST_CASE_SCATTER_FACTOR * M * gamma_sc) / (2.0 * lam)
    return floor + (1.0 - floor) * np.exp(-2.0 * lam * np.asarray(t, dtype=float))


@dataclass(frozen=True)
class ScatteringResult:
    rate: float
    added_variance: float
    contrast_factor: float
    valid_regime: bool


def scattering_rate(cfg: CavityConfig, tau: float, M: int | None = None) -> ScatteringResult:
    """Per-atom free-space scattering rate and its added noise over M pulses of length tau."""
    N_eta = cfg.atom_count * cfg.thermal_cooperativity
    if N_eta == 0:
        raise ValueError("collective cooperativity N*eta must be nonzero")
    M = cfg.mode_count if M is None else M
    chi = cfg.interaction()
    rate = abs(chi) * SCATTER_LEVEL_FACTOR / N_eta * abs(cfg.delta_minus) / cfg.kappa
    added = M * tau * rate
    return ScatteringResult(rate, added, math.exp(-0.5 * added), abs(cfg.delta_minus) > cfg.kappa)


def dissipation_params(cfg: CavityConfig) -> DissipationParams:
    chi = cfg.interaction()
    return DissipationParams(
        gamma_coll=collective_decay_rate(chi, cfg.kappa, cfg.delta_minus),
        gamma_sc=scattering_rate(cfg, 0.0).rate,
    )


def detuning_amplification(dispersive_shift: float, delta_c: float, delta_minus: float) -> float:
    """alpha = 1 + |2 delta_N / delta_c| + |delta_N / delta_-|."""
    return 1.0 + abs(2.0 * dispersive_shift / delta_c) + abs(dispersive_shift / delta_minus)


def relative_interaction_fluctuation(photon_rel: float, atom_rel: float, alpha: float) -> float:
    """Delta chi / chi from relative photon-number and atom-number fluctuations."""
    return math.sqrt(photon_rel**2 + (alpha * atom_rel) ** 2)


def interaction_fluctuation_noise(zeta2_max: float, q: float, chi: float, relative_fluct: float) -> float:
    denom = abs(q + 2.0 * chi)
    if denom == 0:
        raise ValueError("q + 2 chi = 0 is degenerate for interaction-fluctuation noise")
    return zeta2_max * q / (2.0 * denom) * relative_fluct**2


def coupling_inhomogeneity_noise(beta: float) -> float:
    """Excess noise from thermal spread of cavity couplings at depth/temperature ratio beta."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    x = 4.0 / beta
    # e^{2x} - 2e^{x} + 3 written to stay accurate when x is tiny
    em1 = math.expm1(x)
    bracket = em1 * em1 + 2.0
    ratio = 2.0 * beta * (4.0 + beta) / ((beta + 2.0) ** 2 * bracket)
    return 1.0 - ratio


def coupling_inhomogeneity_asymptotic(beta: float) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    return 12.0 / beta**2


BEAM_SPLITTER_LABELS = ("Coupling variation", "Cavity photon loss", "Free space scattering")
ADDITIVE_LABELS = ("Photon shot noise", "Interaction strength noise")


@dataclass(frozen=True)
class NoiseBudget:
    unitary_min_variance: float
    beam_splitter_terms: Sequence[tuple[str, float]] = field(default_factory=tuple)
    additive_terms: Sequence[tuple[str, float]] = field(default_factory=tuple)
    contrast: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.contrast <= 1.0:
            raise ValueError(f"contrast must lie in (0, 1], got {self.contrast}")
        for label, v in list(self.beam_splitter_terms) + list(self.additive_terms):
            if not 0.0 <= v < 1.0:
                raise ValueError(f"budget entry {label!r}={v} outside [0, 1)")
        object.__setattr__(self, "beam_splitter_terms", tuple((str(a), float(b)) for a, b in self.beam_splitter_terms))
        object.__setattr__(self, "additive_terms", tuple((str(a), float(b)) for a, b in self.additive_terms))


def combine_budget(budget: NoiseBudget) -> float:
    """Expected normalized variance: beam-splitter terms compound, additive terms add, then divide by C."""
    if budget.contrast <= 0:
        raise ValueError("contrast must be positive")
    kept = 1.0 - budget.unitary_min_variance
    for _, v in budget.beam_splitter_terms:
        kept *= 1.0 - v
    total = 1.0 - kept + sum(v for _, v in budget.additive_terms)
    return total / budget.contrast


def optimal_detuning(N: float, eta: float, M: int, kappa: float) -> tuple[float, float]:
    """(|delta_-|, zeta2 floor) balancing collective decay against scattering."""
    if M < 1:
        raise ValueError("M must be >= 1")
    coop = N * eta / M
    if not coop > 0:
        raise ValueError("collective cooperativity per mode must be positive")
    return kappa * math.sqrt(coop / 192.0), 8.0 / math.sqrt(coop / 3.0)


def microwave_spinor_phase(detuning: float, rabi: float) -> float:
    """Phase imparted by a detuned 2 pi microwave pulse, in (0, 2 pi)."""
    if detuning == 0 and rabi == 0:
        raise ValueError("microwave Rabi frequency and detuning cannot both be zero")
    return math.pi * (1.0 - detuning / math.hypot(rabi, detuning))
