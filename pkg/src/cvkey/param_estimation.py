"""Parameter estimation: estimator variances, worst-case parameters, post-PE rate.

Channel parameters are the transmissivity ``tau`` and the output-referred
excess-noise variance ``xi_cap`` (= tau * xi). For the classical-noise
channel tau is fixed at 1 and ``xi_cap`` plays the role of theta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import special

from .canonical_forms import CanonicalForm
from .errors import DomainError
from .rate_engine import ProtocolConfig, asymptotic_rate, form_from_excess_noise, omega_to_xi

# Coupling of the gain-estimate variance into the excess-noise variance for
# the amplifier. "paper" uses 4 (hom) / 2 (het); "consistent" uses 4 for both,
# which is what the heterodyne noise floor 2*tau implies for the estimator in
# montecarlo.
AMPLIFIER_COUPLING = {
    "paper": {"hom": 4.0, "het": 2.0},
    "consistent": {"hom": 4.0, "het": 4.0},
}


@dataclass(frozen=True)
class PEConfig:
    m: int
    eps_pe: float
    va: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise DomainError(f"m must be an integer >= 2, got {self.m}")
        if not 0.0 < self.eps_pe < 1.0:
            raise DomainError(f"eps_pe must be in (0,1), got {self.eps_pe}")
        if not self.va > 0.0:
            raise DomainError(f"va must be > 0, got {self.va}")


@dataclass(frozen=True)
class PEOutcome:
    tau_m: float
    xi_cap_m: float
    sigma_tau: float
    sigma_xi_cap: float
    w: float


@dataclass(frozen=True)
class WorstCaseRate:
    rate: float
    outcome: PEOutcome
    tau_used: float
    pe_failed: bool = False


def confidence_w(eps_pe: float) -> float:
    """Number of standard deviations for a two-sided error probability ``eps_pe``."""
    if not 0.0 < eps_pe < 1.0:
        raise DomainError(f"eps_pe must be in (0,1), got {eps_pe}")
    # erfinv(1 - eps) == erfcinv(eps), without cancellation for small eps
    return math.sqrt(2.0) * float(special.erfcinv(eps_pe))


def _check_det(det: str) -> str:
    d = {"hom": "hom", "homodyne": "hom", "het": "het", "heterodyne": "het"}.get(det)
    if d is None:
        raise DomainError(f"detection must be hom or het, got {det!r}")
    return d


def noise_variance(family: str, tau: float, xi_cap: float) -> float:
    """Variance of the noise term seen by Bob (homodyne) in shot-noise units."""
    if family == "amp":
        return 2.0 * tau + xi_cap - 1.0
    return xi_cap + 1.0


def _tau_variance(det: str, tau: float, sz2: float, va: float, m: int) -> float:
    if det == "hom":
        return 4.0 * tau * tau / m * (2.0 + sz2 / (tau * va))
    return 2.0 * tau * tau / m * (2.0 + (sz2 + 1.0) / (tau * va))


def _noise_variance_of_estimate(det: str, sz2: float, m: int) -> float:
    if det == "hom":
        return 2.0 * sz2 * sz2 / m
    return (sz2 + 1.0) ** 2 / m


def estimator_variances_attenuation(det: str, tau: float, xi_cap: float, va: float,
                                    m: int) -> tuple[float, float]:
    """(sigma_tau^2, sigma_Xi^2) for the attenuation channel."""
    det = _check_det(det)
    if not 0.0 < tau <= 1.0 or xi_cap < 0.0 or va <= 0.0 or m < 1:
        raise DomainError("need 0 < tau <= 1, xi_cap >= 0, va > 0, m >= 1")
    sz2 = noise_variance("att", tau, xi_cap)
    return _tau_variance(det, tau, sz2, va, m), _noise_variance_of_estimate(det, sz2, m)


def estimator_variances_amplifier(det: str, tau: float, xi_cap: float, va: float, m: int,
                                  coupling: str = "paper") -> tuple[float, float]:
    """(sigma_tau^2, sigma_Xi^2) for the amplifier; Xi's estimate inherits the gain error."""
    det = _check_det(det)
    if not tau > 1.0:
        raise DomainError(f"tau must be > 1 for the amplifier channel, got {tau}")
    if xi_cap < 0.0 or va <= 0.0 or m < 1:
        raise DomainError("need xi_cap >= 0, va > 0, m >= 1")
    sz2 = noise_variance("amp", tau, xi_cap)
    s_tau = _tau_variance(det, tau, sz2, va, m)
    c = AMPLIFIER_COUPLING[coupling][det]
    return s_tau, _noise_variance_of_estimate(det, sz2, m) + c * s_tau


def estimator_variances_classical(det: str, theta: float, m: int) -> float:
    """sigma_Xi^2 for the additive-noise channel (tau is known to be 1)."""
    det = _check_det(det)
    if theta < 0.0 or m < 1:
        raise DomainError("need theta >= 0 and m >= 1")
    return _noise_variance_of_estimate(det, theta + 1.0, m)


def channel_parameters(form: CanonicalForm) -> tuple[str, float, float]:
    """(family, tau, xi_cap) of a class C or B2 form."""
    if form.kind == "C-att":
        return "att", form.tau, form.tau * omega_to_xi(form.tau, form.omega)
    if form.kind == "C-amp":
        return "amp", form.tau, form.tau * omega_to_xi(form.tau, form.omega)
    if form.kind == "B2":
        return "b2", 1.0, float(form.theta)
    raise DomainError(f"parameter estimation is defined for att, amp and b2 channels, not {form.kind}")


def pe_outcome(form: CanonicalForm, det: str, pe: PEConfig, coupling: str = "paper") -> PEOutcome:
    family, tau, xi_cap = channel_parameters(form)
    w = confidence_w(pe.eps_pe)
    if family == "att":
        s_tau2, s_xi2 = estimator_variances_attenuation(det, tau, xi_cap, pe.va, pe.m)
    elif family == "amp":
        s_tau2, s_xi2 = estimator_variances_amplifier(det, tau, xi_cap, pe.va, pe.m, coupling)
    else:
        s_tau2, s_xi2 = 0.0, estimator_variances_classical(det, xi_cap, pe.m)
    s_tau, s_xi = math.sqrt(s_tau2), math.sqrt(s_xi2)
    return PEOutcome(tau - w * s_tau, xi_cap + w * s_xi, s_tau, s_xi, w)


def rate_at(family: str, tau: float, xi_cap: float, cfg: ProtocolConfig) -> float:
    """Asymptotic rate re-parametrised by (tau, xi_cap)."""
    return asymptotic_rate(form_from_excess_noise(family, tau, xi_cap), cfg).rate


def worst_case_rate(form: CanonicalForm, cfg: ProtocolConfig, pe: PEConfig,
                    coupling: str = "paper") -> WorstCaseRate:
    """Rate after parameter estimation, at the pessimistic edge of the confidence interval.

    For the amplifier both ends of the gain interval are tried and the lower
    rate is kept. If the interval leaves the channel's class (tau_m <= 0, or
    a gain interval reaching down to 1) the estimate is unusable and the rate
    is 0 with ``pe_failed`` set.
    """
    family, tau, _ = channel_parameters(form)
    out = pe_outcome(form, cfg.detection, pe, coupling)
    if family == "att":
        if out.tau_m <= 0.0:
            return WorstCaseRate(0.0, out, out.tau_m, True)
        return WorstCaseRate(rate_at("att", out.tau_m, out.xi_cap_m, cfg), out, out.tau_m)
    if family == "amp":
        lo, hi = out.tau_m, tau + out.w * out.sigma_tau
        if lo <= 1.0:
            return WorstCaseRate(0.0, out, lo, True)
        r_lo = rate_at("amp", lo, out.xi_cap_m, cfg)
        r_hi = rate_at("amp", hi, out.xi_cap_m, cfg)
        return WorstCaseRate(r_lo, out, lo) if r_lo <= r_hi else WorstCaseRate(r_hi, out, hi)
    return WorstCaseRate(rate_at("b2", 1.0, out.xi_cap_m, cfg), out, 1.0)
