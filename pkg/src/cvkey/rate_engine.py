"""Asymptotic key rates from the covariance matrix of Bob and Eve's modes.

Mode order after propagation is (B, E', e): Bob's output, Eve's output of
the interaction, and Eve's idler half of the environment TMSV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import optimize

from .canonical_forms import CanonicalForm, parse_channel
from .errors import DomainError
from .gaussian_core import (
    CovMatrix,
    SympSpectrum,
    condition_on_heterodyne,
    condition_on_homodyne,
    direct_sum,
    holevo_from_spectra,
    physical_tolerance,
    symplectic_spectrum,
    tmsv_cm,
)

ASYMPTOTIC_MU = 1e8
THRESHOLD_XTOL = 1e-8
# environments this noisy are too squeezed for double precision
HIGH_PRECISION_OMEGA = 1e3
HIGH_PRECISION_DPS = 40

_DETECTIONS = {"hom": "hom", "homodyne": "hom", "het": "het", "heterodyne": "het"}
_DIRECTIONS = {"dr": "dr", "direct": "dr", "rr": "rr", "reverse": "rr"}


@dataclass(frozen=True)
class ProtocolConfig:
    detection: str = "hom"
    direction: str = "rr"
    mu: float = ASYMPTOTIC_MU
    zeta: float = 1.0

    def __post_init__(self):
        det = _DETECTIONS.get(str(self.detection).lower())
        direc = _DIRECTIONS.get(str(self.direction).lower())
        if det is None:
            raise DomainError(f"detection must be hom or het, got {self.detection!r}")
        if direc is None:
            raise DomainError(f"direction must be dr or rr, got {self.direction!r}")
        if not self.mu > 1.0:
            raise DomainError(f"mu must be > 1, got {self.mu}")
        if not 0.0 < self.zeta <= 1.0:
            raise DomainError(f"zeta must be in (0,1], got {self.zeta}")
        object.__setattr__(self, "detection", det)
        object.__setattr__(self, "direction", direc)

    @property
    def variant(self) -> str:
        return f"{self.detection}-{self.direction}"

    def replace(self, **changes) -> "ProtocolConfig":
        fields = dict(detection=self.detection, direction=self.direction, mu=self.mu, zeta=self.zeta)
        fields.update(changes)
        return ProtocolConfig(**fields)


@dataclass(frozen=True)
class RateBreakdown:
    mutual_info: float
    holevo: float
    rate: float
    bob_variances: tuple[float, float]
    eve_average: SympSpectrum
    eve_conditional: tuple[SympSpectrum, ...]


def needs_high_precision(form: CanonicalForm) -> bool:
    return form.omega > HIGH_PRECISION_OMEGA


def propagate(form: CanonicalForm, mu: float, high_precision: bool = False) -> CovMatrix:
    """Covariance matrix of (B, E', e) for Alice's ensemble variance ``mu``.

    With ``high_precision`` the entries are ``mpf`` objects; call inside an
    ``mpmath.workdps`` block to choose the working precision.
    """
    if not mu >= 1.0:
        raise DomainError(f"mu must be >= 1, got {mu}")
    m, env = form.interaction(high_precision)
    if high_precision:
        mu = mpmath.mpf(mu)
    s = direct_sum(m.T, np.eye(2))
    v_in = direct_sum(mu * np.eye(2), tmsv_cm(env).matrix)
    return CovMatrix(s @ v_in @ s.T)


def _bob_variances(v: CovMatrix) -> tuple[float, float]:
    vb = v.block(0)
    return float(vb[0, 0]), float(vb[1, 1])


def mutual_information(form: CanonicalForm, cfg: ProtocolConfig) -> float:
    """Alice-Bob mutual information in bits per use."""
    vq, vp = _bob_variances(propagate(form, cfg.mu))
    vq0, vp0 = _bob_variances(propagate(form, 1.0))
    if cfg.detection == "hom":
        return 0.25 * (math.log2(vq / vq0) + math.log2(vp / vp0))
    return 0.5 * (math.log2((vq + 1.0) / (vq0 + 1.0)) + math.log2((vp + 1.0) / (vp0 + 1.0)))


def _eve_spectra(form: CanonicalForm, cfg: ProtocolConfig):
    if needs_high_precision(form):
        with mpmath.workdps(HIGH_PRECISION_DPS):
            return _eve_spectra_at(form, cfg, True)
    return _eve_spectra_at(form, cfg, False)


def _eve_spectra_at(form: CanonicalForm, cfg: ProtocolConfig, high_precision: bool):
    v = propagate(form, cfg.mu, high_precision)
    v_eve = v.reduced([1, 2])
    tol = physical_tolerance(v.matrix)
    avg = symplectic_spectrum(v_eve, tol)
    if cfg.direction == "rr":
        if cfg.detection == "hom":
            cond = [condition_on_homodyne(v, 0, "q"), condition_on_homodyne(v, 0, "p")]
        else:
            cond = [condition_on_heterodyne(v, 0)]
    else:
        # Alice's variable known: Eve's output block loses the modulation on
        # the conditioned quadrature(s); cross-blocks are left as they are.
        ve0 = propagate(form, 1.0, high_precision).block(1)
        ve = v_eve.block(0)
        q_known = np.diag([ve0[0, 0], ve[1, 1]])
        p_known = np.diag([ve[0, 0], ve0[1, 1]])
        if cfg.detection == "hom":
            cond = [v_eve.with_block(0, q_known), v_eve.with_block(0, p_known)]
        else:
            cond = [v_eve.with_block(0, np.diag([ve0[0, 0], ve0[1, 1]]))]
    return avg, [symplectic_spectrum(c, tol) for c in cond]


def holevo_bound(form: CanonicalForm, cfg: ProtocolConfig) -> float:
    """Eve's Holevo information on the reference variable, in bits per use."""
    avg, cond = _eve_spectra(form, cfg)
    return holevo_from_spectra(avg, cond, [1.0 / len(cond)] * len(cond))


def asymptotic_rate(form: CanonicalForm, cfg: ProtocolConfig) -> RateBreakdown:
    """Key rate ``zeta * I - chi`` with its ingredients."""
    info = mutual_information(form, cfg)
    avg, cond = _eve_spectra(form, cfg)
    chi = holevo_from_spectra(avg, cond, [1.0 / len(cond)] * len(cond))
    return RateBreakdown(
        mutual_info=info,
        holevo=chi,
        rate=cfg.zeta * info - chi,
        bob_variances=_bob_variances(propagate(form, cfg.mu)),
        eve_average=avg,
        eve_conditional=tuple(cond),
    )


# --- excess-noise parametrisation -------------------------------------------

def xi_to_omega(tau: float, xi: float) -> float:
    """Environment variance for input-referred excess noise ``xi`` (class C)."""
    if tau <= 0.0 or tau == 1.0:
        raise DomainError(f"excess noise conversion needs tau > 0, tau != 1; got {tau}")
    if xi < 0.0:
        raise DomainError(f"excess noise must be >= 0, got {xi}")
    return 1.0 + tau * xi / abs(1.0 - tau)


def omega_to_xi(tau: float, omega: float) -> float:
    if tau <= 0.0 or tau == 1.0:
        raise DomainError(f"excess noise conversion needs tau > 0, tau != 1; got {tau}")
    return abs(1.0 - tau) * (omega - 1.0) / tau


def form_from_excess_noise(family: str, tau: float = 1.0, xi_cap: float = 0.0) -> CanonicalForm:
    """Build a form from output-referred excess noise ``xi_cap`` (= tau * xi).

    For the classical-noise family ``xi_cap`` is the additive variance theta.
    """
    if family in ("att", "C-att"):
        if xi_cap < 0.0:
            raise DomainError(f"excess noise variance must be >= 0, got {xi_cap}")
        return CanonicalForm.attenuation(tau, 1.0 + xi_cap / (1.0 - tau) if tau < 1.0 else 1.0)
    if family in ("amp", "C-amp"):
        if xi_cap < 0.0:
            raise DomainError(f"excess noise variance must be >= 0, got {xi_cap}")
        return CanonicalForm.amplifier(tau, 1.0 + xi_cap / (tau - 1.0) if tau > 1.0 else 1.0)
    if family in ("b2", "B2"):
        return CanonicalForm.classical_noise(xi_cap)
    raise DomainError(f"excess-noise parametrisation not defined for {family!r}")


def form_from_descriptor(text: str) -> CanonicalForm:
    """Parse ``att:tau=0.6,xi=0.01`` style descriptors into a canonical form."""
    kind, p = parse_channel(text)
    if kind in ("C-att", "C-amp"):
        if "tau" not in p:
            raise DomainError("channel needs tau")
        tau = p["tau"]
        if kind == "C-att" and not 0.0 < tau < 1.0:
            raise DomainError(f"tau must be in (0,1) for the attenuation channel, got {tau}")
        if kind == "C-amp" and not tau > 1.0:
            raise DomainError(f"tau must be > 1 for the amplifier channel, got {tau}")
        if "xi" in p and "omega" in p:
            raise DomainError("give either xi or omega, not both")
        omega = xi_to_omega(tau, p["xi"]) if "xi" in p else p.get("omega", 1.0)
        return CanonicalForm(kind, tau, omega)
    if kind == "B2":
        if "theta" not in p:
            raise DomainError("classical-noise channel needs theta")
        return CanonicalForm.classical_noise(p["theta"], p.get("delta", 1e-6))
    if kind == "B1":
        return CanonicalForm.b1(p.get("omega", 1.0))
    if kind == "A1":
        return CanonicalForm.a1(p.get("omega", 1.0))
    if kind == "A2":
        return CanonicalForm.a2(p.get("omega", 1.0))
    return CanonicalForm.d(p.get("tau", float("nan")), p.get("omega", 1.0))


# --- security thresholds ------------------------------------------------------

SEARCH_INTERVALS = {
    ("att", "tau"): (1e-6, 1.0 - 1e-6),
    ("amp", "tau"): (1.0 + 1e-6, 1e3),
    ("att", "xi"): (0.0, 1.0),
    ("amp", "xi"): (0.0, 1.0),
    ("b2", "theta"): (1e-9, 10.0),
}


def security_threshold(family: str, cfg: ProtocolConfig, solve_for: str,
                       tau: float | None = None, xi: float | None = None,
                       interval: tuple[float, float] | None = None,
                       rate_fn=None) -> float:
    """Parameter value where the asymptotic rate crosses zero, or NaN if none.

    ``family`` is ``att``, ``amp`` or ``b2``. For class C, solve for ``tau``
    at fixed ``xi`` or for ``xi`` at fixed ``tau``; for ``b2`` solve for
    ``theta``. ``rate_fn(form, cfg) -> float`` defaults to the covariance
    pipeline.
    """
    key = (family, solve_for)
    if key not in SEARCH_INTERVALS:
        raise DomainError(f"cannot solve for {solve_for!r} in family {family!r}")
    lo, hi = interval or SEARCH_INTERVALS[key]
    if rate_fn is None:
        def rate_fn(form, c):
            return asymptotic_rate(form, c).rate

    def f(x: float) -> float:
        if solve_for == "theta":
            form = CanonicalForm.classical_noise(x)
        elif solve_for == "tau":
            form = CanonicalForm(_family_kind(family), x, xi_to_omega(x, xi or 0.0))
        else:
            form = CanonicalForm(_family_kind(family), tau, xi_to_omega(tau, x))
        return rate_fn(form, cfg)

    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        return float("nan")
    return float(optimize.bisect(f, lo, hi, xtol=THRESHOLD_XTOL, rtol=4 * np.finfo(float).eps,
                                 maxiter=200))


def _family_kind(family: str) -> str:
    return {"att": "C-att", "amp": "C-amp"}[family]
