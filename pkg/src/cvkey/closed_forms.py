"""Closed-form asymptotic key rates (zeta = 1, mu -> infinity).

Each function takes a protocol variant string ``"hom-dr"``, ``"hom-rr"``,
``"het-dr"`` or ``"het-rr"``.
"""
from __future__ import annotations

import math

from .errors import DomainError
from .gaussian_core import entropy_h

VARIANTS = ("hom-dr", "hom-rr", "het-dr", "het-rr")
LOG2E = math.log2(math.e)


def _check_variant(variant: str) -> str:
    v = variant.lower()
    if v not in VARIANTS:
        raise DomainError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return v


def c_class_rate(variant: str, tau: float, omega: float) -> float:
    """Attenuation (0 < tau < 1) or amplifier (tau > 1) channel."""
    v = _check_variant(variant)
    if not tau > 0.0 or tau == 1.0:
        raise DomainError(f"class C needs tau in (0,1) or (1,inf), got {tau}")
    if not omega >= 1.0:
        raise DomainError(f"omega must be >= 1, got {omega}")
    k = abs(1.0 - tau)
    if v == "hom-dr":
        return (0.5 * math.log2(tau * (tau * omega + k) / (k * (tau + k * omega)))
                - entropy_h(omega)
                + entropy_h(math.sqrt(omega * (tau + k * omega) / (k + tau * omega))))
    if v == "hom-rr":
        return 0.5 * math.log2(omega / (k * (tau + k * omega))) - entropy_h(omega)
    head = math.log2(2.0 * tau / (k * (tau + k * omega + 1.0))) - LOG2E - entropy_h(omega)
    if v == "het-dr":
        return head + entropy_h(tau + k * omega)
    return head + entropy_h((1.0 + k * omega) / tau)


def classical_noise_rate(variant: str, theta: float) -> float:
    """Additive classical-noise channel with noise variance ``theta``."""
    v = _check_variant(variant)
    if not theta > 0.0:
        raise DomainError(f"theta must be > 0, got {theta}")
    if v.startswith("hom"):
        base = 1.0 - LOG2E - 0.5 * math.log2(theta * (theta + 1.0))
        return base + entropy_h(math.sqrt(1.0 + theta)) if v == "hom-dr" else base
    return 2.0 - 2.0 * LOG2E - math.log2(theta * (theta + 2.0)) + entropy_h(theta + 1.0)


def b1_rate(variant: str, mu: float) -> float:
    """Class B1 at Alice variance ``mu``; het DR and RR coincide."""
    v = _check_variant(variant)
    if not mu > 1.0:
        raise DomainError(f"mu must be > 1, got {mu}")
    hom = 0.5 * (0.5 * math.log2(2.0 * mu) - LOG2E)
    if v == "hom-dr":
        return hom + 0.5 * entropy_h(math.sqrt(2.0))
    if v == "hom-rr":
        return hom
    return 0.5 * math.log2(2.0 * mu) - LOG2E - 0.5 * math.log2(3.0) + entropy_h(math.sqrt(2.0))
