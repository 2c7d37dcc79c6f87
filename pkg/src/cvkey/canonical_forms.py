"""Canonical forms of single-mode Gaussian channels and their symplectic dilations.

A dilation ``M`` acts on (input A, environment mode E); the output
covariance is ``M.T @ (V_A + V_E) @ M``, so the first output mode (B) is
Bob's and the second (E') is Eve's. The transmission block is therefore the
top-left 2x2 block of ``M.T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np

from .errors import DilationNotConfigured, DomainError
from .gaussian_core import I2, Z2, omega, sqrt

SYMPLECTIC_TOL = 1e-10
DEFAULT_PROXY_DELTA = 1e-6

KINDS = ("A1", "A2", "B1", "B2", "C-att", "C-amp", "D")
CLASS_RANK = {"A1": 0, "A2": 1, "B1": 1, "B2": 2, "C-att": 2, "C-amp": 2, "D": 2}


@dataclass(frozen=True)
class Dilation:
    """4x4 symplectic interaction between the input mode and one environment mode."""

    M: np.ndarray
    tau: float
    rank_t: int | None = None

    def __post_init__(self):
        m = np.array(self.M, dtype=float)
        if m.shape != (4, 4):
            raise DomainError(f"dilation must be 4x4, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "M", m)

    @property
    def transmission(self) -> np.ndarray:
        """Block mapping the input quadratures onto Bob's output."""
        return self.M.T[:2, :2].copy()

    def symplectic_error(self) -> float:
        w = omega(2)
        return float(np.max(np.abs(self.M @ w @ self.M.T - w)))

    def validate(self) -> "Dilation":
        err = self.symplectic_error()
        if err > SYMPLECTIC_TOL:
            raise DomainError(f"dilation is not symplectic (max deviation {err:.3g})")
        t = self.transmission
        det = float(np.linalg.det(t))
        if abs(det - self.tau) > SYMPLECTIC_TOL * max(1.0, abs(self.tau)):
            raise DomainError(f"det T = {det} does not match tau = {self.tau}")
        if self.rank_t is not None and np.linalg.matrix_rank(t, tol=1e-12) != self.rank_t:
            raise DomainError(f"transmission block rank is not {self.rank_t}")
        return self


def _attenuation_matrix(tau, loss) -> np.ndarray:
    a, b = sqrt(tau), sqrt(loss)
    return np.block([[a * I2, b * I2], [-b * I2, a * I2]])


def _amplifier_matrix(tau) -> np.ndarray:
    a, b = sqrt(tau), sqrt(tau - 1)
    return np.block([[a * I2, b * Z2], [b * Z2, a * I2]])


def dilation_attenuation(tau: float) -> Dilation:
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must be in (0,1) for the attenuation channel, got {tau}")
    return Dilation(_attenuation_matrix(tau, 1.0 - tau), tau, 2).validate()


def dilation_amplifier(tau: float) -> Dilation:
    if not tau > 1.0:
        raise DomainError(f"tau must be > 1 for the amplifier channel, got {tau}")
    return Dilation(_amplifier_matrix(tau), tau, 2).validate()


def dilation_b1() -> Dilation:
    m = np.block([[I2, 0.5 * (I2 + Z2)], [0.5 * (I2 - Z2), -I2]])
    return Dilation(m, 1.0, 2).validate()


def classical_noise_proxy(theta: float, delta: float = DEFAULT_PROXY_DELTA) -> tuple[Dilation, float]:
    """Attenuation dilation at ``tau = 1 - delta`` with environment variance ``theta / delta``.

    The additive-noise channel is the joint limit tau -> 1, omega -> inf at
    fixed (1 - tau) * omega; callers should confirm convergence by halving delta.
    """
    if not theta > 0.0:
        raise DomainError(f"theta must be > 0, got {theta}")
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must be in (0,1), got {delta}")
    env = theta / delta
    if not math.isfinite(env) or not math.isfinite(env * env):
        raise DomainError(f"delta={delta} makes the environment variance overflow")
    return dilation_attenuation(1.0 - delta), max(env, 1.0)


def _swap() -> np.ndarray:
    return np.block([[np.zeros((2, 2)), I2], [I2, np.zeros((2, 2))]])


def _d_candidate(tau: float) -> np.ndarray:
    # amplifier of gain 1 - tau with its two outputs exchanged
    return _amplifier_matrix(1.0 - tau) @ _swap()


def _a2_candidate(tau: float) -> np.ndarray:
    # q_B = q_A + q_E, p_B = p_E, q_E' = q_A, p_E' = p_A - p_E
    mt = np.array([
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, -1.0],
    ])
    return mt.T


EXOTIC_CONSTRUCTIONS: dict[str, Callable[[float], np.ndarray]] = {
    "A2": _a2_candidate,
    "D": _d_candidate,
}


def dilation_exotic(kind: str, tau: float | None = None) -> Dilation:
    """Dilation for class A2 (tau = 0, rank 1) or D (tau < 0).

    Constructions come from ``EXOTIC_CONSTRUCTIONS`` and are only returned
    after passing the symplectic and transmission-determinant checks.
    """
    if kind == "A2":
        tau = 0.0 if tau is None else tau
        if tau != 0.0:
            raise DomainError("class A2 requires tau = 0")
        rank = 1
    elif kind == "D":
        if tau is None or not tau < 0.0:
            raise DomainError(f"class D requires tau < 0, got {tau}")
        rank = 2
    else:
        raise DomainError(f"no exotic dilation for class {kind!r}")
    build = EXOTIC_CONSTRUCTIONS.get(kind)
    if build is None:
        raise DilationNotConfigured(
            f"no construction configured for class {kind}; a candidate M must satisfy "
            f"M Ω M^T = Ω within {SYMPLECTIC_TOL} and det T = tau with rank {rank}")
    return Dilation(build(tau), tau, rank).validate()


def dilation_depolarizing() -> Dilation:
    """Class A1: Bob receives the environment mode, Eve the input."""
    return Dilation(_swap(), 0.0, 0).validate()


@dataclass(frozen=True)
class CanonicalForm:
    """A canonical channel: class tag plus invariants.

    ``omega`` is the environment TMSV variance (2 nbar + 1). For B2 the
    channel is described by ``theta`` and simulated through the attenuation
    proxy with parameter ``delta``.
    """

    kind: str
    tau: float
    omega: float = 1.0
    theta: float | None = None
    delta: float = DEFAULT_PROXY_DELTA
    _dilation: Dilation = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown channel class {self.kind!r}")
        tau = self.tau
        if self.kind == "B2":
            if self.theta is None or not self.theta > 0.0:
                raise DomainError(f"theta must be > 0 for the classical-noise channel, got {self.theta}")
            dil, env = classical_noise_proxy(self.theta, self.delta)
            object.__setattr__(self, "omega", env)
        else:
            if not self.omega >= 1.0:
                raise DomainError(f"omega must be >= 1, got {self.omega}")
            if self.kind == "C-att":
                dil = dilation_attenuation(tau)
            elif self.kind == "C-amp":
                dil = dilation_amplifier(tau)
            elif self.kind == "B1":
                if tau != 1.0:
                    raise DomainError("class B1 requires tau = 1")
                dil = dilation_b1()
            elif self.kind == "A1":
                if tau != 0.0:
                    raise DomainError("class A1 requires tau = 0")
                dil = dilation_depolarizing()
            else:
                dil = dilation_exotic(self.kind, tau)
        object.__setattr__(self, "_dilation", dil)

    @property
    def rank(self) -> int:
        return CLASS_RANK[self.kind]

    def dilation(self) -> Dilation:
        return self._dilation

    def interaction(self, high_precision: bool = False) -> tuple[np.ndarray, float]:
        """(M, omega) for propagation, optionally as ``mpf`` object arrays.

        In high precision the classical-noise proxy is rebuilt from theta and
        delta directly so that 1 - tau and omega carry no double rounding.
        """
        if not high_precision:
            return self._dilation.M, self.omega
        if self.kind == "B2":
            delta = mpmath.mpf(self.delta)
            m = _attenuation_matrix(1 - delta, delta)
            return m, mpmath.mpf(self.theta) / delta
        tau = mpmath.mpf(self.tau)
        if self.kind == "C-att":
            m = _attenuation_matrix(tau, 1 - tau)
        elif self.kind == "C-amp":
            m = _amplifier_matrix(tau)
        else:
            # remaining constructions have exact 0/1 entries or are well conditioned
            m = np.vectorize(mpmath.mpf, otypes=[object])(self._dilation.M)
        return m, mpmath.mpf(self.omega)

    @classmethod
    def attenuation(cls, tau: float, omega: float = 1.0) -> "CanonicalForm":
        return cls("C-att", tau, omega)

    @classmethod
    def amplifier(cls, tau: float, omega: float = 1.0) -> "CanonicalForm":
        return cls("C-amp", tau, omega)

    @classmethod
    def classical_noise(cls, theta: float, delta: float = DEFAULT_PROXY_DELTA) -> "CanonicalForm":
        return cls("B2", 1.0, theta=theta, delta=delta)

    @classmethod
    def b1(cls, omega: float = 1.0) -> "CanonicalForm":
        return cls("B1", 1.0, omega)

    @classmethod
    def a1(cls, omega: float = 1.0) -> "CanonicalForm":
        return cls("A1", 0.0, omega)

    @classmethod
    def a2(cls, omega: float = 1.0) -> "CanonicalForm":
        return cls("A2", 0.0, omega)

    @classmethod
    def d(cls, tau: float, omega: float = 1.0) -> "CanonicalForm":
        return cls("D", tau, omega)


_ALIASES = {
    "att": "C-att", "amp": "C-amp", "b2": "B2", "b1": "B1",
    "a1": "A1", "a2": "A2", "d": "D",
}
_PARAM_KEYS = {"tau", "xi", "omega", "theta", "delta"}


def parse_channel(text: str) -> tuple[str, dict[str, float]]:
    """Split a descriptor like ``att:tau=0.6,xi=0.01`` into (class, params).

    Parameter conversion (e.g. excess noise to omega) is left to the caller.
    """
    head, _, tail = text.strip().partition(":")
    kind = _ALIASES.get(head.strip().lower())
    if kind is None:
        raise DomainError(f"unknown channel {head!r}; expected one of {sorted(_ALIASES)}")
    params: dict[str, float] = {}
    for item in filter(None, (s.strip() for s in tail.split(","))):
        key, eq, value = item.partition("=")
        key = key.strip().lower()
        if not eq or key not in _PARAM_KEYS:
            raise DomainError(f"bad channel parameter {item!r}")
        try:
            params[key] = float(value)
        except ValueError:
            raise DomainError(f"channel parameter {key} is not a number: {value!r}") from None
    return kind, params


def format_channel(kind: str, params: dict[str, float]) -> str:
    """Inverse of :func:`parse_channel`."""
    short = {v: k for k, v in _ALIASES.items()}[kind]
    return short + ":" + ",".join(f"{k}={params[k]!r}" for k in sorted(params))
