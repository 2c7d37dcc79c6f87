"""Finite-size composable key rate and its optimisation over (r, V_A)."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .canonical_forms import CanonicalForm
from .errors import DomainError
from .param_estimation import PEConfig, worst_case_rate
from .rate_engine import ProtocolConfig

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
VA_BOUNDS = (0.5, 1e3)
R_FRACTION_BOUNDS = (0.01, 0.99)


@dataclass(frozen=True)
class ComposableConfig:
    """Block bookkeeping and epsilon budget.

    ``aep_log_base`` selects the logarithm inside the AEP penalty (e or 2).
    ``hash_term`` selects how the hashing term is read: ``"sqrt2_eps"`` is
    2 log2(sqrt(2) eps_h), ``"sqrt_2eps"`` is 2 log2(sqrt(2 eps_h)).
    """

    N: int = 10**6
    p_ec: float = 0.8
    zeta: float = 0.9
    d: int = 2**5
    eps_s: float = 1e-20
    eps_h: float = 1e-20
    eps_pe: float = 1e-10
    eps_cor: float = 1e-20
    aep_log_base: float = math.e
    hash_term: str = "sqrt2_eps"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 10**3:
            raise DomainError(f"N must be an integer >= 1000, got {self.N}")
        if not 0.0 < self.p_ec <= 1.0:
            raise DomainError(f"p_ec must be in (0,1], got {self.p_ec}")
        if not 0.0 < self.zeta <= 1.0:
            raise DomainError(f"zeta must be in (0,1], got {self.zeta}")
        if int(self.d) != self.d or self.d < 2:
            raise DomainError(f"d must be an integer >= 2, got {self.d}")
        for name in ("eps_s", "eps_h", "eps_pe", "eps_cor"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must be in (0,1), got {v}")
        if self.aep_log_base not in (2.0, math.e):
            raise DomainError("aep_log_base must be 2 or e")
        if self.hash_term not in ("sqrt2_eps", "sqrt_2eps"):
            raise DomainError(f"unknown hash_term {self.hash_term!r}")


@dataclass(frozen=True)
class ComposableResult:
    rate: float
    r: float
    n: int
    m: int
    va_opt: float
    eps_total: float
    r_m: float = float("nan")
    bracket: float = float("nan")
    pe_failed: bool = False

    @property
    def unclamped(self) -> float:
        return self.r * self.bracket


def delta_aep(d: int, p_ec: float, eps_s: float, log_base: float = math.e) -> float:
    """AEP penalty for ``d`` discretisation bins.

    The bin factor is always in bits; ``log_base`` applies to the logarithm
    under the square root.
    """
    if d < 2:
        raise DomainError(f"d must be >= 2, got {d}")
    if not 0.0 < p_ec <= 1.0 or not 0.0 < eps_s < 1.0:
        raise DomainError("need 0 < p_ec <= 1 and 0 < eps_s < 1")
    # log(18 / (p^2 eps^4)) evaluated term-wise so eps^4 cannot underflow
    inner = (math.log(18.0) - 2.0 * math.log(p_ec) - 4.0 * math.log(eps_s)) / math.log(log_base)
    if inner <= 0.0:
        raise DomainError("AEP logarithm argument must exceed 1")
    return 4.0 * math.log2(2.0 * math.sqrt(d) + 1.0) * math.sqrt(inner)


def theta_term(p_ec: float, eps_s: float, eps_h: float, hash_term: str = "sqrt2_eps") -> float:
    """Constant finite-size term; negative for small ``eps_h``."""
    if not 0.0 < p_ec <= 1.0 or not 0.0 < eps_s < 1.0 or not 0.0 < eps_h < 1.0:
        raise DomainError("need 0 < p_ec <= 1 and epsilons in (0,1)")
    head = math.log2(p_ec * (1.0 - eps_s * eps_s / 3.0))
    if hash_term == "sqrt2_eps":
        return head + 2.0 * (0.5 + math.log2(eps_h))
    return head + math.log2(2.0 * eps_h)


def eps_total(cfg: ComposableConfig) -> float:
    return cfg.eps_s + cfg.eps_cor + cfg.eps_h + 2.0 * cfg.p_ec * cfg.eps_pe


def split_block(N: int, p_ec: float, r: float) -> tuple[int, int]:
    """(n, m): key-generation and parameter-estimation signal counts for ratio ``r``."""
    if not 0.0 < r < p_ec:
        raise DomainError(f"r must be in (0, p_ec={p_ec}), got {r}")
    n = int(math.floor(r * N / p_ec))
    return n, N - n


def composable_rate(form: CanonicalForm, cfg: ComposableConfig, protocol: ProtocolConfig,
                    r: float, va: float, coupling: str = "paper") -> ComposableResult:
    """Composable rate for a given split ratio ``r`` and modulation ``va``.

    ``protocol`` supplies detection and reconciliation direction; its mu and
    zeta are replaced by ``va + 1`` and ``cfg.zeta``.
    """
    if not va > 0.0:
        raise DomainError(f"va must be > 0, got {va}")
    n, m = split_block(cfg.N, cfg.p_ec, r)
    if n < 1 or m < 2:
        raise DomainError(f"r={r} leaves n={n}, m={m}")
    proto = protocol.replace(mu=va + 1.0, zeta=cfg.zeta)
    wc = worst_case_rate(form, proto, PEConfig(m, cfg.eps_pe, va), coupling)
    r_eff = n * cfg.p_ec / cfg.N
    bracket = (wc.rate - delta_aep(cfg.d, cfg.p_ec, cfg.eps_s, cfg.aep_log_base) / math.sqrt(n)
               + theta_term(cfg.p_ec, cfg.eps_s, cfg.eps_h, cfg.hash_term) / n)
    if wc.pe_failed:
        bracket = min(bracket, 0.0)
    rate = r_eff * bracket if bracket > 0.0 else 0.0
    return ComposableResult(rate, r_eff, n, m, va, eps_total(cfg), wc.rate, bracket, wc.pe_failed)


def golden_section_max(f, lo: float, hi: float, xtol: float) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    best = max((fc, c), (fd, d))
    return best[1], best[0]


def optimize(form: CanonicalForm, cfg: ComposableConfig, protocol: ProtocolConfig,
             rtol: float = 1e-4, max_sweeps: int = 20, coupling: str = "paper",
             starts: tuple[tuple[float, float], ...] = ((0.5, 5.0), (0.9, 20.0), (0.2, 1.5))
             ) -> ComposableResult:
    """Maximise the composable rate over (r, V_A) by coordinate descent.

    Each coordinate is searched by golden section (V_A on a log scale). The
    objective is the unclamped rate r * bracket so that the search still has
    a slope where the clamped rate is flat at zero. ``starts`` holds
    (r / p_ec, V_A) starting points; the best result is returned.
    """
    r_lo, r_hi = (f * cfg.p_ec for f in R_FRACTION_BOUNDS)
    lv_lo, lv_hi = (math.log(v) for v in VA_BOUNDS)
    cache: dict[tuple[float, float], ComposableResult] = {}

    def evaluate(r: float, lva: float) -> ComposableResult:
        key = (r, lva)
        if key not in cache:
            try:
                cache[key] = composable_rate(form, cfg, protocol, r, math.exp(lva), coupling)
            except DomainError:
                cache[key] = ComposableResult(0.0, r, 0, 0, math.exp(lva), eps_total(cfg),
                                              bracket=-math.inf, pe_failed=True)
        return cache[key]

    def objective(res: ComposableResult) -> float:
        return res.unclamped if math.isfinite(res.bracket) else -1e30

    best: ComposableResult | None = None
    for frac, va0 in starts:
        r, lva = frac * cfg.p_ec, math.log(va0)
        current = objective(evaluate(r, lva))
        for _ in range(max_sweeps):
            previous = current
            lva, _ = golden_section_max(lambda x: objective(evaluate(r, x)), lv_lo, lv_hi, 1e-3)
            r, current = golden_section_max(lambda x: objective(evaluate(x, lva)), r_lo, r_hi,
                                            1e-4 * cfg.p_ec)
            if abs(current - previous) <= rtol * max(abs(current), 1e-12):
                break
        res = evaluate(r, lva)
        if best is None or objective(res) > objective(best):
            best = res
    return best
