"""Synthetic parameter-estimation data and empirical estimator variances.

Random numbers come from the Philox4x64 counter-based generator. Every
(seed, grid point, trial) triple owns its own Philox key, so trials are
independent of scheduling and can run in any order or in parallel. Normal
deviates are produced with Box-Muller from the raw 64-bit words, so results
do not depend on numpy's normal sampler.
"""
from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import param_estimation as pe
from .errors import DomainError

MIN_TRIALS = 100
RATIO_BOUNDS = (0.9, 1.1)


def philox(seed: int, stream: int) -> np.random.Philox:
    """Generator for ``stream`` under ``seed``; the pair is the 128-bit Philox key."""
    if not 0 <= seed < 2**64 or not 0 <= stream < 2**64:
        raise DomainError("seed and stream must be 64-bit unsigned integers")
    return np.random.Philox(key=np.array([seed, stream], dtype=np.uint64))


def stream_id(grid_index: int, trial: int) -> int:
    return (grid_index << 32) | trial


def uniforms(bitgen: np.random.Philox, n: int) -> np.ndarray:
    """``n`` doubles in (0, 1] from the top 53 bits of each raw word."""
    raw = bitgen.random_raw(n)
    return ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53


def normals(bitgen: np.random.Philox, n: int) -> np.ndarray:
    """Standard normal deviates via Box-Muller."""
    k = (n + 1) // 2
    u = uniforms(bitgen, 2 * k)
    r = np.sqrt(-2.0 * np.log(u[:k]))
    phi = 2.0 * np.pi * u[k:]
    return np.concatenate([r * np.cos(phi), r * np.sin(phi)])[:n]


@dataclass(frozen=True)
class SimBatch:
    x: np.ndarray
    y: np.ndarray
    family: str
    detection: str
    tau: float
    xi_cap: float
    va: float
    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise DomainError("x and y must have equal length")


def _gain_and_noise(family: str, det: str, tau: float, xi_cap: float) -> tuple[float, float]:
    sz2 = pe.noise_variance(family, tau, xi_cap)
    if det == "hom":
        return np.sqrt(tau), sz2
    # balanced splitting onto two homodynes: half the signal, one extra vacuum unit
    return np.sqrt(tau / 2.0), (sz2 + 1.0) / 2.0


def simulate_batch(family: str, det: str, tau: float, xi_cap: float, va: float, m: int,
                   seed: int, stream: int = 0) -> SimBatch:
    """Alice's Gaussian encodings and Bob's outcomes for ``m`` PE signals.

    Homodyne gives one sample per signal; heterodyne gives two (q and p), so
    the batch holds ``2 m`` pairs.
    """
    if m < MIN_TRIALS:
        raise DomainError(f"m must be at least {MIN_TRIALS}, got {m}")
    if family not in ("att", "amp", "b2"):
        raise DomainError(f"unknown channel family {family!r}")
    det = pe._check_det(det)
    if family == "b2":
        tau = 1.0
    g, var_z = _gain_and_noise(family, det, tau, xi_cap)
    n = m if det == "hom" else 2 * m
    bg = philox(seed, stream)
    x = np.sqrt(va) * normals(bg, n)
    z = np.sqrt(var_z) * normals(bg, n)
    return SimBatch(x, g * x + z, family, det, tau, xi_cap, va, seed, stream)


@dataclass(frozen=True)
class Estimate:
    tau_hat: float
    xi_cap_hat: float
    clamped: bool = False


def mle_estimate(batch: SimBatch, clamp: bool = True) -> Estimate:
    """Gain and excess-noise estimates from one batch.

    The gain uses the known modulation variance (sum(x*y) / (n * V_A)),
    whose squared value has exactly the estimator variance that
    ``param_estimation`` predicts. The excess noise is the residual variance
    minus the channel's vacuum floor. Negative excess noise is clamped to 0
    and flagged unless ``clamp`` is false.
    """
    x, y = batch.x, batch.y
    if x.size == 0 or not np.any(x):
        raise DomainError("degenerate batch: no signal")
    n = x.size
    slope = float(np.dot(x, y)) / (n * batch.va)
    resid = float(np.mean((y - slope * x) ** 2))
    het = batch.detection == "het"
    tau_hat = 2.0 * slope * slope if het else slope * slope
    # het outcomes are scaled by 1/sqrt(2) and carry an extra half unit of noise
    noise = 2.0 * resid - 1.0 if het else resid
    if batch.family == "amp":
        xi = noise - (2.0 * tau_hat - 1.0)
    else:
        xi = noise - 1.0
    if clamp and xi < 0.0:
        return Estimate(tau_hat, 0.0, True)
    return Estimate(tau_hat, xi, False)


@dataclass(frozen=True)
class GridPoint:
    family: str
    detection: str
    tau: float
    xi_cap: float
    va: float
    m: int

    def label(self) -> str:
        return f"{self.family}-{self.detection}-tau{self.tau:g}-Xi{self.xi_cap:g}-VA{self.va:g}-m{self.m}"


@dataclass(frozen=True)
class ReportRow:
    grid_point: str
    quantity: str
    sigma2_theory: float
    sigma2_empirical: float
    ratio: float
    passed: bool
    mean_estimate: float
    trials: int
    note: str = ""


@dataclass
class ValidationReport:
    rows: list[ReportRow] = field(default_factory=list)
    seed: int = 0
    trials: int = 0

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# seed={self.seed} trials={self.trials}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["grid_point", "quantity", "sigma2_theory", "sigma2_empirical", "ratio", "pass", "note"])
        for r in self.rows:
            w.writerow([r.grid_point, r.quantity, f"{r.sigma2_theory:.12g}",
                        f"{r.sigma2_empirical:.12g}", f"{r.ratio:.12g}", int(r.passed), r.note])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for r in self.rows:
            d = asdict(r)
            for k in ("sigma2_theory", "sigma2_empirical", "ratio", "mean_estimate"):
                d[k] = float(f"{d[k]:.12g}")
            rows.append(d)
        return json.dumps({"seed": self.seed, "trials": self.trials, "rows": rows}, indent=2)


def theoretical_variances(point: GridPoint, coupling: str = "paper") -> dict[str, float]:
    if point.family == "att":
        st, sx = pe.estimator_variances_attenuation(point.detection, point.tau, point.xi_cap,
                                                    point.va, point.m)
        return {"tau": st, "xi_cap": sx}
    if point.family == "amp":
        st, sx = pe.estimator_variances_amplifier(point.detection, point.tau, point.xi_cap,
                                                  point.va, point.m, coupling)
        return {"tau": st, "xi_cap": sx}
    return {"xi_cap": pe.estimator_variances_classical(point.detection, point.xi_cap, point.m)}


def max_workers() -> int:
    """Thread cap from CVKEY_THREADS, else min(8, CPU count)."""
    env = os.environ.get("CVKEY_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def run_trials(point: GridPoint, grid_index: int, trials: int, seed: int) -> np.ndarray:
    """(trials, 2) array of unclamped (tau_hat, xi_cap_hat), in trial order."""
    def one(t: int) -> tuple[float, float]:
        b = simulate_batch(point.family, point.detection, point.tau, point.xi_cap, point.va,
                           point.m, seed, stream_id(grid_index, t))
        e = mle_estimate(b, clamp=False)
        return e.tau_hat, e.xi_cap_hat

    workers = max_workers()
    if workers == 1:
        out = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            out = list(ex.map(one, range(trials)))
    return np.array(out)


def variance_validation_report(grid: list[GridPoint], trials: int, seed: int,
                               coupling: str = "paper") -> ValidationReport:
    """Empirical vs predicted estimator variances over ``grid``.

    Fewer than ``MIN_TRIALS`` trials are reported as failing with an
    "insufficient trials" note rather than compared.
    """
    report = ValidationReport(seed=seed, trials=trials)
    for gi, point in enumerate(grid):
        theory = theoretical_variances(point, coupling)
        if trials < MIN_TRIALS:
            for q, s2 in theory.items():
                report.rows.append(ReportRow(point.label(), q, s2, float("nan"), float("nan"),
                                             False, float("nan"), trials, "insufficient trials"))
            continue
        est = run_trials(point, gi, trials, seed)
        for q, s2 in theory.items():
            col = est[:, 0] if q == "tau" else est[:, 1]
            emp = float(np.var(col, ddof=1))
            ratio = emp / s2
            ok = RATIO_BOUNDS[0] <= ratio <= RATIO_BOUNDS[1]
            report.rows.append(ReportRow(point.label(), q, s2, emp, ratio, ok,
                                         float(np.mean(col)), trials))
    return report


def default_grid(m: int = 10_000) -> list[GridPoint]:
    """Three channels x two detections at representative parameters."""
    return [
        GridPoint("att", "hom", 0.5, 0.005, 10.0, m),
        GridPoint("att", "het", 0.5, 0.005, 10.0, m),
        GridPoint("amp", "hom", 2.0, 0.02, 5.0, m),
        GridPoint("amp", "het", 2.0, 0.02, 5.0, m),
        GridPoint("b2", "hom", 1.0, 0.1, 10.0, m),
        GridPoint("b2", "het", 1.0, 0.1, 10.0, m),
    ]
