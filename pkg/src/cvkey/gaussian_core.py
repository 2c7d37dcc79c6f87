"""Small-dimension Gaussian state algebra in shot-noise units (vacuum variance 1).

Covariance matrices use the ordering (q1, p1, q2, p2, ...). The symplectic form
is the direct sum of ``[[0, 1], [-1, 0]]`` blocks.

Matrices are float arrays by default. Object arrays of ``mpmath.mpf`` are
accepted everywhere as well; the symplectic spectrum is then computed at the
current ``mpmath.mp.dps``. That path exists for strongly squeezed states (the
classical-noise limit) where double precision loses the eigenvalues near 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from .errors import ContractError, DegenerateMeasurementError, DomainError, NumericalError

I2 = np.eye(2)
Z2 = np.diag([1.0, -1.0])
PI_Q = np.diag([1.0, 0.0])
PI_P = np.diag([0.0, 1.0])

MAX_MODES = 3
SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9
IMAG_TOL = 1e-8
# symplectic eigenvalues inherit rounding error ~ eps * cond(V)
ROUNDING_SLACK = 16 * np.finfo(float).eps
MAX_SLACK = 1e-4


def _is_mp(m: np.ndarray) -> bool:
    return m.dtype == object


def _absmax(m: np.ndarray) -> float:
    return max(float(abs(x)) for x in np.ravel(m)) if m.size else 0.0


def sqrt(x):
    """Square root that keeps ``mpf`` inputs in multiprecision."""
    return mpmath.sqrt(x) if isinstance(x, mpmath.mpf) else math.sqrt(x)


def physical_tolerance(m: np.ndarray) -> float:
    """Slack below 1 accepted for a symplectic eigenvalue of ``m``."""
    if _is_mp(m):
        return PHYSICAL_TOL
    slack = ROUNDING_SLACK * float(np.linalg.cond(m))
    return min(MAX_SLACK, max(PHYSICAL_TOL, slack))


def mat2(a: float, b: float, c: float, d: float) -> np.ndarray:
    """Row-major 2x2 matrix ``[[a, b], [c, d]]``."""
    m = np.array([[a, b], [c, d]], dtype=float)
    if not np.all(np.isfinite(m)):
        raise DomainError("2x2 matrix entries must be finite")
    return m


def omega(n_modes: int) -> np.ndarray:
    """Standard symplectic form on ``n_modes`` modes."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def direct_sum(*blocks: np.ndarray) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    dtype = object if any(_is_mp(np.asarray(b)) for b in blocks) else float
    out = np.zeros((size, size), dtype=dtype)
    k = 0
    for b in blocks:
        s = b.shape[0]
        out[k:k + s, k:k + s] = b
        k += s
    return out


@dataclass(frozen=True)
class CovMatrix:
    """Real symmetric 2n x 2n covariance matrix for n <= 3 modes."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix)
        if not _is_mp(m):
            m = m.astype(float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise ContractError(f"covariance matrix must be 2n x 2n, got shape {m.shape}")
        n = m.shape[0] // 2
        if not 1 <= n <= MAX_MODES:
            raise ContractError(f"supported mode counts are 1..{MAX_MODES}, got {n}")
        scale = _absmax(m)
        if not math.isfinite(scale):
            raise ContractError("covariance matrix has non-finite entries")
        if _absmax(m - m.T) > SYMMETRY_TOL * max(1.0, scale):
            raise ContractError("covariance matrix is not symmetric")
        m = (m + m.T) / 2
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def block(self, i: int, j: int | None = None) -> np.ndarray:
        """2x2 block between modes ``i`` and ``j`` (diagonal block if ``j`` is omitted)."""
        j = i if j is None else j
        return self.matrix[2 * i:2 * i + 2, 2 * j:2 * j + 2].copy()

    def reduced(self, modes: Sequence[int]) -> "CovMatrix":
        """Marginal CM of the listed modes (partial trace over the rest)."""
        idx = [k for m in modes for k in (2 * m, 2 * m + 1)]
        return CovMatrix(self.matrix[np.ix_(idx, idx)])

    def with_block(self, i: int, block: np.ndarray) -> "CovMatrix":
        """Copy with the diagonal block of mode ``i`` replaced."""
        m = self.matrix.copy()
        m[2 * i:2 * i + 2, 2 * i:2 * i + 2] = block
        return CovMatrix(m)

    def to_float(self) -> "CovMatrix":
        return CovMatrix(self.matrix.astype(float))

    def is_physical(self, tol: float | None = None) -> bool:
        tol = physical_tolerance(self.matrix) if tol is None else tol
        return bool(np.all(_raw_spectrum(self.matrix) >= 1.0 - tol))


@dataclass(frozen=True)
class SympSpectrum:
    """Symplectic eigenvalues, descending."""

    values: tuple[float, ...]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def entropy(self) -> float:
        """Von Neumann entropy in bits."""
        return float(sum(entropy_h(v) for v in self.values))


def tmsv_cm(omega_: float) -> CovMatrix:
    """Two-mode squeezed vacuum with local variance ``omega_``."""
    if not omega_ >= 1:
        raise DomainError(f"TMSV variance must be >= 1, got {omega_}")
    c = sqrt(omega_ * omega_ - 1)
    return CovMatrix(np.block([[omega_ * I2, c * Z2], [c * Z2, omega_ * I2]]))


def _raw_spectrum(m: np.ndarray) -> np.ndarray:
    n = m.shape[0] // 2
    w = omega(n)
    if _is_mp(m):
        chol = mpmath.cholesky(mpmath.matrix(m.tolist()))
        h = chol.T * mpmath.matrix(w.tolist()) * chol * 1j
        vals = np.array([float(x) for x in mpmath.eighe(h, eigvals_only=True)])
    else:
        try:
            # iΩV is similar to the Hermitian L^T (iΩ) L when V = L L^T
            chol = np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            eig = np.linalg.eigvals(1j * w @ m)
            if np.max(np.abs(eig.imag)) > IMAG_TOL * max(1.0, _absmax(m)):
                raise NumericalError("iΩV has eigenvalues with non-negligible imaginary part") from None
            vals = eig.real
        else:
            vals = np.linalg.eigvalsh(1j * (chol.T @ w @ chol))
    # eigenvalues come in +/- pairs
    mods = np.sort(np.abs(vals))[::-1]
    return mods[::2]


def symplectic_spectrum(v: CovMatrix | np.ndarray, tol: float | None = None) -> SympSpectrum:
    """Moduli of the eigenvalues of iΩV, one per mode, descending.

    Values less than ``tol`` below 1 are clamped to exactly 1. The default
    is :func:`physical_tolerance` of ``v``; a CM derived from a larger one
    (e.g. a Schur complement) should pass the parent's tolerance.
    """
    if not isinstance(v, CovMatrix):
        v = CovMatrix(v)
    nu = _raw_spectrum(v.matrix)
    tol = physical_tolerance(v.matrix) if tol is None else max(tol, PHYSICAL_TOL)
    if np.any(nu < 1.0 - tol):
        raise NumericalError(f"symplectic eigenvalue {nu.min()!r} below 1 beyond tolerance {tol:.2g}")
    nu = np.where(nu < 1.0, 1.0, nu)
    return SympSpectrum(tuple(float(x) for x in nu))


def entropy_h(x: float) -> float:
    """Entropy contribution of one symplectic eigenvalue, in bits."""
    if not x >= 1.0 - PHYSICAL_TOL:
        raise DomainError(f"symplectic eigenvalue must be >= 1, got {x}")
    if x <= 1.0:
        return 0.0
    a = 0.5 * (x + 1.0)
    b = 0.5 * (x - 1.0)
    return a * math.log2(a) - b * math.log2(b)


def holevo_from_spectra(avg: SympSpectrum, cond: Sequence[SympSpectrum],
                        weights: Sequence[float]) -> float:
    """Entropy of the average state minus the weighted conditional entropies."""
    if len(cond) != len(weights):
        raise ContractError("one weight is required per conditional spectrum")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ContractError("weights must be nonnegative and sum to 1")
    return avg.entropy() - float(sum(wk * s.entropy() for wk, s in zip(w, cond)))


def _split(v: CovMatrix, mode: int):
    n = v.n_modes
    if not 0 <= mode < n:
        raise ContractError(f"mode index {mode} out of range for {n}-mode CM")
    if n < 2:
        raise ContractError("conditioning needs at least two modes")
    rest = [k for k in range(n) if k != mode]
    idx = [k for m in rest for k in (2 * m, 2 * m + 1)]
    vb = v.block(mode)
    c = v.matrix[2 * mode:2 * mode + 2, :][:, idx]
    va = v.matrix[np.ix_(idx, idx)]
    return vb, c, va


def condition_on_homodyne(v: CovMatrix, measured_mode: int, quad: str) -> CovMatrix:
    """CM of the remaining modes after homodyning ``quad`` ('q' or 'p') of ``measured_mode``."""
    if quad not in ("q", "p"):
        raise ContractError(f"quadrature must be 'q' or 'p', got {quad!r}")
    vb, c, va = _split(v, measured_mode)
    k = 0 if quad == "q" else 1
    var = vb[k, k]
    if not var > 0:
        raise DegenerateMeasurementError(f"measured {quad} variance is {var}")
    # pseudo-inverse of the rank-1 block diag(var, 0) or diag(0, var)
    row = c[k, :]
    return CovMatrix(va - np.outer(row, row) / var)


def condition_on_heterodyne(v: CovMatrix, measured_mode: int) -> CovMatrix:
    """CM of the remaining modes after heterodyning ``measured_mode``."""
    vb, c, va = _split(v, measured_mode)
    a, b = vb[0, 0] + 1, vb[0, 1]
    d = vb[1, 1] + 1
    det = a * d - b * b
    inv = np.array([[d, -b], [-b, a]]) / det
    return CovMatrix(va - c.T @ inv @ c)
