import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvkey.errors import ContractError, DegenerateMeasurementError, DomainError, NumericalError
from cvkey.gaussian_core import (
    CovMatrix,
    SympSpectrum,
    condition_on_heterodyne,
    condition_on_homodyne,
    direct_sum,
    entropy_h,
    holevo_from_spectra,
    omega,
    symplectic_spectrum,
    tmsv_cm,
)


def mp_entropy(x):
    x = mpmath.mpf(x)
    a, b = (x + 1) / 2, (x - 1) / 2
    return a * mpmath.log(a, 2) - b * mpmath.log(b, 2)


def test_tmsv_vacuum_is_identity():
    np.testing.assert_array_equal(tmsv_cm(1.0).matrix, np.eye(4))


def test_tmsv_blocks():
    m = tmsv_cm(2.0).matrix
    np.testing.assert_allclose(m[:2, :2], 2 * np.eye(2))
    np.testing.assert_allclose(m[:2, 2:], math.sqrt(3) * np.diag([1, -1]))


def test_tmsv_rejects_subvacuum():
    with pytest.raises(DomainError):
        tmsv_cm(0.5)


@given(st.floats(1.0, 1e4))
def test_tmsv_is_pure(w):
    assert symplectic_spectrum(tmsv_cm(w)).values == pytest.approx((1.0, 1.0), abs=1e-6)


def test_thermal_spectra():
    assert symplectic_spectrum(np.diag([3.0, 3.0])).values == pytest.approx((3.0,), rel=1e-14)
    assert symplectic_spectrum(np.diag([2.0, 2.0, 5.0, 5.0])).values == pytest.approx((5.0, 2.0))


def test_spectrum_invariant_under_symplectic_map():
    v = direct_sum(np.diag([2.0, 2.0]), np.diag([4.0, 4.0]))
    r = 0.7
    s = np.diag([math.exp(r), math.exp(-r), 1, 1])
    bs = np.block([[np.sqrt(0.3) * np.eye(2), np.sqrt(0.7) * np.eye(2)],
                   [-np.sqrt(0.7) * np.eye(2), np.sqrt(0.3) * np.eye(2)]])
    t = bs @ s
    w = omega(2)
    np.testing.assert_allclose(t @ w @ t.T, w, atol=1e-12)
    assert symplectic_spectrum(t @ v @ t.T).values == pytest.approx((4.0, 2.0))


def test_unphysical_cm_raises():
    with pytest.raises(NumericalError):
        symplectic_spectrum(np.diag([0.5, 0.5]))


def test_non_symmetric_rejected():
    with pytest.raises(ContractError):
        CovMatrix(np.array([[1.0, 0.2], [0.0, 1.0]]))


def test_mode_count_limits():
    with pytest.raises(ContractError):
        CovMatrix(np.eye(3))
    with pytest.raises(ContractError):
        CovMatrix(np.eye(8))


def test_entropy_values():
    assert entropy_h(1.0) == 0.0
    assert entropy_h(3.0) == pytest.approx(2.0, abs=1e-15)
    with mpmath.workdps(30):
        assert entropy_h(math.sqrt(2)) == pytest.approx(float(mp_entropy(mpmath.sqrt(2))), rel=1e-13)
    with pytest.raises(DomainError):
        entropy_h(0.5)


@given(st.floats(1.0, 1e4), st.floats(1e-3, 10.0))
def test_entropy_increasing(x, dx):
    assert entropy_h(x + dx) > entropy_h(x)


def test_holevo_pure_and_trivial():
    pure = SympSpectrum((1.0, 1.0))
    assert holevo_from_spectra(pure, [pure, pure], [0.5, 0.5]) == 0.0
    s3 = SympSpectrum((3.0,))
    assert holevo_from_spectra(s3, [s3], [1.0]) == 0.0
    with pytest.raises(ContractError):
        holevo_from_spectra(s3, [s3], [0.7])
    with pytest.raises(ContractError):
        holevo_from_spectra(s3, [s3, s3], [1.0])


def test_homodyne_on_tmsv():
    w = 3.0
    v = condition_on_homodyne(tmsv_cm(w), 1, "q").matrix
    np.testing.assert_allclose(v, np.diag([1 / w, w]), rtol=1e-12)
    v = condition_on_homodyne(tmsv_cm(w), 1, "p").matrix
    np.testing.assert_allclose(v, np.diag([w, 1 / w]), rtol=1e-12)


def test_heterodyne_on_tmsv():
    w = 3.0
    v = condition_on_heterodyne(tmsv_cm(w), 1).matrix
    np.testing.assert_allclose(v, (w - (w * w - 1) / (w + 1)) * np.eye(2), rtol=1e-12)


def test_conditioning_product_state_is_noop():
    v = CovMatrix(direct_sum(np.diag([2.0, 3.0]), np.diag([5.0, 7.0])))
    np.testing.assert_allclose(condition_on_homodyne(v, 0, "q").matrix, np.diag([5.0, 7.0]))
    np.testing.assert_allclose(condition_on_heterodyne(v, 1).matrix, np.diag([2.0, 3.0]))


def test_conditioning_errors():
    with pytest.raises(ContractError):
        condition_on_homodyne(tmsv_cm(2.0), 0, "x")
    with pytest.raises(ContractError):
        condition_on_homodyne(tmsv_cm(2.0), 2, "q")
    with pytest.raises(ContractError):
        condition_on_heterodyne(CovMatrix(np.eye(2)), 0)
    v = CovMatrix(direct_sum(np.diag([0.0, 1.0]), np.eye(2)))
    with pytest.raises(DegenerateMeasurementError):
        condition_on_homodyne(v, 0, "q")


@settings(max_examples=30)
@given(st.floats(1.0, 50.0), st.floats(0.01, 0.99))
def test_conditioned_state_stays_physical(w, t):
    bs = np.block([[np.sqrt(t) * np.eye(2), np.sqrt(1 - t) * np.eye(2)],
                   [-np.sqrt(1 - t) * np.eye(2), np.sqrt(t) * np.eye(2)]])
    v = bs @ direct_sum(w * np.eye(2), np.eye(2)) @ bs.T
    for c in (condition_on_homodyne(CovMatrix(v), 0, "q"), condition_on_heterodyne(CovMatrix(v), 0)):
        assert c.is_physical()


def test_mp_spectrum_matches_float():
    v = tmsv_cm(7.0).matrix + np.eye(4)
    mp_v = np.vectorize(mpmath.mpf, otypes=[object])(v)
    with mpmath.workdps(30):
        np.testing.assert_allclose(symplectic_spectrum(mp_v).values, symplectic_spectrum(v).values,
                                   rtol=1e-12)


def test_reduced_and_blocks():
    v = CovMatrix(direct_sum(np.diag([2.0, 2.0]), tmsv_cm(3.0).matrix))
    assert v.n_modes == 3
    np.testing.assert_allclose(v.reduced([1, 2]).matrix, tmsv_cm(3.0).matrix)
    np.testing.assert_allclose(v.block(1, 2), math.sqrt(8) * np.diag([1, -1]))
