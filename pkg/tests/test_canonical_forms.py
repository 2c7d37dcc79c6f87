import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cvkey import canonical_forms as cf
from cvkey.canonical_forms import CanonicalForm, Dilation, parse_channel, format_channel
from cvkey.errors import DilationNotConfigured, DomainError
from cvkey.gaussian_core import omega


@given(st.floats(1e-6, 1 - 1e-6))
def test_attenuation_dilation(tau):
    d = cf.dilation_attenuation(tau)
    assert d.symplectic_error() < 1e-12
    assert np.linalg.det(d.transmission) == pytest.approx(tau, rel=1e-9)


@given(st.floats(1 + 1e-6, 1e3))
def test_amplifier_dilation(tau):
    d = cf.dilation_amplifier(tau)
    assert d.symplectic_error() < 1e-9 * tau
    assert np.linalg.det(d.transmission) == pytest.approx(tau, rel=1e-9)


def test_class_ranges_enforced():
    with pytest.raises(DomainError, match=r"\(0,1\)"):
        cf.dilation_attenuation(1.0)
    with pytest.raises(DomainError):
        cf.dilation_amplifier(0.9)
    with pytest.raises(DomainError):
        CanonicalForm.attenuation(0.5, omega=0.9)
    with pytest.raises(DomainError):
        CanonicalForm("B1", 0.5)


def test_b1_dilation():
    d = cf.dilation_b1()
    assert d.symplectic_error() == 0.0
    np.testing.assert_array_equal(d.transmission, np.eye(2))
    # the environment reaches Bob through a single quadrature
    np.testing.assert_array_equal(d.M.T[:2, 2:], np.diag([0.0, 1.0]))
    assert CanonicalForm.b1().rank == 1


def test_not_symplectic_rejected():
    with pytest.raises(DomainError, match="symplectic"):
        Dilation(2 * np.eye(4), 4.0).validate()


def test_classical_noise_proxy():
    dil, env = cf.classical_noise_proxy(0.1, 1e-6)
    assert env == pytest.approx(1e5)
    assert dil.tau == pytest.approx(1 - 1e-6)
    with pytest.raises(DomainError):
        cf.classical_noise_proxy(0.0)
    with pytest.raises(DomainError):
        cf.classical_noise_proxy(1e300, 1e-300)


def test_exotic_classes_validated():
    a2 = cf.dilation_exotic("A2")
    assert np.linalg.matrix_rank(a2.transmission) == 1
    assert np.linalg.det(a2.transmission) == 0.0
    d = cf.dilation_exotic("D", -0.5)
    assert np.linalg.det(d.transmission) == pytest.approx(-0.5)
    assert d.symplectic_error() < 1e-12
    with pytest.raises(DomainError):
        cf.dilation_exotic("D", 0.5)
    with pytest.raises(DomainError):
        cf.dilation_exotic("A2", 0.3)


def test_missing_exotic_construction(monkeypatch):
    monkeypatch.delitem(cf.EXOTIC_CONSTRUCTIONS, "D")
    with pytest.raises(DilationNotConfigured):
        cf.dilation_exotic("D", -1.0)


def test_a1_is_swap():
    d = cf.dilation_depolarizing()
    np.testing.assert_array_equal(d.transmission, np.zeros((2, 2)))
    w = omega(2)
    np.testing.assert_array_equal(d.M @ w @ d.M.T, w)


def test_form_ranks():
    assert CanonicalForm.attenuation(0.5).rank == 2
    assert CanonicalForm.b1().rank == 1
    assert CanonicalForm.a1().rank == 0
    assert CanonicalForm.classical_noise(0.1).omega == pytest.approx(1e5)


def test_parse_channel():
    assert parse_channel("att:tau=0.6,xi=0.01") == ("C-att", {"tau": 0.6, "xi": 0.01})
    assert parse_channel("b1:") == ("B1", {})
    assert parse_channel("B2:theta=0.1") == ("B2", {"theta": 0.1})
    for bad in ("foo:tau=1", "att:tau", "att:gain=2", "att:tau=abc"):
        with pytest.raises(DomainError):
            parse_channel(bad)


def test_channel_round_trip():
    kind, params = parse_channel("amp:tau=2,xi=0.05")
    assert parse_channel(format_channel(kind, params)) == (kind, params)
