import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvkey import closed_forms
from cvkey.canonical_forms import CanonicalForm
from cvkey.errors import DomainError
from cvkey.gaussian_core import (
    CovMatrix,
    condition_on_heterodyne,
    condition_on_homodyne,
    direct_sum,
    symplectic_spectrum,
    tmsv_cm,
)
from cvkey.rate_engine import (
    ProtocolConfig,
    asymptotic_rate,
    form_from_descriptor,
    form_from_excess_noise,
    holevo_bound,
    mutual_information,
    omega_to_xi,
    propagate,
    security_threshold,
    xi_to_omega,
)


def purified_rr_holevo(form: CanonicalForm, mu: float, det: str) -> float:
    """Eve's RR information via S(E) = S(A'B) and S(E|y) = S(A'|y) on the pure (A', B, E', e) state."""
    m, w = form.interaction()
    s = direct_sum(np.eye(2), m.T, np.eye(2))
    v = s @ direct_sum(tmsv_cm(mu).matrix, tmsv_cm(w).matrix) @ s.T
    ab = CovMatrix(v[:4, :4])
    s_ab = symplectic_spectrum(ab).entropy()
    if det == "hom":
        cond = [condition_on_homodyne(ab, 1, q) for q in ("q", "p")]
    else:
        cond = [condition_on_heterodyne(ab, 1)]
    return s_ab - sum(symplectic_spectrum(c).entropy() for c in cond) / len(cond)


def test_attenuation_bob_variance():
    tau, w, mu = 0.3, 1.7, 11.0
    v = propagate(CanonicalForm.attenuation(tau, w), mu)
    np.testing.assert_allclose(v.block(0), (tau * mu + (1 - tau) * w) * np.eye(2), rtol=1e-13)


def test_amplifier_bob_variance():
    np.testing.assert_allclose(propagate(CanonicalForm.amplifier(2.0), 3.0).block(0), 7 * np.eye(2))
    w = 1.3
    np.testing.assert_allclose(propagate(CanonicalForm.amplifier(4.0, w), 1.0).block(0),
                               (4 + 3 * w) * np.eye(2), rtol=1e-13)


def test_output_state_is_physical():
    for form in (CanonicalForm.attenuation(0.4, 2.0), CanonicalForm.amplifier(3.0, 1.5),
                 CanonicalForm.b1(2.0), CanonicalForm.d(-0.5, 1.2)):
        assert propagate(form, 20.0).is_physical()


def test_homodyne_mutual_information():
    tau, w, mu = 0.6, 1.5, 1e4
    cfg = ProtocolConfig("hom", "rr", mu)
    vb, vb0 = tau * mu + (1 - tau) * w, tau + (1 - tau) * w
    assert mutual_information(CanonicalForm.attenuation(tau, w), cfg) == pytest.approx(
        0.5 * math.log2(vb / vb0), rel=1e-12)
    cfg = cfg.replace(detection="het")
    assert mutual_information(CanonicalForm.attenuation(tau, w), cfg) == pytest.approx(
        math.log2((vb + 1) / (vb0 + 1)), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["att", "amp"]), st.floats(0.05, 0.95), st.floats(1.0, 3.0),
       st.floats(1.5, 1e3), st.sampled_from(["hom", "het"]))
def test_rr_holevo_matches_purification(family, t, w, mu, det):
    form = CanonicalForm.attenuation(t, w) if family == "att" else CanonicalForm.amplifier(1 + 4 * t, w)
    chi = holevo_bound(form, ProtocolConfig(det, "rr", mu))
    assert chi == pytest.approx(purified_rr_holevo(form, mu, det), abs=1e-8)


def test_b1_rr_holevo_matches_purification():
    for det in ("hom", "het"):
        form = CanonicalForm.b1()
        assert holevo_bound(form, ProtocolConfig(det, "rr", 50.0)) == pytest.approx(
            purified_rr_holevo(form, 50.0, det), abs=1e-9)


def test_zeta_scales_information_only():
    form = CanonicalForm.attenuation(0.7, 1.1)
    full = asymptotic_rate(form, ProtocolConfig("het", "rr", 30.0, 1.0))
    part = asymptotic_rate(form, ProtocolConfig("het", "rr", 30.0, 0.9))
    assert part.holevo == full.holevo
    assert part.rate == pytest.approx(0.9 * full.mutual_info - full.holevo)


def test_pure_loss_rr_homodyne():
    r = asymptotic_rate(CanonicalForm.attenuation(0.5), ProtocolConfig("hom", "rr", 1e8)).rate
    assert r == pytest.approx(0.5, abs=1e-6)


def test_pure_loss_dr_homodyne_vanishes_at_half():
    r = asymptotic_rate(CanonicalForm.attenuation(0.5), ProtocolConfig("hom", "dr", 1e8)).rate
    assert r == pytest.approx(0.0, abs=1e-6)


def test_cross_oracle_het_dr_amplifier():
    r = asymptotic_rate(CanonicalForm.amplifier(3.0, 1.4), ProtocolConfig("het", "dr", 1e8)).rate
    assert r == pytest.approx(closed_forms.c_class_rate("het-dr", 3.0, 1.4), abs=1e-3)


@pytest.mark.parametrize("theta", [0.05, 0.5])
def test_classical_noise_proxy_converges(theta):
    cfg = ProtocolConfig("hom", "rr", 1e8)
    r1 = asymptotic_rate(CanonicalForm.classical_noise(theta, 1e-6), cfg).rate
    r2 = asymptotic_rate(CanonicalForm.classical_noise(theta, 5e-7), cfg).rate
    assert r1 == pytest.approx(r2, abs=1e-5)


@given(st.floats(0.01, 0.99), st.floats(0.0, 0.5))
def test_xi_omega_round_trip(tau, xi):
    assert omega_to_xi(tau, xi_to_omega(tau, xi)) == pytest.approx(xi, abs=1e-12)


def test_excess_noise_forms():
    f = form_from_excess_noise("att", 0.5, 0.005)
    assert f.omega == pytest.approx(1.01)
    f = form_from_excess_noise("amp", 2.0, 0.02)
    assert f.omega == pytest.approx(1.02)
    assert form_from_excess_noise("b2", xi_cap=0.3).theta == 0.3
    with pytest.raises(DomainError):
        form_from_excess_noise("att", 0.5, -0.1)


def test_descriptors():
    f = form_from_descriptor("att:tau=0.6,xi=0.01")
    assert (f.kind, f.tau) == ("C-att", 0.6)
    assert f.omega == pytest.approx(1 + 0.6 * 0.01 / 0.4)
    assert form_from_descriptor("b2:theta=0.1").theta == 0.1
    assert form_from_descriptor("b1:").kind == "B1"
    with pytest.raises(DomainError, match=r"tau must be in \(0,1\)"):
        form_from_descriptor("att:tau=1.0,xi=0.01")
    with pytest.raises(DomainError, match="tau must be > 1"):
        form_from_descriptor("amp:tau=0.5")
    with pytest.raises(DomainError):
        form_from_descriptor("att:tau=0.5,xi=0.1,omega=2")


def test_protocol_validation():
    assert ProtocolConfig("heterodyne", "reverse").variant == "het-rr"
    for bad in (dict(detection="x"), dict(direction="x"), dict(mu=1.0), dict(zeta=0.0)):
        with pytest.raises(DomainError):
            ProtocolConfig(**bad)


def test_three_db_threshold():
    tau = security_threshold("att", ProtocolConfig("hom", "dr"), "tau", xi=0.0)
    assert tau == pytest.approx(0.5, abs=1e-6)
    assert math.isnan(security_threshold("att", ProtocolConfig("hom", "rr"), "tau", xi=0.0))


def test_threshold_matches_closed_form_root():
    cfg = ProtocolConfig("hom", "rr")
    x_engine = security_threshold("att", cfg, "xi", tau=0.3)
    x_closed = security_threshold(
        "att", cfg, "xi", tau=0.3,
        rate_fn=lambda f, c: closed_forms.c_class_rate(c.variant, f.tau, f.omega))
    assert x_engine == pytest.approx(x_closed, abs=1e-4)
    assert closed_forms.c_class_rate("hom-rr", 0.3, xi_to_omega(0.3, x_closed)) == pytest.approx(0, abs=1e-6)


def test_threshold_bad_request():
    with pytest.raises(DomainError):
        security_threshold("b2", ProtocolConfig(), "tau")
