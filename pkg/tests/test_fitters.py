import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from spinres.cavity import ComplexTrace, EnsembleParams, ResonatorParams, reflection_bare, reflection_coupled
from spinres.exceptions import DomainError, InsufficientDataError, NotFoundError
from spinres.fitkit import (
    AvoidedCrossingFitter, CoupledSpectrumFitter, EchoDecayFitter, LorentzianDensityFitter,
    ResonatorFitter, SaturationRecoveryFitter, edge_noise, find_dips, fit_avoided_crossing,
    fit_coupled_spectrum, fit_echo_decay, fit_resonator, fit_saturation_recovery, lorentzian_density,
)
from spinres.pulse import echo_decay_model, saturation_recovery_model
from spinres.spin import SpinSystem, resonance_field, transition_function
from spinres.sweep import simulate_field_sweep

F_R = 5.534e9
KI = F_R / 2.30e4
KE = 1.7e6 - KI
RES = ResonatorParams(F_R, KI, KE, phase_offset=0.3, amplitude_scale=0.8)


def _freqs(n=801, span=20e6):
    return np.linspace(F_R - span, F_R + span, n)


def _monotone(result):
    return bool(np.all(np.diff(result.cost_history) < 0))


# -- resonator -----------------------------------------------------------------


def test_resonator_fit_complex_noiseless():
    f = _freqs()
    r = fit_resonator(ComplexTrace(f, reflection_bare(f, RES)))
    assert r["omega_r"] == pytest.approx(F_R, abs=1.0)
    assert r["kappa_int"] == pytest.approx(KI, rel=1e-6)
    assert r["kappa_ext"] == pytest.approx(KE, rel=1e-6)
    assert r.derived["q_int"][0] == pytest.approx(2.30e4, rel=1e-6)
    assert _monotone(r)


def test_resonator_fit_noisy_recovers_q_int(rng):
    f = _freqs()
    s = reflection_bare(f, RES) + 2e-3 * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
    r = fit_resonator(ComplexTrace(f, s))
    q, dq = r.derived["q_int"][:2]
    assert abs(q - 2.30e4) < 4 * dq
    assert dq > 0


def test_resonator_fit_under_coupled():
    res = ResonatorParams(F_R, 1.2e6, 0.4e6)
    f = _freqs()
    est = ResonatorFitter().fit(f, reflection_bare(f, res))
    assert est.kappa_int_ == pytest.approx(1.2e6, rel=1e-6)
    assert est.kappa_ext_ == pytest.approx(0.4e6, rel=1e-6)


def test_resonator_fit_magnitude_only_is_flagged():
    f = _freqs()
    est = ResonatorFitter().fit(f, np.abs(reflection_bare(f, RES)))
    assert est.coupling_ambiguous_
    assert est.kappa_tot_ == pytest.approx(1.7e6, rel=1e-6)


def test_resonator_fit_with_cable_delay():
    res = ResonatorParams(F_R, KI, KE, cable_delay=3e-9)
    f = _freqs()
    est = ResonatorFitter(fit_delay=True).fit(f, reflection_bare(f, res))
    assert est.params_["cable_delay"] == pytest.approx(3e-9, rel=1e-4)


def test_flat_trace_has_no_dip(rng):
    # rule: peak-to-peak below three noise sigmas means there is no dip
    f = _freqs()
    with pytest.raises(NotFoundError):
        ResonatorFitter().fit(f, np.ones(f.size))
    y = 1 + 1e-3 * rng.uniform(-1, 1, f.size)
    with pytest.raises(NotFoundError):
        ResonatorFitter(noise_sigma=1e-3).fit(f, y)


def test_critically_coupled_split_recovered():
    res = ResonatorParams(F_R, 0.85e6, 0.85e6)
    f = _freqs()
    est = ResonatorFitter().fit(f, reflection_bare(f, res))
    assert est.kappa_int_ == pytest.approx(0.85e6, rel=0.05)
    assert est.kappa_ext_ == pytest.approx(0.85e6, rel=0.05)


@settings(max_examples=15)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_resonator_round_trip_from_perturbed_start(dw, di, de):
    f = _freqs(601)
    start = {"omega_r": F_R + dw * 1.7e6, "kappa_int": KI * (1 + di), "kappa_ext": KE * (1 + de),
             "amplitude_scale": 0.8, "phase_offset": 0.3, "cable_delay": 0.0}
    est = ResonatorFitter(coupling="over", initial=start).fit(f, reflection_bare(f, RES))
    assert est.kappa_int_ == pytest.approx(KI, rel=1e-3)
    assert est.kappa_ext_ == pytest.approx(KE, rel=1e-3)
    assert _monotone(est.result_)


# -- coupled spectrum ----------------------------------------------------------

ENS = EnsembleParams(7.8e6, F_R + 1e6, 9.6e6)


def test_coupled_fit_noiseless():
    f = _freqs(1201, 60e6)
    r = fit_coupled_spectrum(ComplexTrace(f, reflection_coupled(f, RES, ENS)), RES)
    assert r["g_ens"] == pytest.approx(7.8e6, rel=1e-4)
    assert r["omega_s"] == pytest.approx(F_R + 1e6, abs=1e3)
    assert r["gamma_inhomogeneous"] == pytest.approx(9.6e6, rel=1e-4)


@settings(max_examples=10)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_coupled_round_trip_from_perturbed_start(dg, dw, dgam):
    f = _freqs(801, 60e6)
    start = {"g_ens": 7.8e6 * (1 + dg), "omega_s": F_R + 1e6 + dw * 9.6e6,
             "gamma_inhomogeneous": 9.6e6 * (1 + dgam)}
    est = CoupledSpectrumFitter(RES, initial=start).fit(f, reflection_coupled(f, RES, ENS))
    assert est.g_ens_ == pytest.approx(7.8e6, rel=1e-3)
    assert est.gamma_ == pytest.approx(9.6e6, rel=1e-3)
    assert _monotone(est.result_)


def test_coupled_fit_hold():
    f = _freqs(801, 60e6)
    est = CoupledSpectrumFitter(RES, hold={"omega_s": F_R + 1e6}).fit(f, reflection_coupled(f, RES, ENS))
    assert est.omega_s_ == F_R + 1e6
    assert "omega_s" not in est.result_.free


# -- avoided crossing ----------------------------------------------------------


@pytest.fixture(scope="module")
def dpph_map():
    res = ResonatorParams(F_R, KI, KE)
    sm = transition_function(SpinSystem.dpph())
    b0 = resonance_field(SpinSystem.dpph(), F_R)
    fields = np.linspace(b0 - 2e-3, b0 + 2e-3, 121)
    m = simulate_field_sweep(sm, res, EnsembleParams(7.8e6, F_R, 9.6e6), fields, _freqs(801, 60e6))
    return m, sm, res


def test_crossing_lineshape_recovers_coupling(dpph_map):
    m, sm, res = dpph_map
    r = fit_avoided_crossing(m, sm, resonator=res, gammas=9.6e6)
    assert r.estimator.branch_model_ == "lineshape"
    assert r["g_ens"] == pytest.approx(7.8e6, rel=0.02)
    assert r.derived["min_splitting"][0] == pytest.approx(15.6e6, abs=0.3e6)
    assert _monotone(r)


def test_crossing_dressed_model_underestimates_broad_lines(dpph_map):
    # with Gamma > g the dips are pulled towards the bare resonator
    m, sm, res = dpph_map
    r = fit_avoided_crossing(m, sm, resonator=res, branch_model="dressed")
    assert r["g_ens"] < 0.95 * 7.8e6


def test_crossing_without_resonator_estimates_frequency(dpph_map):
    m, sm, _ = dpph_map
    est = AvoidedCrossingFitter(spin_model=sm).fit(m)
    assert est.omega_r_ == pytest.approx(F_R, abs=0.5e6)
    assert est.branch_model_ == "dressed"
    pred = est.predict(m.fields)
    assert pred.shape == (m.fields.size, 2)


def test_crossing_p1_three_modes():
    res = ResonatorParams(F_R, KI, KE)
    system = SpinSystem.p1()
    sm = transition_function(system, (0, 0, 1))
    g = {1: 9.2e6, 0: 9.3e6, -1: 8.5e6}
    ens = [EnsembleParams(g[lab], F_R, 2e6) for lab in sm.labels]
    fields = np.linspace(0.1915, 0.2035, 241)
    m = simulate_field_sweep(sm, res, ens, fields, _freqs(801, 50e6))
    r = fit_avoided_crossing(m, sm, resonator=res, gammas=2e6)
    for lab in sm.labels:
        assert r[f"g_ens[{lab}]"] == pytest.approx(g[lab], rel=0.02)


def test_crossing_zero_coupling_dressed():
    res = ResonatorParams(F_R, KI, KE)
    sm = transition_function(SpinSystem.dpph())
    b0 = resonance_field(SpinSystem.dpph(), F_R)
    m = simulate_field_sweep(sm, res, EnsembleParams(0.0, F_R, 9.6e6),
                             np.linspace(b0 - 2e-3, b0 + 2e-3, 41), _freqs(401, 60e6))
    r = fit_avoided_crossing(m, sm, resonator=res, branch_model="dressed", g_init=1e6)
    assert abs(r["g_ens"]) < 3 * r.sigma("g_ens") + 0.1e6


def test_crossing_needs_dips():
    sm = transition_function(SpinSystem.dpph())
    b0 = resonance_field(SpinSystem.dpph(), F_R)
    flat = simulate_field_sweep(sm, ResonatorParams(F_R, KI, KE), EnsembleParams(7.8e6, F_R, 9.6e6),
                                np.linspace(b0, b0 + 1e-4, 3), _freqs(201, 60e6))
    with pytest.raises(InsufficientDataError):
        fit_avoided_crossing(flat, sm)


def test_crossing_lineshape_requires_linewidths(dpph_map):
    m, sm, _ = dpph_map
    with pytest.raises(DomainError):
        AvoidedCrossingFitter(spin_model=sm, resonator=F_R, branch_model="lineshape").fit(m)


# -- relaxation and density ----------------------------------------------------


def test_saturation_recovery_noiseless():
    t = np.geomspace(1e-5, 50e-3, 60)
    r = fit_saturation_recovery(t, saturation_recovery_model(t, 5.54e-3, 0.9))
    assert r["t1"] == pytest.approx(5.54e-3, rel=1e-6)
    assert r["amplitude"] == pytest.approx(0.9, rel=1e-6)


def test_echo_decay_noiseless():
    t = np.linspace(5e-6, 400e-6, 80)
    r = fit_echo_decay(t, echo_decay_model(t, 117.3e-6, 2.1, 1.3))
    assert r["t2"] == pytest.approx(117.3e-6, rel=1e-6)
    assert r["p"] == pytest.approx(2.1, abs=1e-6)


def test_echo_decay_p_bounds():
    t = np.linspace(5e-6, 400e-6, 80)
    est = EchoDecayFitter(p_bounds=(0.5, 1.5)).fit(t, echo_decay_model(t, 117.3e-6, 2.1))
    assert est.p_ == pytest.approx(1.5)


@settings(max_examples=15)
@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_relaxation_round_trip_from_perturbed_start(dt, dp):
    from spinres.fitkit import FitProblem, Parameter, least_squares

    t = np.linspace(5e-6, 400e-6, 80)
    y = echo_decay_model(t, 117.3e-6, 2.1)
    params = [Parameter("t2", 117.3e-6 * (1 + dt), 1e-9, np.inf, scale=1e-4),
              Parameter("p", 2.1 * (1 + dp), 0.5, 3.0)]
    r = least_squares(FitProblem(lambda v: echo_decay_model(t, v["t2"], v["p"]), params, y))
    assert r["t2"] == pytest.approx(117.3e-6, rel=1e-3)
    assert r["p"] == pytest.approx(2.1, rel=1e-3)
    assert _monotone(r)


def test_lorentzian_density_fit_ignores_nan():
    f = np.linspace(-50e6, 50e6, 501)
    y = lorentzian_density(f, 1.0, 2e6, 9.6e6)
    y[250] = np.nan
    est = LorentzianDensityFitter().fit(f, y)
    assert est.fwhm_ == pytest.approx(9.6e6, rel=1e-6)
    assert est.center_ == pytest.approx(2e6, abs=1.0)


# -- estimator surface and helpers ---------------------------------------------


@pytest.mark.parametrize("est", [
    ResonatorFitter(coupling="over"), CoupledSpectrumFitter(RES), EchoDecayFitter((0.5, 2.5)),
    SaturationRecoveryFitter(), LorentzianDensityFitter(), AvoidedCrossingFitter(gammas=1e6),
])
def test_estimators_clone_and_get_params(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params().keys() == params.keys()
    with pytest.raises(NotFittedError):
        twin.predict(np.linspace(0, 1, 3))


def test_predict_and_score():
    t = np.geomspace(1e-5, 50e-3, 60)
    y = saturation_recovery_model(t, 5.54e-3)
    est = SaturationRecoveryFitter().fit(t, y)
    assert np.allclose(est.predict(t), y)
    assert est.score(t, y) == pytest.approx(1.0)


def test_edge_noise_ignores_slopes(rng):
    x = np.linspace(0, 1, 2000)
    y = 3 * x + 0.01 * rng.standard_normal(x.size)
    assert edge_noise(y) == pytest.approx(0.01, rel=0.2)


def test_find_dips_sub_sample_position():
    x = np.linspace(-1, 1, 201)
    y = 1 - 0.5 / (1 + ((x - 0.1234) / 0.05) ** 2)
    pos, depth, prom = find_dips(x, y, 0.1)
    assert pos.size == 1
    assert pos[0] == pytest.approx(0.1234, abs=2e-3)
    assert depth[0] == pytest.approx(0.5, abs=1e-2)
