import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinres.designer import (
    DesignParams, SampleSpec, ensemble_coupling, loss_budget, mode_volume, single_spin_coupling,
    spin_count, spins_for_coupling, thermal_polarization, vacuum_field,
)
from spinres.exceptions import DomainError

F_R = 5.534e9


def test_mode_volume_from_vacuum_field():
    assert mode_volume(F_R, 5.0e-12) == pytest.approx(9.2158e-8, rel=1e-4)


def test_vacuum_field_scalings():
    v = 9.2e-8
    assert vacuum_field(F_R, 4 * v) == pytest.approx(vacuum_field(F_R, v) / 2)
    assert vacuum_field(2 * F_R, v) == pytest.approx(vacuum_field(F_R, v) * np.sqrt(2))


def test_single_spin_coupling_convention():
    assert single_spin_coupling(5.0e-12, 2.0) == pytest.approx(0.070, abs=0.002)
    assert single_spin_coupling(0.0) == 0.0
    assert single_spin_coupling(10e-12) == pytest.approx(2 * single_spin_coupling(5e-12))


def test_spin_counts():
    assert spin_count(SampleSpec("P1", 106, 1e-9)) == pytest.approx(1.8762e16, rel=1e-4)
    assert spin_count(SampleSpec("P1", 0, 1e-9)) == 0
    dpph = SampleSpec("DPPH", mass=1e-6)
    assert spin_count(dpph) == pytest.approx(1e-6 / 394.32e-3 * 6.02214076e23)


def test_implied_spin_number_for_observed_coupling():
    n = spins_for_coupling(0.07, 9.2e6)
    assert n == pytest.approx(1.727e16, rel=1e-3)
    assert ensemble_coupling(0.07, n) == pytest.approx(9.2e6)
    assert ensemble_coupling(0.07, 0) == 0


def test_loss_budget_regimes():
    q, parts = loss_budget(DesignParams(F_R, b_vac=5e-12, q_radiation=2.33e4, q_conductor=1e7))
    assert q == pytest.approx(2.28e4, rel=5e-3)
    assert parts["radiation"] > 0.97
    q, parts = loss_budget(DesignParams(F_R, tan_delta=1e-6))
    assert q == pytest.approx(1e6)
    assert parts["dielectric"] == 1.0
    q, _ = loss_budget(DesignParams(F_R, tan_delta=0.0, q_conductor=3e5))
    assert q == pytest.approx(3e5)
    q, _ = loss_budget(DesignParams(F_R, tan_delta=0.0))
    assert q == np.inf


def test_design_params_derivation_and_consistency():
    p = DesignParams(F_R, b_vac=5e-12)
    assert p.mode_volume == pytest.approx(mode_volume(F_R, 5e-12), rel=1e-12, abs=0)
    p = DesignParams(F_R, mode_volume=9.2e-8)
    assert p.b_vac == pytest.approx(vacuum_field(F_R, 9.2e-8), rel=1e-12, abs=0)
    DesignParams(F_R, b_vac=p.b_vac, mode_volume=9.2e-8)
    with pytest.raises(DomainError):
        DesignParams(F_R, b_vac=5e-12, mode_volume=1e-6)


@pytest.mark.parametrize("kwargs", [
    {"electric_filling": 1.5}, {"magnetic_filling": -0.1}, {"tan_delta": -1e-6},
    {"q_radiation": 0.0}, {"omega_r": -1.0},
])
def test_design_params_reject(kwargs):
    base = {"omega_r": F_R}
    base.update(kwargs)
    with pytest.raises(DomainError):
        DesignParams(**base)


def test_sample_spec_reject():
    with pytest.raises(DomainError):
        SampleSpec("NV")
    with pytest.raises(DomainError):
        SampleSpec("P1", 2e6, 1e-9)
    with pytest.raises(DomainError):
        SampleSpec("P1", 10, -1e-9)


def test_thermal_polarization():
    assert thermal_polarization(F_R, 0.01) > 0.99
    assert thermal_polarization(F_R, 300) == pytest.approx(6.62607015e-34 * F_R / (2 * 1.380649e-23 * 300), rel=1e-6)
    assert thermal_polarization(F_R, 0.0) == 1.0
    with pytest.raises(DomainError):
        thermal_polarization(F_R, -1.0)


positive = st.floats(1e-9, 1e3)


@given(st.floats(1e8, 1e11), st.floats(1e-12, 1e-3))
def test_vacuum_field_mode_volume_round_trip(f, v):
    assert mode_volume(f, vacuum_field(f, v)) == pytest.approx(v, rel=1e-12)


@given(st.floats(0, 1e-4), st.floats(0, 1e-3), st.floats(1e2, 1e9), st.floats(1e2, 1e9),
       st.floats(0, 1))
def test_loss_budget_identity(tand, _, q_rad, q_cond, p_e):
    params = DesignParams(F_R, tan_delta=tand, electric_filling=p_e, q_radiation=q_rad, q_conductor=q_cond)
    q, parts = loss_budget(params)
    assert 1 / q == pytest.approx(p_e * tand + 1 / q_rad + 1 / q_cond, rel=1e-12)
    assert sum(parts.values()) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0, 1e20), st.floats(1, 1e6))
def test_ensemble_coupling_monotone_in_n(n, factor):
    assert ensemble_coupling(0.07, n * factor) >= ensemble_coupling(0.07, n)


@given(st.floats(0, 1e6), st.floats(1e-12, 1e-6), st.floats(1.0, 10.0))
def test_spin_count_linear(ppm, vol, k):
    base = spin_count(SampleSpec("P1", ppm, vol))
    assert spin_count(SampleSpec("P1", ppm, vol * k)) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
    if ppm * k <= 1e6:
        assert spin_count(SampleSpec("P1", ppm * k, vol)) == pytest.approx(k * base, rel=1e-12, abs=1e-300)
