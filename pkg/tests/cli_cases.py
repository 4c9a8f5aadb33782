"""Synthetic inputs and configurations for every CLI subcommand."""

import json

import numpy as np

from spinres.cavity import ComplexTrace, EnsembleParams, ResonatorParams, reflection_bare, reflection_coupled
from spinres.io import write_columns, write_field_map, write_trace
from spinres.pulse import echo_decay_model, saturation_recovery_model
from spinres.spin import SpinSystem, resonance_field, transition_function
from spinres.sweep import simulate_field_sweep

F_R = 5.534e9
KAPPA_INT = F_R / 2.30e4
KAPPA_EXT = 1.7e6 - KAPPA_INT
RESONATOR = {"omega_r": F_R, "kappa_int": KAPPA_INT, "kappa_ext": KAPPA_EXT}
DPPH = {"g_ens": 7.8e6, "gamma_inhomogeneous": 9.6e6}


def build(directory):
    """Write inputs into ``directory`` and return ``{command: config_path}``."""
    rng = np.random.default_rng(2024)
    res = ResonatorParams(**RESONATOR)
    f = np.linspace(F_R - 20e6, F_R + 20e6, 801)
    noise = 1e-3 * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
    write_trace(directory / "bare.csv", ComplexTrace(f, reflection_bare(f, res) + noise))

    fc = np.linspace(F_R - 60e6, F_R + 60e6, 1201)
    ens = EnsembleParams(omega_s=F_R, **DPPH)
    write_trace(directory / "coupled.csv", ComplexTrace(fc, reflection_coupled(fc, res, ens)))

    sm = transition_function(SpinSystem.dpph())
    b0 = resonance_field(SpinSystem.dpph(), F_R)
    sweep = simulate_field_sweep(sm, res, ens, np.linspace(b0 - 2e-3, b0 + 2e-3, 81),
                                 np.linspace(F_R - 60e6, F_R + 60e6, 601), noise=1e-3, seed=1)
    write_field_map(directory / "map.csv", sweep)

    t = np.geomspace(20e-6, 40e-3, 201)
    write_columns(directory / "t1.csv", {"T_s": t, "signal": saturation_recovery_model(t, 5.54e-3)
                                         + 0.01 * rng.standard_normal(t.size)})
    tt = np.linspace(10e-6, 300e-6, 201)
    write_columns(directory / "t2.csv", {"two_tau_s": tt, "signal": echo_decay_model(tt, 117.3e-6, 2.1)
                                         + 0.01 * rng.standard_normal(tt.size)})

    configs = {
        "fit-resonator": {"trace": "bare.csv"},
        "fit-coupled": {"trace": "coupled.csv", "resonator": RESONATOR},
        "fit-crossing": {"map": "map.csv", "spin_system": {"species": "DPPH"},
                         "resonator": RESONATOR, "gammas": 9.6e6},
        "invert-density": {"trace": "coupled.csv", "resonator": RESONATOR, "g_ens": 7.8e6},
        "simulate-sweep": {"spin_system": {"species": "P1", "direction": [0, 0, 1]},
                           "resonator": RESONATOR,
                           "ensembles": [{"g_ens": 9.2e6, "gamma_inhomogeneous": 2e6},
                                         {"g_ens": 9.3e6, "gamma_inhomogeneous": 2e6},
                                         {"g_ens": 8.5e6, "gamma_inhomogeneous": 2e6}],
                           "fields": {"start": 0.1915, "stop": 0.2035, "num": 61},
                           "frequencies": {"start": F_R - 50e6, "stop": F_R + 50e6, "num": 401},
                           "noise": 1e-3},
        "pulse-sim": {"sequence": "hahn-echo", "tau": 20e-6, "ensemble_fwhm": 10e6,
                      "relaxation": {"t1": 5.54e-3, "t2": 117.3e-6, "stretch_p": 2.1},
                      "noise": 0.01},
        "fit-t1": {"data": "t1.csv"},
        "fit-t2": {"data": "t2.csv"},
        "design": {"omega_r": F_R, "b_vac": 5e-12, "g_factor": 2.0,
                   "sample": {"species": "P1", "concentration_ppm": 106, "sample_volume": 1e-9},
                   "tan_delta": 1e-6, "q_radiation": 2.33e4, "q_conductor": 1e7},
    }
    paths = {}
    for name, cfg in configs.items():
        p = directory / f"{name}.json"
        p.write_text(json.dumps(cfg, indent=1))
        paths[name] = p
    return paths
