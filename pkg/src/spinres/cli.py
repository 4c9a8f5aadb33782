"""Command-line workflows.

``spinres <subcommand> --config <path> [--out <dir>] [--seed <int>]``

Every subcommand writes ``report.json``, plot-data CSV files and
``manifest.json`` into the output directory.  Exit status is 0 on success,
1 for usage or configuration errors, 2 when a fit or simulation fails and 3
when an input file cannot be parsed.
"""

import argparse
import contextlib
import json
import os
import platform
import sys
import warnings
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .cavity import EnsembleParams, ResonatorParams, cooperativity, invert_spin_distribution
from .designer import (DesignParams, SampleSpec, ensemble_coupling, loss_budget, mode_volume,
                       single_spin_coupling, spin_count, spins_for_coupling, thermal_polarization,
                       vacuum_field)
from .exceptions import DomainError, FitError, NotFoundError, NumericError, ParseError, SpinresError
from .fitkit import (LorentzianDensityFitter, fit_avoided_crossing, fit_coupled_spectrum, fit_echo_decay,
                     fit_resonator, fit_saturation_recovery)
from .io import file_digest, load_field_map, load_table, load_trace, write_columns, write_field_map, write_json
from .pulse import (Delay, HardPulse, Pulse, PulseSequence, RelaxationParams, propagate_bloch,
                    simulate_hahn_echo)
from .spin import G_DPPH, G_P1, P1_A_PAR, P1_A_PERP, SpinSystem, resonance_field, transition_function
from .sweep import simulate_field_sweep
from .validation import normalize

EXIT_OK, EXIT_USAGE, EXIT_FIT, EXIT_PARSE = 0, 1, 2, 3


class UsageError(SpinresError):
    """Bad command line or unusable configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- run bookkeeping ---------------------------------------------------------


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.isoformat(timespec="seconds")


def _versions():
    import scipy
    import sklearn

    return {
        "spinres": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
    }


class Run:
    """Collects inputs and settings of one command and writes its artefacts."""

    def __init__(self, command, config, config_path, out, seed):
        self.command = command
        self.config = config
        self.config_path = config_path
        self.base = os.path.dirname(os.path.abspath(config_path)) if config_path else os.getcwd()
        self.out = out
        self.seed = seed
        self.inputs = []
        self.settings = {}
        self.outputs = []

    def path(self, key):
        """Resolve a file reference from the config (relative to the config file)."""
        ref = require(self.config, key, str)
        full = ref if os.path.isabs(ref) else os.path.join(self.base, ref)
        if not os.path.exists(full):
            raise UsageError(f"config key {key!r}: file {ref!r} not found")
        self.inputs.append({"key": key, "path": ref, "sha256": file_digest(full)})
        return full

    def write_csv(self, name, columns):
        write_columns(os.path.join(self.out, name), columns)
        self.outputs.append(name)

    def write_text(self, name, writer, *args):
        writer(os.path.join(self.out, name), *args)
        self.outputs.append(name)

    def finish(self, model, parameters, residual_rss=None, convergence=None):
        stamp = _timestamp()
        provenance = {
            "command": self.command,
            "config": os.path.basename(self.config_path) if self.config_path else None,
            "config_sha256": file_digest(self.config_path) if self.config_path else None,
            "seed": self.seed,
            "spinres_version": __version__,
            "timestamp": stamp,
        }
        report = {
            "model": model,
            "parameters": parameters,
            "residual_rss": residual_rss,
            "convergence": convergence or {"converged": True, "status": "closed form", "iterations": 0},
            "provenance": provenance,
        }
        write_json(os.path.join(self.out, "report.json"), report)
        manifest = {
            "command": self.command,
            "config": self.config,
            "settings": self.settings,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs + ["report.json"]),
            "seed": self.seed,
            "versions": _versions(),
            "threads": os.environ.get("SPINRES_THREADS"),
            "timestamp": stamp,
        }
        write_json(os.path.join(self.out, "manifest.json"), manifest)
        return report


def require(cfg, key, kind=None):
    if key not in cfg:
        raise UsageError(f"config is missing required key {key!r}")
    value = cfg[key]
    if kind is not None and not isinstance(value, kind):
        raise UsageError(f"config key {key!r} must be {getattr(kind, '__name__', kind)}")
    return value


def _fit_report(run, result):
    run.settings["fit"] = {"free": result.free, "n_data": result.n_data}
    convergence = {"converged": bool(result.converged), "status": result.status, "iterations": result.n_iter}
    return run.finish(result.model, result.report(), float(result.residual_rss), convergence)


def _grid(spec, name):
    """A list of values or ``{"start", "stop", "num"}``."""
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except KeyError as exc:
            raise UsageError(f"{name} grid needs start, stop and num (missing {exc})") from exc
    if isinstance(spec, list):
        return np.asarray(spec, dtype=float)
    raise UsageError(f"{name} must be a list or a {{start, stop, num}} object")


def _trace_plots(run, f, y, model):
    """data/model/residual CSVs for a complex or magnitude trace."""
    if np.iscomplexobj(y) or np.iscomplexobj(model):
        y, model = np.asarray(y, complex), np.asarray(model, complex)
        run.write_csv("data.csv", {"freq_Hz": f, "re": y.real, "im": y.imag, "mag": np.abs(y)})
        run.write_csv("model.csv", {"freq_Hz": f, "re": model.real, "im": model.imag, "mag": np.abs(model)})
        r = y - model
        run.write_csv("residual.csv", {"freq_Hz": f, "re": r.real, "im": r.imag})
    else:
        run.write_csv("data.csv", {"freq_Hz": f, "mag": y})
        run.write_csv("model.csv", {"freq_Hz": f, "mag": model})
        run.write_csv("residual.csv", {"freq_Hz": f, "mag": y - model})


def _trace_values(trace):
    return trace.magnitude if trace.magnitude_only else trace.s11


# -- config -> model objects --------------------------------------------------


def _resonator(cfg, run):
    """ResonatorParams from ``resonator`` or by fitting ``resonator_trace``."""
    if "resonator" in cfg:
        spec = require(cfg, "resonator", dict)
        try:
            res = ResonatorParams(**spec)
        except TypeError as exc:
            raise UsageError(f"resonator: {exc}") from exc
        run.settings["resonator"] = spec
        return res
    if "resonator_trace" in cfg:
        tf = load_trace(run.path("resonator_trace"), cfg.get("resonator_format", "auto"))
        result = fit_resonator(tf.trace)
        res = result.estimator.resonator_
        run.settings["resonator"] = {k: getattr(res, k) for k in
                                     ("omega_r", "kappa_int", "kappa_ext", "phase_offset",
                                      "amplitude_scale", "cable_delay")}
        run.settings["resonator_fit_status"] = result.status
        return res
    raise UsageError("config needs 'resonator' parameters or a 'resonator_trace' file")


def _spin_model(cfg, run):
    spec = dict(cfg.get("spin_system", {}))
    species = spec.get("species", "P1")
    direction = tuple(normalize(spec.get("direction", [0.0, 0.0, 1.0])))
    if species == "DPPH":
        system = SpinSystem.dpph(g_factor=spec.get("g_factor", G_DPPH))
    elif species == "P1":
        system = SpinSystem.p1(axis=tuple(normalize(spec.get("axis", [1.0, 1.0, 1.0]))),
                               g_factor=spec.get("g_factor", G_P1),
                               hyperfine_perp=spec.get("hyperfine_perp", P1_A_PERP),
                               hyperfine_par=spec.get("hyperfine_par", P1_A_PAR))
    else:
        raise UsageError(f"spin_system.species must be 'P1' or 'DPPH', got {species!r}")
    model = transition_function(system, direction, spec.get("labels"))
    run.settings["spin_system"] = {
        "species": species, "g_factor": system.g_factor, "nuclear_spin": system.nuclear_spin,
        "hyperfine_perp": system.hyperfine_perp, "hyperfine_par": system.hyperfine_par,
        "symmetry_axis": list(system.symmetry_axis), "direction": list(direction),
        "labels": model.labels,
    }
    return system, direction, model


def _relaxation(spec):
    try:
        return RelaxationParams(**spec)
    except TypeError as exc:
        raise UsageError(f"relaxation: {exc}") from exc


# -- subcommands --------------------------------------------------------------


def cmd_fit_resonator(run):
    cfg = run.config
    tf = load_trace(run.path("trace"), cfg.get("format", "auto"))
    opts = {k: cfg[k] for k in ("coupling", "fit_delay", "noise_sigma", "initial") if k in cfg}
    run.settings.update({"format": tf.trace.metadata["format"], "skipped_rows": tf.skipped_rows, **opts})
    result = fit_resonator(tf.trace, **opts)
    est = result.estimator
    run.settings["coupling_ambiguous"] = bool(getattr(est, "coupling_ambiguous_", False))
    f = tf.trace.frequencies
    _trace_plots(run, f, _trace_values(tf.trace), est.predict(f))
    return _fit_report(run, result)


def cmd_fit_coupled(run):
    cfg = run.config
    res = _resonator(cfg, run)
    tf = load_trace(run.path("trace"), cfg.get("format", "auto"))
    opts = {k: cfg[k] for k in ("lineshape", "initial", "hold") if k in cfg}
    run.settings.update({"format": tf.trace.metadata["format"], "skipped_rows": tf.skipped_rows, **opts})
    result = fit_coupled_spectrum(tf.trace, res, **opts)
    est = result.estimator
    g, gam = result["g_ens"], result["gamma_inhomogeneous"]
    if g > 0 and gam > 0:
        c, regime = cooperativity(g, res.kappa_tot, gam)
        i, j = result.names.index("g_ens"), result.names.index("gamma_inhomogeneous")
        cov = result.covariance
        rel = 4 * cov[i, i] / g ** 2 + cov[j, j] / gam ** 2 - 4 * cov[i, j] / (g * gam)
        result.derived["cooperativity"] = (c, c * np.sqrt(max(rel, 0.0)), "")
        run.settings["regime"] = regime
    f = tf.trace.frequencies
    _trace_plots(run, f, _trace_values(tf.trace), est.predict(f))
    return _fit_report(run, result)


def cmd_fit_crossing(run):
    cfg = run.config
    sweep = load_field_map(run.path("map"), cfg.get("scale", "dB"))
    _, _, model = _spin_model(cfg, run)
    opts = {k: cfg[k] for k in ("gammas", "g_init", "fit_field_offset", "branch_model", "lineshape",
                                "min_prominence") if k in cfg}
    if "resonator" in cfg or "resonator_trace" in cfg:
        opts["resonator"] = _resonator(cfg, run)
    elif "omega_r" in cfg:
        opts["resonator"] = float(cfg["omega_r"])
    run.settings.update({k: v for k, v in opts.items() if k != "resonator"})
    result = fit_avoided_crossing(sweep, model, **opts)
    est = result.estimator
    run.settings.update({"branch_model_used": est.branch_model_, "usable_fraction": est.usable_fraction_,
                         "omega_r_used": est.omega_r_})
    fields = sweep.fields
    rows, branches, obs = est.rows_, est.branches_, est.observed_
    pred = est.predict(fields)
    run.write_csv("data.csv", {"field_T": fields[rows], "freq_Hz": obs, "branch": branches})
    cols = {"field_T": fields}
    cols.update({f"branch_{k}_Hz": pred[:, k] for k in range(pred.shape[1])})
    run.write_csv("model.csv", cols)
    run.write_csv("residual.csv", {"field_T": fields[rows], "branch": branches,
                                   "residual_Hz": obs - pred[rows, branches]})
    return _fit_report(run, result)


def cmd_invert_density(run):
    cfg = run.config
    res = _resonator(cfg, run)
    tf = load_trace(run.path("trace"), cfg.get("format", "auto"))
    if tf.trace.magnitude_only:
        raise UsageError("invert-density needs a complex (re/im or mag/phase) trace")
    g = cfg.get("g_ens")
    mask_tol = float(cfg.get("mask_tol", 1e-6))
    run.settings.update({"g_ens": g, "mask_tol": mask_tol})
    est = invert_spin_distribution(tf.trace, res, g, mask_tol)
    f, rho = est.frequencies, est.rho
    extra = {
        "integral": (est.integral, 0.0, ""),
        "g_ens": (est.g_ens, 0.0, "Hz"),
        "clipped_mass": (est.clipped_mass, 0.0, ""),
    }
    if not cfg.get("fit_lorentzian", True):
        run.write_csv("data.csv", {"freq_Hz": f, "rho_per_Hz": rho})
        params = {k: {"value": float(v), "sigma": float(s), "unit": u} for k, (v, s, u) in extra.items()}
        return run.finish("density-inversion", params)
    fitter = LorentzianDensityFitter().fit(f, rho)
    result = fitter.result_
    result.derived.update(extra)
    model = fitter.predict(f)
    run.write_csv("data.csv", {"freq_Hz": f, "rho_per_Hz": rho})
    run.write_csv("model.csv", {"freq_Hz": f, "rho_per_Hz": model})
    run.write_csv("residual.csv", {"freq_Hz": f, "rho_per_Hz": rho - model})
    return _fit_report(run, result)


def cmd_simulate_sweep(run):
    cfg = run.config
    system, direction, model = _spin_model(cfg, run)
    res = _resonator(cfg, run)
    specs = require(cfg, "ensembles", list)
    if len(specs) != len(model.labels):
        raise UsageError(f"{len(specs)} ensembles given for {len(model.labels)} transitions {model.labels}")
    try:
        ensembles = [EnsembleParams(omega_s=0.0, **s) for s in specs]
    except TypeError as exc:
        raise UsageError(f"ensembles: {exc}") from exc
    fields = _grid(require(cfg, "fields"), "fields")
    freqs = _grid(require(cfg, "frequencies"), "frequencies")
    noise = float(cfg.get("noise", 0.0))
    run.settings.update({"ensembles": specs, "fields": [fields[0], fields[-1], fields.size],
                         "frequencies": [freqs[0], freqs[-1], freqs.size], "noise": noise})
    sweep = simulate_field_sweep(model, res, ensembles, fields, freqs, noise=noise, seed=run.seed)
    run.write_text("map.csv", write_field_map, sweep)
    spin = model(fields)
    cols = {"field_T": fields}
    cols.update({f"spin_{lab}_Hz": spin[:, k] for k, lab in enumerate(model.labels)})
    run.write_csv("model.csv", cols)
    params = {}
    for lab, ens in zip(model.labels, ensembles):
        suffix = "" if len(model.labels) == 1 else f"[{lab}]"
        label = None if lab == "electron" else lab
        try:
            b = resonance_field(system, res.omega_r, direction, label)
        except NotFoundError:
            b = float("nan")
        params["crossing_field" + suffix] = {"value": b, "sigma": 0.0, "unit": "T"}
        params["g_ens" + suffix] = {"value": ens.g_ens, "sigma": 0.0, "unit": "Hz"}
    return run.finish("field-sweep", params, None,
                      {"converged": True, "status": "simulation", "iterations": 0})


def _segments(specs):
    out = []
    for s in specs:
        s = dict(s)
        kind = s.pop("type", None)
        try:
            if kind == "pulse":
                out.append(Pulse(**s))
            elif kind == "hard":
                out.append(HardPulse(**s))
            elif kind == "delay":
                out.append(Delay(**s))
            else:
                raise UsageError(f"segment type must be pulse, hard or delay, got {kind!r}")
        except TypeError as exc:
            raise UsageError(f"segment {kind}: {exc}") from exc
    return out


def cmd_pulse_sim(run):
    cfg = run.config
    kind = cfg.get("sequence", "hahn-echo")
    noise = float(cfg.get("noise", 0.0))
    rng = np.random.default_rng(run.seed)
    run.settings.update({"sequence": kind, "noise": noise})
    relax = _relaxation(require(cfg, "relaxation", dict)) if "relaxation" in cfg or kind != "custom" else None
    params = {}
    if kind == "hahn-echo":
        tau = float(require(cfg, "tau"))
        fwhm = float(require(cfg, "ensemble_fwhm"))
        opts = {k: cfg[k] for k in ("n_spins", "lineshape", "n_points", "window") if k in cfg}
        run.settings.update({"tau": tau, "ensemble_fwhm": fwhm, **opts})
        echo = simulate_hahn_echo(tau, fwhm, relax, **opts)
        t, model = echo.times, echo.amplitude
        x_name = "t_s"
        params["peak_amplitude"] = {"value": echo.peak_amplitude, "sigma": 0.0, "unit": ""}
        params["peak_time"] = {"value": echo.peak_time, "sigma": 0.0, "unit": "s"}
    elif kind == "echo-decay":
        t = _grid(require(cfg, "two_tau"), "two_tau")
        fwhm = float(require(cfg, "ensemble_fwhm"))
        n_spins = int(cfg.get("n_spins", 1001))
        run.settings.update({"ensemble_fwhm": fwhm, "n_spins": n_spins})
        model = np.array([np.abs(simulate_hahn_echo(tt / 2, fwhm, relax, n_spins=n_spins, n_points=1, window=0.0)
                                 .magnetization[0]) for tt in t])
        x_name = "two_tau_s"
    elif kind == "saturation-recovery":
        t = _grid(require(cfg, "delays"), "delays")
        model = np.empty(t.size)
        for i, T in enumerate(t):
            segs = ([Delay(T)] if T > 0 else []) + [HardPulse(np.pi / 2)]
            traj = propagate_bloch(PulseSequence(segs), relax, 0.0, m0=(0.0, 0.0, 0.0))
            model[i] = np.hypot(traj.m[-1, 0], traj.m[-1, 1])
        x_name = "delay_s"
    elif kind == "custom":
        segs = _segments(require(cfg, "segments", list))
        acq = cfg.get("acquisition")
        seq = PulseSequence(segs, tuple(acq) if acq else None, int(cfg.get("n_acquisition", 101)))
        det = float(cfg.get("detuning", 0.0))
        m0 = tuple(cfg.get("m0", (0.0, 0.0, 1.0)))
        run.settings.update({"detuning": det, "m0": list(m0)})
        traj = propagate_bloch(seq, relax, det, m0)
        if acq:
            t, m = traj.acquisition_times, traj.acquisition_m
        else:
            t, m = traj.times, traj.m
        run.write_csv("model.csv", {"t_s": t, "mx": m[:, 0], "my": m[:, 1], "mz": m[:, 2]})
        final = traj.m[-1]
        for axis, v in zip("xyz", final):
            params[f"final_m{axis}"] = {"value": float(v), "sigma": 0.0, "unit": ""}
        return run.finish("bloch-custom", params, None,
                          {"converged": True, "status": "simulation", "iterations": 0})
    else:
        raise UsageError(f"unknown pulse sequence {kind!r}")
    if relax is not None:
        run.settings["relaxation"] = {"t1": relax.t1, "t2": relax.t2, "stretch_p": relax.stretch_p,
                                      "equilibrium_mz": relax.equilibrium_mz}
    data = model + noise * rng.standard_normal(model.size) if noise > 0 else model
    run.write_csv("model.csv", {x_name: t, "signal": model})
    run.write_csv("data.csv", {x_name: t, "signal": data})
    run.write_csv("residual.csv", {x_name: t, "signal": data - model})
    return run.finish(f"bloch-{kind}", params, None,
                      {"converged": True, "status": "simulation", "iterations": 0})


def _relaxation_fit(run, fit, x_name, **opts):
    x, y, skipped = load_table(run.path("data"))
    run.settings.update({"skipped_rows": skipped, **opts})
    result = fit(x, y, **opts)
    model = result.estimator.predict(x)
    run.write_csv("data.csv", {x_name: x, "signal": y})
    run.write_csv("model.csv", {x_name: x, "signal": model})
    run.write_csv("residual.csv", {x_name: x, "signal": y - model})
    return _fit_report(run, result)


def cmd_fit_t1(run):
    return _relaxation_fit(run, fit_saturation_recovery, "delay_s")


def cmd_fit_t2(run):
    opts = {"p_bounds": tuple(run.config["p_bounds"])} if "p_bounds" in run.config else {}
    return _relaxation_fit(run, fit_echo_decay, "two_tau_s", **opts)


def cmd_design(run):
    cfg = run.config
    g_factor = float(cfg.get("g_factor", 2.0))
    omega_r = cfg.get("omega_r")
    b_vac = cfg.get("b_vac")
    volume = cfg.get("mode_volume")
    params = {}

    def put(name, value, unit=""):
        params[name] = {"value": float(value), "sigma": 0.0, "unit": unit}

    if b_vac is None:
        if omega_r is None or volume is None:
            raise UsageError("design needs b_vac, or omega_r together with mode_volume")
        b_vac = vacuum_field(omega_r, volume)
    elif omega_r is not None and volume is None:
        volume = mode_volume(omega_r, b_vac)
    put("b_vac", b_vac, "T")
    if volume is not None:
        put("mode_volume", volume, "m^3")
    g1 = single_spin_coupling(b_vac, g_factor)
    put("g_single", g1, "Hz")
    run.settings.update({"g_factor": g_factor, "omega_r": omega_r, "b_vac": b_vac, "mode_volume": volume})

    if "temperature" in cfg:
        if omega_r is None:
            raise UsageError("a temperature needs omega_r for the thermal polarization")
        pol = thermal_polarization(omega_r, float(cfg["temperature"]))
    else:
        pol = float(cfg.get("polarization", 1.0))
    put("polarization", pol)
    run.settings["polarization"] = pol
    if "sample" in cfg:
        spec = dict(require(cfg, "sample", dict))
        try:
            sample = SampleSpec(**spec)
        except TypeError as exc:
            raise UsageError(f"sample: {exc}") from exc
        n = spin_count(sample)
        put("n_spins", n)
        put("g_ens", ensemble_coupling(g1, n, pol), "Hz")
        run.settings["sample"] = spec
    if "target_g_ens" in cfg:
        put("spins_required", spins_for_coupling(g1, float(cfg["target_g_ens"]), pol))
    if omega_r is not None:
        keys = ("tan_delta", "electric_filling", "magnetic_filling", "q_radiation", "q_conductor",
                "epsilon_perp", "epsilon_par")
        loss = {k: (np.inf if cfg[k] is None else cfg[k]) for k in keys if k in cfg}
        dp = DesignParams(omega_r, b_vac, volume, **loss)
        q_int, fractions = loss_budget(dp)
        put("q_int", q_int)
        for ch, frac in fractions.items():
            put(f"loss_fraction[{ch}]", frac)
        run.settings["loss"] = {k: getattr(dp, k) for k in keys}
        run.write_csv("loss_budget.csv", {
            "channel_index": np.arange(3),
            "inverse_q": [dp.electric_filling * dp.tan_delta, 1 / dp.q_conductor, 1 / dp.q_radiation],
            "fraction": [fractions["dielectric"], fractions["conductor"], fractions["radiation"]],
        })
    n_grid = np.logspace(10, 18, 81)
    run.write_csv("model.csv", {"n_spins": n_grid, "g_ens_Hz": g1 * np.sqrt(n_grid * pol)})
    return run.finish("design", params)


COMMANDS = {
    "fit-resonator": (cmd_fit_resonator, "fit the bare resonator to a reflection trace"),
    "fit-coupled": (cmd_fit_coupled, "fit ensemble parameters to an on-crossing trace"),
    "fit-crossing": (cmd_fit_crossing, "fit ensemble couplings to a field-sweep map"),
    "invert-density": (cmd_invert_density, "recover the spin density from a trace"),
    "simulate-sweep": (cmd_simulate_sweep, "forward-model a field-sweep map"),
    "pulse-sim": (cmd_pulse_sim, "simulate a pulse sequence with the Bloch equations"),
    "fit-t1": (cmd_fit_t1, "fit saturation-recovery data"),
    "fit-t2": (cmd_fit_t2, "fit stretched Hahn-echo decay data"),
    "design": (cmd_design, "coupling, spin-count and loss-budget arithmetic"),
}


def build_parser():
    parser = _Parser(prog="spinres", description="Spin-ensemble resonator spectroscopy toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", required=name != "design", help="JSON configuration file")
        p.add_argument("--out", default=None, help="output directory (default: spinres-out/<command>)")
        p.add_argument("--seed", type=int, default=None, help="seed for stochastic parts (default 0)")
        if name == "design":
            p.add_argument("--bvac", type=float, help="vacuum magnetic field in tesla")
            p.add_argument("--gfactor", type=float, help="electron g-factor")
            p.add_argument("--omega-r", type=float, dest="omega_r", help="resonator frequency in Hz")
    return parser


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as handle:
            cfg = json.load(handle)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def run(command, config, config_path=None, out=None, seed=None):
    """Execute ``command`` with a parsed ``config``; returns the report dict."""
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}")
    if seed is None:
        seed = int(config.get("seed", 0))
    out = out or os.path.join("spinres-out", command)
    r = Run(command, config, config_path, out, seed)
    return COMMANDS[command][0](r)


def _limit_threads():
    """Cap BLAS/OpenMP pools to ``SPINRES_THREADS`` for the duration of a command."""
    env = os.environ.get("SPINRES_THREADS")
    try:
        n = max(1, int(env)) if env else None
    except ValueError:
        n = None
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args.config)
        if args.command == "design":
            for key, flag in (("b_vac", "bvac"), ("g_factor", "gfactor"), ("omega_r", "omega_r")):
                if getattr(args, flag) is not None:
                    config[key] = getattr(args, flag)
        with _limit_threads():
            report = run(args.command, config, args.config, args.out, args.seed)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FitError, NotFoundError, NumericError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, TypeError, ValueError) as exc:
        print(f"invalid configuration: {exc!r}", file=sys.stderr)
        return EXIT_USAGE
    status = report["convergence"]
    if not status.get("converged", True):
        warnings.warn(f"fit did not converge: {status.get('status')}", stacklevel=1)
    print(json.dumps({"command": args.command, "out": args.out or os.path.join("spinres-out", args.command),
                      "status": status.get("status")}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
