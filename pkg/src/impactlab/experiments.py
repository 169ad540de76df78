"""Deterministic experiment orchestration.

run_experiment executes each replica with a seed derived from the master
seed, writes every dataset atomically, and records a manifest with the
config hash, per-replica seeds, output checksums, and wall-clock timings.
Identical (config, master seed) pairs reproduce every CSV byte for byte;
the manifest itself carries timings and is excluded from that guarantee.
"""

from __future__ import annotations

import json
import math
import os
import time

import numpy as np

from . import _csvio, coimpact, flowgen, flowstats, impact, llob
from . import metaorder as molab
from ._version import __version__
from ._dispatch import backend_name
from .config import config_hash, replica_seed, serialize_config
from .errors import ImpactLabError
from .kernels import Kernel
from .lob import BookState, replay, write_events_csv, write_trades_csv


def _kernel_from(values):
    family = values["family"]
    if family == "constant":
        return Kernel.constant(values["g0"])
    if family == "exponential":
        return Kernel.exponential(values["g0"], values["beta"])
    return Kernel.power_law(values["g0"], values["gamma"])


def _write_curve(path, lags, values, stderr, counts):
    _csvio.write_columns(
        path, ["tau", "value", "stderr", "n"], [lags, values, stderr, counts]
    )


def _splitting_series(values, seed):
    pop = flowgen.SplittingPopulation(
        n_agents=values["agents"],
        alpha=values["alpha"],
        rate=values["rate"],
        herding=values["herding"],
    )
    return flowgen.simulate_splitting_agents(pop, values["horizon"], seed=seed)


def _signs_to_events(series):
    from .lob import Event, Kind, Side

    events = []
    for t, s, trader in zip(series.times, series.signs, series.labels):
        side = Side.BUY if s > 0 else Side.SELL
        events.append(Event(float(t), Kind.MARKET, side, 1, trader=int(trader)))
    return events


def _run_flow(config, out_dir, seed):
    name, values = config.generator()
    path = os.path.join(out_dir, "events.csv")
    if name == "zi":
        book = BookState.symmetric(
            values["levels"], values["tick"], values["depth"], values["base"]
        )
        rates = flowgen.PoissonRates.uniform(
            values["levels"],
            values["limit_rate"],
            values["cancel_rate"],
            values["market_rate"],
        )
        stream = flowgen.simulate_zi(rates, book, values["horizon"], seed=seed)
        write_events_csv(path, stream)
    elif name == "hawkes":
        kernels = [
            [
                Kernel.exponential(values["g0_self"], values["beta"]),
                Kernel.exponential(values["g0_cross"], values["beta"]),
            ],
            [
                Kernel.exponential(values["g0_cross"], values["beta"]),
                Kernel.exponential(values["g0_self"], values["beta"]),
            ],
        ]
        spec = flowgen.HawkesSpec(mu=(values["mu"], values["mu"]), kernels=kernels)
        stream = flowgen.simulate_hawkes(spec, values["horizon"], seed=seed)
        write_events_csv(path, stream)
    else:
        series = _splitting_series(values, seed)
        from .lob import EventStream

        write_events_csv(path, EventStream.from_iter(_signs_to_events(series)))
    return [path]


def _run_book(config, out_dir, seed):
    values = config.section("zi")
    book = BookState.symmetric(
        values["levels"], values["tick"], values["depth"], values["base"]
    )
    rates = flowgen.PoissonRates.uniform(
        values["levels"],
        values["limit_rate"],
        values["cancel_rate"],
        values["market_rate"],
    )
    stream = flowgen.simulate_zi(rates, book, values["horizon"], seed=seed)
    result = replay(book, stream)
    events_path = os.path.join(out_dir, "events.csv")
    trades_path = os.path.join(out_dir, "trades.csv")
    write_events_csv(events_path, stream)
    write_trades_csv(trades_path, result.trades)
    return [events_path, trades_path]


def _run_stats(config, out_dir, seed):
    series = _splitting_series(config.section("splitting"), seed)
    stats = config.sections.get("stats", {"max_lag": 200, "fit_lo": 5, "fit_hi": 100})
    curve = flowstats.sign_autocorr(series, stats["max_lag"])
    path = os.path.join(out_dir, "autocorr.csv")
    _write_curve(path, curve.lags, curve.values, curve.stderr, curve.counts)
    return [path]


def _run_response(config, out_dir, seed):
    series = _splitting_series(config.section("splitting"), seed)
    values = config.section("response")
    kernel = _kernel_from(values)
    spec = impact.ImpactSpec.single(kernel, delta=values["delta"])
    prices = impact.tim_price(None, series.signs, spec)
    lags = np.arange(-values["max_lag"], values["max_lag"] + 1)
    curve = flowstats.response_function(series, prices, lags)
    path = os.path.join(out_dir, "response.csv")
    _write_curve(path, curve.lags, curve.values, curve.stderr, curve.counts)
    return [path]


def _run_calibrate(config, out_dir, seed):
    values = config.section("calibrate")
    kernel = _kernel_from(values)
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=values["n"])
    spec = impact.ImpactSpec.single(kernel, delta=1.0)
    prices = impact.tim_price(None, signs, spec)
    series = flowstats.SignSeries(signs=signs)
    lags = np.arange(1, values["max_lag"] + 1)
    response = flowstats.response_function(series, prices, lags)
    autocorr = flowstats.sign_autocorr(series, 2 * values["max_lag"])
    fitted, diagnostics = impact.calibrate_propagator(
        response, autocorr, family=values["family"]
    )
    path = os.path.join(out_dir, "calibration.csv")
    rows = [
        ["family", fitted.family],
        ["g0", fitted.g0],
        ["gamma", fitted.gamma],
        ["beta", fitted.beta],
        ["true_g0", values["g0"]],
        ["residual_norm", diagnostics["residual_norm"]],
    ]
    _csvio.write_rows(path, ["param", "value"], rows)
    return [path]


def _tim_market(values):
    return molab.TimMarket(
        _kernel_from(values), delta=values["delta"], noise=values.get("noise", 0.0)
    )


def _run_impact_curve(config, out_dir, seed):
    values = config.section("impact")
    market = _tim_market(values)
    phis = np.geomspace(values["phi_min"], values["phi_max"], values["n_phi"])
    metaorders = []
    for phi in phis:
        for _ in range(values["n_each"]):
            metaorders.append(
                molab.Metaorder(
                    sign=1, Q=phi, V=1.0, sigma=values["sigma"], T=values["T"]
                )
            )
    records = molab.run_ensemble(metaorders, market, seed=seed)
    records_path = os.path.join(out_dir, "records.csv")
    molab.write_records_csv(records_path, records)
    curve = molab.measure_impact(records)
    curve_path = os.path.join(out_dir, "curve.csv")
    _csvio.write_columns(
        curve_path,
        ["phi", "impact", "stderr", "n"],
        [curve.phi, curve.impact, curve.stderr, curve.count],
    )
    return [records_path, curve_path]


def _run_surface(config, out_dir, seed):
    values = config.section("surface")
    market = _tim_market(values)
    metaorders = molab.grid_metaorders(
        values["T_values"], values["eta_values"], sigma=values["sigma"],
        n_each=values["n_each"],
    )
    records = molab.run_ensemble(metaorders, market, seed=seed)
    records_path = os.path.join(out_dir, "records.csv")
    molab.write_records_csv(records_path, records)
    surface = molab.measure_surface(records)
    surface_path = os.path.join(out_dir, "surface.csv")
    _csvio.write_columns(
        surface_path,
        ["T", "eta", "impact", "stderr", "n"],
        [surface.T, surface.eta, surface.impact, surface.stderr, surface.count],
    )
    return [records_path, surface_path]


def _run_decay(config, out_dir, seed):
    values = config.section("decay")
    market = _tim_market(dict(values, noise=0.0))
    mo = molab.Metaorder(
        sign=1,
        Q=values["eta"] * values["T"],
        V=1.0,
        sigma=values["sigma"],
        T=values["T"],
    )
    records = [
        molab.execute_metaorder(
            mo, market, seed=[seed, k], post_horizon=values["post"]
        )
        for k in range(values["n_each"])
    ]
    profile = molab.decay_profile(records)
    path = os.path.join(out_dir, "decay.csv")
    _csvio.write_columns(
        path, ["h", "ratio", "stderr"], [profile.h, profile.ratio, profile.stderr]
    )
    return [path]


def _run_llob(config, out_dir, seed):
    values = config.section("llob")
    params = llob.LlobParams(D=values["D"], nu=values["nu"], lam=values["lam"])
    etas = np.geomspace(values["eta_min"], values["eta_max"], values["n_eta"])
    sizes = etas * params.J * values["T"]
    eta_out, impacts = llob.impact_curve(params, sizes, values["T"])
    curve_path = os.path.join(out_dir, "curve.csv")
    _csvio.write_columns(curve_path, ["eta", "impact"], [eta_out, impacts])
    width = 25.0 / math.sqrt(params.nu / params.D)
    y = np.linspace(-width, width, 2001)
    profile = llob.stationary_profile(params, y)
    profile_path = os.path.join(out_dir, "profile.csv")
    llob.write_profile_csv(profile_path, y, profile)
    traj = llob.price_trajectory_selfconsistent(
        params, sizes[-1] / values["T"], values["T"]
    )
    traj_path = os.path.join(out_dir, "trajectory.csv")
    llob.write_trajectory_csv(traj_path, traj.t, traj.y)
    return [curve_path, profile_path, traj_path]


def _run_coimpact(config, out_dir, seed):
    values = config.section("coimpact")
    law = coimpact.ParetoSizes(
        alpha=values["alpha"], xmin=values["xmin"], xmax=values["xmax"]
    )
    phis = np.geomspace(values["phi_min"], values["phi_max"], values["n_phi"])
    curve = coimpact.conditional_impact(
        phis,
        values["N"],
        values["rho"],
        size_law=law,
        n_mc=values["n_mc"],
        seed=seed,
        Y=values["Y"],
        delta=values["delta"],
    )
    path = os.path.join(out_dir, "curve.csv")
    _csvio.write_columns(
        path,
        ["phi", "impact", "stderr", "n"],
        [curve.phi, curve.impact, curve.stderr, np.full(len(curve.phi), curve.count)],
    )
    return [path]


KIND_RUNNERS = {
    "flow": _run_flow,
    "book": _run_book,
    "stats": _run_stats,
    "response": _run_response,
    "calibrate": _run_calibrate,
    "impact-curve": _run_impact_curve,
    "surface": _run_surface,
    "decay": _run_decay,
    "llob": _run_llob,
    "coimpact": _run_coimpact,
}


class ExperimentError(ImpactLabError):
    """One or more replicas failed; details are in the manifest."""

    def __init__(self, message, manifest):
        super().__init__(message)
        self.manifest = manifest


def run_experiment(config, out_dir, master_seed=None, replicas=None):
    """Execute all replicas of a validated config.

    Outputs land in out_dir/r000, r001, ...; the canonical config text and
    a manifest.json are written at the top level.  Replica failures are
    recorded in the manifest and reported by raising ExperimentError after
    all replicas have been attempted.
    """
    master = config.seed if master_seed is None else int(master_seed)
    n_replicas = config.replicas if replicas is None else int(replicas)
    if n_replicas < 1:
        raise ValueError("replica count must be >= 1")
    os.makedirs(out_dir, exist_ok=True)
    with _csvio.atomic_write(os.path.join(out_dir, "config.txt")) as fh:
        fh.write(serialize_config(config))
    runner = KIND_RUNNERS[config.kind]
    replica_entries = []
    errors = []
    for i in range(n_replicas):
        seed_i = replica_seed(master, i)
        rdir = os.path.join(out_dir, f"r{i:03d}")
        os.makedirs(rdir, exist_ok=True)
        t0 = time.perf_counter()
        try:
            files = runner(config, rdir, seed_i)
            entry_files = [
                {
                    "name": os.path.relpath(f, out_dir),
                    "sha256": _csvio.sha256_file(f),
                }
                for f in files
            ]
            replica_entries.append(
                {
                    "index": i,
                    "seed": seed_i,
                    "files": entry_files,
                    "seconds": time.perf_counter() - t0,
                }
            )
        except Exception as exc:
            errors.append({"index": i, "seed": seed_i, "error": str(exc)})
    manifest = {
        "kind": config.kind,
        "config_hash": config_hash(config),
        "version": __version__,
        "backend": backend_name(),
        "master_seed": master,
        "replicas": replica_entries,
        "errors": errors,
    }
    with _csvio.atomic_write(os.path.join(out_dir, "manifest.json")) as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if errors:
        raise ExperimentError(
            f"{len(errors)} of {n_replicas} replicas failed", manifest
        )
    return manifest
