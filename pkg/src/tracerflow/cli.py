"""Command-line front end: config ingestion, orchestration, result emission.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 a
validation or acceptance check failed.  Those codes are the only
machine-readable success signal; stderr carries diagnostic prose only.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from ._ensemble import run_trajectory_ensemble
from ._util import derive_seed
from .chain import (kernel_power_closed_form, kernel_power_profile,
                    ladder_weights, simulate_paths, default_observable)
from .config import (ConfigError, ExperimentConfig, RunManifest, config_hash,
                     parse_config)
from .ergodic import (ObservableSpec, e_property_probe, lln_test, moment_scan,
                      stability_probe, stationary_norm_moment, summarize_run)
from .field import (NumericalFailure, SymmetryViolation,
                    modulus_decay_report, ou_covariance_report)
from .spectrum import (SpectrumError, build_power_law_spectrum, check_h1,
                       check_h2, gamma_star, h2_tail_bound)
from .tracer import (csv_columns, run_lagrangian, stokes_drift_estimate,
                     trajectory_csv_rows)

SUBCOMMANDS = ("validate", "field", "decay", "tracer", "ergodic", "chain")

H2_T_MAX = 20.0
H2_QUAD_STEPS = 4000
CONVERGENCE_RTOL = 0.10
DECAY_TOL = 1e-6


class CheckFailure(RuntimeError):
    """A validation/acceptance style check did not meet its threshold."""


def _build_model(cfg: ExperimentConfig):
    sp = cfg.spectrum
    return build_power_law_spectrum(sp.dimension, sp.truncation, sp.sigma0,
                                    sp.decay_p, sp.projection, sp.gamma_coeff,
                                    sp.gamma_power, m=sp.m, alpha=sp.alpha)


def _manifest(cfg: ExperimentConfig, n_runs: int) -> RunManifest:
    created = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return RunManifest.build(cfg, __version__, n_runs, created)


def _probe_record(cfg, probe: str, params: dict, estimate, stderr) -> str:
    rec = {"probe": probe, "params": params, "estimate": estimate,
           "stderr": stderr, "seed": cfg.simulation.seed,
           "config_hash": config_hash(cfg)}
    return json.dumps(rec, sort_keys=True)


def _write_jsonl(path: str, manifest: RunManifest, lines: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"manifest": asdict(manifest)}) + "\n")
        for line in lines:
            fh.write(line + "\n")


def _write_csv(path: str, manifest: RunManifest, columns: list[str],
               rows) -> None:
    with open(path, "w") as fh:
        for line in manifest.header_lines():
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(row + "\n")


def _cmd_validate(cfg: ExperimentConfig, out: str, threads: int) -> None:
    model = _build_model(cfg)
    sp = cfg.spectrum
    gs = gamma_star(model)
    h1_full = check_h1(model)
    h2_full = check_h2(model, H2_T_MAX, H2_QUAD_STEPS)
    lines = [_probe_record(cfg, "gamma_star", {"K": sp.truncation}, gs, 0.0),
             _probe_record(cfg, "h1_sum", {"K": sp.truncation}, h1_full, 0.0),
             _probe_record(cfg, "h2_quadrature",
                           {"K": sp.truncation, "t_max": H2_T_MAX,
                            "tail_bound": h2_tail_bound(model, H2_T_MAX)},
                           h2_full, 0.0)]
    converged = True
    if sp.truncation >= 2:
        half = build_power_law_spectrum(sp.dimension, sp.truncation // 2,
                                        sp.sigma0, sp.decay_p, sp.projection,
                                        sp.gamma_coeff, sp.gamma_power,
                                        m=sp.m, alpha=sp.alpha)
        h1_half = check_h1(half)
        h2_half = check_h2(half, H2_T_MAX, H2_QUAD_STEPS)
        rel1 = abs(h1_full - h1_half) / max(h1_full, 1e-300)
        rel2 = abs(h2_full - h2_half) / max(h2_full, 1e-300)
        converged = rel1 <= CONVERGENCE_RTOL and rel2 <= CONVERGENCE_RTOL
        lines.append(_probe_record(cfg, "h1_half_truncation_change",
                                   {"K_half": sp.truncation // 2}, rel1, 0.0))
        lines.append(_probe_record(cfg, "h2_half_truncation_change",
                                   {"K_half": sp.truncation // 2}, rel2, 0.0))
    _write_jsonl(out, _manifest(cfg, 0), lines)
    print(f"gamma_star={gs} h1={h1_full} h2={h2_full} converged={converged}",
          file=sys.stderr)
    if not converged:
        raise CheckFailure("partial sums changed by more than "
                           f"{CONVERGENCE_RTOL:.0%} under truncation halving")


def _cmd_field(cfg: ExperimentConfig, out: str, threads: int) -> None:
    model = _build_model(cfg)
    rep = ou_covariance_report(model, ensemble=max(cfg.simulation.ensemble, 2),
                               lags=(0.1, 0.5, 1.0), seed=cfg.simulation.seed)
    lines = [_probe_record(cfg, "ou_eqtime_covariance",
                           {"ensemble": rep["ensemble"]},
                           rep["max_eqtime_frobenius_rel"], 0.0),
             _probe_record(cfg, "ou_pseudo_covariance",
                           {"ensemble": rep["ensemble"]},
                           rep["max_pseudo_cov_norm"], 0.0)]
    for h, err in rep["max_lag_corr_abs_err"].items():
        lines.append(_probe_record(cfg, "ou_lag_correlation",
                                   {"lag": h, "ensemble": rep["ensemble"]},
                                   err, 0.0))
    _write_jsonl(out, _manifest(cfg, 0), lines)


def _cmd_decay(cfg: ExperimentConfig, out: str, threads: int) -> None:
    model = _build_model(cfg)
    sim = cfg.simulation
    rep = modulus_decay_report(model, n_starts=sim.ensemble,
                               horizon=min(sim.T, 5.0), dt=sim.dt,
                               seed=sim.seed)
    lines = [_probe_record(cfg, "modulus_decay_rel_error",
                           {"n_starts": rep["n_starts"], "dt": rep["dt"],
                            "horizon": rep["horizon"]},
                           rep["max_rel_modulus_error"], 0.0),
             _probe_record(cfg, "norm_contraction_excess", {},
                           rep["max_norm_excess"], 0.0)]
    _write_jsonl(out, _manifest(cfg, 0), lines)
    if rep["max_rel_modulus_error"] > DECAY_TOL:
        raise CheckFailure("per-mode modulus decay error "
                           f"{rep['max_rel_modulus_error']:.3g} exceeds {DECAY_TOL}")
    if rep["max_norm_excess"] > 1e-9:
        raise CheckFailure("norm contraction violated beyond 1e-9")


def _cmd_tracer(cfg: ExperimentConfig, out: str, threads: int) -> None:
    model = _build_model(cfg)
    sim = cfg.simulation
    records = run_trajectory_ensemble(model, sim.T, sim.dt, sim.record_every,
                                      sim.seed, sim.ensemble, threads=threads)
    manifest = _manifest(cfg, sim.ensemble)

    def rows():
        for rid, rec in enumerate(records):
            yield from trajectory_csv_rows(rid, rec)

    _write_csv(out, manifest, csv_columns(model.dimension), rows())
    if len(records) >= 2:
        mean, stderr = stokes_drift_estimate(records)
        drift_lines = [_probe_record(
            cfg, "stokes_drift",
            {"T": sim.T, "ensemble": sim.ensemble, "component": i},
            float(mean[i]), float(stderr[i])) for i in range(mean.size)]
        _write_jsonl(out + ".drift.jsonl", manifest, drift_lines)


def _cmd_ergodic(cfg: ExperimentConfig, out: str, threads: int) -> None:
    model = _build_model(cfg)
    sim, pr = cfg.simulation, cfg.probe
    seed = sim.seed
    psi = ObservableSpec(kind=pr.observable,
                         component=pr.component if pr.observable == "velocity_at_origin" else None,
                         delta=pr.delta if pr.observable == "indicator_ball" else None)
    lines = []

    rec = run_lagrangian(model, sim.T, sim.dt, sim.record_every,
                         derive_seed(seed, 101))
    summary = summarize_run(rec, psi, delta=pr.delta)
    lines.append(_probe_record(cfg, "occupation_fraction",
                               {"delta": summary.delta, "T": sim.T},
                               summary.occupation_fraction, 0.0))
    lines.append(_probe_record(cfg, "occupation_window_min",
                               {"delta": summary.delta, "T": sim.T},
                               summary.window_min, 0.0))
    lines.append(_probe_record(cfg, "time_average",
                               {"observable": pr.observable, "T": sim.T},
                               summary.time_avg, summary.time_avg_stderr))

    scan = moment_scan(model, pr.R, pr.n, T=min(sim.T, 10.0),
                       ensemble=max(sim.ensemble, 2), seed=derive_seed(seed, 102))
    lines.append(_probe_record(cfg, "moment_scan",
                               {"R": pr.R, "n": pr.n,
                                "stationary_value": scan.stationary_value,
                                "max_value": scan.max_value},
                               scan.settled_max, 0.0))

    eps = pr.eps if pr.eps is not None else \
        3.0 * math.sqrt(stationary_norm_moment(model, 1))
    stab = stability_probe(model, None, eps, T=min(sim.T, 2.0),
                           ensemble=max(sim.ensemble, 2),
                           seed=derive_seed(seed, 103), dt=sim.dt)
    lines.append(_probe_record(cfg, "stability_probe",
                               {"eps": eps, "T": stab.horizon},
                               stab.probability, stab.stderr))

    coup = e_property_probe(model, None, pr.offsets, psi, T=min(sim.T, 2.0),
                            ensemble=max(sim.ensemble, 2),
                            seed=derive_seed(seed, 104), dt=sim.dt)
    for h, dval, se in zip(coup.offsets, coup.profile, coup.stderr):
        lines.append(_probe_record(cfg, "e_property",
                                   {"offset": float(h), "T": coup.horizon},
                                   float(dval), float(se)))

    horizons = [t for t in pr.horizons if t <= sim.T]
    if len(horizons) >= 2:
        lln = lln_test(model, psi, horizons, ensemble=max(sim.ensemble, 2),
                       seed=derive_seed(seed, 105), dt=sim.dt,
                       record_every=sim.record_every)
        for T, var in zip(lln.horizons, lln.variances):
            lines.append(_probe_record(cfg, "lln_variance",
                                       {"T": float(T),
                                        "observable": pr.observable},
                                       float(var), 0.0))
    _write_jsonl(out, _manifest(cfg, 0), lines)


def _cmd_chain(cfg: ExperimentConfig, out: str, threads: int) -> None:
    pr = cfg.probe
    seed = cfg.simulation.seed
    f = default_observable
    rows = []
    for xi, x in enumerate(pr.chain_x):
        n_max = pr.chain_n_max
        profile = kernel_power_profile(x, n_max, f)
        stay = ladder_weights(x, n_max)[0] if x >= 1.0 else None
        rng_seed = derive_seed(seed, 200 + xi)
        # one MC sweep records the running mean of f at every horizon
        states = np.full(pr.mc_paths, float(x))
        mc_mean = np.empty(n_max + 1)
        mc_se = np.empty(n_max + 1)
        rng = np.random.default_rng(rng_seed)
        vals = np.tanh(states)
        mc_mean[0], mc_se[0] = vals.mean(), 0.0
        for n in range(1, n_max + 1):
            on_ladder = states >= 1.0
            u = rng.random(pr.mc_paths)
            climb = u < np.exp(-1.0 / np.where(on_ladder, states, 1.0) ** 2)
            states = np.where(on_ladder,
                              np.where(climb, states + 1.0, -states),
                              -(states + 1.0) / 2.0 - 1.0)
            vals = np.tanh(states)
            mc_mean[n] = vals.mean()
            mc_se[n] = vals.std(ddof=1) / math.sqrt(pr.mc_paths)
        for n in range(1, n_max + 1):
            closed = kernel_power_closed_form(x, n, f) if x >= 1.0 else float("nan")
            h_n = float(stay[n]) if stay is not None else float("nan")
            rows.append(",".join([repr(float(x)), str(n), repr(float(closed)),
                                  repr(float(profile[n])), repr(float(mc_mean[n])),
                                  repr(float(mc_se[n])), repr(h_n)]))
    _write_csv(out, _manifest(cfg, 0), ["x", "n", "closed", "exact", "mc",
                                        "mc_stderr", "H_n"], rows)


_HANDLERS = {"validate": _cmd_validate, "field": _cmd_field,
             "decay": _cmd_decay, "tracer": _cmd_tracer,
             "ergodic": _cmd_ergodic, "chain": _cmd_chain}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tracerflow",
        description="Spectral Monte-Carlo simulator and ergodicity diagnostics "
                    "for passive tracer transport")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", required=True, help="output artifact path")
    parser.add_argument("--seed-override", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if args.seed_override is not None:
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
            if isinstance(raw, dict):
                raw.pop("seed", None)
                raw.setdefault("simulation", {})["seed"] = args.seed_override
            text = json.dumps(raw)
        cfg = parse_config(text)
        _HANDLERS[args.subcommand](cfg, args.out, max(1, args.threads))
    except (ConfigError, SpectrumError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, SymmetryViolation) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
