"""Empirical probes for ergodicity of the observation process.

Everything here is a seeded Monte-Carlo diagnostic, not a proof device:
time averages along runs, occupation lower bounds with a sliding-window
liminf proxy, norm-moment scans certifying tightness via Chebyshev,
noiseless-versus-noisy stability probes, and shared-noise coupling scans
that upper-bound the equicontinuity modulus of the transition semigroup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._util import derive_seed
from .spectrum import SpectrumModel
from .field import (FourierField, ens_norm_m, ens_observation_step,
                    ens_origin_value, ens_ou_step, ens_pair_noise, ens_tile,
                    noiseless_flow_step, sample_stationary, sobolev_norm,
                    zero_field)
from .tracer import TrajectoryRecord

OBSERVABLE_KINDS = ("bounded_lipschitz_of_norm", "velocity_at_origin",
                    "indicator_ball")


@dataclass(frozen=True)
class ObservableSpec:
    """Observable evaluated along observation-process states.

    bounded_lipschitz_of_norm: tanh(||z||_{X^m}^2), bounded and Lipschitz.
    velocity_at_origin: component of z(0) (all components when None).
    indicator_ball: 1{||z - center||_{X^m} < delta}.
    """

    kind: str = "bounded_lipschitz_of_norm"
    component: int | None = None
    center: FourierField | None = None
    delta: float | None = None

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "indicator_ball" and not (self.delta and self.delta > 0):
            raise ValueError("indicator_ball requires delta > 0")

    def from_norm(self, norms: np.ndarray) -> np.ndarray:
        if self.kind == "bounded_lipschitz_of_norm":
            return np.tanh(np.asarray(norms) ** 2)
        if self.kind == "indicator_ball" and _is_zero_center(self.center):
            return (np.asarray(norms) < self.delta).astype(float)
        raise ValueError(f"{self.kind} cannot be computed from norms alone")

    def series(self, record: TrajectoryRecord) -> np.ndarray:
        if self.kind == "velocity_at_origin":
            if self.component is None:
                return record.velocities
            return record.velocities[:, self.component]
        if self.kind == "indicator_ball" and not _is_zero_center(self.center):
            if record.ref_distances is None:
                raise ValueError("record lacks distances to the requested center")
            return (record.ref_distances < self.delta).astype(float)
        return self.from_norm(record.field_norms)

    def on_stacked(self, model: SpectrumModel, cpos: np.ndarray) -> np.ndarray:
        """Evaluate on stacked representative slices (members, n_pairs, d)."""
        if self.kind == "velocity_at_origin":
            vals = ens_origin_value(cpos)
            return vals if self.component is None else vals[..., self.component]
        if self.kind == "indicator_ball" and not _is_zero_center(self.center):
            dist = ens_norm_m(model, cpos - self.center.coeffs[model.pair_pos])
            return (dist < self.delta).astype(float)
        return self.from_norm(ens_norm_m(model, cpos))


def _is_zero_center(center: FourierField | None) -> bool:
    return center is None or not np.any(center.coeffs)


def _unit_direction(model: SpectrumModel, rng: np.random.Generator) -> FourierField:
    """Random X^m-unit perturbation direction; deterministic fallback when the
    model carries no energy to sample from."""
    f = sample_stationary(model, rng)
    nrm = sobolev_norm(f, model.m)
    if nrm > 0.0:
        return FourierField(f.model, f.coeffs / nrm)
    c = np.zeros((model.size, model.dimension), dtype=complex)
    i = model.pair_pos[0]
    c[i, 0] = 1.0
    c[model.pair_neg[0], 0] = 1.0
    f = FourierField(model, c)
    return FourierField(model, c / sobolev_norm(f, model.m))


def time_average(record: TrajectoryRecord, psi: ObservableSpec):
    """Trapezoid time average of the observable along the record."""
    if record.times.size < 2:
        raise ValueError("record too short to average")
    series = psi.series(record)
    span = record.times[-1] - record.times[0]
    return np.trapezoid(series, record.times, axis=0) / span


def time_average_with_stderr(record: TrajectoryRecord, psi: ObservableSpec,
                             n_batches: int = 20) -> tuple[float, float]:
    """Time average plus a batch-means standard error (scalar observables)."""
    series = np.asarray(psi.series(record), dtype=float)
    if series.ndim != 1:
        raise ValueError("batch-means stderr needs a scalar observable")
    avg = float(time_average(record, psi))
    batches = np.array_split(series, n_batches)
    means = np.array([b.mean() for b in batches if b.size])
    stderr = float(means.std(ddof=1) / math.sqrt(means.size))
    return avg, stderr


@dataclass
class OccupationReport:
    fraction: float
    window_min: float
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("occupation fraction outside [0, 1]")


@dataclass
class ErgodicReport:
    """Single-run summary: time average plus occupation diagnostics."""

    horizon: float
    time_avg: float
    time_avg_stderr: float
    occupation_fraction: float
    window_min: float
    delta: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.occupation_fraction <= 1.0:
            raise ValueError("occupation fraction outside [0, 1]")


def summarize_run(record: TrajectoryRecord, psi: ObservableSpec,
                  delta: float | None = None) -> ErgodicReport:
    """Bundle the standard per-run diagnostics (delta defaults to twice the
    median recorded norm, the convention used by the occupation probe)."""
    if delta is None:
        delta = 2.0 * float(np.median(record.field_norms))
    avg, se = time_average_with_stderr(record, psi)
    occ = occupation_fraction(record, None, delta)
    return ErgodicReport(horizon=record.final_time, time_avg=avg,
                         time_avg_stderr=se,
                         occupation_fraction=occ.fraction,
                         window_min=occ.window_min, delta=delta,
                         seed=record.seed)


def occupation_fraction(record: TrajectoryRecord, z: FourierField | None,
                        delta: float) -> OccupationReport:
    """Fraction of recorded times with ||Z(t) - z||_{X^m} < delta.

    window_min is a liminf proxy: the smallest window average among windows
    of width one quarter of the run sliding across its second half (an
    artifact convention, not the true liminf).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if _is_zero_center(z):
        dist = record.field_norms
    elif record.ref_distances is not None:
        dist = record.ref_distances
    else:
        raise ValueError("record lacks distances to the requested center; "
                         "rerun with reference_field=z")
    hits = (dist < delta).astype(float)
    n = hits.size
    half = n // 2
    width = max(1, n // 4)
    mins = [hits[s:s + width].mean() for s in range(half, n - width + 1)] or [hits[half:].mean()]
    return OccupationReport(fraction=float(hits.mean()),
                            window_min=float(min(mins)), delta=float(delta))


def stationary_norm_moment(model: SpectrumModel, n: int) -> float:
    """Closed-form stationary E||V||_{X^m}^{2n} for n in {1, 2}.

    n=1: S2 = sum_k |k|^{2m} Tr energy(k) over all sites.
    n=2: S2^2 + 2 sum_k |k|^{4m} Tr(energy(k)^2), from the chi-square
    structure of independent circular Gaussian conjugate pairs.
    """
    w = model.sobolev_weight(model.m)
    tr = np.real(np.trace(model.energy, axis1=1, axis2=2))
    s2 = float((w * tr).sum())
    if n == 1:
        return s2
    if n == 2:
        tr_sq = np.real(np.trace(np.einsum("kij,kjl->kil", model.energy,
                                           model.energy), axis1=1, axis2=2))
        return s2 ** 2 + 2.0 * float((w ** 2 * tr_sq).sum())
    raise ValueError("closed form implemented for n in {1, 2} only")


@dataclass
class MomentScan:
    times: np.ndarray
    ensemble_means: np.ndarray
    max_value: float
    settled_max: float
    stationary_value: float | None
    R: float
    n: int


def moment_scan(model: SpectrumModel, R: float, n: int, T: float,
                ensemble: int, seed: int, grid_dt: float = 0.1) -> MomentScan:
    """Ensemble mean of ||V(t)||_{X^m}^{2n} from a worst-case start of norm R.

    The start is a fixed random direction scaled to X^m norm R, shared by
    all members; the field is advanced by exact steps on the grid.  The
    full-grid max certifies finiteness, settled_max (max over t >= T/2) is
    the plateau to compare with the stationary closed form.  Chebyshev on
    these moments yields the tightness certificate.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if ensemble < 2:
        raise ValueError("ensemble must be >= 2")
    rng = np.random.default_rng(seed)
    direction = sample_stationary(model, rng)
    nrm = sobolev_norm(direction, model.m)
    if R > 0.0 and nrm == 0.0:
        raise ValueError("cannot scale a zero direction to positive radius")
    start = direction.coeffs * (R / nrm) if R > 0.0 and nrm > 0.0 else \
        np.zeros_like(direction.coeffs)
    cpos = np.tile(start[None, model.pair_pos, :], (ensemble, 1, 1))
    n_steps = int(round(T / grid_dt))
    times = np.arange(n_steps + 1) * grid_dt
    means = np.empty(n_steps + 1)
    means[0] = float((ens_norm_m(model, cpos) ** (2 * n)).mean())
    for i in range(1, n_steps + 1):
        cpos = ens_ou_step(model, cpos, grid_dt, rng)
        means[i] = float((ens_norm_m(model, cpos) ** (2 * n)).mean())
    settled = means[times >= T / 2.0]
    try:
        stat = stationary_norm_moment(model, n)
    except ValueError:
        stat = None
    return MomentScan(times=times, ensemble_means=means,
                      max_value=float(means.max()),
                      settled_max=float(settled.max()),
                      stationary_value=stat, R=float(R), n=int(n))


@dataclass
class StabilityReport:
    probability: float
    stderr: float
    eps: float
    horizon: float


def stability_probe(model: SpectrumModel, x: FourierField | None, eps: float,
                    T: float, ensemble: int, seed: int,
                    dt: float = 1e-3) -> StabilityReport:
    """Fraction of noisy runs staying eps-close in X^m to the noiseless flow at T."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    x = x if x is not None else zero_field(model)
    n_steps = int(round(T / dt))
    y = x
    for _ in range(n_steps):
        y = noiseless_flow_step(y, dt)
    cpos = ens_tile(x, ensemble)
    scale = model.noise_scale(dt)
    for _ in range(n_steps):
        noise = ens_pair_noise(model, rng, scale, ensemble)
        cpos = ens_observation_step(model, cpos, dt, noise)
    dist = ens_norm_m(model, cpos - y.coeffs[None, model.pair_pos, :])
    hits = (dist < eps).astype(float)
    p = float(hits.mean())
    return StabilityReport(probability=p,
                           stderr=float(hits.std(ddof=1) / math.sqrt(ensemble)),
                           eps=float(eps), horizon=float(T))


@dataclass
class CouplingReport:
    offsets: np.ndarray
    profile: np.ndarray       # D(h) per offset
    stderr: np.ndarray        # ensemble stderr at the maximizing time
    horizon: float


def e_property_probe(model: SpectrumModel, x: FourierField | None,
                     offsets, psi: ObservableSpec, T: float, ensemble: int,
                     seed: int, dt: float = 1e-3,
                     record_stride: int = 10) -> CouplingReport:
    """Shared-noise coupling estimate of sup_t |P_t psi(x) - P_t psi(x + h v)|.

    For each offset h the probe runs coupled members (identical noise within
    a pair, independent across pairs) from x and x + h v along a fixed unit
    direction v, and reports D(h) = max over recorded times of the absolute
    difference of the ensemble means.  h = 0 gives exactly zero.  This is a
    diagnostic upper-bound estimator for the equicontinuity modulus, not a
    proof reproduction.
    """
    rng = np.random.default_rng(seed)
    x = x if x is not None else zero_field(model)
    direction = _unit_direction(model, rng)
    n_steps = int(round(T / dt))
    scale = model.noise_scale(dt)
    offsets = np.asarray(list(offsets), dtype=float)
    if np.any(offsets < 0.0) or np.any(np.diff(offsets) > 0.0):
        raise ValueError("offsets must be nonnegative and sorted decreasing")

    profile = np.empty(offsets.size)
    stderrs = np.empty(offsets.size)
    for oi, h in enumerate(offsets):
        pair_rng = np.random.default_rng(derive_seed(seed, oi + 1))
        a = ens_tile(x, ensemble)
        b = ens_tile(FourierField(model, x.coeffs + h * direction.coeffs), ensemble)
        diff0 = psi.on_stacked(model, b) - psi.on_stacked(model, a)
        best_gap = abs(float(diff0.mean()))
        best_se = float(diff0.std(ddof=1) / math.sqrt(ensemble))
        for step in range(1, n_steps + 1):
            noise = ens_pair_noise(model, pair_rng, scale, ensemble)
            a = ens_observation_step(model, a, dt, noise)
            b = ens_observation_step(model, b, dt, noise)
            if step % record_stride and step != n_steps:
                continue
            diff = psi.on_stacked(model, b) - psi.on_stacked(model, a)
            gap = abs(float(diff.mean()))
            if gap > best_gap:
                best_gap = gap
                best_se = float(diff.std(ddof=1) / math.sqrt(ensemble))
        profile[oi] = best_gap
        stderrs[oi] = best_se
    return CouplingReport(offsets=offsets, profile=profile, stderr=stderrs,
                          horizon=float(T))


@dataclass
class LLNReport:
    horizons: np.ndarray
    variances: np.ndarray
    ratios: np.ndarray     # variance[i+1] / variance[i]


def lln_test(model: SpectrumModel, psi: ObservableSpec, horizons, ensemble: int,
             seed: int, dt: float = 1e-2, record_every: int = 1) -> LLNReport:
    """Ensemble variance of the time average of psi at nested horizons.

    One ensemble is run to the largest horizon; shorter horizons reuse the
    same realisations (same seeds, nested in time), so the reported ratios
    isolate the averaging-window effect.
    """
    horizons = np.asarray(sorted(horizons), dtype=float)
    if horizons.size < 2:
        raise ValueError("need at least two horizons")
    from ._ensemble import run_trajectory_ensemble
    records = run_trajectory_ensemble(model, float(horizons[-1]), dt,
                                      record_every, seed, ensemble)
    variances = np.empty(horizons.size)
    for i, T in enumerate(horizons):
        vals = []
        for rec in records:
            j = rec.index_at(T)
            sub = TrajectoryRecord(times=rec.times[:j + 1],
                                   positions=rec.positions[:j + 1],
                                   displacements=rec.displacements[:j + 1],
                                   velocities=rec.velocities[:j + 1],
                                   field_norms=rec.field_norms[:j + 1],
                                   seed=rec.seed, dt=rec.dt)
            vals.append(time_average(sub, psi))
        vals = np.asarray(vals, dtype=float)
        variances[i] = float(vals.var(ddof=1)) if vals.ndim == 1 else \
            float(vals.var(axis=0, ddof=1).mean())
    ratios = variances[1:] / np.where(variances[:-1] > 0, variances[:-1], np.nan)
    return LLNReport(horizons=horizons, variances=variances, ratios=ratios)
