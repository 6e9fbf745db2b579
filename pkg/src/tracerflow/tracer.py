"""Passive tracer advection and the Lagrangian observation records.

The tracer solves dx/dt = V(t, x(t)) through the exact-in-law Ornstein-
Uhlenbeck field.  The observation process (the field seen from the tracer)
is produced by the exact Fourier shift of the Eulerian field, which carries
no extra discretization error; the Galerkin stepper in :mod:`field` exists
for cross-validation of that construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectrum import SpectrumModel
from .field import (FourierField, OUState, NumericalFailure, _eval_unchecked,
                    evaluate, ou_exact_step, sample_stationary, sobolev_norm)

TWO_PI = 2.0 * math.pi


@dataclass
class TracerState:
    """Tracer position on the torus plus unwrapped displacement (radians)."""

    position: np.ndarray      # componentwise in [0, 2pi)
    displacement: np.ndarray  # unwrapped
    time: float = 0.0


@dataclass
class TrajectoryRecord:
    """Sampled time series of one tracer run."""

    times: np.ndarray            # (n,)
    positions: np.ndarray        # (n, d)
    displacements: np.ndarray    # (n, d)
    velocities: np.ndarray       # (n, d), field value at the tracer
    field_norms: np.ndarray      # (n,), X^m norm of the shifted field
    seed: int
    dt: float
    ref_distances: np.ndarray | None = None

    def __post_init__(self):
        n = self.times.size
        for arr in (self.positions, self.displacements, self.velocities):
            if arr.shape[0] != n:
                raise ValueError("record columns have unequal lengths")
        if self.field_norms.shape[0] != n:
            raise ValueError("record columns have unequal lengths")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("record times must be strictly increasing")

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def index_at(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not on the record grid")
        return i


def wrap_torus(x: np.ndarray) -> np.ndarray:
    return np.mod(x, TWO_PI)


def shift_field(f: FourierField, a) -> FourierField:
    """Recentre the field at a: coefficient at k multiplied by e^{i k.a}.

    Unit-modulus multipliers, so every X^r norm is preserved exactly.
    """
    a = np.asarray(a, dtype=float)
    mult = np.exp(1j * (f.model.wavevectors @ a))
    return FourierField(f.model, f.coeffs * mult[:, None])


def advect_step(tracer: TracerState, ou: OUState, dt: float,
                rng: np.random.Generator) -> tuple[TracerState, OUState]:
    """One coupled step: field advanced by two exact half-steps, tracer by RK4.

    The field snapshots at t, t+dt/2, t+dt feed the four Runge-Kutta stages
    at their standard times, so the field stays exact in law at stage times.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if abs(tracer.time - ou.time) > 1e-9 * max(1.0, abs(ou.time)):
        raise ValueError("tracer and field clocks disagree")
    model = ou.field.model
    k = model.wavevectors
    half = ou_exact_step(ou, dt / 2.0, rng)
    full = ou_exact_step(half, dt / 2.0, rng)
    c0, ch, c1 = ou.field.coeffs, half.field.coeffs, full.field.coeffs
    x = tracer.position
    k1 = _eval_unchecked(c0, k, x)
    k2 = _eval_unchecked(ch, k, wrap_torus(x + (0.5 * dt) * k1))
    k3 = _eval_unchecked(ch, k, wrap_torus(x + (0.5 * dt) * k2))
    k4 = _eval_unchecked(c1, k, wrap_torus(x + dt * k3))
    delta = (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if not np.all(np.isfinite(delta)):
        raise NumericalFailure("non-finite tracer increment")
    new = TracerState(position=wrap_torus(x + delta),
                      displacement=tracer.displacement + delta,
                      time=tracer.time + dt)
    return new, full


def run_lagrangian(model: SpectrumModel, T: float, dt: float,
                   record_every: int, seed: int,
                   reference_field: FourierField | None = None) -> TrajectoryRecord:
    """Simulate one tracer through a stationary field realisation.

    The field starts from its invariant law, the tracer at the origin.  At
    each record point the run stores the field value at the tracer (the
    observation-process value at the origin) and the X^m norm of the field
    recentred at the tracer.  With a reference_field given, the X^m distance
    of the recentred field to it is recorded as well.
    """
    if T <= 0.0 or dt <= 0.0 or dt > T:
        raise ValueError("require 0 < dt <= T")
    if record_every < 1 or int(record_every) != record_every:
        raise ValueError("record_every must be a positive integer")
    rng = np.random.default_rng(seed)
    ou = OUState(sample_stationary(model, rng), 0.0)
    d = model.dimension
    tracer = TracerState(np.zeros(d), np.zeros(d), 0.0)

    n_steps = int(round(T / dt))
    rec_idx = list(range(0, n_steps + 1, int(record_every)))
    if rec_idx[-1] != n_steps:
        rec_idx.append(n_steps)
    n_rec = len(rec_idx)
    times = np.empty(n_rec)
    positions = np.empty((n_rec, d))
    displacements = np.empty((n_rec, d))
    velocities = np.empty((n_rec, d))
    norms = np.empty(n_rec)
    dists = np.empty(n_rec) if reference_field is not None else None

    def record(j, step):
        times[j] = step * dt
        positions[j] = tracer.position
        displacements[j] = tracer.displacement
        velocities[j] = evaluate(ou.field, tracer.position)
        shifted = shift_field(ou.field, tracer.position)
        norms[j] = sobolev_norm(shifted, model.m)
        if dists is not None:
            diff = FourierField(model, shifted.coeffs - reference_field.coeffs)
            dists[j] = sobolev_norm(diff, model.m)

    record(0, 0)
    j = 1
    for step in range(1, n_steps + 1):
        tracer, ou = advect_step(tracer, ou, dt, rng)
        if j < n_rec and step == rec_idx[j]:
            record(j, step)
            j += 1
    return TrajectoryRecord(times=times, positions=positions,
                            displacements=displacements, velocities=velocities,
                            field_norms=norms, seed=int(seed), dt=dt,
                            ref_distances=dists)


def stokes_drift_estimate(records: list[TrajectoryRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Ensemble mean and standard error of displacement(T)/T across runs."""
    if len(records) < 2:
        raise ValueError("need at least two records")
    T = records[0].final_time
    for r in records[1:]:
        if abs(r.final_time - T) > 1e-9 * max(1.0, T):
            raise ValueError("records have mismatched horizons")
    per_run = np.stack([r.displacements[-1] / r.final_time for r in records])
    mean = per_run.mean(axis=0)
    stderr = per_run.std(axis=0, ddof=1) / math.sqrt(len(records))
    return mean, stderr


def displacement_identity_gap(record: TrajectoryRecord) -> float:
    """Max-norm gap between the trapezoid integral of the recorded velocity
    and the recorded displacement (both relative to the start)."""
    integral = np.concatenate([
        np.zeros((1, record.velocities.shape[1])),
        np.cumsum(0.5 * (record.velocities[1:] + record.velocities[:-1]) *
                  np.diff(record.times)[:, None], axis=0)])
    gap = integral - (record.displacements - record.displacements[0])
    return float(np.abs(gap).max())


CSV_FLOAT = repr


def csv_columns(d: int) -> list[str]:
    cols = ["run_id", "t"]
    cols += [f"x{i}" for i in range(1, d + 1)]
    cols += [f"disp{i}" for i in range(1, d + 1)]
    cols += [f"v{i}" for i in range(1, d + 1)]
    cols.append("norm")
    return cols


def trajectory_csv_rows(run_id: int, record: TrajectoryRecord):
    for i in range(record.times.size):
        vals = [str(run_id), CSV_FLOAT(float(record.times[i]))]
        for arr in (record.positions, record.displacements, record.velocities):
            vals += [CSV_FLOAT(float(v)) for v in arr[i]]
        vals.append(CSV_FLOAT(float(record.field_norms[i])))
        yield ",".join(vals)
