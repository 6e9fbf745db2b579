"""Fourier-space fields on the torus and their exact / Galerkin dynamics.

A field is the coefficient table of a real d-vector field

    V(xi) = sum_k c(k) e^{i k.xi},   c(-k) = conj(c(k)),

over the sites of a :class:`~tracerflow.spectrum.SpectrumModel`.  The module
provides the Sobolev norms, the decay semigroup, exact Ornstein-Uhlenbeck
stepping (one step equals the continuous transition kernel in law, for any
step size), the noiseless observation flow, the Galerkin splitting step for
the noisy observation process, and its tangent (first-variation) flow.

Stiff handling: per mode the linear part contributes an exact factor
exp(-gamma(k) dt), so the Runge-Kutta stages here act on the integrating-
factor transformed system.  The advective coupling is a pure phase rotation
per mode, hence moduli decay exactly like exp(-gamma(k) t) up to a tiny
phase-stage drift, which is what the decay diagnostics rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectrum import SpectrumModel

_SQRT2 = np.sqrt(2.0)


class NumericalFailure(RuntimeError):
    """Non-finite state detected during time stepping."""


class SymmetryViolation(RuntimeError):
    """Conjugate symmetry of the coefficients is broken beyond tolerance."""


@dataclass
class FourierField:
    """Coefficient table of a real vector field; value semantics."""

    model: SpectrumModel
    coeffs: np.ndarray  # (size, d) complex

    def copy(self) -> "FourierField":
        return FourierField(self.model, self.coeffs.copy())


@dataclass
class OUState:
    """Ornstein-Uhlenbeck field state with its clock (seconds)."""

    field: FourierField
    time: float = 0.0


def zero_field(model: SpectrumModel) -> FourierField:
    return FourierField(model, np.zeros((model.size, model.dimension), dtype=complex))


def _require_same_model(a: FourierField, b: FourierField) -> None:
    if a.model is not b.model:
        raise ValueError("fields belong to different spectrum models")


def check_conjugate_symmetry(f: FourierField, tol: float = 1e-12) -> None:
    """Raise unless c(-k) == conj(c(k)) within tol (relative to max |c|)."""
    c = f.coeffs
    if not np.all(np.isfinite(c)):
        raise NumericalFailure("non-finite field coefficients")
    dev = np.abs(c[f.model.pair_neg] - c[f.model.pair_pos].conj()).max(initial=0.0)
    if dev > tol * (1.0 + np.abs(c).max(initial=0.0)):
        raise SymmetryViolation(f"conjugate symmetry broken by {dev:.3g}")


def _check_finite(coeffs: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(coeffs)):
        raise NumericalFailure(f"non-finite coefficients after {what}")


def sobolev_norm(f: FourierField, r: float) -> float:
    """X^r norm: sqrt(sum_k |k|^{2r} |c(k)|^2)."""
    w = f.model.sobolev_weight(r)
    return float(np.sqrt((w * (np.abs(f.coeffs) ** 2).sum(axis=1)).sum()))


def apply_semigroup(f: FourierField, t: float) -> FourierField:
    """Decay semigroup: mode k multiplied by exp(-gamma(k) t)."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    return FourierField(f.model, f.coeffs * f.model.decay(t)[:, None])


def origin_value(f: FourierField) -> np.ndarray:
    """Field value at xi = 0 (all phases are 1); symmetric tables give a real sum."""
    return np.real(f.coeffs.sum(axis=0))


def evaluate(f: FourierField, xi, jacobian: bool = False):
    """Trigonometric synthesis of the field (and optionally its Jacobian) at xi.

    Exact at off-grid points; cost O(size).  Raises SymmetryViolation when
    the imaginary residue of the sum exceeds 1e-10 * ||f||_{X^0}.
    """
    xi = np.asarray(xi, dtype=float)
    k = f.model.wavevectors
    phases = np.exp(1j * (k @ xi))
    raw = phases @ f.coeffs
    scale = float(np.sqrt((np.abs(f.coeffs) ** 2).sum()))
    if np.abs(raw.imag).max(initial=0.0) > 1e-10 * scale:
        raise SymmetryViolation("imaginary residue in point evaluation")
    if not jacobian:
        return raw.real
    jac = np.real(1j * ((f.coeffs * phases[:, None]).T @ k.astype(float)))
    return raw.real, jac


def _eval_unchecked(coeffs: np.ndarray, k: np.ndarray, xi: np.ndarray) -> np.ndarray:
    return np.real(np.exp(1j * (k @ xi)) @ coeffs)


def pair_noise(model: SpectrumModel, rng: np.random.Generator,
               scale: np.ndarray | None = None, lead_shape: tuple = ()) -> np.ndarray:
    """Circular complex Gaussian increment, drawn once per conjugate pair.

    The representative site gets scale^2 * energy(k) as second-moment matrix
    (scale=None means 1); the mirror site gets the conjugate, so the
    resulting field perturbation is real.  Pseudo-covariance is zero by
    construction.
    """
    npairs = model.n_pairs
    d = model.dimension
    z = rng.standard_normal(lead_shape + (npairs, d, 2))
    w = (z[..., 0] + 1j * z[..., 1]) / _SQRT2
    eta = np.einsum("pij,...pj->...pi", model.sqrt_energy_pos, w)
    if scale is not None:
        eta = eta * scale[:, None]
    out = np.zeros(lead_shape + (model.size, d), dtype=complex)
    out[..., model.pair_pos, :] = eta
    out[..., model.pair_neg, :] = eta.conj()
    return out


def sample_stationary(model: SpectrumModel, rng: np.random.Generator) -> FourierField:
    """Draw from the invariant law: per-pair circular Gaussian with second moment energy(k)."""
    return FourierField(model, pair_noise(model, rng))


def ou_exact_step(state: OUState, dt: float, rng: np.random.Generator) -> OUState:
    """Advance the Ornstein-Uhlenbeck field by dt, exactly in law.

    c(k) <- exp(-gamma dt) c(k) + eta(k), with eta circular complex Gaussian
    of second moment (1 - exp(-2 gamma dt)) energy(k); lag-h covariances are
    exp(-gamma h) energy(k) for any partition of h into steps.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    m = state.field.model
    new = state.field.coeffs * m.decay(dt)[:, None] + \
        pair_noise(m, rng, scale=m.noise_scale(dt))
    _check_finite(new, "ou_exact_step")
    return OUState(FourierField(m, new), state.time + dt)


def covariance_oracle(model: SpectrumModel, h: float, k) -> np.ndarray:
    """Closed-form lag-h mode covariance exp(-gamma(k) h) energy(k)."""
    if h < 0.0:
        raise ValueError("lag must be nonnegative")
    i = model._lookup(k)
    return np.exp(-model.gamma[i] * h) * model.energy[i]


def origin_drift(psi: FourierField, phi: FourierField) -> FourierField:
    """Advection of phi by the value of psi at the origin.

    Coefficientwise i (u . k) phi_hat(k) with u = psi(0); u is real, so the
    sign of the multiplier flips with k and conjugate symmetry survives.
    """
    _require_same_model(psi, phi)
    u = origin_value(psi)
    mult = 1j * (phi.model.wavevectors @ u)
    return FourierField(phi.model, mult[:, None] * phi.coeffs)


def noiseless_flow_step(f: FourierField, dt: float) -> FourierField:
    """One step of the noiseless observation flow c' = (-gamma + i u(t).k) c.

    u(t) is the field value at the origin, so the system is coupled through
    a single d-vector.  Classical four-stage Runge-Kutta on the integrating-
    factor transform: the exp(-gamma dt) decay is applied exactly and the
    stages only integrate the phase rotation, keeping per-mode moduli on the
    exact decay envelope.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    m = f.model
    k = m.wavevectors.astype(float)
    e_half = m.decay(dt / 2.0)
    e_full = m.decay(dt)
    w0 = f.coeffs

    def rhs(w, decay):
        u = np.real((w * decay[:, None]).sum(axis=0))
        return (1j * (k @ u))[:, None] * w

    k1 = rhs(w0, m.decay(0.0))
    k2 = rhs(w0 + (0.5 * dt) * k1, e_half)
    k3 = rhs(w0 + (0.5 * dt) * k2, e_half)
    k4 = rhs(w0 + dt * k3, e_full)
    out = (w0 + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)) * e_full[:, None]
    _check_finite(out, "noiseless_flow_step")
    return FourierField(m, out)


def observation_step(f: FourierField, dt: float,
                     rng: np.random.Generator) -> FourierField:
    """Galerkin splitting step for the noisy observation process.

    Deterministic substep: multiply mode k by exp((-gamma(k) + i u.k) dt)
    with u frozen at the step start (weak order 1); then add the exact
    Ornstein-Uhlenbeck noise increment.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    m = f.model
    u = origin_value(f)
    factor = np.exp((-m.gamma + 1j * (m.wavevectors @ u)) * dt)
    new = f.coeffs * factor[:, None] + pair_noise(m, rng, scale=m.noise_scale(dt))
    _check_finite(new, "observation_step")
    return FourierField(m, new)


def tangent_step(z: FourierField, u_tan: FourierField, dt: float) -> FourierField:
    """One step of the first-variation flow along the observation dynamics.

    With the base state z frozen over the step, the tangent table U obeys
    U'(k) = (-gamma + i z0.k) U(k) + i (U(0).k) z_hat(k), z0 = z(0).
    Same integrating-factor Runge-Kutta as the noiseless flow, so z = 0
    reduces exactly to the decay semigroup.
    """
    _require_same_model(z, u_tan)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    m = z.model
    k = m.wavevectors.astype(float)
    z0 = origin_value(z)
    phase = (1j * (k @ z0))[:, None]
    zc = z.coeffs
    e_half = m.decay(dt / 2.0)
    e_full = m.decay(dt)
    g_half = 1.0 / e_half
    g_full = 1.0 / e_full
    w0 = u_tan.coeffs

    def rhs(w, decay, grow):
        u0 = np.real((w * decay[:, None]).sum(axis=0))
        return phase * w + grow[:, None] * ((1j * (k @ u0))[:, None] * zc)

    ones = m.decay(0.0)
    k1 = rhs(w0, ones, ones)
    k2 = rhs(w0 + (0.5 * dt) * k1, e_half, g_half)
    k3 = rhs(w0 + (0.5 * dt) * k2, e_half, g_half)
    k4 = rhs(w0 + dt * k3, e_full, g_full)
    out = (w0 + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)) * e_full[:, None]
    _check_finite(out, "tangent_step")
    return FourierField(m, out)


# ---------------------------------------------------------------------------
# Stacked-ensemble kernels, vectorized over a leading member axis; used by
# the probe modules where a python-level loop over members would dominate.
#
# These work on the conjugate-pair representative slice (members, n_pairs, d):
# every operation preserves the mirror symmetry bitwise, so the mirrors are
# reconstructed only when a full table is needed.  Field values at the origin
# are 2 Re sum over representatives, squared norms twice the representative
# sum.

def ens_tile(f: FourierField, n: int) -> np.ndarray:
    """Stack n copies of the representative slice of f."""
    return np.tile(f.coeffs[None, f.model.pair_pos, :], (n, 1, 1))


def ens_norm_m(model: SpectrumModel, cpos: np.ndarray) -> np.ndarray:
    w = model.sobolev_weight(model.m)[model.pair_pos]
    return np.sqrt(2.0 * ((np.abs(cpos) ** 2).sum(axis=-1) * w).sum(axis=-1))


def ens_origin_value(cpos: np.ndarray) -> np.ndarray:
    return 2.0 * cpos.real.sum(axis=-2)


def ens_pair_noise(model: SpectrumModel, rng: np.random.Generator,
                   scale: np.ndarray | None, n: int) -> np.ndarray:
    """Representative-slice part of pair_noise (the mirror half is implied)."""
    z = rng.standard_normal((n, model.n_pairs, model.dimension, 2))
    w = (z[..., 0] + 1j * z[..., 1]) / _SQRT2
    eta = np.einsum("pij,...pj->...pi", model.sqrt_energy_pos, w)
    if scale is not None:
        eta = eta * scale[:, None]
    return eta


def _phase_factor(phase: np.ndarray, decay: np.ndarray) -> np.ndarray:
    """decay * exp(i phase) without complex exp (cos/sin into a buffer)."""
    fac = np.empty(phase.shape, dtype=complex)
    np.cos(phase, out=fac.real)
    np.sin(phase, out=fac.imag)
    fac *= decay
    return fac


def ens_observation_step(model: SpectrumModel, cpos: np.ndarray, dt: float,
                         noise: np.ndarray | None) -> np.ndarray:
    """observation_step over stacked representative slices (n, n_pairs, d)."""
    u = ens_origin_value(cpos)                              # (n, d)
    phase = (u @ model.k_float[model.pair_pos].T) * dt      # (n, n_pairs)
    factor = _phase_factor(phase, model.decay(dt)[model.pair_pos])
    out = cpos * factor[:, :, None]
    if noise is not None:
        out = out + noise
    _check_finite(out, "ens_observation_step")
    return out


def ens_noiseless_flow_step(model: SpectrumModel, cpos: np.ndarray,
                            dt: float, check: bool = True) -> np.ndarray:
    """noiseless_flow_step over stacked representative slices."""
    pos = model.pair_pos
    kt = model.k_float[pos].T
    e_half = model.decay(dt / 2.0)[pos]
    e_full = model.decay(dt)[pos]

    def rhs(w, decay):
        u = 2.0 * np.einsum("s,...sd->...d", decay, w.real)
        return (1j * (u @ kt))[..., None] * w

    k1 = rhs(cpos, np.ones_like(e_full))
    k2 = rhs(cpos + (0.5 * dt) * k1, e_half)
    k3 = rhs(cpos + (0.5 * dt) * k2, e_half)
    k4 = rhs(cpos + dt * k3, e_full)
    out = (cpos + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)) * e_full[:, None]
    if check:
        _check_finite(out, "ens_noiseless_flow_step")
    return out


def ens_ou_step(model: SpectrumModel, cpos: np.ndarray, dt: float,
                rng: np.random.Generator) -> np.ndarray:
    noise = ens_pair_noise(model, rng, model.noise_scale(dt), cpos.shape[0])
    return cpos * model.decay(dt)[model.pair_pos, None] + noise


def ens_sample_stationary(model: SpectrumModel, n: int,
                          rng: np.random.Generator) -> np.ndarray:
    return ens_pair_noise(model, rng, None, n)


# ---------------------------------------------------------------------------
# Field-level diagnostics shared by the CLI and the acceptance suite.

def modulus_decay_report(model: SpectrumModel, n_starts: int, horizon: float,
                         dt: float, seed: int, checkpoints: int = 20) -> dict:
    """Max relative error of per-mode |c(k,t)| against exp(-gamma t)|c(k,0)|.

    Also verifies the norm contraction ||Y(t)|| <= exp(-gamma* t)||Y(0)||
    along the way and reports the worst slack.
    """
    rng = np.random.default_rng(seed)
    n_steps = int(round(horizon / dt))
    stride = max(1, n_steps // checkpoints)
    gstar = float(model.gamma.min())
    g = model.gamma[model.pair_pos]
    w = ens_sample_stationary(model, n_starts, rng)
    w = w / ens_norm_m(model, w)[:, None, None]   # unit X^m norm starts
    mod0 = np.abs(w)

    worst_rel = 0.0
    worst_norm_excess = -np.inf
    for step in range(1, n_steps + 1):
        at_checkpoint = not (step % stride) or step == n_steps
        w = ens_noiseless_flow_step(model, w, dt, check=at_checkpoint)
        if not at_checkpoint:
            continue
        t = step * dt
        oracle = mod0 * np.exp(-g * t)[None, :, None]
        mask = oracle > 1e-290
        if mask.any():
            rel = np.abs(np.abs(w[mask]) - oracle[mask]) / oracle[mask]
            worst_rel = max(worst_rel, float(rel.max()))
        excess = ens_norm_m(model, w).max() - np.exp(-gstar * t)
        worst_norm_excess = max(worst_norm_excess, float(excess))
    return {"max_rel_modulus_error": worst_rel,
            "max_norm_excess": worst_norm_excess,
            "n_starts": n_starts, "horizon": horizon, "dt": dt}


def ou_covariance_report(model: SpectrumModel, ensemble: int, lags: tuple,
                         seed: int, top_modes: int = 10) -> dict:
    """Monte-Carlo check of the mode covariances against the closed form.

    Equal-time: Frobenius-relative error of the empirical per-site
    covariance versus energy(k).  Lag h: trace correlation versus
    exp(-gamma(k) h) (absolute deviation).  Restricted to the top_modes
    sites of largest energy trace.
    """
    rng = np.random.default_rng(seed)
    cpos0 = ens_sample_stationary(model, ensemble, rng)
    tr_all = np.real(np.trace(model.energy, axis1=1, axis2=2))
    tr = tr_all[model.pair_pos]
    # mirror sites carry conjugate statistics, so checking the top
    # representative pairs covers at least the top_modes sites
    order = np.lexsort((np.arange(tr.size), -tr))
    sel = order[:top_modes]
    energy_pos = model.energy[model.pair_pos]
    gamma_pos = model.gamma[model.pair_pos]

    def site_cov(a, b, i):
        return (a[:, i, :, None] * b[:, i, None, :].conj()).mean(axis=0)

    eq_err = []
    for i in sel:
        cov = site_cov(cpos0, cpos0, i)
        eq_err.append(float(np.linalg.norm(cov - energy_pos[i]) /
                            np.linalg.norm(energy_pos[i])))

    lag_err = {}
    pseudo = []
    for i in sel:
        pc = (cpos0[:, i, :, None] * cpos0[:, i, None, :]).mean(axis=0)
        pseudo.append(float(np.linalg.norm(pc)))
    for h in lags:
        shifted = ens_ou_step(model, cpos0, float(h), rng)
        errs = []
        for i in sel:
            num = float(np.real(np.trace(site_cov(shifted, cpos0, i))))
            rho = num / tr[i]
            errs.append(abs(rho - float(np.exp(-gamma_pos[i] * h))))
        lag_err[float(h)] = max(errs)
    sel_sites = model.pair_pos[sel]
    return {"max_eqtime_frobenius_rel": max(eq_err),
            "max_lag_corr_abs_err": lag_err,
            "max_pseudo_cov_norm": max(pseudo),
            "ensemble": ensemble,
            "modes_checked": [tuple(map(int, model.wavevectors[i])) for i in sel_sites]}
