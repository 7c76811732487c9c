"""Time stepping for the coupled water/biomass system.

One step of the coupled system applies Lie splitting: reaction terms are
evaluated explicitly at the step start, the porous-medium diffusion of the
water field is advanced implicitly (damped Newton), and the biomass heat
flow is advanced by a spectral exponential integrator.  Noise enters as an
Euler-Maruyama pointwise product sigma * state * dW at the step start (Ito
convention); Stratonovich runs add the conversion drift field and reuse the
identical code path.

The frozen variant replaces the quadratic coupling by externally supplied
fields, and the decoupled variant drops the coupling entirely (porous medium
plus noise for u, heat with unit extra decay plus noise for v) -- the
post-stopping extension dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .basis import SpectralBasis, analyze, apply_laplacian, synthesize
from .fields import lp_norm, power_gamma, sobolev_norm
from .noise import NoisePath, stratonovich_correction

ITO = "ito"
STRATONOVICH = "stratonovich"

# grids up to this many cells use a dense LU for the Newton updates
_DENSE_LIMIT = 1024


class NewtonError(RuntimeError):
    """Implicit porous-medium solve failed to converge."""

    def __init__(self, message: str, residual: float, iterations: int,
                 step_index: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.step_index = step_index


@dataclass(frozen=True)
class ModelConfig:
    """PDE constants.  k, f, g default to zero, which is the reduced system
    the noise analysis studies; nonzero values restore the full vegetation
    model (rain / evaporation / mortality)."""

    r_u: float = 1.0
    r_v: float = 0.05
    chi: float = 1.0
    gamma: float = 3.0
    k: float = 0.0
    f: float = 0.0
    g: float = 0.0
    sigma1: float = 0.0
    sigma2: float = 0.0
    calculus: str = ITO

    def __post_init__(self):
        for name in ("r_u", "r_v", "chi", "k", "f", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.calculus not in (ITO, STRATONOVICH):
            raise ValueError(f"unknown calculus {self.calculus!r}")

    def hypothesis_flags(self) -> list[str]:
        """Parameter choices outside the regime the moment bounds assume."""
        flags = []
        if self.gamma <= 2.0:
            flags.append(f"gamma={self.gamma} <= 2 (linear-diffusion testing regime)")
        for name in ("r_u", "r_v", "chi"):
            if getattr(self, name) == 0.0:
                flags.append(f"{name}=0 (degenerate rate, testing only)")
        return flags


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-3
    t_final: float = 1.0
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    nonneg_policy: str = "monitor"
    snapshot_stride: int = 1
    record_rho: float = 0.4

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_final < 0 or (self.t_final > 0 and self.dt > self.t_final):
            raise ValueError("need 0 <= dt <= t_final")
        if self.newton_tol <= 0 or self.newton_max_iter < 1:
            raise ValueError("Newton controls must be positive")
        if self.nonneg_policy not in ("monitor", "project"):
            raise ValueError(f"unknown nonneg policy {self.nonneg_policy!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt)) if self.t_final > 0 else 0


@dataclass
class CoupledState:
    u: np.ndarray
    v: np.ndarray
    t: float


@dataclass
class Trajectory:
    """Recorded run: per-step norm ledger plus strided full snapshots."""

    times: np.ndarray
    norms: dict[str, np.ndarray]
    snapshot_times: np.ndarray
    u_snapshots: np.ndarray
    v_snapshots: np.ndarray
    flags: dict

    NORM_COLUMNS = ("u_l2", "u_lgamma1", "v_hrho", "min_u", "min_v", "h")

    @property
    def n_records(self) -> int:
        return self.times.size

    def final_state(self) -> CoupledState:
        return CoupledState(
            self.u_snapshots[-1].copy(), self.v_snapshots[-1].copy(),
            float(self.times[-1]),
        )

    def norm_table(self) -> np.ndarray:
        cols = [self.times] + [self.norms[c] for c in self.NORM_COLUMNS]
        return np.column_stack(cols)


def _decay_factors(basis: SpectralBasis, r_v: float, extra_decay: float,
                   dt: float) -> tuple[np.ndarray, float]:
    key = ("heat_decay", r_v, extra_decay, dt)
    cached = basis._cache.get(key)
    if cached is None:
        factors = np.exp(-(r_v * basis.eigenvalues + extra_decay) * dt)
        cached = (factors, float(factors[-1]))
        basis._cache[key] = cached
    return cached


def heat_step(
    basis: SpectralBasis,
    v: np.ndarray,
    source: np.ndarray,
    dw2: Optional[np.ndarray],
    model: ModelConfig,
    dt: float,
    extra_decay: float = 0.0,
) -> np.ndarray:
    """Exponential-integrator step for dv = (r_v Lap v - extra_decay v) dt.

    Retained modes decay exactly by exp(-(r_v nu_k + extra_decay) dt); grid
    content outside the band decays at the fastest retained rate (it has no
    eigenvalue of its own, and leaving it frozen would let collocation
    aliasing accumulate).  Source and noise are added explicitly afterwards,
    so r_v = extra_decay = 0 reduces to v + dt * source + noise exactly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if extra_decay < 0:
        raise ValueError("extra_decay must be nonnegative")
    factors, tail_factor = _decay_factors(basis, model.r_v, extra_decay, dt)
    coeffs = analyze(basis, v)
    out = v * tail_factor + synthesize(basis, (factors - tail_factor) * coeffs)
    out = out + dt * source
    if dw2 is not None and model.sigma2 != 0.0:
        out = out + model.sigma2 * v * dw2
    return out


def _newton_dense(basis, w, rhs, coef, gamma, tol_abs, max_iter):
    lap = basis.laplacian_matrix()
    shape = w.shape
    w = w.reshape(-1).copy()
    rhs = rhs.reshape(-1)

    def residual(z):
        return z - coef * (lap @ power_gamma(z, gamma).reshape(-1)) - rhs

    res = residual(w)
    res_norm = lp_norm(res, 2.0)
    for iteration in range(max_iter):
        if res_norm <= tol_abs:
            return w.reshape(shape), res_norm, iteration
        deriv = gamma * np.abs(w) ** (gamma - 1.0) + 1e-12
        jac = -coef * lap * deriv[None, :]
        jac[np.diag_indices_from(jac)] += 1.0
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise NewtonError(
                f"singular Newton system: {exc}", res_norm, iteration
            ) from exc
        alpha = 1.0
        while alpha > 2.0**-30:
            trial = w + alpha * delta
            trial_res = residual(trial)
            trial_norm = lp_norm(trial_res, 2.0)
            if np.isfinite(trial_norm) and trial_norm <= (1 - 1e-4 * alpha) * res_norm:
                w, res, res_norm = trial, trial_res, trial_norm
                break
            alpha *= 0.5
        else:
            raise NewtonError(
                "Newton line search stalled", res_norm, iteration
            )
    raise NewtonError(
        f"Newton did not reach tolerance {tol_abs:.3e} "
        f"(final residual {res_norm:.3e})",
        res_norm,
        max_iter,
    )


def _newton_krylov(basis, w, rhs, coef, gamma, tol_abs, max_iter):
    """Matrix-free fallback for grids too large for dense LU."""
    n = basis.grid_size
    shape = w.shape
    w = w.reshape(-1).copy()
    rhs_flat = rhs.reshape(-1)

    def residual(z):
        lap_term = apply_laplacian(basis, power_gamma(z, gamma).reshape(shape))
        return z - coef * lap_term.reshape(-1) - rhs_flat

    res = residual(w)
    res_norm = lp_norm(res, 2.0)
    for iteration in range(max_iter):
        if res_norm <= tol_abs:
            return w.reshape(shape), res_norm, iteration
        deriv = gamma * np.abs(w) ** (gamma - 1.0) + 1e-12
        mean_deriv = float(np.mean(deriv))

        def jmv(z):
            lap_term = apply_laplacian(basis, (deriv * z).reshape(shape))
            return z - coef * lap_term.reshape(-1)

        precond_scale = 1.0 / (1.0 + coef * mean_deriv * basis.eigenvalues)

        def pmv(z):
            coeffs = analyze(basis, z.reshape(shape))
            smooth = synthesize(basis, coeffs * precond_scale)
            rough = z - synthesize(basis, coeffs).reshape(-1)
            return smooth.reshape(-1) + rough

        jac = LinearOperator((n, n), matvec=jmv)
        precond = LinearOperator((n, n), matvec=pmv)
        delta, info = gmres(jac, -res, rtol=1e-10, atol=0.0, M=precond,
                            maxiter=200)
        if info != 0:
            raise NewtonError(
                f"inner GMRES failed (info={info})", res_norm, iteration
            )
        alpha = 1.0
        while alpha > 2.0**-30:
            trial = w + alpha * delta
            trial_res = residual(trial)
            trial_norm = lp_norm(trial_res, 2.0)
            if np.isfinite(trial_norm) and trial_norm <= (1 - 1e-4 * alpha) * res_norm:
                w, res, res_norm = trial, trial_res, trial_norm
                break
            alpha *= 0.5
        else:
            raise NewtonError("Newton line search stalled", res_norm, iteration)
    raise NewtonError(
        f"Newton did not reach tolerance {tol_abs:.3e} "
        f"(final residual {res_norm:.3e})",
        res_norm,
        max_iter,
    )


def pm_implicit_step(
    basis: SpectralBasis,
    u: np.ndarray,
    source: np.ndarray,
    dw1: Optional[np.ndarray],
    model: ModelConfig,
    solver: SolverConfig,
    dt: float,
) -> np.ndarray:
    """Implicit Euler step for du = r_u Lap(u^[gamma]) dt + explicit terms.

    Solves  w - dt r_u Lap(w^[gamma]) = u + dt source + sigma1 u dW1  by
    damped Newton.  The porous-medium flux is mean-free, so the mean of the
    solution is pinned to the mean of the right-hand side afterwards; this
    keeps the Newton tolerance from leaking mass over long runs.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite entries in the water field")
    rhs = u + dt * source
    if dw1 is not None and model.sigma1 != 0.0:
        rhs = rhs + model.sigma1 * u * dw1
    coef = dt * model.r_u
    if coef == 0.0:
        return rhs
    tol_abs = solver.newton_tol * (1.0 + lp_norm(u, 2.0))
    newton = _newton_dense if basis.grid_size <= _DENSE_LIMIT else _newton_krylov
    w, res_norm, _ = newton(
        basis, rhs, rhs, coef, model.gamma, tol_abs, solver.newton_max_iter
    )
    if not np.all(np.isfinite(w)):
        raise NewtonError("non-finite Newton iterate", res_norm, -1)
    return w + (np.mean(rhs) - np.mean(w))


def _mult_drifts(basis, model, noise_spec, override):
    """Multiplicative drift fields (c1, c2) added as state * c_j.

    Stratonovich runs get the conversion drift automatically; Ito runs get
    whatever the caller supplies (used to demonstrate the definitional
    equality of the two discretizations).
    """
    if override is not None:
        return override
    if model.calculus == STRATONOVICH:
        if noise_spec is None:
            raise ValueError("stratonovich stepping needs the noise spectrum")
        return (
            stratonovich_correction(noise_spec, basis, 1, model.sigma1),
            stratonovich_correction(noise_spec, basis, 2, model.sigma2),
        )
    return (None, None)


def step_coupled(
    basis: SpectralBasis,
    state: CoupledState,
    model: ModelConfig,
    solver: SolverConfig,
    dw1: Optional[np.ndarray],
    dw2: Optional[np.ndarray],
    drift1: Optional[np.ndarray] = None,
    drift2: Optional[np.ndarray] = None,
) -> CoupledState:
    """One Lie-splitting step of the full coupled system."""
    u, v = state.u, state.v
    quad = u * v * v
    source_u = -model.chi * quad + model.k - model.f * u
    source_v = quad - model.g * v
    if drift1 is not None:
        source_u = source_u + u * drift1
    if drift2 is not None:
        source_v = source_v + v * drift2
    dt = solver.dt
    u_new = pm_implicit_step(basis, u, source_u, dw1, model, solver, dt)
    v_new = heat_step(basis, v, source_v, dw2, model, dt)
    return CoupledState(u_new, v_new, state.t + dt)


def step_frozen(
    basis: SpectralBasis,
    state: CoupledState,
    eta: np.ndarray,
    xi: np.ndarray,
    phi_value: float,
    model: ModelConfig,
    solver: SolverConfig,
    dw1: Optional[np.ndarray],
    dw2: Optional[np.ndarray],
    drift1: Optional[np.ndarray] = None,
    drift2: Optional[np.ndarray] = None,
) -> CoupledState:
    """Coupled step with the quadratic reaction frozen at phi * eta * xi^2."""
    if not 0.0 <= phi_value <= 1.0:
        raise ValueError(f"cutoff value {phi_value} outside [0, 1]")
    u, v = state.u, state.v
    react = phi_value * eta * xi * xi
    source_u = -model.chi * react + model.k - model.f * u
    source_v = react - model.g * v
    if drift1 is not None:
        source_u = source_u + u * drift1
    if drift2 is not None:
        source_v = source_v + v * drift2
    dt = solver.dt
    u_new = pm_implicit_step(basis, u, source_u, dw1, model, solver, dt)
    v_new = heat_step(basis, v, source_v, dw2, model, dt)
    return CoupledState(u_new, v_new, state.t + dt)


def step_decoupled(
    basis: SpectralBasis,
    state: CoupledState,
    model: ModelConfig,
    solver: SolverConfig,
    dw1: Optional[np.ndarray],
    dw2: Optional[np.ndarray],
    drift1: Optional[np.ndarray] = None,
    drift2: Optional[np.ndarray] = None,
) -> CoupledState:
    """Post-stopping extension: noisy porous medium for u, damped heat for v."""
    u, v = state.u, state.v
    zeros = np.zeros_like(u)
    source_u = zeros if drift1 is None else u * drift1
    source_v = zeros if drift2 is None else v * drift2
    dt = solver.dt
    u_new = pm_implicit_step(basis, u, source_u, dw1, model, solver, dt)
    v_new = heat_step(basis, v, source_v, dw2, model, dt, extra_decay=1.0)
    return CoupledState(u_new, v_new, state.t + dt)


def simulate_path(
    basis: SpectralBasis,
    u0: np.ndarray,
    v0: np.ndarray,
    model: ModelConfig,
    solver: SolverConfig,
    noise_path: Optional[NoisePath],
    mode: str = "coupled",
    cutoff=None,
    mult_drift_override=None,
) -> Trajectory:
    """Advance the system over [0, t_final], recording the norm ledger.

    Deterministic given the noise path.  `cutoff` (CutoffParams) enables the
    running h-functional record computed from the solution itself; without
    it the h column is NaN.  A Newton failure aborts with the step index.
    """
    if mode not in ("coupled", "decoupled"):
        raise ValueError(f"unknown mode {mode!r}")
    u = np.array(u0, dtype=float)
    v = np.array(v0, dtype=float)
    if u.shape != basis.grid_shape or v.shape != basis.grid_shape:
        raise ValueError(
            f"initial fields {u.shape}/{v.shape} do not match grid "
            f"{basis.grid_shape}"
        )
    n_steps = solver.n_steps
    if noise_path is not None:
        if abs(noise_path.dt - solver.dt) > 1e-15 * solver.dt:
            raise ValueError("noise path dt differs from solver dt")
        if noise_path.n_steps < n_steps:
            raise ValueError("noise path shorter than the run")
        noise_spec = noise_path.spec
    else:
        noise_spec = None
    drift1, drift2 = _mult_drifts(basis, model, noise_spec, mult_drift_override)

    gamma1 = model.gamma + 1.0
    columns = {name: np.empty(n_steps + 1) for name in Trajectory.NORM_COLUMNS}
    snap_idx = [0]
    snapshots_u = [u.copy()]
    snapshots_v = [v.copy()]
    acc_eta = 0.0
    acc_xi = 0.0
    projected = 0

    def record(i, uu, vv):
        columns["u_l2"][i] = lp_norm(uu, 2.0)
        columns["u_lgamma1"][i] = lp_norm(uu, gamma1)
        columns["v_hrho"][i] = sobolev_norm(basis, vv, solver.record_rho)
        columns["min_u"][i] = uu.min()
        columns["min_v"][i] = vv.min()
        if cutoff is None:
            columns["h"][i] = np.nan
        else:
            columns["h"][i] = (
                acc_eta**cutoff.nu + acc_xi**cutoff.nu if i else 0.0
            )

    record(0, u, v)
    state = CoupledState(u, v, 0.0)
    for n in range(n_steps):
        if cutoff is not None:
            acc_eta += solver.dt * lp_norm(state.u, gamma1) ** gamma1
            acc_xi += solver.dt * lp_norm(state.v, cutoff.m) ** cutoff.m0
        dw1 = noise_path.field_increment(1, n) if noise_path is not None else None
        dw2 = noise_path.field_increment(2, n) if noise_path is not None else None
        try:
            if mode == "coupled":
                state = step_coupled(
                    basis, state, model, solver, dw1, dw2, drift1, drift2
                )
            else:
                state = step_decoupled(
                    basis, state, model, solver, dw1, dw2, drift1, drift2
                )
        except NewtonError as exc:
            raise NewtonError(
                f"step {n} (t={state.t:.6g}): {exc}",
                exc.residual,
                exc.iterations,
                step_index=n,
            ) from exc
        if solver.nonneg_policy == "project":
            below_u = state.u < 0.0
            below_v = state.v < 0.0
            projected += int(below_u.sum() + below_v.sum())
            state.u[below_u] = 0.0
            state.v[below_v] = 0.0
        if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.v))):
            raise NewtonError(
                f"non-finite state after step {n}", float("nan"), -1, step_index=n
            )
        record(n + 1, state.u, state.v)
        if (n + 1) % solver.snapshot_stride == 0 or n + 1 == n_steps:
            snap_idx.append(n + 1)
            snapshots_u.append(state.u.copy())
            snapshots_v.append(state.v.copy())

    times = np.arange(n_steps + 1) * solver.dt
    flags = {
        "completed": True,
        "projected_points": projected,
        "worst_min_u": float(columns["min_u"].min()),
        "worst_min_v": float(columns["min_v"].min()),
        "model_flags": model.hypothesis_flags(),
    }
    return Trajectory(
        times=times,
        norms=columns,
        snapshot_times=times[np.array(snap_idx, dtype=int)],
        u_snapshots=np.array(snapshots_u),
        v_snapshots=np.array(snapshots_v),
        flags=flags,
    )
