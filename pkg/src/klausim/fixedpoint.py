"""Truncation and fixed-point machinery for the coupled system.

The quadratic coupling is tamed by a smooth cutoff phi_kappa evaluated on a
running norm budget

    h(eta, xi, t) = (int_0^t |eta|_{L^(g+1)}^(g+1))^nu
                  + (int_0^t |xi|_{L^m}^(m0))^nu.

Freezing the pair (eta, xi) turns the coupled system into two one-way
problems; iterating the solve (Picard) drives the pair to a fixed point,
which solves the truncated system.  While h stays below kappa the cutoff is
identically one, so the fixed point follows the untruncated dynamics up to
the first exit time; restarting at a higher truncation level with a fresh
noise substream extends the solution past exits, and once the ladder is
exhausted the decoupled extension dynamics take over.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .basis import SpectralBasis
from .dynamics import (
    CoupledState,
    ModelConfig,
    SolverConfig,
    Trajectory,
    simulate_path,
    step_coupled,
    step_frozen,
    _mult_drifts,
)
from .fields import lp_norm, sobolev_norm
from .noise import NoisePath, NoiseSpec, generate_path, sample_increments


class PicardError(RuntimeError):
    """Fixed-point iteration failed to reach tolerance."""

    def __init__(self, message: str, residuals: list[float]):
        super().__init__(message)
        self.residuals = residuals


def default_nu(gamma: float, m0: float, p0_star: float) -> float:
    """Largest admissible h-exponent for the given integrability indices."""
    cap = 1.0 - 1.0 / p0_star
    return min(1.0, cap * (gamma + 1.0) / m0, cap * m0)


@dataclass(frozen=True)
class CutoffParams:
    """Truncation level kappa plus the exponents entering h.

    nu must satisfy 1/p0* + nu m0/(gamma+1) <= 1 and 1/p0* + nu/m0 <= 1.
    """

    kappa: float
    gamma: float
    m: float
    m0: float
    p0_star: float
    nu: Optional[float] = None

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.nu is None:
            object.__setattr__(
                self, "nu", default_nu(self.gamma, self.m0, self.p0_star)
            )
        if not 0.0 < self.nu <= 1.0:
            raise ValueError(f"nu={self.nu} outside (0, 1]")
        tol = 1e-12
        if 1.0 / self.p0_star + self.nu * self.m0 / (self.gamma + 1.0) > 1.0 + tol:
            raise ValueError("nu violates 1/p0* + nu m0/(gamma+1) <= 1")
        if 1.0 / self.p0_star + self.nu / self.m0 > 1.0 + tol:
            raise ValueError("nu violates 1/p0* + nu/m0 <= 1")

    def with_kappa(self, kappa: float) -> "CutoffParams":
        import dataclasses

        return dataclasses.replace(self, kappa=kappa)


def _mollifier(y):
    out = np.zeros_like(y)
    pos = y > 0
    out[pos] = np.exp(-1.0 / y[pos])
    return out


def cutoff_phi(x, kappa: float):
    """Smooth bump: 1 on |x| <= kappa, 0 on |x| >= 2 kappa.

    The transition band uses the exp(-1/s) mollifier quotient, which is
    C-infinity with Lipschitz constant exactly 2/kappa (attained at the band
    midpoint).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    t = np.abs(np.asarray(x, dtype=float)) / kappa
    s = np.clip(t - 1.0, 0.0, 1.0)
    upper = _mollifier(1.0 - s)
    lower = _mollifier(s)
    with np.errstate(invalid="ignore"):
        val = np.where(t <= 1.0, 1.0, np.where(t >= 2.0, 0.0, upper / (upper + lower)))
    return val if val.ndim else float(val)


@dataclass
class FrozenPair:
    """Time-indexed (eta, xi) fields on the solver grid, eta[n] at t = n dt."""

    eta: np.ndarray  # (n_times, *grid)
    xi: np.ndarray
    dt: float

    @property
    def n_times(self) -> int:
        return self.eta.shape[0]

    @classmethod
    def zero(cls, basis: SpectralBasis, dt: float, n_steps: int) -> "FrozenPair":
        shape = (n_steps + 1,) + basis.grid_shape
        return cls(eta=np.zeros(shape), xi=np.zeros(shape), dt=dt)

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "FrozenPair":
        dt = float(traj.times[1] - traj.times[0]) if traj.times.size > 1 else 0.0
        return cls(eta=traj.u_snapshots, xi=traj.v_snapshots, dt=dt)

    def h_values(self, params: CutoffParams) -> np.ndarray:
        """h at every grid time by left-endpoint quadrature; h(0) = 0."""
        g1 = params.gamma + 1.0
        eta_rates = np.array([lp_norm(f, g1) ** g1 for f in self.eta[:-1]])
        xi_rates = np.array(
            [lp_norm(f, params.m) ** params.m0 for f in self.xi[:-1]]
        )
        h = np.zeros(self.n_times)
        if self.n_times > 1:
            h[1:] = (self.dt * np.cumsum(eta_rates)) ** params.nu + (
                self.dt * np.cumsum(xi_rates)
            ) ** params.nu
        return h


def h_functional(pair: FrozenPair, t: float, params: CutoffParams) -> float:
    """Running norm budget at a grid time."""
    idx = t / pair.dt if pair.dt > 0 else 0.0
    n = int(round(idx))
    if abs(idx - n) > 1e-9 or not 0 <= n < pair.n_times:
        raise ValueError(f"t={t} is not on the trajectory time grid")
    return float(pair.h_values(params)[n])


def trajectory_h(traj: Trajectory, params: CutoffParams) -> np.ndarray:
    return FrozenPair.from_trajectory(traj).h_values(params)


def apply_V(
    pair: FrozenPair,
    u0: np.ndarray,
    v0: np.ndarray,
    kappa: float,
    noise_path: NoisePath,
    model: ModelConfig,
    solver: SolverConfig,
    basis: SpectralBasis,
    params: CutoffParams,
) -> Trajectory:
    """Solve the frozen system driven by (eta, xi): one sweep of the operator.

    The reaction at step n uses phi_kappa(h(eta, xi, t_n)) * eta_n * xi_n^2;
    the output never feeds back into the reaction during the sweep.  The
    returned trajectory records h of the *output* fields (at a fixed point
    the two agree within the iteration tolerance).
    """
    n_steps = solver.n_steps
    if pair.n_times != n_steps + 1:
        raise ValueError(
            f"frozen pair has {pair.n_times} time slices for {n_steps} steps"
        )
    drift1, drift2 = _mult_drifts(basis, model, noise_path.spec, None)
    h_in = pair.h_values(params)
    state = CoupledState(np.array(u0, dtype=float), np.array(v0, dtype=float), 0.0)
    fields_u = [state.u.copy()]
    fields_v = [state.v.copy()]
    for n in range(n_steps):
        phi = cutoff_phi(h_in[n], kappa)
        dw1 = noise_path.field_increment(1, n)
        dw2 = noise_path.field_increment(2, n)
        state = step_frozen(
            basis, state, pair.eta[n], pair.xi[n], phi, model, solver,
            dw1, dw2, drift1, drift2,
        )
        fields_u.append(state.u.copy())
        fields_v.append(state.v.copy())
    return _trajectory_from_fields(
        basis, solver, params, np.array(fields_u), np.array(fields_v)
    )


def _trajectory_from_fields(basis, solver, params, fields_u, fields_v):
    n_times = fields_u.shape[0]
    times = np.arange(n_times) * solver.dt
    g1 = params.gamma + 1.0
    columns = {
        "u_l2": np.array([lp_norm(f, 2.0) for f in fields_u]),
        "u_lgamma1": np.array([lp_norm(f, g1) for f in fields_u]),
        "v_hrho": np.array(
            [sobolev_norm(basis, f, solver.record_rho) for f in fields_v]
        ),
        "min_u": fields_u.reshape(n_times, -1).min(axis=1),
        "min_v": fields_v.reshape(n_times, -1).min(axis=1),
    }
    pair = FrozenPair(eta=fields_u, xi=fields_v, dt=solver.dt)
    columns["h"] = pair.h_values(params)
    flags = {
        "completed": True,
        "worst_min_u": float(columns["min_u"].min()),
        "worst_min_v": float(columns["min_v"].min()),
    }
    return Trajectory(
        times=times,
        norms=columns,
        snapshot_times=times,
        u_snapshots=fields_u,
        v_snapshots=fields_v,
        flags=flags,
    )


def pair_distance(a: FrozenPair, b: FrozenPair, params: CutoffParams) -> float:
    """Discrete Bochner-norm distance used as the Picard residual:
    |du|_{L^(g+1)(0,T;L^(g+1))} + |dv|_{L^(m0)(0,T;L^m)}."""
    g1 = params.gamma + 1.0
    du = a.eta - b.eta
    dv = a.xi - b.xi
    eta_part = a.dt * sum(lp_norm(f, g1) ** g1 for f in du[:-1])
    xi_part = a.dt * sum(lp_norm(f, params.m) ** params.m0 for f in dv[:-1])
    return eta_part ** (1.0 / g1) + xi_part ** (1.0 / params.m0)


@dataclass
class PicardResult:
    trajectory: Trajectory
    residuals: list[float]
    iterations: int
    converged: bool

    @property
    def pair(self) -> FrozenPair:
        return FrozenPair.from_trajectory(self.trajectory)


def picard_solve(
    u0: np.ndarray,
    v0: np.ndarray,
    kappa: float,
    noise_path: NoisePath,
    model: ModelConfig,
    solver: SolverConfig,
    basis: SpectralBasis,
    params: CutoffParams,
    tol: float = 1e-8,
    max_iter: int = 60,
    initial_pair: Optional[FrozenPair] = None,
) -> PicardResult:
    """Iterate the frozen-system operator to a fixed point.

    The default initial iterate is the reaction-free sweep (the operator
    applied to the zero pair), which is cheap and stays in the nonnegative
    cone for nonnegative data.  Stops when successive sweeps differ by at
    most `tol` in the discrete Bochner distance; the convergence criterion
    is a numerical surrogate -- nothing guarantees contraction in general,
    so non-convergence raises with the residual history attached.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    n_steps = solver.n_steps
    if initial_pair is None:
        zero = FrozenPair.zero(basis, solver.dt, n_steps)
        first = apply_V(zero, u0, v0, kappa, noise_path, model, solver, basis, params)
        pair = FrozenPair.from_trajectory(first)
    else:
        pair = initial_pair
    residuals: list[float] = []
    for iteration in range(1, max_iter + 1):
        traj = apply_V(pair, u0, v0, kappa, noise_path, model, solver, basis, params)
        new_pair = FrozenPair.from_trajectory(traj)
        r = pair_distance(new_pair, pair, params)
        residuals.append(r)
        pair = new_pair
        if r <= tol:
            return PicardResult(
                trajectory=traj,
                residuals=residuals,
                iterations=iteration,
                converged=True,
            )
    raise PicardError(
        f"no fixed point after {max_iter} sweeps "
        f"(last residual {residuals[-1]:.3e})",
        residuals,
    )


def first_exit_time(
    traj: Trajectory, kappa: float, params: CutoffParams
) -> Optional[float]:
    """First grid time with h >= kappa, or None if h stays below on [0, T]."""
    h = traj.norms.get("h")
    if h is None or np.any(np.isnan(h)):
        raise ValueError("trajectory carries no h records")
    above = np.nonzero(h >= kappa)[0]
    if above.size == 0:
        return None
    return float(traj.times[above[0]])


@dataclass
class RungReport:
    rung: int
    kappa: float
    exit_time: Optional[float]  # global time of the h-crossing
    picard_iterations: int
    final_residual: float

    def row(self) -> str:
        exit_s = "none" if self.exit_time is None else f"{self.exit_time:.10g}"
        return (
            f"{self.rung}\t{self.kappa:.10g}\t{exit_s}"
            f"\t{self.picard_iterations}\t{self.final_residual:.3e}"
        )


@dataclass
class GlueResult:
    trajectory: Trajectory
    rungs: list[RungReport]
    used_decoupled_tail: bool


def _concat_trajectories(parts: list[Trajectory]) -> Trajectory:
    """Join segments; each junction state appears once (exact handoff)."""
    times = [parts[0].times]
    norms = {k: [parts[0].norms[k]] for k in parts[0].norms}
    us = [parts[0].u_snapshots]
    vs = [parts[0].v_snapshots]
    offset = parts[0].times[-1]
    for seg in parts[1:]:
        times.append(seg.times[1:] + offset)
        for k in norms:
            norms[k].append(seg.norms[k][1:])
        us.append(seg.u_snapshots[1:])
        vs.append(seg.v_snapshots[1:])
        offset += seg.times[-1]
    all_times = np.concatenate(times)
    merged = {k: np.concatenate(v) for k, v in norms.items()}
    u_all = np.concatenate(us)
    v_all = np.concatenate(vs)
    flags = {
        "completed": all(p.flags.get("completed", True) for p in parts),
        "worst_min_u": float(merged["min_u"].min()),
        "worst_min_v": float(merged["min_v"].min()),
        "segments": len(parts),
    }
    return Trajectory(
        times=all_times,
        norms=merged,
        snapshot_times=all_times,
        u_snapshots=u_all,
        v_snapshots=v_all,
        flags=flags,
    )


def _truncate_trajectory(traj: Trajectory, idx: int) -> Trajectory:
    return Trajectory(
        times=traj.times[: idx + 1],
        norms={k: v[: idx + 1] for k, v in traj.norms.items()},
        snapshot_times=traj.times[: idx + 1],
        u_snapshots=traj.u_snapshots[: idx + 1],
        v_snapshots=traj.v_snapshots[: idx + 1],
        flags=dict(traj.flags),
    )


def glue_simulate(
    u0: np.ndarray,
    v0: np.ndarray,
    kappa_ladder: Sequence[float],
    model: ModelConfig,
    solver: SolverConfig,
    basis: SpectralBasis,
    noise_spec: NoiseSpec,
    params: CutoffParams,
    tol: float = 1e-8,
    max_iter: int = 60,
    path_index: int = 0,
) -> GlueResult:
    """Stopping-time ladder:
    solve at the lowest truncation level, restart from the exit state at the
    next level with a fresh noise substream, concatenate, and fall back to
    the decoupled extension dynamics when every rung has exited.

    Within each rung the budget h restarts from zero (each restart solves a
    fresh truncated problem from its own time origin).
    """
    ladder = list(kappa_ladder)
    if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("kappa ladder must be nonempty and strictly increasing")
    import dataclasses

    n_total = solver.n_steps
    if n_total == 0:
        empty = simulate_path(basis, u0, v0, model, solver, None, cutoff=params)
        return GlueResult(trajectory=empty, rungs=[], used_decoupled_tail=False)

    parts: list[Trajectory] = []
    rungs: list[RungReport] = []
    u_cur, v_cur = np.array(u0, dtype=float), np.array(v0, dtype=float)
    steps_done = 0
    used_tail = False
    for rung_index, kappa in enumerate(ladder):
        n_rem = n_total - steps_done
        seg_solver = dataclasses.replace(
            solver, t_final=n_rem * solver.dt, snapshot_stride=1
        )
        path = generate_path(
            noise_spec, basis, solver.dt, n_rem,
            path_index=path_index, rung=rung_index,
        )
        result = picard_solve(
            u_cur, v_cur, kappa, path, model, seg_solver, basis,
            params.with_kappa(kappa), tol=tol, max_iter=max_iter,
        )
        traj = result.trajectory
        exit_local = first_exit_time(traj, kappa, params.with_kappa(kappa))
        if exit_local is None:
            rungs.append(RungReport(
                rung_index + 1, kappa, None, result.iterations,
                result.residuals[-1],
            ))
            parts.append(traj)
            steps_done = n_total
            break
        exit_idx = int(round(exit_local / solver.dt))
        exit_idx = max(exit_idx, 1)  # a rung always consumes at least a step
        rungs.append(RungReport(
            rung_index + 1, kappa,
            (steps_done + exit_idx) * solver.dt,
            result.iterations, result.residuals[-1],
        ))
        parts.append(_truncate_trajectory(traj, exit_idx))
        u_cur = traj.u_snapshots[exit_idx].copy()
        v_cur = traj.v_snapshots[exit_idx].copy()
        steps_done += exit_idx
        if steps_done >= n_total:
            break
    if steps_done < n_total:
        # ladder exhausted: extension dynamics with one more fresh substream
        used_tail = True
        n_rem = n_total - steps_done
        tail_solver = dataclasses.replace(
            solver, t_final=n_rem * solver.dt, snapshot_stride=1
        )
        path = generate_path(
            noise_spec, basis, solver.dt, n_rem,
            path_index=path_index, rung=len(ladder),
        )
        tail = simulate_path(
            basis, u_cur, v_cur, model, tail_solver, path,
            mode="decoupled", cutoff=params,
        )
        parts.append(tail)
    glued = _concat_trajectories(parts)
    return GlueResult(trajectory=glued, rungs=rungs, used_decoupled_tail=used_tail)


def _run_until_exit(basis, state, threshold, n_max, model, solver, spec,
                    params, path_index, rung):
    """Direct coupled stepping until h crosses the threshold.

    On [0, tau) the truncated fixed point coincides with the plain coupled
    dynamics (phi = 1 below the threshold), so stopping times can be sampled
    without a Picard solve per rung.  Returns (exit step or None, end state).
    """
    drift1, drift2 = _mult_drifts(basis, model, spec, None)
    g1 = params.gamma + 1.0
    acc_eta = 0.0
    acc_xi = 0.0
    for n in range(n_max):
        acc_eta += solver.dt * lp_norm(state.u, g1) ** g1
        acc_xi += solver.dt * lp_norm(state.v, params.m) ** params.m0
        dw1, dw2 = sample_increments(
            spec, basis, solver.dt, n, path_index=path_index, rung=rung
        )
        state = step_coupled(basis, state, model, solver, dw1, dw2, drift1, drift2)
        h = acc_eta**params.nu + acc_xi**params.nu
        if h >= threshold:
            return n + 1, state
    return None, state


@dataclass
class ExitProbeResult:
    kappa: float
    n_paths: int
    p_hat: float
    stderr: float
    exit_counts: int


def _exit_ladder(kappa: float) -> list[float]:
    """Thresholds 1, 2, ..., capped at kappa (a single rung when kappa < 1)."""
    levels = []
    j = 1.0
    while j < kappa:
        levels.append(j)
        j += 1.0
    levels.append(float(kappa))
    return levels


def exit_prob_estimate(scenario, kappa: float, n_paths: int) -> ExitProbeResult:
    """Monte-Carlo estimate of P(tau_bar_kappa < T).

    tau_bar is the sum of the per-rung exit times over the threshold ladder
    1, 2, ..., kappa; below each threshold the truncated dynamics equal the
    plain coupled dynamics (phi = 1), so each rung is sampled by direct
    stepping.  Rung substreams are keyed by (path, rung), making estimates
    for nested ladders pathwise coupled; the tail probability is then
    monotone in kappa by construction, as the Markov bound requires.
    """
    if n_paths < 100:
        raise ValueError(f"need at least 100 paths, got {n_paths}")
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    levels = _exit_ladder(kappa)
    n_total = scenario.solver.n_steps
    exits = 0
    for i in range(n_paths):
        steps_done = 0
        state = CoupledState(scenario.u0.copy(), scenario.v0.copy(), 0.0)
        exited_all = True
        for rung, level in enumerate(levels):
            exit_step, state = _run_until_exit(
                scenario.basis, state, level, n_total - steps_done,
                scenario.model, scenario.solver, scenario.noise,
                scenario.cutoff, path_index=i, rung=rung,
            )
            if exit_step is None:
                exited_all = False
                break
            steps_done += exit_step
            if steps_done >= n_total:
                exited_all = False
                break
        if exited_all:
            exits += 1
    p_hat = exits / n_paths
    stderr = float(np.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n_paths))
    return ExitProbeResult(
        kappa=float(kappa), n_paths=n_paths, p_hat=p_hat,
        stderr=stderr, exit_counts=exits,
    )


def fit_tail_constant(kappas: Sequence[float], p_hats: Sequence[float]) -> float:
    """Smallest c with c/kappa >= p_hat for every estimate (reported fit)."""
    return float(max(k * p for k, p in zip(kappas, p_hats)))
