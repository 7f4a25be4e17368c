"""Shooting for periodic brake orbits and their energy-parameterized families.

A brake orbit starts at a configuration with zero momentum, reaches a second
zero-momentum configuration after half a period, and closes after the full
period.  The shooter therefore adjusts only the initial configuration and
the period: unknowns u = (q0, T) with residual

    r(u) = [ p(T/2; q0, p0=0),  V(q0) - E* ]

where the scalar constraint pins the energy level (p0 = 0 makes the orbit
energy a function of q0 alone).  A damped Newton iteration drives r to zero;
the Jacobian starts from forward differences and is then carried along the
family with Broyden rank-one updates, refreshed on slow convergence.

Families ("generators") are continued in energy with an adaptive step and a
secant predictor, two branches per mode (one per sign of the seed
amplitude).  Each converged orbit is integrated over a full period on the
exact step grid of the shooter, which makes the discrete closure and
reflection structure hold to solver precision, and is then classified:
distinct brake points, non-self-intersecting configuration arc, and passage
through the equilibrium configuration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import hamiltonian
from .integrator import IntegratorOptions, Trajectory, energy_log, propagate
from .modal import ModalReport, eigenspace_seed
from .system import MechSystem


class ShootingError(RuntimeError):
    """Newton divergence, stagnation, or period collapse in the shooter."""


class ContinuationStall(RuntimeError):
    """Energy step shrank below its floor; carries the partial branch."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class OrbitClassification:
    """Geometric flags and diagnostics for one converged brake orbit."""

    is_weak_eigenmode: bool = False
    is_eigenmode: bool = False
    is_rosenberg: bool = False
    is_degenerate: bool = False
    min_potential_along: float = np.nan
    min_config_dist_to_eq: float = np.nan
    equilibrium_passage_time: Optional[float] = None
    momentum_zero_events: int = 0
    brake_separation: float = np.nan
    self_intersection_gap: float = np.nan

    def as_dict(self):
        return {
            "is_weak_eigenmode": self.is_weak_eigenmode,
            "is_eigenmode": self.is_eigenmode,
            "is_rosenberg": self.is_rosenberg,
            "is_degenerate": self.is_degenerate,
            "min_potential_along": self.min_potential_along,
            "min_config_dist_to_eq": self.min_config_dist_to_eq,
            "equilibrium_passage_time": self.equilibrium_passage_time,
            "momentum_zero_events": self.momentum_zero_events,
        }


@dataclass
class BrakeOrbit:
    """A converged periodic brake trajectory.

    ``trajectory`` samples one full period [0, T] on a uniform grid with the
    half period landing exactly on a sample, so ``brake2`` is a grid point.
    """

    q0: np.ndarray
    half_period: float
    energy: float
    brake2: np.ndarray
    residual: float
    trajectory: Trajectory
    classification: OrbitClassification = field(
        default_factory=OrbitClassification)
    mode: int = 0
    side: int = +1

    @property
    def period(self) -> float:
        return 2.0 * self.half_period

    @property
    def n(self) -> int:
        return self.q0.size


@dataclass
class Generator:
    """One branch of the brake-point family of a mode, ordered by energy."""

    mode: int
    side: int
    orbits: list
    log: list = field(default_factory=list)

    @property
    def energies(self) -> np.ndarray:
        return np.array([o.energy for o in self.orbits])

    @property
    def brake_points(self) -> np.ndarray:
        return np.array([o.q0 for o in self.orbits])


@dataclass
class ContinuationOptions:
    """Knobs for :func:`shoot_brake_orbit` and :func:`continue_generator`."""

    dt: float | None = None          # target step; default from mode spectrum
    n_steps: int = 20                # target number of energy steps
    eps_seed: float = 0.05
    newton_tol: float = 1e-10
    max_newton: int = 30
    max_halvings: int = 8
    fd_step: float = 1e-6            # relative, forward differences
    de_growth: float = 1.3
    de_floor_frac: float = 1e-6
    max_q0_step: float = 1.0         # connectedness bound on |dq0| per step
    min_half_steps: int = 16
    scheme: str = "midpoint4"
    delta_int_frac: float = 1e-4     # self-intersection tolerance, scale-free
    delta_eq_frac: float = 1e-4      # equilibrium-passage tolerance
    classify_drift_budget: float = 1e-6


def _int_opts(opts: ContinuationOptions, dt: float) -> IntegratorOptions:
    return IntegratorOptions(dt=dt, scheme=opts.scheme,
                             drift_budget=np.inf)


class _HalfPeriodShooter:
    """Residual and Jacobian bookkeeping for one system and step target."""

    def __init__(self, sys: MechSystem, dt_target: float,
                 opts: ContinuationOptions):
        self.sys = sys
        self.n = sys.n
        self.dt_target = dt_target
        self.opts = opts
        self.jac = None
        self.flows = 0

    def steps_for(self, T: float) -> int:
        return max(self.opts.min_half_steps,
                   int(round((T / 2) / self.dt_target)))

    def half_flow(self, q0, T, n_steps):
        z0 = np.concatenate([q0, np.zeros(self.n)])
        dt = (T / 2) / n_steps
        self.flows += 1
        return propagate(self.sys, z0, dt, n_steps,
                         _int_opts(self.opts, dt))

    def residual(self, u, e_star, n_steps):
        q0, T = u[:-1], u[-1]
        if T <= 10.0 * self.dt_target:
            raise ShootingError(f"period collapse: T={T:.3e}")
        zs = self.half_flow(q0, T, n_steps)
        p_half = zs[-1, self.n:]
        p_scale = max(float(np.max(np.abs(zs[:, self.n:]))), 1e-12)
        r = np.concatenate([
            p_half,
            [float(self.sys.potential(q0)) - e_star]])
        return r, p_scale, zs

    def fd_jacobian(self, u, r0, e_star, n_steps):
        m = u.size
        J = np.empty((m, m))
        for i in range(m):
            h = self.opts.fd_step * max(1.0, abs(u[i]))
            up = u.copy()
            up[i] += h
            ri, _, _ = self.residual(up, e_star, n_steps)
            J[:, i] = (ri - r0) / h
        self.jac = J
        return J

    def converged(self, r, p_scale, e_star):
        tol = self.opts.newton_tol
        return (np.max(np.abs(r[:-1])) <= tol * max(1.0, p_scale)
                and abs(r[-1]) <= tol * max(1.0, abs(e_star)))

    def solve(self, q0_guess, T_guess, e_star):
        """Damped Newton on (q0, T) at a fixed energy level."""
        u = np.concatenate([np.asarray(q0_guess, dtype=float), [T_guess]])
        n_steps = self.steps_for(T_guess)
        r, p_scale, _ = self.residual(u, e_star, n_steps)
        if self.converged(r, p_scale, e_star):
            return self._result(u, r, e_star, n_steps, iters=0)
        refreshed = self.jac is None
        if self.jac is None:
            self.fd_jacobian(u, r, e_star, n_steps)
        best_norm = np.linalg.norm(r)
        stall = 0
        for it in range(1, self.opts.max_newton + 1):
            try:
                du = np.linalg.solve(self.jac, -r)
            except np.linalg.LinAlgError:
                du, *_ = np.linalg.lstsq(self.jac, -r, rcond=None)
            lam = 1.0
            for _ in range(self.opts.max_halvings):
                u_try = u + lam * du
                if u_try[-1] <= 10.0 * self.dt_target:
                    lam *= 0.5
                    continue
                r_try, p_scale, _ = self.residual(u_try, e_star, n_steps)
                if np.linalg.norm(r_try) < np.linalg.norm(r):
                    break
                lam *= 0.5
            else:
                if refreshed:
                    raise ShootingError("Newton step rejected after "
                                        f"{self.opts.max_halvings} halvings")
                self.fd_jacobian(u, r, e_star, n_steps)
                refreshed = True
                continue
            step = lam * du
            self.jac += np.outer((r_try - r) - self.jac @ step,
                                 step) / float(step @ step)
            u, r = u_try, r_try
            if self.converged(r, p_scale, e_star):
                return self._result(u, r, e_star, n_steps, iters=it)
            norm = np.linalg.norm(r)
            stall = stall + 1 if norm > 0.3 * best_norm else 0
            best_norm = min(best_norm, norm)
            if stall >= 6:
                if refreshed:
                    raise ShootingError(f"residual stagnation at "
                                        f"|r|={norm:.3e}")
                self.fd_jacobian(u, r, e_star, n_steps)
                refreshed = True
                stall = 0
        raise ShootingError(f"Newton did not converge in "
                            f"{self.opts.max_newton} iterations")

    def _result(self, u, r, e_star, n_steps, iters):
        return {"q0": u[:-1].copy(), "T": float(u[-1]),
                "residual": float(np.linalg.norm(r[:-1])),
                "n_steps": n_steps, "iters": iters, "e_star": e_star}


def _full_period_trajectory(sys, q0, T, n_half, opts) -> Trajectory:
    """Integrate [0, T] with the half period exactly on the sample grid."""
    dt = (T / 2) / n_half
    z0 = np.concatenate([q0, np.zeros(sys.n)])
    states = propagate(sys, z0, dt, 2 * n_half, _int_opts(opts, dt))
    times = dt * np.arange(2 * n_half + 1)
    energies = energy_log(sys, states)
    return Trajectory(times=times, states=states, energies=energies,
                      system_name=sys.name,
                      drift_budget=opts.classify_drift_budget)


def _segment_pair_distances(P, window=3):
    """Minimum distance between non-adjacent segments of a polyline.

    Returns the smallest distance over segment pairs separated by more than
    ``window`` indices, or +inf when the polyline is too short.
    """
    S = P.shape[0] - 1
    if S < window + 2:
        return np.inf
    A, B = P[:-1], P[1:]
    D = B - A
    i, j = np.triu_indices(S, k=window + 1)
    a, d1 = A[i], D[i]
    b, d2 = A[j], D[j]
    r = a - b
    a11 = np.einsum("ij,ij->i", d1, d1)
    a22 = np.einsum("ij,ij->i", d2, d2)
    a12 = np.einsum("ij,ij->i", d1, d2)
    b1 = np.einsum("ij,ij->i", d1, r)
    b2 = np.einsum("ij,ij->i", d2, r)
    det = np.maximum(a11 * a22 - a12 * a12, 1e-300)
    s = np.clip((a12 * b2 - a22 * b1) / det, 0.0, 1.0)
    for _ in range(3):  # clamped coordinate descent on the pair quadratic
        t = np.clip((a12 * s + b2) / np.maximum(a22, 1e-300), 0.0, 1.0)
        s = np.clip((a12 * t - b1) / np.maximum(a11, 1e-300), 0.0, 1.0)
    diff = r + s[:, None] * d1 - t[:, None] * d2
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diff, diff))))


def _refine_parabolic(ts, ys, i):
    """Vertex of the parabola through samples i-1, i, i+1 (clamped)."""
    if i == 0 or i == ys.size - 1:
        return float(ts[i]), float(ys[i])
    t0, t1, t2 = ts[i - 1], ts[i], ts[i + 1]
    y0, y1, y2 = ys[i - 1], ys[i], ys[i + 1]
    denom = (y0 - 2 * y1 + y2)
    if denom <= 0:
        return float(t1), float(y1)
    h = t1 - t0
    shift = 0.5 * h * (y0 - y2) / denom
    shift = float(np.clip(shift, -h, h))
    t_star = t1 + shift
    y_star = y1 - 0.125 * (y0 - y2) ** 2 / denom
    return float(t_star), float(y_star)


def classify_orbit(orbit: BrakeOrbit, report: ModalReport,
                   sym_verdict=None,
                   opts: ContinuationOptions | None = None,
                   potential=None) -> OrbitClassification:
    """Fill the geometric classification of a converged brake orbit.

    Flags: ``is_weak_eigenmode`` requires two distinct brake points;
    ``is_eigenmode`` additionally requires the half-period configuration arc
    not to self-intersect (sampled segment test; a heuristic for n >= 3);
    ``is_rosenberg`` requires a weak eigenmode passing through the
    equilibrium configuration.  ``sym_verdict`` is attached context only; the
    flags are measured from the trajectory.
    """
    opts = opts or ContinuationOptions()
    traj = orbit.trajectory
    n = orbit.n
    n_half = (traj.states.shape[0] - 1) // 2
    q_bar = report.q_bar

    qs = traj.configurations()
    ps = traj.momenta()
    cls = OrbitClassification()

    p_norm = np.linalg.norm(ps, axis=1)
    p_scale = max(float(np.max(p_norm)), 1e-300)
    low = p_norm <= 1e-6 * p_scale
    events = 0
    prev = False
    for i in range(p_norm.size - 1):  # exclude duplicate endpoint
        if low[i] and not prev:
            events += 1
        prev = low[i]
    cls.momentum_zero_events = events

    cls.brake_separation = float(np.linalg.norm(orbit.brake2 - orbit.q0))
    cls.is_weak_eigenmode = cls.brake_separation > 1e-6
    cls.is_degenerate = not cls.is_weak_eigenmode

    half = qs[: n_half + 1]
    diam = float(np.max(np.ptp(half, axis=0)))
    diam = max(diam, 1e-300)
    if half.shape[0] > 400:
        stride = int(np.ceil(half.shape[0] / 400))
        idx = np.arange(0, half.shape[0], stride)
        if idx[-1] != half.shape[0] - 1:
            idx = np.append(idx, half.shape[0] - 1)
        poly = half[idx]
    else:
        poly = half
    gap = _segment_pair_distances(poly)
    cls.self_intersection_gap = gap / diam if np.isfinite(gap) else np.inf
    cls.is_eigenmode = bool(cls.is_weak_eigenmode
                            and cls.self_intersection_gap
                            > opts.delta_int_frac)

    # squared distance is smooth through a transversal equilibrium passage,
    # so the parabolic vertex refines both the time and the miss distance
    dist_sq = np.einsum("ij,ij->i", qs - q_bar[None, :], qs - q_bar[None, :])
    i_min = int(np.argmin(dist_sq[: n_half + 1]))
    t_star, d2_star = _refine_parabolic(traj.times, dist_sq, i_min)
    cls.min_config_dist_to_eq = float(np.sqrt(max(d2_star, 0.0)))
    delta_eq = opts.delta_eq_frac * diam
    cls.is_rosenberg = bool(cls.is_weak_eigenmode
                            and cls.min_config_dist_to_eq < delta_eq)
    if cls.is_rosenberg:
        cls.equilibrium_passage_time = t_star

    if potential is None:
        raise ValueError("classify_orbit requires the system potential")
    vs = np.array([potential(q) for q in half])
    j = int(np.argmin(vs))
    _, v_star = _refine_parabolic(traj.times[: n_half + 1], vs, j)
    cls.min_potential_along = float(min(v_star, float(np.min(vs))))
    return cls


def shoot_brake_orbit(sys: MechSystem, q0_guess, T_guess: float,
                      energy: float | None = None,
                      report: ModalReport | None = None,
                      opts: ContinuationOptions | None = None,
                      mode: int = 0, side: int = +1) -> BrakeOrbit:
    """Converge a single brake orbit near (q0_guess, T_guess).

    Parameters
    ----------
    sys : MechSystem
    q0_guess : array_like
        Initial brake configuration guess (momentum is identically zero).
    T_guess : float
        Period guess.
    energy : float, optional
        Energy level V(q0) = energy pinning the one-parameter freedom;
        defaults to V(q0_guess).
    report : ModalReport, optional
        Enables classification against the refined equilibrium.
    """
    opts = opts or ContinuationOptions()
    q0_guess = np.asarray(q0_guess, dtype=float)
    if energy is None:
        energy = float(sys.potential(q0_guess))
    dt_target = opts.dt
    if dt_target is None:
        if report is None:
            raise ValueError("provide opts.dt or a modal report")
        dt_target = 2.0 * np.pi / report.omega(1) / 400.0
    shooter = _HalfPeriodShooter(sys, dt_target, opts)
    sol = shooter.solve(q0_guess, T_guess, energy)
    orbit = _finish_orbit(sys, sol, opts, mode, side)
    if report is not None:
        orbit.classification = classify_orbit(orbit, report, opts=opts,
                                              potential=sys.potential)
    return orbit


def _finish_orbit(sys, sol, opts, mode, side) -> BrakeOrbit:
    traj = _full_period_trajectory(sys, sol["q0"], sol["T"],
                                   sol["n_steps"], opts)
    brake2 = traj.configurations()[sol["n_steps"]]
    return BrakeOrbit(q0=sol["q0"], half_period=sol["T"] / 2,
                      energy=float(hamiltonian(sys, traj.initial_state)),
                      brake2=brake2, residual=sol["residual"],
                      trajectory=traj, mode=mode, side=side)


def continue_generator(sys: MechSystem, report: ModalReport, mode: int,
                       e_max: float,
                       opts: ContinuationOptions | None = None):
    """Continue both branches of one mode family up to an energy level.

    Parameters
    ----------
    sys : MechSystem
    report : ModalReport
        Output of :func:`modalkit.modal.modal_analysis`.
    mode : int
        1-based mode index (descending squared frequencies).
    e_max : float
        Target energy level (same scale as the Hamiltonian); must exceed
        V(q_bar).  Orbits are appended with strictly increasing energy.
    opts : ContinuationOptions, optional

    Returns
    -------
    (Generator, Generator)
        The branches seeded at positive and negative mode amplitude.  A
        branch that stalls raises :class:`ContinuationStall` carrying the
        partial result.
    """
    opts = opts or ContinuationOptions()
    v_bar = float(sys.potential(report.q_bar))
    if e_max <= v_bar:
        return (Generator(mode=mode, side=+1, orbits=[]),
                Generator(mode=mode, side=-1, orbits=[]))
    branches = []
    for side in (+1, -1):
        branches.append(_continue_branch(sys, report, mode, side, e_max,
                                         opts))
    return tuple(branches)


def _continue_branch(sys, report, mode, side, e_max, opts) -> Generator:
    w_max = report.omega(1)
    dt_target = opts.dt if opts.dt is not None else 2 * np.pi / w_max / 400.0
    shooter = _HalfPeriodShooter(sys, dt_target, opts)

    seed = eigenspace_seed(report, mode, side * opts.eps_seed)
    e_seed = float(sys.potential(seed.state.q))
    gen = Generator(mode=mode, side=side, orbits=[])

    sol = shooter.solve(seed.state.q, seed.period, e_seed)
    orbit = _finish_orbit(sys, sol, opts, mode, side)
    orbit.classification = classify_orbit(orbit, report, opts=opts,
                                          potential=sys.potential)
    gen.orbits.append(orbit)
    gen.log.append({"E": e_seed, "dE": 0.0, "iters": sol["iters"],
                    "event": "seed"})

    e_span = e_max - e_seed
    if e_span <= 0:
        return gen
    v_bar = float(sys.potential(report.q_bar))
    de = e_span / opts.n_steps
    de_floor = opts.de_floor_frac * e_span
    e_last = e_seed
    while e_last < e_max - 1e-12 * max(1.0, abs(e_max)):
        e_next = min(e_last + de, e_max)
        u_pred = _predict(gen, e_next, report, v_bar)
        try:
            sol = shooter.solve(u_pred[:-1], u_pred[-1], e_next)
            q0_prev = gen.orbits[-1].q0
            if np.linalg.norm(sol["q0"] - q0_prev) > opts.max_q0_step:
                raise ShootingError("brake-point jump exceeds the "
                                    "connectedness bound")
        except ShootingError as exc:
            de *= 0.5
            shooter.jac = None
            gen.log.append({"E": e_next, "dE": de, "iters": None,
                            "event": f"halved: {exc}"})
            if de < de_floor:
                raise ContinuationStall(
                    f"mode {mode} side {side:+d}: energy step "
                    f"{de:.3e} fell below floor {de_floor:.3e} at "
                    f"E={e_next:.6g}", partial=gen) from exc
            continue
        orbit = _finish_orbit(sys, sol, opts, mode, side)
        orbit.classification = classify_orbit(orbit, report, opts=opts,
                                              potential=sys.potential)
        if orbit.classification.is_degenerate:
            gen.log.append({"E": e_next, "dE": de, "iters": sol["iters"],
                            "event": "degenerate orbit skipped"})
            e_last = e_next
            continue
        gen.orbits.append(orbit)
        gen.log.append({"E": e_next, "dE": de, "iters": sol["iters"],
                        "event": "ok"})
        e_last = e_next
        if sol["iters"] <= 3:
            de = min(de * opts.de_growth, e_span / 4)
    return gen


def _predict(gen, e_next, report, v_bar):
    """Secant predictor in (q0, T) versus energy; amplitude scaling from
    the seed when only one orbit is available."""
    orbits = gen.orbits
    if len(orbits) >= 2:
        o1, o2 = orbits[-2], orbits[-1]
        u1 = np.concatenate([o1.q0, [o1.period]])
        u2 = np.concatenate([o2.q0, [o2.period]])
        de = o2.energy - o1.energy
        if abs(de) > 1e-300:
            return u2 + (u2 - u1) * (e_next - o2.energy) / de
        return u2
    o = orbits[-1]
    amp = o.q0 - report.q_bar
    denom = max(o.energy - v_bar, 1e-300)
    scale = np.sqrt(max((e_next - v_bar) / denom, 0.25))
    return np.concatenate([report.q_bar + amp * scale, [o.period]])


def equilibrium_passage_time(orbit: BrakeOrbit):
    """Time of closest approach to the equilibrium, for passing orbits.

    Returns None unless the orbit classified as passing through the
    equilibrium configuration; for those orbits the time sits a quarter
    period from the starting brake point.
    """
    if not orbit.classification.is_rosenberg:
        return None
    return orbit.classification.equilibrium_passage_time


def write_generator_csv(gen: Generator, path, n: int | None = None):
    """Write one branch as CSV (columns expanded per degree of freedom)."""
    if n is None:
        n = gen.orbits[0].n if gen.orbits else 0
    header = (["mode", "side", "E", "T"]
              + [f"q0_{i + 1}" for i in range(n)]
              + [f"brake2_{i + 1}" for i in range(n)]
              + ["min_V", "is_rosenberg", "residual"])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for o in gen.orbits:
            row = [gen.mode, gen.side, f"{o.energy:.17g}",
                   f"{o.period:.17g}"]
            row += [f"{v:.17g}" for v in o.q0]
            row += [f"{v:.17g}" for v in o.brake2]
            row += [f"{o.classification.min_potential_along:.17g}",
                    int(o.classification.is_rosenberg),
                    f"{o.residual:.17g}"]
            writer.writerow(row)
