"""Discrete symmetries: momentum reversal and involutive configuration maps.

Two kinds are represented.  Momentum reversal sends (q, p) to (q, -p) with
time running backward.  A spatial symmetry lifts an involutive configuration
map ``phi`` (fixing the equilibrium, with Jacobian -I there) to phase space
as (q, p) -> (phi(q), J_phi(q)^-T p) with time unchanged.  The default
spatial map is the point reflection q -> 2 qbar - q.

Verdicts are sampled: a system is reported symmetric when V and M are
invariant under the lifted map on a deterministic sample cloud, and a
trajectory is reported self-symmetric when its sampled orbit set matches its
image within a Hausdorff-type residual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .integrator import Trajectory
from .system import MechSystem


class SymmetryError(ValueError):
    pass


@dataclass
class SymmetrySpec:
    """A symmetry candidate: time reversal or a spatial involution."""

    kind: str                      # "time_reversal" | "spatial"
    q_bar: np.ndarray | None = None
    phi: Callable | None = None
    phi_jacobian: Callable | None = None
    tau: int = 1

    def __post_init__(self):
        if self.kind not in ("time_reversal", "spatial"):
            raise SymmetryError(f"unknown symmetry kind {self.kind!r}")
        if self.kind == "time_reversal":
            self.tau = -1
            return
        self.tau = 1
        if self.q_bar is None:
            raise SymmetryError("spatial symmetry requires q_bar")
        self.q_bar = np.asarray(self.q_bar, dtype=float)
        if self.phi is None:
            center = self.q_bar

            def phi(q, _c=center):
                return 2.0 * _c - np.asarray(q, dtype=float)

            self.phi = phi
            self.phi_jacobian = lambda q, n=center.size: -np.eye(n)

    def jacobian(self, q):
        if self.phi_jacobian is not None:
            return np.asarray(self.phi_jacobian(q), dtype=float)
        q = np.asarray(q, dtype=float)
        n = q.size
        J = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-7 * max(1.0, abs(q[i]))
            J[:, i] = (np.asarray(self.phi(q + e)) -
                       np.asarray(self.phi(q - e))) / (2 * e[i])
        return J

    def map_state(self, z):
        """Apply the lifted symmetry to a phase vector (q, p)."""
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        if self.kind == "time_reversal":
            out = z.copy()
            out[n:] *= -1.0
            return out
        q, p = z[:n], z[n:]
        J = self.jacobian(q)
        return np.concatenate([np.asarray(self.phi(q), dtype=float),
                               np.linalg.solve(J.T, p)])

    def map_states(self, Z):
        return np.array([self.map_state(z) for z in np.asarray(Z, float)])


def time_reversal() -> SymmetrySpec:
    return SymmetrySpec(kind="time_reversal")


def point_reflection(q_bar) -> SymmetrySpec:
    return SymmetrySpec(kind="spatial", q_bar=q_bar)


def validate_involution(spec: SymmetrySpec, half_width=np.pi / 2,
                        n_samples=100, seed=0, tol=1e-10):
    """Check phi o phi = id, phi(q_bar) = q_bar, and J(q_bar) = -I."""
    if spec.kind != "spatial":
        return
    q_bar = spec.q_bar
    rng = np.random.default_rng(seed)
    qs = q_bar + rng.uniform(-half_width, half_width,
                             size=(n_samples, q_bar.size))
    worst = 0.0
    for q in qs:
        back = np.asarray(spec.phi(np.asarray(spec.phi(q), dtype=float)))
        worst = max(worst, float(np.max(np.abs(back - q))))
    if worst > tol:
        raise SymmetryError(f"phi is not an involution: |phi(phi(q)) - q| "
                            f"up to {worst:.3e}")
    if np.max(np.abs(np.asarray(spec.phi(q_bar)) - q_bar)) > tol:
        raise SymmetryError("phi does not fix q_bar")
    J = spec.jacobian(q_bar)
    if np.max(np.abs(J + np.eye(q_bar.size))) > 1e-8:
        raise SymmetryError("Jacobian of phi at q_bar is not -identity")


@dataclass
class SymmetryVerdict:
    """Outcome of a sampled invariance check, with worst-case witnesses."""

    symmetric: bool
    max_violation_v: float
    max_violation_m: float
    worst_q_v: np.ndarray
    worst_q_m: np.ndarray
    tol: float
    n_samples: int
    extra_fixed_points: int = 0

    def as_dict(self):
        return {
            "symmetric": self.symmetric,
            "max_violation_V": self.max_violation_v,
            "max_violation_M": self.max_violation_m,
            "worst_q_V": self.worst_q_v.tolist(),
            "worst_q_M": self.worst_q_m.tolist(),
            "tol": self.tol,
            "n_samples": self.n_samples,
            "extra_fixed_points": self.extra_fixed_points,
        }


def check_spatial_symmetry(sys: MechSystem, spec: SymmetrySpec,
                           half_width: float = np.pi / 2,
                           n_samples: int = 1000, seed: int = 0,
                           tol: float = 1e-9) -> SymmetryVerdict:
    """Sampled invariance test of V and M under a spatial symmetry.

    Uniform samples are drawn from a hypercube of the given half-width
    around ``q_bar`` (deterministic seed).  The system is symmetric when
    ``|V(q) - V(phi(q))|`` and ``|M(q) - J^T M(phi(q)) J|`` stay below
    ``tol`` relative to the sampled scale of V and M.

    Whether ``q_bar`` is the only fixed point of phi at relevant potential
    levels is undecidable from samples; the verdict only counts sampled
    near-fixed points away from ``q_bar`` as a caveat indicator.
    """
    if spec.kind != "spatial":
        raise SymmetryError("spatial verdict requires a spatial symmetry")
    validate_involution(spec, half_width=half_width, seed=seed)
    q_bar = spec.q_bar
    rng = np.random.default_rng(seed)
    qs = q_bar + rng.uniform(-half_width, half_width,
                             size=(n_samples, q_bar.size))

    dv_max = dm_max = -1.0
    worst_qv = worst_qm = qs[0]
    v_scale = m_scale = 0.0
    extra_fixed = 0
    for q in qs:
        qm = np.asarray(spec.phi(q), dtype=float)
        J = spec.jacobian(q)
        v1 = float(sys.potential(q))
        v2 = float(sys.potential(qm))
        m1 = np.asarray(sys.inertia(q), dtype=float)
        m2 = J.T @ np.asarray(sys.inertia(qm), dtype=float) @ J
        v_scale = max(v_scale, abs(v1), abs(v2), 1e-12)
        m_scale = max(m_scale, float(np.max(np.abs(m1))), 1e-12)
        dv = abs(v1 - v2)
        dm = float(np.max(np.abs(m1 - m2)))
        if dv > dv_max:
            dv_max, worst_qv = dv, q
        if dm > dm_max:
            dm_max, worst_qm = dm, q
        if (np.linalg.norm(qm - q) < 1e-8
                and np.linalg.norm(q - q_bar) > 1e-6):
            extra_fixed += 1

    rel_v = dv_max / v_scale
    rel_m = dm_max / m_scale
    return SymmetryVerdict(
        symmetric=bool(rel_v <= tol and rel_m <= tol),
        max_violation_v=rel_v, max_violation_m=rel_m,
        worst_q_v=worst_qv, worst_q_m=worst_qm,
        tol=tol, n_samples=n_samples, extra_fixed_points=extra_fixed)


class ChartMap:
    """A configuration chart q -> y with a finite-difference Jacobian."""

    def __init__(self, func, n, name="chart"):
        self.func = func
        self.n = n
        self.name = name

    def __call__(self, q):
        return np.asarray(self.func(np.asarray(q, dtype=float)), dtype=float)

    def jacobian(self, q):
        q = np.asarray(q, dtype=float)
        J = np.empty((self.n, self.n))
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = 1e-7 * max(1.0, abs(q[i]))
            J[:, i] = (self(q + e) - self(q - e)) / (2 * e[i])
        return J


def equivariant_chart(chart: ChartMap, phi) -> ChartMap:
    """Build Y = (X - X o phi) / 2, which satisfies Y o phi = -Y.

    The construction preserves the Jacobian of X at any fixed point of phi
    whose pushforward there is -identity, so Y is again a valid chart on a
    neighborhood of the equilibrium.
    """
    def mapped(q):
        return 0.5 * (chart(q) - chart(np.asarray(phi(q), dtype=float)))

    return ChartMap(mapped, chart.n, name=f"equivariant({chart.name})")


def check_trajectory_symmetry(traj: Trajectory, spec: SymmetrySpec,
                              closure_tol: float = 1e-6) -> float:
    """Hausdorff-type residual between an orbit set and its symmetry image.

    The trajectory should cover at least one period; a warning is issued
    when the endpoints differ by more than ``closure_tol``.  The returned
    residual is normalized by the orbit diameter in phase space.
    """
    Z = traj.states
    gap = float(np.linalg.norm(Z[-1] - Z[0]))
    if gap > closure_tol:
        warnings.warn(f"trajectory endpoints differ by {gap:.3e}; "
                      "orbit may not be closed")
    ZM = spec.map_states(Z)
    tree_a = cKDTree(Z)
    tree_b = cKDTree(ZM)
    d_ab = np.max(tree_b.query(Z)[0])
    d_ba = np.max(tree_a.query(ZM)[0])
    sub = Z[:: max(1, Z.shape[0] // 1024)]
    diam = float(np.max(np.linalg.norm(sub[:, None, :] - sub[None, :, :],
                                       axis=-1)))
    return float(max(d_ab, d_ba) / max(diam, 1e-30))
