"""Canonical Hamiltonian dynamics: energy, vector field, linearization.

The phase state is z = (q, p).  The vector field is

    qdot = M(q)^-1 p
    pdot_i = 1/2 qdot^T (dM/dq_i) qdot - dV/dq_i

using d(M^-1)/dq_i = -M^-1 (dM/dq_i) M^-1.  Linear solves with M go through
a Cholesky factorization; no inverse is formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .system import MechSystem


class EquilibriumError(ValueError):
    """Equilibrium refinement failed or point is not an equilibrium."""


@dataclass(frozen=True)
class State:
    """Phase point (q, p) with matching finite components."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        if q.shape != p.shape or q.ndim != 1:
            raise ValueError(f"q and p must be equal-length vectors, got "
                             f"{q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("state has non-finite entries")

    @property
    def n(self) -> int:
        return self.q.size

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_z(cls, z) -> "State":
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n], z[n:])


def _as_state(sys, s) -> State:
    if not isinstance(s, State):
        s = State.from_z(s)
    if s.n != sys.n:
        raise ValueError(f"state dimension {s.n} != system dimension {sys.n}")
    return s


def hamiltonian(sys: MechSystem, s) -> float:
    """Total energy 1/2 p^T M(q)^-1 p + V(q)."""
    s = _as_state(sys, s)
    M = np.asarray(sys.inertia(s.q), dtype=float)
    try:
        qd = cho_solve(cho_factor(M, lower=True), s.p)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"inertia not positive definite at q="
                         f"{s.q.tolist()}") from exc
    return 0.5 * float(s.p @ qd) + float(sys.potential(s.q))


def rhs(sys: MechSystem, generic: bool = False):
    """Return the phase-space vector field as a fast ``z -> dz`` callable.

    Uses the system's fused kernel when one is attached; ``generic=True``
    forces the componentwise path (used to cross-check the kernels).
    """
    if sys.vector_field_impl is not None and not generic:
        return sys.vector_field_impl
    n = sys.n
    inertia = sys.inertia
    partials = (sys.inertia_partials if sys.inertia_partials is not None
                else sys.partials)
    gradient = (sys.grad_potential if sys.grad_potential is not None
                else sys.gradient)

    def f(z):
        q = z[:n]
        p = z[n:]
        M = inertia(q)
        qd = np.linalg.solve(M, p)
        dM = partials(q)
        pd = 0.5 * (dM @ qd) @ qd - np.asarray(gradient(q), dtype=float)
        return np.concatenate([qd, pd])

    return f


def vector_field(sys: MechSystem, s) -> np.ndarray:
    """Evaluate (qdot, pdot) at a state; returned as one 2n-vector."""
    s = _as_state(sys, s)
    return rhs(sys)(s.z)


def phase_jacobian(sys: MechSystem, z, h: float = 1e-7) -> np.ndarray:
    """Central-difference Jacobian of the vector field at z."""
    z = np.asarray(z, dtype=float)
    f = rhs(sys)
    J = np.empty((z.size, z.size))
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = h * max(1.0, abs(z[i]))
        J[:, i] = (f(z + e) - f(z - e)) / (2 * e[i])
    return J


def refine_equilibrium(sys: MechSystem, q_guess, grad_tol: float = 1e-12,
                       max_iter: int = 50) -> np.ndarray:
    """Damped Newton refinement of dV/dq = 0 starting from ``q_guess``."""
    q = np.asarray(q_guess, dtype=float).copy()
    g = sys.gradient(q)
    gnorm = np.linalg.norm(g)
    for _ in range(max_iter):
        if gnorm <= grad_tol:
            return q
        H = sys.hessian(q)
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError as exc:
            raise EquilibriumError(
                f"singular Hessian during refinement at q={q.tolist()}"
            ) from exc
        lam = 1.0
        for _ in range(20):
            q_try = q + lam * step
            g_try = sys.gradient(q_try)
            if np.linalg.norm(g_try) < gnorm:
                q, g, gnorm = q_try, g_try, np.linalg.norm(g_try)
                break
            lam *= 0.5
        else:
            raise EquilibriumError(
                f"no descent direction at q={q.tolist()} "
                f"(|grad|={gnorm:.3e})")
    if gnorm <= grad_tol:
        return q
    raise EquilibriumError(
        f"equilibrium refinement did not converge from "
        f"{np.asarray(q_guess).tolist()}: |grad|={gnorm:.3e}")


def linearize(sys: MechSystem, q_guess) -> np.ndarray:
    """Phase-space linearization A = [[0, M^-1], [-Hess V, 0]] at equilibrium.

    The point is first refined with :func:`refine_equilibrium`; the gradient
    norm must come out below 1e-8.
    """
    q_bar = refine_equilibrium(sys, q_guess)
    if np.linalg.norm(sys.gradient(q_bar)) > 1e-8:
        raise EquilibriumError("refined point is not an equilibrium")
    n = sys.n
    M = np.asarray(sys.inertia(q_bar), dtype=float)
    H = np.asarray(sys.hessian(q_bar), dtype=float)
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.linalg.solve(M, np.eye(n))
    A[n:, :n] = -H
    return A
