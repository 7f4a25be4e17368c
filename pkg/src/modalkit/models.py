"""Builtin example models: coupled masses, double pendulum, 5-link pendulum.

All three families share the same potential menu where applicable:

* ``s1`` -- quadratic spring on the second coordinate plus a two-link gravity
  term; even about the origin.
* ``s2`` -- decoupled quadratic springs with the second spring centered at
  pi/2; even about its own equilibrium ``(0, pi/2)``.
* ``a``  -- the ``s2`` spring paired with the ``s1`` gravity term, which
  shifts the equilibrium off any reflection center.

Every builder returns a :class:`~modalkit.system.MechSystem` with analytic
gradient, Hessian, and inertia derivatives.
"""

from __future__ import annotations

import math

import numpy as np

from .system import MechSystem, SystemError

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional speedup
    njit = None

DP_DEFAULTS = {"m": 0.4, "I": 1.0 / 12.0, "d": 1.0, "k": 10.0, "g": 9.81}
CHAIN_DEFAULTS = {"m": 0.4, "l": 1.0, "k": 20.0, "g": 9.81}


def _check_positive(params, keys):
    for key in keys:
        if params[key] <= 0:
            raise SystemError(f"parameter {key!r} must be positive, got "
                              f"{params[key]}")


def _potential_functions(kind, d, m, g, k):
    """Return (V, grad, hess) for one of the potential variants."""
    dmg = d * m * g

    if kind == "s1":
        def V(q):
            return 0.5 * k * q[1] ** 2 - dmg * (2 * np.cos(q[0])
                                                + np.cos(q[0] + q[1]))

        def grad(q):
            s01 = np.sin(q[0] + q[1])
            return np.array([dmg * (2 * np.sin(q[0]) + s01),
                             k * q[1] + dmg * s01])

        def hess(q):
            c01 = np.cos(q[0] + q[1])
            return np.array([[dmg * (2 * np.cos(q[0]) + c01), dmg * c01],
                             [dmg * c01, k + dmg * c01]])
    elif kind == "s2":
        def V(q):
            return 0.5 * k * q[0] ** 2 + 0.5 * k * (q[1] - np.pi / 2) ** 2

        def grad(q):
            return np.array([k * q[0], k * (q[1] - np.pi / 2)])

        def hess(q):
            return np.array([[k, 0.0], [0.0, k]])
    elif kind == "a":
        def V(q):
            return (0.5 * k * (q[1] - np.pi / 2) ** 2
                    - dmg * (2 * np.cos(q[0]) + np.cos(q[0] + q[1])))

        def grad(q):
            s01 = np.sin(q[0] + q[1])
            return np.array([dmg * (2 * np.sin(q[0]) + s01),
                             k * (q[1] - np.pi / 2) + dmg * s01])

        def hess(q):
            c01 = np.cos(q[0] + q[1])
            return np.array([[dmg * (2 * np.cos(q[0]) + c01), dmg * c01],
                             [dmg * c01, k + dmg * c01]])
    else:
        raise SystemError(f"unknown potential variant {kind!r}")
    return V, grad, hess


def _grad_pair(kind, dmg, k):
    """Scalar gradient (g1, g2) of a potential variant, for fused kernels."""
    if kind == "s1":
        def grad2(q1, q2):
            s01 = math.sin(q1 + q2)
            return dmg * (2 * math.sin(q1) + s01), k * q2 + dmg * s01
    elif kind == "s2":
        def grad2(q1, q2):
            return k * q1, k * (q2 - math.pi / 2)
    else:
        def grad2(q1, q2):
            s01 = math.sin(q1 + q2)
            return (dmg * (2 * math.sin(q1) + s01),
                    k * (q2 - math.pi / 2) + dmg * s01)
    return grad2


def _potential_batch(kind, dmg, k):
    """Vectorized V over an (N, 2) block of configurations."""
    if kind == "s1":
        def vbatch(qs):
            return (0.5 * k * qs[:, 1] ** 2
                    - dmg * (2 * np.cos(qs[:, 0]) + np.cos(qs[:, 0] + qs[:, 1])))
    elif kind == "s2":
        def vbatch(qs):
            return (0.5 * k * qs[:, 0] ** 2
                    + 0.5 * k * (qs[:, 1] - np.pi / 2) ** 2)
    else:
        def vbatch(qs):
            return (0.5 * k * (qs[:, 1] - np.pi / 2) ** 2
                    - dmg * (2 * np.cos(qs[:, 0]) + np.cos(qs[:, 0] + qs[:, 1])))
    return vbatch


def build_coupled_masses(params=None, potential="s1") -> MechSystem:
    """Two coupled masses on the plane: constant inertia diag(m, m).

    Only the ``s1`` and ``a`` potentials are offered; the ``s2`` pairing is
    fully linear and excluded from the experiment set.
    """
    p = dict(DP_DEFAULTS)
    p.update(params or {})
    _check_positive(p, ("m", "d", "k", "g"))
    if potential not in ("s1", "a"):
        raise SystemError("coupled masses support potentials 's1' and 'a' "
                          f"(got {potential!r}; the 's2' pairing is linear)")
    m = p["m"]
    V, grad, hess = _potential_functions(potential, p["d"], m, p["g"], p["k"])
    M = np.array([[m, 0.0], [0.0, m]])
    zeros = np.zeros((2, 2, 2))
    grad2 = _grad_pair(potential, p["d"] * m * p["g"], p["k"])
    vbatch = _potential_batch(potential, p["d"] * m * p["g"], p["k"])

    def fused(z, _m=m, _g=grad2):
        g1, g2 = _g(z[0], z[1])
        return np.array([z[2] / _m, z[3] / _m, -g1, -g2])

    def ham_batch(states, _m=m, _v=vbatch):
        return ((states[:, 2] ** 2 + states[:, 3] ** 2) / (2 * _m)
                + _v(states[:, :2]))

    return MechSystem(
        n=2,
        inertia=lambda q: M.copy(),
        potential=V,
        grad_potential=grad,
        hess_potential=hess,
        inertia_partials=lambda q: zeros.copy(),
        name=f"coupled_masses:{potential}",
        params=p,
        vector_field_impl=fused,
        hamiltonian_batch=ham_batch,
    )


def build_double_pendulum(params=None, potential="s1") -> MechSystem:
    """Two-link pendulum with parallel joint elasticity.

    Inertia entries: ``M11 = I + d^2 m (3 + 2 cos q2)``,
    ``M12 = d^2 m (1 + cos q2)``, ``M22 = I + d^2 m``.
    """
    p = dict(DP_DEFAULTS)
    p.update(params or {})
    _check_positive(p, ("m", "I", "d", "k", "g"))
    m, I, d = p["m"], p["I"], p["d"]
    dm = d * d * m
    V, grad, hess = _potential_functions(potential, d, m, p["g"], p["k"])

    def inertia(q):
        c2 = np.cos(q[1])
        off = dm * (1 + c2)
        return np.array([[I + dm * (3 + 2 * c2), off], [off, I + dm]])

    def partials(q):
        s2 = np.sin(q[1])
        out = np.zeros((2, 2, 2))
        out[1] = np.array([[-2 * dm * s2, -dm * s2], [-dm * s2, 0.0]])
        return out

    grad2 = _grad_pair(potential, d * m * p["g"], p["k"])
    vbatch = _potential_batch(potential, d * m * p["g"], p["k"])
    m22 = I + dm

    def fused(z, _g=grad2):
        c2 = math.cos(z[1])
        s2 = math.sin(z[1])
        a = I + dm * (3 + 2 * c2)
        b = dm * (1 + c2)
        det = a * m22 - b * b
        qd1 = (m22 * z[2] - b * z[3]) / det
        qd2 = (a * z[3] - b * z[2]) / det
        kin2 = -dm * s2 * (qd1 * qd1 + qd1 * qd2)
        g1, g2 = _g(z[0], z[1])
        return np.array([qd1, qd2, -g1, kin2 - g2])

    def ham_batch(states, _v=vbatch):
        c2 = np.cos(states[:, 1])
        a = I + dm * (3 + 2 * c2)
        b = dm * (1 + c2)
        det = a * m22 - b * b
        p1, p2 = states[:, 2], states[:, 3]
        qd1 = (m22 * p1 - b * p2) / det
        qd2 = (a * p2 - b * p1) / det
        return 0.5 * (p1 * qd1 + p2 * qd2) + _v(states[:, :2])

    return MechSystem(
        n=2,
        inertia=inertia,
        potential=V,
        grad_potential=grad,
        hess_potential=hess,
        inertia_partials=partials,
        name=f"double_pendulum:{potential}",
        params=p,
        vector_field_impl=fused,
        hamiltonian_batch=ham_batch,
    )


class _SerialChain:
    """Planar serial chain of point masses at the link tips.

    Joint angles q are relative, q = 0 hanging straight down.  With absolute
    link angles ``th = L q`` (L lower-triangular ones), the kinetic energy is
    ``1/2 thd^T A(th) thd`` with ``A_jk = m l^2 cos(th_j - th_k) w_jk`` and
    ``w_jk`` the count of masses at or beyond both links.  Joint springs are
    diagonal in q; the gravity reference is shifted so V(0) = 0.
    """

    def __init__(self, n, m, l, k, g):
        self.n = n
        self.m, self.l, self.k, self.g = m, l, k, g
        idx = np.arange(1, n + 1)
        self.W = (n + 1.0) - np.maximum.outer(idx, idx)
        self.w = (n + 1.0) - idx
        self.mll = m * l * l
        self.mgl = m * g * l
        # mask[i, j] = 1 when absolute angle th_j depends on joint i
        self.mask = (np.arange(n)[None, :] >= np.arange(n)[:, None]).astype(float)

    @staticmethod
    def _suffix2(A):
        # (L^T A L)_{ab} = sum_{j>=a, k>=b} A_{jk}, via reversed cumsums
        c = np.cumsum(np.cumsum(A[::-1, ::-1], axis=0), axis=1)
        return c[::-1, ::-1]

    def vector_field(self, z):
        """Fused (qdot, pdot); kinetic momentum rate reduced to suffix sums
        of R_j = thd_j * sum_k W_jk sin(th_j - th_k) thd_k."""
        n = self.n
        q, p = z[:n], z[n:]
        th = np.cumsum(q)
        D = th[:, None] - th[None, :]
        A = (self.mll * self.W) * np.cos(D)
        M = self._suffix2(A)
        qd = np.linalg.solve(M, p)
        thd = np.cumsum(qd)
        R = thd * ((self.W * np.sin(D)) @ thd)
        grav = self.w * np.sin(th)
        pd = (-self.mll * np.cumsum(R[::-1])[::-1] - self.k * q
              - self.mgl * np.cumsum(grav[::-1])[::-1])
        return np.concatenate([qd, pd])

    def hamiltonian_batch(self, states):
        n = self.n
        qs, ps = states[:, :n], states[:, n:]
        th = np.cumsum(qs, axis=1)
        D = th[:, :, None] - th[:, None, :]
        A = (self.mll * self.W)[None, :, :] * np.cos(D)
        c = np.cumsum(np.cumsum(A[:, ::-1, ::-1], axis=1), axis=2)
        M = c[:, ::-1, ::-1]
        qd = np.linalg.solve(M, ps[:, :, None])[:, :, 0]
        kin = 0.5 * np.einsum("ij,ij->i", ps, qd)
        spring = 0.5 * self.k * np.einsum("ij,ij->i", qs, qs)
        grav = self.mgl * ((1.0 - np.cos(th)) @ self.w)
        return kin + spring + grav

    def inertia(self, q):
        th = np.cumsum(q)
        D = th[:, None] - th[None, :]
        A = self.mll * self.W * np.cos(D)
        return self._suffix2(A)

    def inertia_partials(self, q):
        th = np.cumsum(q)
        D = th[:, None] - th[None, :]
        S = self.mll * self.W * np.sin(D)
        # dA/dq_i = -S * (mask_i[j] - mask_i[k])
        dA = -S[None, :, :] * (self.mask[:, :, None] - self.mask[:, None, :])
        c = np.cumsum(np.cumsum(dA[:, ::-1, ::-1], axis=1), axis=2)
        return c[:, ::-1, ::-1]

    def potential(self, q):
        th = np.cumsum(q)
        spring = 0.5 * self.k * float(q @ q)
        return spring + self.mgl * float(self.w @ (1.0 - np.cos(th)))

    def grad_potential(self, q):
        th = np.cumsum(q)
        g_th = self.mgl * self.w * np.sin(th)
        # chain rule through th = L q: suffix sums
        return self.k * q + np.cumsum(g_th[::-1])[::-1]

    def hess_potential(self, q):
        th = np.cumsum(q)
        H = self._suffix2(np.diag(self.mgl * self.w * np.cos(th)))
        return self.k * np.eye(self.n) + H


if njit is not None:
    @njit(cache=True)
    def _chain_rhs_jit(z, n, mll, mgl, kspring, W, wg):  # pragma: no cover
        q = z[:n]
        p = z[n:]
        th = np.empty(n)
        acc = 0.0
        for i in range(n):
            acc += q[i]
            th[i] = acc
        A = np.empty((n, n))
        for j in range(n):
            for k in range(n):
                A[j, k] = mll * W[j, k] * math.cos(th[j] - th[k])
        M = np.empty((n, n))
        for a in range(n - 1, -1, -1):
            for b in range(n - 1, -1, -1):
                v = A[a, b]
                if a + 1 < n:
                    v += M[a + 1, b]
                if b + 1 < n:
                    v += M[a, b + 1]
                    if a + 1 < n:
                        v -= M[a + 1, b + 1]
                M[a, b] = v
        qd = np.linalg.solve(M, p.copy())
        thd = np.empty(n)
        acc = 0.0
        for i in range(n):
            acc += qd[i]
            thd[i] = acc
        out = np.empty(2 * n)
        out[:n] = qd
        s_r = 0.0
        s_g = 0.0
        for a in range(n - 1, -1, -1):
            row = 0.0
            for k in range(n):
                row += W[a, k] * math.sin(th[a] - th[k]) * thd[k]
            s_r += thd[a] * row
            s_g += wg[a] * math.sin(th[a])
            out[n + a] = -mll * s_r - kspring * q[a] - mgl * s_g
        return out
else:  # pragma: no cover
    _chain_rhs_jit = None


def build_quintuple_pendulum(params=None) -> MechSystem:
    """Five-link serial pendulum with joint springs and gravity.

    Point masses sit at the link tips; the straight-down configuration q = 0
    is the potential minimum (construction fails if the Hessian there is not
    positive definite, which would indicate a sign-convention bug).
    """
    p = dict(CHAIN_DEFAULTS)
    p.update(params or {})
    _check_positive(p, ("m", "l", "k", "g"))
    chain = _SerialChain(5, p["m"], p["l"], p["k"], p["g"])
    if _chain_rhs_jit is not None:
        def fused(z, _c=chain):
            return _chain_rhs_jit(z, _c.n, _c.mll, _c.mgl, _c.k, _c.W, _c.w)
    else:
        fused = chain.vector_field
    sys = MechSystem(
        n=5,
        inertia=chain.inertia,
        potential=chain.potential,
        grad_potential=chain.grad_potential,
        hess_potential=chain.hess_potential,
        inertia_partials=chain.inertia_partials,
        name="quintuple_pendulum",
        params=p,
        vector_field_impl=fused,
        hamiltonian_batch=chain.hamiltonian_batch,
    )
    q0 = np.zeros(5)
    if np.linalg.norm(sys.gradient(q0)) > 1e-10:
        raise SystemError("quintuple pendulum: q=0 is not an equilibrium")
    if np.linalg.eigvalsh(sys.hessian(q0))[0] <= 0:
        raise SystemError("quintuple pendulum: Hessian at q=0 is not "
                          "positive definite; check the gravity sign")
    return sys


BUILTIN_MODELS = {
    "coupled_masses": build_coupled_masses,
    "double_pendulum": build_double_pendulum,
    "quintuple_pendulum": build_quintuple_pendulum,
}
