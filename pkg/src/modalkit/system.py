"""Mechanical system abstraction: inertia tensor, potential, and derivatives.

A :class:`MechSystem` bundles callables ``inertia(q)`` and ``potential(q)``
together with optional analytic derivatives.  Missing derivatives fall back
to central finite differences.  Systems can be built in code, from the
builtin model registry, or declared in a JSON file with expressions for the
potential and inertia entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .expressions import Expr, ExprError, parse_expression


class SystemError(ValueError):
    """Invalid system definition or evaluation."""


class SystemFormatError(SystemError):
    """Malformed system definition file."""

    def __init__(self, message, position=None):
        self.position = position
        super().__init__(message)


class IndefiniteInertiaError(SystemError):
    """Inertia matrix failed the positive-definiteness check."""

    def __init__(self, q, min_eigenvalue):
        self.q = q
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"inertia not positive definite at q={np.asarray(q).tolist()}: "
            f"min eigenvalue {min_eigenvalue:.3e}")


class NonFiniteValueError(SystemError):
    """A model callable produced NaN or infinity."""


@dataclass
class MechSystem:
    """An n-DoF conservative mechanical system.

    Parameters
    ----------
    n : int
        Degrees of freedom.
    inertia : callable
        ``q -> (n, n)`` symmetric positive-definite matrix.
    potential : callable
        ``q -> float`` potential energy.
    grad_potential : callable, optional
        ``q -> (n,)`` gradient; finite differences when omitted.
    inertia_partials : callable, optional
        ``q -> (n, n, n)`` array of per-coordinate inertia derivatives,
        ``[i]`` giving the derivative with respect to ``q[i]``.
    hess_potential : callable, optional
        ``q -> (n, n)`` second derivative of the potential.
    """

    n: int
    inertia: Callable
    potential: Callable
    grad_potential: Optional[Callable] = None
    inertia_partials: Optional[Callable] = None
    hess_potential: Optional[Callable] = None
    name: str = ""
    params: dict = field(default_factory=dict)
    # optional fused kernels used by the propagation hot path; must agree
    # with the componentwise definitions (cross-checked in the test suite)
    vector_field_impl: Optional[Callable] = None
    hamiltonian_batch: Optional[Callable] = None

    def __post_init__(self):
        if self.n < 1:
            raise SystemError("n must be a positive integer")

    def gradient(self, q):
        if self.grad_potential is not None:
            return np.asarray(self.grad_potential(q), dtype=float)
        return fd_gradient(self, q)

    def partials(self, q):
        if self.inertia_partials is not None:
            return np.asarray(self.inertia_partials(q), dtype=float)
        return fd_inertia_partials(self, q)

    def hessian(self, q):
        if self.hess_potential is not None:
            return np.asarray(self.hess_potential(q), dtype=float)
        return fd_hessian(self, q)


def eval_potential(sys: MechSystem, q) -> float:
    """Evaluate V(q), rejecting non-finite results."""
    q = np.asarray(q, dtype=float)
    if q.shape != (sys.n,):
        raise SystemError(f"q must have shape ({sys.n},), got {q.shape}")
    v = float(sys.potential(q))
    if not np.isfinite(v):
        raise NonFiniteValueError(f"potential non-finite at q={q.tolist()}")
    return v


def eval_inertia(sys: MechSystem, q) -> np.ndarray:
    """Evaluate M(q) and verify symmetry and positive definiteness."""
    q = np.asarray(q, dtype=float)
    M = np.asarray(sys.inertia(q), dtype=float)
    if M.shape != (sys.n, sys.n):
        raise SystemError(f"inertia must be ({sys.n},{sys.n}), got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteValueError(f"inertia non-finite at q={q.tolist()}")
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise SystemError(f"inertia not symmetric at q={q.tolist()}")
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eigs[0] <= 0:
        raise IndefiniteInertiaError(q, eigs[0])
    return M


def _fd_steps(q):
    q = np.asarray(q, dtype=float)
    return np.maximum(1e-6, 1e-6 * np.abs(q))


def fd_gradient(sys: MechSystem, q) -> np.ndarray:
    """Central-difference gradient of the potential."""
    q = np.asarray(q, dtype=float)
    h = _fd_steps(q)
    g = np.empty(sys.n)
    for i in range(sys.n):
        e = np.zeros(sys.n)
        e[i] = h[i]
        g[i] = (sys.potential(q + e) - sys.potential(q - e)) / (2 * h[i])
    return g


def fd_inertia_partials(sys: MechSystem, q) -> np.ndarray:
    """Central-difference derivatives of the inertia matrix, per coordinate."""
    q = np.asarray(q, dtype=float)
    h = _fd_steps(q)
    out = np.empty((sys.n, sys.n, sys.n))
    for i in range(sys.n):
        e = np.zeros(sys.n)
        e[i] = h[i]
        out[i] = (np.asarray(sys.inertia(q + e)) -
                  np.asarray(sys.inertia(q - e))) / (2 * h[i])
    return out


def fd_hessian(sys: MechSystem, q, step: float = 1e-5) -> np.ndarray:
    """Central-difference Hessian of the potential (symmetrized)."""
    q = np.asarray(q, dtype=float)
    n = sys.n
    H = np.empty((n, n))
    V = sys.potential
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        H[i, i] = (V(q + ei) - 2.0 * V(q) + V(q - ei)) / step**2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            H[i, j] = (V(q + ei + ej) - V(q + ei - ej)
                       - V(q - ei + ej) + V(q - ei - ej)) / (4 * step**2)
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def _expr_system(spec: dict) -> MechSystem:
    n = spec["n"]
    variables = [f"q{i + 1}" for i in range(n)]
    params = dict(spec.get("params", {}))

    v_expr = parse_expression(spec["V_expr"], variables, params)
    m_rows = spec["M_expr"]
    if len(m_rows) != n or any(len(row) != n for row in m_rows):
        raise SystemFormatError(f"M_expr must be an {n}x{n} array of strings")
    m_exprs = [[parse_expression(src, variables, params) for src in row]
               for row in m_rows]

    def potential(q):
        return v_expr.evaluate(q)

    def inertia(q):
        return np.array([[e.evaluate(q) for e in row] for row in m_exprs])

    grad = hess = partials = None
    if v_expr.differentiable:
        dv = [v_expr.diff(v) for v in variables]
        ddv = [[dv[i].diff(v) for v in variables] for i in range(n)]

        def grad(q, _dv=dv):
            return np.array([e.evaluate(q) for e in _dv])

        def hess(q, _ddv=ddv):
            H = np.array([[e.evaluate(q) for e in row] for row in _ddv])
            return 0.5 * (H + H.T)

    if all(e.differentiable for row in m_exprs for e in row):
        dm = [[[m_exprs[a][b].diff(v) for b in range(n)] for a in range(n)]
              for v in variables]

        def partials(q, _dm=dm):
            return np.array([[[e.evaluate(q) for e in row] for row in tensor]
                             for tensor in _dm])

    return MechSystem(n=n, inertia=inertia, potential=potential,
                      grad_potential=grad, inertia_partials=partials,
                      hess_potential=hess,
                      name=spec.get("name", "expression-system"),
                      params=params)


def load_system(source) -> MechSystem:
    """Build a :class:`MechSystem` from a JSON file, path, or dict.

    The definition is either ``{"builtin": ..., "potential": ..., "params":
    {...}}`` referencing a registered model, or ``{"n": ..., "V_expr": ...,
    "M_expr": [[...]]}`` declaring the system with expressions.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SystemFormatError(
                f"invalid JSON: {exc.msg} at line {exc.lineno} column "
                f"{exc.colno}", position=exc.pos) from exc
    elif isinstance(source, dict):
        spec = source
    else:
        raise SystemFormatError(f"unsupported system source {type(source)!r}")

    if "builtin" in spec:
        from . import models
        builder = models.BUILTIN_MODELS.get(spec["builtin"])
        if builder is None:
            raise SystemFormatError(
                f"unknown builtin {spec['builtin']!r}; available: "
                f"{sorted(models.BUILTIN_MODELS)}")
        kwargs = {}
        if "potential" in spec:
            kwargs["potential"] = spec["potential"]
        try:
            return builder(params=spec.get("params"), **kwargs)
        except TypeError as exc:
            raise SystemFormatError(str(exc)) from exc

    for key in ("n", "V_expr", "M_expr"):
        if key not in spec:
            raise SystemFormatError(f"system definition missing {key!r}")
    try:
        return _expr_system(spec)
    except ExprError as exc:
        raise SystemFormatError(f"bad expression: {exc}",
                                position=exc.position) from exc
