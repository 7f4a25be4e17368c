"""Equilibrium modal analysis and mode-family bookkeeping.

Solves the generalized symmetric eigenproblem Hess V(qbar) d = w^2 M(qbar) d
through a Cholesky reduction of M, which keeps the spectrum real whenever M
is positive definite.  The squared frequencies are reported in descending
order together with unit mode shapes, a pairwise resonance table, and the
phase-space eigenplane of each mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular

from .dynamics import State, refine_equilibrium
from .system import MechSystem, eval_inertia


class ModalError(ValueError):
    pass


@dataclass
class ResonancePair:
    """Ordered ratio check: mode ``j`` loses uniqueness when the faster
    mode ``k`` has a squared-frequency ratio within ``eps`` of an integer."""

    k: int
    j: int
    ratio: float
    nearest_int: int
    distance: float
    resonant: bool

    def as_dict(self):
        return {"k": self.k, "j": self.j, "ratio": self.ratio,
                "nearest_int": self.nearest_int, "distance": self.distance,
                "resonant": self.resonant}


@dataclass
class ModalReport:
    """Modal data at a refined equilibrium.

    ``omega_sq`` is sorted descending; ``mode_shapes[k]`` is the unit shape
    of 1-based mode ``k + 1``; ``eigenspaces[k]`` is a (2n, 2) basis of the
    phase-space plane spanned by (d, 0) and (0, M d).
    """

    q_bar: np.ndarray
    omega_sq: np.ndarray
    mode_shapes: np.ndarray
    stable: bool
    eps_int: float = 1e-6
    resonance: list = field(default_factory=list)
    non_resonant: np.ndarray | None = None
    m_unique: int = 0
    eigenspaces: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.q_bar.size

    def omega(self, mode: int) -> float:
        """Angular frequency of 1-based mode index."""
        w2 = self.omega_sq[mode - 1]
        if w2 <= 0:
            raise ModalError(f"mode {mode} is not oscillatory (w^2={w2:.3e})")
        return float(np.sqrt(w2))

    def shape(self, mode: int) -> np.ndarray:
        return self.mode_shapes[mode - 1]

    def as_dict(self):
        return {
            "q_bar": self.q_bar.tolist(),
            "omega_sq": self.omega_sq.tolist(),
            "mode_shapes": self.mode_shapes.tolist(),
            "stable": self.stable,
            "eps_int": self.eps_int,
            "resonance_table": [p.as_dict() for p in self.resonance],
            "m_unique": self.m_unique,
        }


def modal_analysis(sys: MechSystem, q_guess, eps_int: float = 1e-6) -> ModalReport:
    """Refine an equilibrium and solve its generalized eigenproblem.

    Parameters
    ----------
    sys : MechSystem
    q_guess : array_like
        Starting point for the Newton refinement of dV/dq = 0.
    eps_int : float
        Integer-distance tolerance used by :func:`resonance_check`.

    Returns
    -------
    ModalReport
        With descending ``omega_sq``.  An indefinite Hessian (unstable
        equilibrium) is reported through ``stable=False`` rather than an
        exception; resonance verdicts then cover the oscillatory modes only.
    """
    q_bar = refine_equilibrium(sys, q_guess)
    M = eval_inertia(sys, q_bar)
    H = np.asarray(sys.hessian(q_bar), dtype=float)
    H = 0.5 * (H + H.T)

    L = cholesky(M, lower=True)
    Y = solve_triangular(L, H, lower=True)
    C = solve_triangular(L, Y.T, lower=True).T
    w2, Y = eigh(0.5 * (C + C.T))
    shapes = solve_triangular(L, Y, lower=True, trans="T").T  # rows
    order = np.argsort(w2)[::-1]
    w2 = w2[order]
    shapes = shapes[order]
    shapes /= np.linalg.norm(shapes, axis=1, keepdims=True)

    stable = bool(w2[-1] > 0)
    residual = np.max([
        np.linalg.norm(H @ d - w * M @ d) / max(np.linalg.norm(H @ d), 1e-30)
        for w, d in zip(w2, shapes)])
    if residual > 1e-8:
        raise ModalError(f"eigenpair residual {residual:.3e} exceeds 1e-8; "
                         "spectrum may be defective")

    eigenspaces = []
    n = sys.n
    for d in shapes:
        basis = np.zeros((2 * n, 2))
        basis[:n, 0] = d
        basis[n:, 1] = M @ d
        eigenspaces.append(basis)

    report = ModalReport(q_bar=q_bar, omega_sq=w2, mode_shapes=shapes,
                         stable=stable, eps_int=eps_int,
                         eigenspaces=eigenspaces)
    return resonance_check(report, eps_int)


def resonance_check(report: ModalReport, eps_int: float) -> ModalReport:
    """Fill the pairwise resonance table and the unique-mode count.

    For each ordered pair the ratio ``omega_sq[k] / omega_sq[j]`` is tested
    against the nearest integer >= 1 within ``eps_int``; a hit disqualifies
    the slower mode ``j``.  ``m_unique`` counts modes with no disqualifying
    partner.
    """
    if eps_int <= 0:
        raise ModalError("eps_int must be positive")
    w2 = report.omega_sq
    n = w2.size
    pairs = []
    ok = np.ones(n, dtype=bool)
    for j in range(n):
        if w2[j] <= 0:
            ok[j] = False
            continue
        for k in range(n):
            if k == j:
                continue
            ratio = float(w2[k] / w2[j])
            nearest = int(round(ratio))
            dist = abs(ratio - nearest)
            resonant = bool(nearest >= 1 and dist <= eps_int)
            pairs.append(ResonancePair(k=k + 1, j=j + 1, ratio=ratio,
                                       nearest_int=nearest, distance=dist,
                                       resonant=resonant))
            if resonant:
                ok[j] = False
    report.eps_int = eps_int
    report.resonance = pairs
    report.non_resonant = ok
    report.m_unique = int(np.sum(ok))
    return report


@dataclass
class ModeSeed:
    """Brake-point seed on a linear eigenplane, with its period estimate."""

    state: State
    period: float
    mode: int
    amplitude: float
    warning: str | None = None


def eigenspace_seed(report: ModalReport, mode: int, amplitude: float) -> ModeSeed:
    """Seed state (qbar + amplitude * d_mode, p=0) with T0 = 2 pi / omega.

    A seed on a resonant mode is allowed but carries a warning: a family of
    periodic orbits still exists there, only its uniqueness is not
    guaranteed.
    """
    if not 1 <= mode <= report.n:
        raise ModalError(f"mode must be in 1..{report.n}, got {mode}")
    w = report.omega(mode)
    d = report.shape(mode)
    q0 = report.q_bar + amplitude * d
    warning = None
    if report.non_resonant is not None and not report.non_resonant[mode - 1]:
        warning = (f"mode {mode} is resonant at eps_int={report.eps_int:g}; "
                   "the continued family may not be unique")
        warnings.warn(warning)
    return ModeSeed(state=State(q0, np.zeros_like(q0)),
                    period=2.0 * np.pi / w, mode=mode, amplitude=amplitude,
                    warning=warning)
