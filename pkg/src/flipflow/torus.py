"""How one velocity flip moves the system between invariant tori.

Everything here works on the unit surface sum r_k^2 = 1 (energy 1/2); the
map is homogeneous of degree one in (r, p), so callers on other surfaces
divide by sqrt(2h) first. Momenta are always modal (p~).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TorusVector, radii
from .errors import MomentumOutsideCube, NegativeRadicand, NotInVPlus
from .model import DEFAULT_TOL

CLAMP = 1e-12
CUBE_SLACK = 1e-10


@dataclass(frozen=True)
class TorusMetrics:
    gamma: np.ndarray
    a_val: float
    b_val: float
    delta: float
    d_val: float
    c_val: float
    argmin: int
    argmax: int


def _beta(spec):
    beta = np.asarray(spec.beta, dtype=float)
    if np.min(np.abs(beta)) <= DEFAULT_TOL:
        raise NotInVPlus(
            f"min |beta_k| = {np.min(np.abs(beta)):.3g}; some mode never feels the flip"
        )
    return beta


def rho(r1, r2):
    """sum_k |r1_k^2 - r2_k^2|."""
    a, b = radii(r1), radii(r2)
    return float(np.sum(np.abs(a * a - b * b)))


def metrics(spec, r):
    """gamma_k = r_k/|beta_k| and the derived A, B, Delta, D and c."""
    beta = _beta(spec)
    gamma = radii(r) / np.abs(beta)
    lo, hi = int(np.argmin(gamma)), int(np.argmax(gamma))
    a, b = float(gamma[lo]), float(gamma[hi])
    d = b - a
    return TorusMetrics(
        gamma=gamma,
        a_val=a,
        b_val=b,
        delta=b * b - a * a,
        d_val=d,
        c_val=1.0 / max(1.0, d * d),
        argmin=lo,
        argmax=hi,
    )


def delta(spec, r):
    return metrics(spec, r).delta


def f_plus(x, c):
    return 0.5 * (x + np.sqrt(x * x + c * (1.0 - x * x)))


def f_minus(x, c):
    return 0.5 * (x - np.sqrt(x * x + c * (1.0 - x * x)))


def cube_contains(r, p_modal, slack=0.0):
    """True when |p~_k| <= r_k + slack for every mode."""
    return bool(np.all(np.abs(np.asarray(p_modal, dtype=float)) <= radii(r) + slack))


def sample_cube(r, rng):
    """Uniform draw from the momentum cube |p~_k| <= r_k."""
    r = radii(r)
    return rng.uniform(-1.0, 1.0, size=r.size) * r


def psi_squared(beta, r, p_modal):
    """Unchecked Psi_k^2 = r_k^2 + 4 p_1^2 beta_k^2 - 4 p_1 beta_k p~_k."""
    p1 = beta @ p_modal
    return r * r + 4.0 * p1 * p1 * beta * beta - 4.0 * p1 * beta * p_modal


def psi_map(spec, r, p_modal, slack=CUBE_SLACK):
    """Actions after a flip taken at modal momentum ``p_modal`` on torus ``r``."""
    r = radii(r)
    pm = np.asarray(p_modal, dtype=float)
    excess = np.max(np.abs(pm) - r)
    if excess > slack:
        raise MomentumOutsideCube(excess)
    sq = psi_squared(np.asarray(spec.beta, dtype=float), r, pm)
    if np.min(sq) < -CLAMP:
        raise NegativeRadicand(f"Psi_k^2 = {np.min(sq):.3g} below clamp threshold")
    return TorusVector(np.sqrt(np.maximum(sq, 0.0)))


def optimal_flip_momentum(spec, r):
    """Modal momentum p' whose flip contracts rho to r* by the factor 1 - c(r).

    p'_k = y beta_k - c (beta_k^2 - r_k^2) / (4 y beta_k) with y = f+(min gamma).
    The flip then gives Psi_k^2 = r_k^2 + c (beta_k^2 - r_k^2) exactly.
    """
    beta = _beta(spec)
    r = radii(r)
    if abs(r @ r - 1.0) > 1e-9:
        raise ValueError(f"torus must be unit-normalised, sum r_k^2 = {r @ r!r}")
    m = metrics(spec, r)
    c = m.c_val
    y = f_plus(m.a_val, c)
    return y * beta - c * (beta * beta - r * r) / (4.0 * y * beta)


def contraction_step(spec, r):
    """One optimal flip at the torus level: returns (p', Psi(r, p'))."""
    p = optimal_flip_momentum(spec, r)
    return p, psi_map(spec, r, p, slack=1e-12 + CUBE_SLACK)
