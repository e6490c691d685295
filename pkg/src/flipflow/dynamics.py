"""Phase-space states, the exact free flow, the velocity flip and the maps J.

All flows are evaluated in normal-mode coordinates, where each mode is an
independent oscillator rotating at its own frequency. Nothing is cached on
states; the mode basis lives on the :class:`~flipflow.model.SystemSpec`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class State:
    """A point psi = (q, p) of phase space."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if q.shape != p.shape:
            raise ValueError(f"q and p differ in length: {q.size} vs {p.size}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("state has non-finite entries")
        q.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return self.q.size

    def as_vector(self):
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        half = x.size // 2
        return cls(x[:half], x[half:])

    def __eq__(self, other):
        if not isinstance(other, State):
            return NotImplemented
        return np.array_equal(self.q, other.q) and np.array_equal(self.p, other.p)

    def __repr__(self):
        return f"State(q={self.q.tolist()}, p={self.p.tolist()})"


@dataclass(frozen=True, eq=False)
class TorusVector:
    """Action radii r_k >= 0 labelling an invariant torus."""

    r: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float).reshape(-1)
        if np.any(r < 0) or not np.all(np.isfinite(r)):
            raise ValueError("action radii must be finite and non-negative")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    def __len__(self):
        return self.r.size

    def __repr__(self):
        return f"TorusVector({self.r.tolist()})"


def radii(r):
    """Plain array view of a TorusVector or array-like."""
    return np.asarray(getattr(r, "r", r), dtype=float)


# --- modal coordinates -------------------------------------------------------

def to_modal(spec, psi):
    """(q~, p~) of ``psi`` in the eigenbasis of V."""
    return spec.modes.T @ psi.q, spec.modes.T @ psi.p


def from_modal(spec, qm, pm):
    return State(spec.modes @ qm, spec.modes @ pm)


def rotate_modal(omega, qm, pm, t):
    """Advance every modal oscillator by time ``t`` (any sign)."""
    c = np.cos(omega * t)
    s = np.sin(omega * t)
    return c * qm + (s / omega) * pm, -omega * s * qm + c * pm


def flip_modal(beta, pm):
    """p~ after negating p_1: p~_k - 2 p_1 beta_k."""
    return pm - 2.0 * (beta @ pm) * beta


# --- public operations --------------------------------------------------------

def propagate(spec, psi, t):
    """Exact free flow e^{tA} psi; negative ``t`` runs the flow backwards."""
    if t == 0:
        return psi
    qm, pm = to_modal(spec, psi)
    qm, pm = rotate_modal(spec.omega, qm, pm, float(t))
    return from_modal(spec, qm, pm)


def flip(psi):
    """Negate the marked particle's momentum p_1."""
    p = psi.p.copy()
    p[0] = -p[0]
    return State(psi.q, p)


def jstep(spec, psi, tau):
    """J(tau) psi = I e^{tau A} psi."""
    if tau < 0:
        raise ValueError(f"flip gaps must be non-negative, got {tau}")
    return flip(propagate(spec, psi, tau))


def jcompose(spec, psi, taus):
    """J(tau_m) ... J(tau_1) psi, i.e. ``jstep`` folded left to right."""
    for tau in taus:
        psi = jstep(spec, psi, tau)
    return psi


def inverse_jcompose(spec, psi, taus):
    """Undo :func:`jcompose`: e^{-tau_1 A} I ... e^{-tau_m A} I psi."""
    for tau in reversed(list(taus)):
        psi = propagate(spec, flip(psi), -tau)
    return psi


def energy(spec, psi):
    """H = |p|^2 / 2 + (q, V q) / 2."""
    return 0.5 * float(psi.p @ psi.p + psi.q @ spec.v_matrix @ psi.q)


def h_inner(spec, u, w):
    """Bilinear form whose diagonal is H: ((p, p') + (q, V q')) / 2."""
    return 0.5 * float(u.p @ w.p + u.q @ spec.v_matrix @ w.q)


def h_norm(spec, psi):
    return np.sqrt(max(h_inner(spec, psi, psi), 0.0))


def h_distance(spec, u, w):
    return h_norm(spec, State(u.q - w.q, u.p - w.p))


def modal_momenta(spec, psi):
    return spec.modes.T @ psi.p


def action_vars(spec, psi):
    """Action radii r_k = sqrt(p~_k^2 + omega_k^2 q~_k^2)."""
    qm, pm = to_modal(spec, psi)
    return TorusVector(np.sqrt(pm * pm + spec.omega_sq * qm * qm))


def g_star(spec):
    """sqrt(2h) (0, e_1): all energy in the marked momentum."""
    p = np.zeros(spec.n)
    p[0] = np.sqrt(2.0 * spec.energy)
    return State(np.zeros(spec.n), p)


def state_on_torus(spec, r, phases):
    """Point of the torus ``r`` with oscillator angles ``phases``.

    Mode k sits at p~_k = r_k cos(phi_k), omega_k q~_k = r_k sin(phi_k).
    """
    r = radii(r)
    phases = np.asarray(phases, dtype=float)
    return from_modal(spec, r * np.sin(phases) / spec.omega, r * np.cos(phases))


def sample_path(spec, psi, times):
    """Free-flow states at each of ``times`` as an array of shape (len, 2N)."""
    qm, pm = to_modal(spec, psi)
    t = np.asarray(times, dtype=float)[:, None]
    c, s = np.cos(spec.omega * t), np.sin(spec.omega * t)
    qt = c * qm + s / spec.omega * pm
    pt = -spec.omega * s * qm + c * pm
    return np.hstack([qt @ spec.modes.T, pt @ spec.modes.T])
