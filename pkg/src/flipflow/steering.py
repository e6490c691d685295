"""Constructive covering: Jacobian ranks, flip-time searches and steering.

Every schedule produced here lives in the positive orthant: backward flows
are never executed, they are replaced by forward flows of (near-)recurrent
length, so a :class:`SteerResult` can be replayed with :func:`jcompose`
followed by one terminal free flow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dynamics import (
    State,
    flip,
    from_modal,
    g_star,
    h_distance,
    jcompose,
    propagate,
    rotate_modal,
    to_modal,
)
from .errors import BudgetExceeded, DifferentEnergy, HorizonTooShort, StalledProgress
from .model import check_admissible
from .search import grid_refine
from .torus import _beta, metrics, optimal_flip_momentum, psi_squared

DEFAULT_GRID = 20_000
DEFAULT_STALL = 0.5
MAX_DOUBLINGS = 6


class AdmissibilityUnknown(UserWarning):
    """The system failed the admissibility check; covering is not guaranteed."""


def default_horizon(spec):
    return 200.0 * 2.0 * math.pi / float(spec.omega[0])


def flip_budget(spec):
    """ceil(max_k beta_k^-2) + 3, the uniform bound on steering flips.

    Raises:
        NotInVPlus: some beta_k vanishes, so no bound exists.
    """
    return int(math.ceil(float(np.max(1.0 / _beta(spec) ** 2)))) + 3


# --- Jacobian ------------------------------------------------------------------

def jacobian_columns(spec, psi, taus):
    """Columns d/dtau_i J(tau_1..tau_k) psi by central differences.

    Step is 1e-6 max(1, tau_i); the difference becomes one-sided when
    tau_i is closer to zero than the step.
    """
    taus = np.asarray(taus, dtype=float)
    if taus.size < 1:
        raise ValueError("need at least one flip time")
    cols = []
    for i, ti in enumerate(taus):
        h = 1e-6 * max(1.0, ti)
        up, dn = taus.copy(), taus.copy()
        up[i] += h
        if ti - h >= 0:
            dn[i] -= h
            span = 2 * h
        else:
            span = h
        a = jcompose(spec, psi, up).as_vector()
        b = jcompose(spec, psi, dn).as_vector()
        cols.append((a - b) / span)
    return np.column_stack(cols)


def jacobian_analytic(spec, psi, taus):
    """Reference Jacobian from the column recursion.

    theta_k = I e^{tau_k A} A J(tau_1..tau_{k-1}) psi, and older columns are
    carried forward by I e^{tau_k A}; both maps are linear so they act on
    the derivative vectors exactly as on states.
    """
    a = spec.a_matrix
    x = psi
    cols = []
    for tau in taus:
        def step(v):
            return flip(propagate(spec, State.from_vector(v), tau)).as_vector()
        cols = [step(c) for c in cols]
        cols.append(step(a @ x.as_vector()))
        x = flip(propagate(spec, x, tau))
    return np.column_stack(cols)


def numerical_rank(m, rel_tol=1e-7):
    """Number of singular values above ``rel_tol`` times the largest."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


@dataclass
class CoveringResult:
    achieved_rank: int
    witness_taus: np.ndarray
    trials_used: int

    @property
    def success(self):
        return self.achieved_rank == len(self.witness_taus)


def verify_local_covering(spec, psi, k, trials, rng, t_max=None, rel_tol=1e-7):
    """Search random tau in (0, t_max]^k for a Jacobian of full rank k."""
    if not 1 <= k <= 2 * spec.n - 1:
        raise ValueError(f"k must lie in 1..{2 * spec.n - 1}")
    if not check_admissible(spec).in_v_plus:
        warnings.warn("spec is not in V+; local covering may fail", AdmissibilityUnknown,
                      stacklevel=2)
    if t_max is None:
        t_max = 2.0 * math.pi / float(spec.omega[0])
    best_rank, witness = -1, None
    used = 0
    for used in range(1, trials + 1):
        taus = t_max * (1.0 - rng.random(k))  # (0, t_max]
        rank = numerical_rank(jacobian_columns(spec, psi, taus), rel_tol)
        if rank > best_rank:
            best_rank, witness = rank, taus
        if rank == k:
            break
    return CoveringResult(best_rank, witness, used)


# --- time searches ---------------------------------------------------------------

@dataclass
class FlipTime:
    t: float
    achieved_distance: float


def _momentum_at(spec, qm, pm, t):
    return rotate_modal(spec.omega, qm, pm, t)[1]


def find_flip_time(spec, psi, target_p_modal, horizon=None, grid=DEFAULT_GRID, tol=None):
    """Earliest-best t in [0, horizon] with p~(t - 0) closest to the target.

    Only modal momenta are matched. Raises :class:`HorizonTooShort` when
    ``tol`` is given and the best distance exceeds it.
    """
    horizon = default_horizon(spec) if horizon is None else float(horizon)
    qm, pm = to_modal(spec, psi)
    target = np.asarray(target_p_modal, dtype=float)
    zeros, ones = np.zeros(spec.n), np.ones(spec.n)

    def scan(t0, dt, count):
        return _kernels.scan_modal_distance(qm, pm, spec.omega, qm, target, zeros, ones,
                                            t0, dt, count)

    def objective(t):
        d = _momentum_at(spec, qm, pm, t) - target
        return float(d @ d)

    t, val = grid_refine(scan, objective, 0.0, horizon, grid)
    dist = math.sqrt(max(val, 0.0))
    if tol is not None and dist > tol:
        raise HorizonTooShort(dist, tol, horizon)
    return FlipTime(t, dist)


def _scan_distance(spec, psi, target, weights_q, weights_p, horizon, grid):
    qm, pm = to_modal(spec, psi)
    tq, tp = to_modal(spec, target)

    def scan(t0, dt, count):
        return _kernels.scan_modal_distance(qm, pm, spec.omega, tq, tp, weights_q, weights_p,
                                            t0, dt, count)

    def objective(t):
        q, p = rotate_modal(spec.omega, qm, pm, t)
        return float(weights_q @ (q - tq) ** 2 + weights_p @ (p - tp) ** 2)

    t, val = grid_refine(scan, objective, 0.0, horizon, grid)
    return t, math.sqrt(max(val, 0.0))


def recurrence_time(spec, psi, target, eps, horizon=None, grid=DEFAULT_GRID):
    """Forward time s minimising ||e^{sA} psi - target||_H on [0, horizon]."""
    horizon = default_horizon(spec) if horizon is None else float(horizon)
    s, dist = _scan_distance(spec, psi, target, 0.5 * spec.omega_sq, 0.5 * np.ones(spec.n),
                             horizon, grid)
    if dist > eps:
        raise HorizonTooShort(dist, eps, horizon)
    return s


def _best_recurrence(spec, psi, target, eps, horizon, grid, doublings=MAX_DOUBLINGS):
    """Like :func:`recurrence_time` but doubling the horizon until ``eps`` is met.

    Returns the best ``(s, H-distance)`` seen, even when ``eps`` is missed.
    """
    wq, wp = 0.5 * spec.omega_sq, 0.5 * np.ones(spec.n)
    best = None
    for i in range(doublings + 1):
        s, dist = _scan_distance(spec, psi, target, wq, wp, horizon * 2**i, grid * 2**i)
        if best is None or dist < best[1]:
            best = (s, dist)
        if dist <= eps:
            break
    return best


def _extend(search, horizon, grid, doublings=MAX_DOUBLINGS):
    """Retry a HorizonTooShort search with the horizon (and grid) doubled."""
    for i in range(doublings + 1):
        try:
            return search(horizon * 2**i, grid * 2**i)
        except HorizonTooShort:
            if i == doublings:
                raise


# --- steering --------------------------------------------------------------------

@dataclass
class SteerResult:
    """A flip schedule and where it leads.

    ``final_state`` equals ``jcompose(psi0, taus)`` followed by a free flow
    of length ``terminal_time``.
    """

    taus: list
    terminal_time: float
    final_state: State
    final_error: float
    per_step_delta: list = field(default_factory=list)
    initial_delta: float = float("nan")

    @property
    def flips_used(self):
        return len(self.taus)

    def full_schedule(self):
        """Schedule as pure J-gaps; a terminal flow t becomes J(0) J(t)."""
        if self.terminal_time > 0:
            return list(self.taus) + [self.terminal_time, 0.0]
        return list(self.taus)

    def replay(self, spec, psi0):
        return propagate(spec, jcompose(spec, psi0, self.taus), self.terminal_time)

    def to_dict(self):
        return {
            "taus": [float(t) for t in self.taus],
            "terminal_time": float(self.terminal_time),
            "final_error": float(self.final_error),
            "flips_used": self.flips_used,
            "per_step_delta": [float(d) for d in self.per_step_delta],
            "final_state": {"q": self.final_state.q.tolist(), "p": self.final_state.p.tolist()},
        }


def _unit_radii(spec, qm, pm):
    r = np.sqrt(pm * pm + spec.omega_sq * qm * qm)
    return r / np.linalg.norm(r)


def _realized_delta(spec, qm, pm, t):
    q, p = rotate_modal(spec.omega, qm, pm, t)
    r = np.sqrt(p * p + spec.omega_sq * q * q)
    scale = np.linalg.norm(r)
    sq = psi_squared(spec.beta, r / scale, p / scale)
    g2 = np.maximum(sq, 0.0) / spec.beta**2
    return float(g2.max() - g2.min())


def _choose_flip(spec, qm, pm, r_unit, horizon, grid, strategy):
    """Candidate flip times; returns (t, realised Delta after the flip)."""
    psi = from_modal(spec, qm, pm)
    scale = math.sqrt(float(pm @ pm + spec.omega_sq @ (qm * qm)))
    target = optimal_flip_momentum(spec, r_unit) * scale
    t_mom = find_flip_time(spec, psi, target, horizon, grid).t
    best = (t_mom, _realized_delta(spec, qm, pm, t_mom))
    if strategy == "momentum":
        return best

    def scan(t0, dt, count):
        return _kernels.scan_flip_delta(qm, pm, spec.omega, spec.beta, t0, dt, count)

    t_del, _ = grid_refine(scan, lambda t: _realized_delta(spec, qm, pm, t), 0.0, horizon, grid)
    cand = (t_del, _realized_delta(spec, qm, pm, t_del))
    return cand if cand[1] < best[1] else best


def steer_to_gstar(spec, psi, eps=0.05, horizon=None, grid=DEFAULT_GRID, eps_delta=None,
                   strategy="best", stall=DEFAULT_STALL, max_flips=None):
    """Flip schedule taking ``psi`` to within ``eps`` of g_star (2-norm).

    Each round flips where the torus spread Delta drops the most, taking
    the better of the contraction-optimal momentum p' (``find_flip_time``)
    and a direct scan of the post-flip Delta; ``strategy="momentum"`` uses
    p' only. Once Delta <= ``eps_delta`` a free-flow recurrence finishes
    the approach.
    """
    horizon = default_horizon(spec) if horizon is None else float(horizon)
    eps_delta = eps / 5.0 if eps_delta is None else eps_delta
    max_flips = flip_budget(spec) if max_flips is None else max_flips
    target = g_star(spec)
    qm, pm = to_modal(spec, psi)
    taus, deltas = [], []
    r_unit = _unit_radii(spec, qm, pm)
    d0 = metrics(spec, r_unit).delta
    if np.linalg.norm(psi.as_vector() - target.as_vector()) <= eps:
        err = float(np.linalg.norm(psi.as_vector() - target.as_vector()))
        return SteerResult([], 0.0, psi, err, [], d0)
    d = d0
    while d > eps_delta:
        if len(taus) >= max_flips:
            raise BudgetExceeded(f"Delta = {d:.3g} after {len(taus)} flips")
        m = metrics(spec, r_unit)
        t, d_new = _choose_flip(spec, qm, pm, r_unit, horizon, grid, strategy)
        predicted = m.c_val * m.delta
        if m.delta - d_new < (1.0 - stall) * predicted:
            raise StalledProgress(
                f"flip {len(taus) + 1}: Delta {m.delta:.4g} -> {d_new:.4g}, "
                f"predicted {(1 - m.c_val) * m.delta:.4g}"
            )
        qm, pm = rotate_modal(spec.omega, qm, pm, t)
        pm = pm - 2.0 * (spec.beta @ pm) * spec.beta
        taus.append(float(t))
        r_unit = _unit_radii(spec, qm, pm)
        d = metrics(spec, r_unit).delta
        deltas.append(d)
    current = from_modal(spec, qm, pm)
    ones = np.ones(spec.n)

    def search(h, g):
        s, dist = _scan_distance(spec, current, target, ones, ones, h, g)
        if dist > eps:
            raise HorizonTooShort(dist, eps, h)
        return s

    s = _extend(search, horizon, grid)
    # replay from the schedule so the reported state is exactly reproducible
    final = propagate(spec, jcompose(spec, psi, taus), s)
    err = float(np.linalg.norm(final.as_vector() - target.as_vector()))
    return SteerResult(taus, float(s), final, err, deltas, d0)


def schedule_from_ops(ops):
    """Collapse a list of ('flow', t) / ('flip',) operations into J-gaps.

    Returns ``(taus, terminal_time)``.
    """
    taus, pending = [], 0.0
    for op in ops:
        if op[0] == "flow":
            pending += op[1]
        else:
            taus.append(pending)
            pending = 0.0
    return taus, pending


def steer_to_target(spec, psi_from, psi_to, eps=0.1, budget=None, horizon=None,
                    grid=DEFAULT_GRID):
    """Schedule from ``psi_from`` to within ``eps`` of ``psi_to`` in the H-norm.

    Both states are steered to g_star; the second schedule is then run
    backwards with every negative-time flow replaced by a forward
    recurrence of the current state onto the same point.
    """
    horizon = default_horizon(spec) if horizon is None else float(horizon)
    budget = 4 * flip_budget(spec) if budget is None else budget
    if h_distance(spec, psi_from, psi_to) <= eps:
        return SteerResult([], 0.0, psi_from, h_distance(spec, psi_from, psi_to))
    # ||x||_H <= kappa ||x||_2
    kappa = math.sqrt(0.5 * max(1.0, float(spec.omega_sq[-1])))
    eps_g = eps / (4.0 * kappa)
    first = steer_to_gstar(spec, psi_from, eps_g, horizon, grid)
    second = steer_to_gstar(spec, psi_to, eps_g, horizon, grid)
    gs = g_star(spec)
    # every map below is an H-isometry, so errors add
    spent = h_distance(spec, first.final_state, gs) + h_distance(spec, second.final_state, gs)
    back = second.full_schedule()
    pending = sum(1 for t in back if t > 0)

    ops = []
    for t in first.taus:
        ops += [("flow", t), ("flip",)]
    ops.append(("flow", first.terminal_time))
    x = first.final_state
    for tau in reversed(back):
        ops.append(("flip",))
        x = flip(x)
        if tau > 0:
            goal = propagate(spec, x, -tau)
            share = max(eps - spent, 0.0) / pending
            s, dist = _best_recurrence(spec, x, goal, share, horizon, grid)
            spent += dist
            pending -= 1
            ops.append(("flow", s))
            x = propagate(spec, x, s)
    taus, terminal = schedule_from_ops(ops)
    if len(taus) > budget:
        raise BudgetExceeded(f"{len(taus)} flips exceed budget {budget}")
    final = propagate(spec, jcompose(spec, psi_from, taus), terminal)
    err = h_distance(spec, final, psi_to)
    if err > eps:
        raise HorizonTooShort(err, eps, horizon)
    return SteerResult(taus, terminal, final, err, first.per_step_delta + second.per_step_delta,
                       first.initial_delta)


def steer_exact_n1(omega, psi, psi_target, rtol=1e-12):
    """Closed-form one-flip steering on a single oscillator.

    Returns ``(t1, t)`` with t = T0 = 2 pi / omega and
    e^{A(t - t1)} I e^{A t1} psi = psi_target. Uses I e^{A t1} = e^{-A t1} I,
    so the condition reads e^{2 t1 A} psi_target = I psi.
    """
    omega = float(omega)
    q, p = float(np.ravel(psi.q)[0]), float(np.ravel(psi.p)[0])
    qt, pt = float(np.ravel(psi_target.q)[0]), float(np.ravel(psi_target.p)[0])
    # w = omega q + i p rotates as w e^{-i omega u}
    w_src = complex(omega * q, -p)
    w_dst = complex(omega * qt, pt)
    if abs(abs(w_src) - abs(w_dst)) > rtol * max(1.0, abs(w_src)):
        raise DifferentEnergy(f"|w| = {abs(w_src):.12g} vs {abs(w_dst):.12g}")
    period = 2.0 * math.pi / omega
    ang = (math.atan2(w_dst.imag, w_dst.real) - math.atan2(w_src.imag, w_src.real)) % (2 * math.pi)
    u = ang / omega
    if u <= 0.0 or u >= period:
        return 0.5 * period, period
    return 0.5 * u, period
