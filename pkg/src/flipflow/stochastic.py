"""The velocity-flip process: free flow punctuated by flips at i.i.d. waiting times.

Waiting times are drawn in blocks from a counter-based generator, so a
trajectory depends only on ``(seed, stream)`` and never on how many
trajectories run at once. The simulation loops here and the compiled
kernels consume the draws in the same order, so both see the same path.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .dynamics import State, from_modal, to_modal
from .errors import ConfigError
from .observables import Observable, resolve
from .rng import as_rng, make_rng

BLOCK = 4096
SUBSTEPS_PER_PERIOD = 32


# --- waiting laws ------------------------------------------------------------------

@dataclass(frozen=True)
class WaitingLaw:
    """Distribution of the gaps between flips.

    Build instances with :meth:`exponential`, :meth:`gamma` or
    :meth:`fixed_schedule`. A fixed schedule is deterministic and meant for
    tests; once exhausted it yields ``inf`` (no further flips).
    """

    kind: str
    rate: float = 1.0
    shape: float = 1.0
    scale: float = 1.0
    schedule: tuple = ()

    @classmethod
    def exponential(cls, rate=1.0):
        if not rate > 0:
            raise ConfigError(f"exponential rate must be positive, got {rate!r}")
        return cls("exponential", rate=float(rate))

    @classmethod
    def gamma(cls, shape, scale):
        if not (shape > 0 and scale > 0):
            raise ConfigError(f"gamma needs shape > 0 and scale > 0, got {shape!r}, {scale!r}")
        return cls("gamma", shape=float(shape), scale=float(scale))

    @classmethod
    def fixed_schedule(cls, taus):
        taus = tuple(float(t) for t in taus)
        if any(not t > 0 for t in taus):
            raise ConfigError("fixed_schedule entries must be positive")
        return cls("fixed_schedule", schedule=taus)

    @property
    def mean(self):
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "gamma":
            return self.shape * self.scale
        return float(np.mean(self.schedule)) if self.schedule else math.inf

    @property
    def is_stochastic(self):
        return self.kind != "fixed_schedule"

    def draw(self, rng, size):
        if self.kind == "exponential":
            return rng.exponential(1.0 / self.rate, size=size)
        if self.kind == "gamma":
            return rng.gamma(self.shape, self.scale, size=size)
        raise ValueError("fixed schedules are not drawn")

    def to_dict(self):
        if self.kind == "exponential":
            return {"kind": "exponential", "rate": self.rate}
        if self.kind == "gamma":
            return {"kind": "gamma", "shape": self.shape, "scale": self.scale}
        return {"kind": "fixed_schedule", "taus": list(self.schedule)}

    @classmethod
    def from_dict(cls, d):
        try:
            kind = d["kind"]
            if kind == "exponential":
                return cls.exponential(d.get("rate", 1.0))
            if kind == "gamma":
                return cls.gamma(d["shape"], d["scale"])
            if kind == "fixed_schedule":
                return cls.fixed_schedule(d["taus"])
        except KeyError as exc:
            raise ConfigError(f"waiting law: missing field {exc.args[0]!r}") from None
        raise ConfigError(f"waiting law: unknown kind {kind!r}")


class WaitStream:
    """Sequential gaps from a law, drawn ``BLOCK`` at a time."""

    def __init__(self, law, rng):
        self.law = law
        self.rng = as_rng(rng) if law.is_stochastic else None
        self._pos = 0

    def block(self):
        if self.law.is_stochastic:
            return self.law.draw(self.rng, BLOCK)
        sched = self.law.schedule
        out = np.full(BLOCK, np.inf)
        chunk = sched[self._pos : self._pos + BLOCK]
        out[: len(chunk)] = chunk
        self._pos += BLOCK
        return out

    def __iter__(self):
        while True:
            yield from self.block()


def sample_wait(law, rng):
    """One gap from ``law``. For a fixed schedule, pass the position as ``rng``."""
    if law.is_stochastic:
        return float(law.draw(as_rng(rng), None))
    i = int(rng)
    return law.schedule[i] if i < len(law.schedule) else math.inf


# --- path simulation ---------------------------------------------------------------

@dataclass
class EventLog:
    """Gaps and event times of one run; ``times[m] = sum(taus[:m + 1])``."""

    taus: np.ndarray
    times: np.ndarray
    final_state: State
    t_end: float
    states_at_events: Optional[list] = None

    @property
    def n_events(self):
        return int(self.taus.size)


def simulate_pdmp(spec, psi0, t_end, law, rng, observers=(), record_states=False):
    """Run the flip process on [0, t_end].

    Every observer is called as ``obs(state, duration, t_start)`` once per
    free-flow segment, including the final partial one. States are
    right-continuous: the state at an event time already has p_1 flipped,
    and an event falling exactly on ``t_end`` is applied.
    """
    t_end = float(t_end)
    qm, pm = to_modal(spec, psi0)
    omega, beta = spec.omega, spec.beta
    taus, times, states = [], [], [] if record_states else None
    t = 0.0
    for tau in WaitStream(law, rng):
        nxt = t + tau
        seg = tau if nxt <= t_end else t_end - t
        if observers and seg > 0:
            start = from_modal(spec, qm, pm)
            for obs in observers:
                obs(start, seg, t)
        c, s = np.cos(omega * seg), np.sin(omega * seg)
        qm, pm = c * qm + (s / omega) * pm, -omega * s * qm + c * pm
        if nxt > t_end:
            break
        pm = pm - 2.0 * (beta @ pm) * beta
        t = nxt
        taus.append(tau)
        times.append(t)
        if record_states:
            states.append(from_modal(spec, qm, pm))
        if t == t_end:
            break
    return EventLog(
        np.asarray(taus, dtype=float),
        np.asarray(times, dtype=float),
        from_modal(spec, qm, pm),
        t_end,
        states,
    )


def embedded_chain_array(spec, psi0, n_steps, law, rng, skip=0, thin=1):
    """Chain states psi_k for k = skip+1, skip+1+thin, ... up to n_steps.

    Returns an (m, 2N) array in physical (q, p) coordinates.
    """
    qm, pm = to_modal(spec, psi0)
    stream = WaitStream(law, rng)
    rows, done = [], 0
    while done < n_steps:
        taus = stream.block()[: n_steps - done]
        # global index done + i must satisfy (done + i - skip) % thin == 0
        local = skip - done if skip >= done else (skip - done) % thin
        kept, qm, pm = _kernels.chain_run(spec.omega, spec.beta, qm, pm, taus, local, thin)
        rows.append(kept)
        done += taus.size
    n = spec.n
    modal = np.vstack(rows) if rows else np.empty((0, 2 * n))
    return np.hstack([modal[:, :n] @ spec.modes.T, modal[:, n:] @ spec.modes.T])


def embedded_chain(spec, psi0, n_steps, law, rng):
    """[psi_0, psi_1, ..., psi_n] with psi_k = jstep(psi_{k-1}, tau_k)."""
    rows = embedded_chain_array(spec, psi0, n_steps, law, rng)
    return [psi0] + [State.from_vector(x) for x in rows]


# --- time averages -----------------------------------------------------------------

@dataclass
class TimeAverage:
    means: dict
    n_events: int
    t_end: float

    @property
    def mean(self):
        if len(self.means) != 1:
            raise ValueError("several observables; use .means")
        return next(iter(self.means.values()))


def default_substep(spec):
    return (2.0 * math.pi / float(spec.omega[-1])) / SUBSTEPS_PER_PERIOD


def _simpson_integral(spec, obs, start, duration, substep):
    m = max(2, math.ceil(duration / substep))
    m += m % 2
    s = np.linspace(0.0, duration, m + 1)
    qm, pm = to_modal(spec, start)
    c, sn = np.cos(np.outer(s, spec.omega)), np.sin(np.outer(s, spec.omega))
    qt = c * qm + sn / spec.omega * pm
    pt = -spec.omega * sn * qm + c * pm
    vals = obs.fn(np.hstack([qt @ spec.modes.T, pt @ spec.modes.T]))
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(w @ vals) * duration / (3.0 * m)


def _as_observables(spec, f_set):
    if isinstance(f_set, (str, Observable)):
        f_set = [f_set]
    return [resolve(f, spec) if isinstance(f, str) else f for f in f_set]


def time_averages(spec, psi0, f_set, t_end, law, rng, substep=None, force_quadrature=False):
    """M_f(T) = (1/T) int_0^T f(psi(t)) dt for several observables on one path.

    Quadratic observables use exact segment integrals through the compiled
    kernel. Anything else (or everything, with ``force_quadrature``) is
    integrated per segment by composite Simpson with step at most
    ``substep``, default a 32nd of the fastest period. For ``t_end = 0``
    the means are NaN.
    """
    obs = _as_observables(spec, f_set)
    t_end = float(t_end)
    substep = default_substep(spec) if substep is None else float(substep)
    if not substep > 0:
        raise ValueError("substep must be positive")
    rng = as_rng(rng) if law.is_stochastic else rng
    if t_end <= 0:
        return TimeAverage({o.name: math.nan for o in obs}, 0, t_end)
    exact = [o for o in obs if o.is_quadratic and not force_quadrature]
    if len(exact) == len(obs):
        forms = np.stack([o.modal_form(spec) for o in exact])
        ints, n_events = _kernel_integrals(spec, psi0, t_end, law, rng, forms)
        sums = {o.name: float(v) for o, v in zip(exact, ints)}
    else:
        sums = {o.name: 0.0 for o in obs}
        forms = [(o.name, o.modal_form(spec)) for o in exact]
        other = [o for o in obs if o not in exact]

        def observer(start, duration, _t):
            if forms:
                qm, pm = to_modal(spec, start)
                g = _kernels.segment_gram(spec.omega, qm, pm, duration)
                for name, m in forms:
                    sums[name] += float(np.sum(m * g))
            for o in other:
                sums[o.name] += _simpson_integral(spec, o, start, duration, substep)

        n_events = simulate_pdmp(spec, psi0, t_end, law, rng, [observer]).n_events
    return TimeAverage({o.name: float(sums[o.name] / t_end) for o in obs}, n_events, t_end)


def _kernel_integrals(spec, psi0, t_end, law, rng, forms):
    qm, pm = to_modal(spec, psi0)
    stream = WaitStream(law, rng)
    total = np.zeros(forms.shape[0])
    t, n_events, done = 0.0, 0, False
    while not done:
        n, t, ints, qm, pm, done = _kernels.pdmp_run(
            spec.omega, spec.beta, qm, pm, stream.block(), t, t_end, forms
        )
        total += ints
        n_events += n
    return total, n_events


def time_average(spec, psi0, f, t_end, law, rng, substep=None, force_quadrature=False):
    """Single-observable form of :func:`time_averages`; returns (mean, n_events)."""
    res = time_averages(spec, psi0, [f], t_end, law, rng, substep, force_quadrature)
    return res.mean, res.n_events


@dataclass
class TrajectoryResult:
    seed: int
    t_end: float
    means: dict
    n_events: int


def run_trajectory(spec, psi0, t_end, law, seed, f_set, substep=None):
    """Time averages for one seed, drawing gaps from ``make_rng(seed)``."""
    res = time_averages(spec, psi0, f_set, t_end, law, make_rng(seed), substep)
    return TrajectoryResult(int(seed), float(t_end), res.means, res.n_events)


def multi_trajectory(spec, psi0, t_end, law, seeds, f_set, workers=1, substep=None):
    """One independent run per seed, in seed order whatever ``workers`` is.

    The compiled kernel releases the GIL, so threads run in parallel.
    """
    seeds = list(seeds)
    if not seeds:
        return []
    if workers is None or workers <= 1:
        return [run_trajectory(spec, psi0, t_end, law, s, f_set, substep) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_trajectory(spec, psi0, t_end, law, s, f_set, substep), seeds))
