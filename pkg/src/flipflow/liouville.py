"""The microcanonical (Liouville) measure on an energy surface, and diagnostics.

In the scaled modal coordinates z = (p~_1, w_1 q~_1, ..., p~_N, w_N q~_N)
the energy is |z|^2 / 2, and the Liouville measure on H = h becomes the
uniform measure on the sphere |z| = sqrt(2h). Sampling and closed-form
expectations both work in z.
"""

from __future__ import annotations

import csv
import math
from io import StringIO
from dataclasses import dataclass, field

import numpy as np

from .dynamics import State
from .errors import EmptySample
from .io import RESULT_COLUMNS, _fmt, dumps_json
from .observables import resolve
from .rng import as_rng, make_rng
from .stochastic import embedded_chain_array, multi_trajectory

DEFAULT_ABS_TOL = 0.02
DEFAULT_KS_TOL = 0.05
MC_SIGMAS = 3.0


def _z_to_rows(spec, z):
    """Rows (q, p) in physical coordinates from sphere points z."""
    pm = z[:, 0::2]
    qm = z[:, 1::2] / spec.omega
    return np.hstack([qm @ spec.modes.T, pm @ spec.modes.T])


def sample_liouville_array(spec, n, rng):
    """``n`` Liouville samples as an (n, 2N) array of (q, p) rows."""
    rng = as_rng(rng)
    z = rng.standard_normal((int(n), 2 * spec.n))
    z *= math.sqrt(2.0 * spec.energy) / np.linalg.norm(z, axis=1, keepdims=True)
    return _z_to_rows(spec, z)


def sample_liouville(spec, rng):
    """One state drawn from the Liouville measure on H = spec.energy."""
    return State.from_vector(sample_liouville_array(spec, 1, rng)[0])


@dataclass(frozen=True)
class Reference:
    value: float
    stderr: float
    closed_form: bool


def _z_form(spec, obs):
    """The observable's form in z coordinates (see module docstring)."""
    m = obs.modal_form(spec)
    n = spec.n
    # y = (q~, p~) = T z with q~_k = z_{2k+1} / w_k, p~_k = z_{2k}
    t = np.zeros((2 * n, 2 * n))
    for k in range(n):
        t[k, 2 * k + 1] = 1.0 / spec.omega[k]
        t[n + k, 2 * k] = 1.0
    return t.T @ m @ t


def reference_expectation(spec, f, n=100_000, rng=0):
    """pi(f) with a standard error.

    Quadratic observables (H, r_k^2, p_1^2 and every other form) have the
    closed form E[z^T M z] = (h/N) tr M on the sphere, reported with zero
    error. Others are estimated from ``n`` Liouville samples.
    """
    obs = resolve(f, spec) if isinstance(f, str) else f
    if obs.is_quadratic:
        value = spec.energy / spec.n * float(np.trace(_z_form(spec, obs)))
        return Reference(value, 0.0, True)
    if n <= 0:
        raise EmptySample("Monte Carlo reference needs n > 0")
    vals = obs(sample_liouville_array(spec, n, rng))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return Reference(float(np.mean(vals)), stderr, False)


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov distance sup_x |F_a(x) - F_b(x)|."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise EmptySample("KS distance needs two non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def coordinate_names(n):
    return [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]


def per_coordinate_ks(x, y):
    return [ks_two_sample(x[:, j], y[:, j]) for j in range(x.shape[1])]


def invariance_check(spec, n, t_probe, rng):
    """Largest per-coordinate KS distance between pushed and fresh samples.

    ``n`` Liouville samples are pushed through a flow of ``t_probe``
    followed by a flip and compared with ``n`` fresh ones.
    """
    if n <= 0:
        raise EmptySample("invariance_check needs n > 0")
    rng = as_rng(rng)
    x = sample_liouville_array(spec, n, rng)
    fresh = sample_liouville_array(spec, n, rng)
    nn = spec.n
    qm, pm = x[:, :nn] @ spec.modes, x[:, nn:] @ spec.modes
    c, s = np.cos(spec.omega * t_probe), np.sin(spec.omega * t_probe)
    qm, pm = c * qm + s / spec.omega * pm, -spec.omega * s * qm + c * pm
    pushed = np.hstack([qm @ spec.modes.T, pm @ spec.modes.T])
    pushed[:, nn] = -pushed[:, nn]
    return max(per_coordinate_ks(pushed, fresh))


# --- reports -----------------------------------------------------------------------

@dataclass
class ErgodicReport:
    """Time averages against Liouville references, plus chain KS distances.

    ``estimates`` holds the seed-averaged M_f(T); ``mean_abs_errors`` the
    seed-averaged |M_f(T) - pi(f)|, which is what the pass flags test.
    """

    observables: list
    t_end: float
    seeds: list
    estimates: dict
    per_seed: dict
    references: dict
    reference_stderr: dict
    mean_abs_errors: dict
    thresholds: dict
    ks_stats: dict
    ks_threshold: float
    passed: dict = field(default_factory=dict)

    @property
    def all_passed(self):
        return all(self.passed.values())

    def to_dict(self):
        return {
            "observables": list(self.observables),
            "t_end": self.t_end,
            "seeds": list(self.seeds),
            "estimates": dict(self.estimates),
            "per_seed": {k: list(v) for k, v in self.per_seed.items()},
            "references": dict(self.references),
            "reference_stderr": dict(self.reference_stderr),
            "mean_abs_errors": dict(self.mean_abs_errors),
            "thresholds": dict(self.thresholds),
            "ks_stats": dict(self.ks_stats),
            "ks_threshold": self.ks_threshold,
            "pass": dict(self.passed),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["passed"] = d.pop("pass")
        return cls(**d)

    def to_json(self):
        return dumps_json(self.to_dict())

    def csv_rows(self):
        for name in self.observables:
            ref = self.references[name]
            for seed, est in zip(self.seeds, self.per_seed[name]):
                yield (seed, self.t_end, name, est, ref, abs(est - ref))

    def to_csv(self):
        buf = StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in self.csv_rows():
            w.writerow([_fmt(x) for x in row])
        return buf.getvalue()


def ergodicity_report(spec, psi0, t_end, law, seeds, f_set, n_ref=100_000, abs_tol=DEFAULT_ABS_TOL,
                      ks_tol=DEFAULT_KS_TOL, chain_samples=100_000, burn_in=1000, thin=10,
                      workers=1, ref_seed=None):
    """Time averages per seed against pi(f), and chain-vs-pi KS per coordinate.

    An observable passes when the seed-averaged absolute error is at most
    ``abs_tol``, widened by ``3 * stderr`` for Monte Carlo references. The
    KS check thins the chain after ``burn_in`` steps, keeping
    ``chain_samples`` states, and compares with as many Liouville samples;
    ``chain_samples = 0`` skips it. Auxiliary randomness uses
    ``ref_seed`` (default: the first seed) on dedicated streams.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise EmptySample("ergodicity_report needs at least one seed")
    names = [f if isinstance(f, str) else f.name for f in f_set]
    ref_seed = seeds[0] if ref_seed is None else int(ref_seed)
    runs = multi_trajectory(spec, psi0, t_end, law, seeds, f_set, workers=workers)
    estimates, per_seed, refs, ref_err, errs, thr, passed = {}, {}, {}, {}, {}, {}, {}
    for name in names:
        ref = reference_expectation(spec, name, n_ref, make_rng(ref_seed, stream=1))
        vals = np.array([r.means[name] for r in runs])
        per_seed[name] = [float(v) for v in vals]
        estimates[name] = float(np.mean(vals))
        refs[name] = ref.value
        ref_err[name] = ref.stderr
        errs[name] = float(np.mean(np.abs(vals - ref.value)))
        thr[name] = abs_tol + MC_SIGMAS * ref.stderr
        passed[name] = bool(errs[name] <= thr[name])
    ks = {}
    if chain_samples > 0:
        n_steps = burn_in + chain_samples * thin
        chain = embedded_chain_array(spec, psi0, n_steps, law, make_rng(ref_seed, stream=2),
                                     skip=burn_in, thin=thin)
        pi = sample_liouville_array(spec, chain.shape[0], make_rng(ref_seed, stream=3))
        ks = dict(zip(coordinate_names(spec.n), per_coordinate_ks(chain, pi)))
        passed["ks"] = bool(max(ks.values()) <= ks_tol)
    return ErgodicReport(names, float(t_end), seeds, estimates, per_seed, refs, ref_err, errs, thr,
                         ks, float(ks_tol), passed)
