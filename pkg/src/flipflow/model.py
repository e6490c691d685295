"""System specifications: the matrix V with its normal modes, and admissibility.

The marked particle is particle 1 (index 0). ``beta[k]`` is the overlap of
its unit direction e_1 with the k-th normal mode; the flip only talks to
modes with a nonzero overlap.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, NotSymmetric
from .rng import make_rng

DEFAULT_TOL = 1e-9
DEFAULT_COEFF_BOUND = 20
SEARCH_CAP = 5_000_000


class SpectrumNotSimple(UserWarning):
    """Two squared frequencies coincide within tolerance."""


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Immutable physics of a run.

    Attributes:
        n: particle count.
        v_matrix: the symmetric positive-definite coupling matrix V.
        omega_sq: ascending eigenvalues of V.
        omega: their positive square roots.
        modes: orthonormal eigenvectors, one per column.
        beta: ``modes[0, :]``, i.e. the components of e_1 in the mode basis.
        energy: the energy h of the surface the run lives on.
    """

    n: int
    v_matrix: np.ndarray
    omega_sq: np.ndarray
    omega: np.ndarray
    modes: np.ndarray
    beta: np.ndarray
    energy: float

    def __post_init__(self):
        for name in ("v_matrix", "omega_sq", "omega", "modes", "beta"):
            getattr(self, name).setflags(write=False)

    @property
    def a_matrix(self):
        """The 2N x 2N generator [[0, E], [-V, 0]] of the free flow."""
        n = self.n
        a = np.zeros((2 * n, 2 * n))
        a[:n, n:] = np.eye(n)
        a[n:, :n] = -self.v_matrix
        return a

    @property
    def r_star(self):
        """Action vector of g_star on this spec's energy surface."""
        return np.abs(self.beta) * np.sqrt(2.0 * self.energy)

    def with_energy(self, h):
        return SystemSpec(
            self.n, self.v_matrix.copy(), self.omega_sq.copy(), self.omega.copy(),
            self.modes.copy(), self.beta.copy(), float(h),
        )


def decompose(v_matrix, h=0.5):
    """Eigendecompose V and return the corresponding :class:`SystemSpec`.

    Eigenvalues are sorted ascending and every eigenvector is signed so its
    first component above roundoff is positive, which makes ``beta``
    reproducible across LAPACK builds.
    """
    v = np.array(v_matrix, dtype=float)
    if v.ndim == 1 and v.size == 1:
        v = v.reshape(1, 1)
    if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] == 0:
        raise NotSymmetric(f"matrix must be square and non-empty, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NotSymmetric("matrix has non-finite entries")
    if np.max(np.abs(v - v.T)) > 1e-12 * max(1.0, np.max(np.abs(v))):
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    if not h > 0:
        raise ValueError(f"energy must be positive, got {h}")
    v = 0.5 * (v + v.T)
    w, u = np.linalg.eigh(v)
    if w[0] <= 0:
        raise NotPositiveDefinite(w[0])
    order = np.argsort(w, kind="stable")
    w, u = w[order], u[:, order]
    for k in range(u.shape[1]):
        col = u[:, k]
        thresh = 1e-12 * np.max(np.abs(col))
        first = np.flatnonzero(np.abs(col) > thresh)[0]
        if col[first] < 0:
            u[:, k] = -col
    return SystemSpec(
        n=v.shape[0],
        v_matrix=v,
        omega_sq=w.copy(),
        omega=np.sqrt(w),
        modes=u.copy(),
        beta=u[0, :].copy(),
        energy=float(h),
    )


def harmonic_chain(n):
    """Tridiagonal chain with fixed ends: 2 on the diagonal, -1 beside it."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)


def random_spd(n, seed, eig_range=(0.5, 2.0)):
    """Random SPD matrix Q diag(lam) Q^T, deterministic in ``seed``.

    Q is the orthogonal factor of a standard normal matrix (signs fixed so
    that R has a positive diagonal) and lam is uniform in ``eig_range``.
    """
    lo, hi = map(float, eig_range)
    if not 0 < lo <= hi:
        raise ValueError(f"eig_range must lie in (0, inf), got {eig_range}")
    rng = make_rng(seed)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    lam = rng.uniform(lo, hi, size=n)
    v = (q * lam) @ q.T
    return 0.5 * (v + v.T)


def spectrum_is_simple(spec, tol=DEFAULT_TOL):
    if spec.n == 1:
        return True
    gaps = np.diff(spec.omega_sq)
    return bool(np.all(gaps > tol * spec.omega_sq[-1]))


def krylov_rank(spec, tol=DEFAULT_TOL):
    """Dimension of span{A^k g_1 : k < 2N} via Arnoldi with reorthogonalisation."""
    n2 = 2 * spec.n
    a = spec.a_matrix
    g = np.zeros(n2)
    g[spec.n] = 1.0
    basis = [g]
    x = g
    for _ in range(n2 - 1):
        w = a @ x
        scale = np.linalg.norm(w)
        if scale == 0:
            break
        for _pass in range(2):
            for b in basis:
                w = w - (b @ w) * b
        res = np.linalg.norm(w)
        if res <= tol * scale:
            break
        x = w / res
        basis.append(x)
    return len(basis)


def mixing_dimension(spec, tol=DEFAULT_TOL):
    """dim L_- as the numerical rank of the Krylov family of g_1 = (0, e_1).

    A :class:`SpectrumNotSimple` warning is emitted (and the Krylov value
    still returned) when two squared frequencies are closer than ``tol``.
    """
    if not spectrum_is_simple(spec, tol):
        warnings.warn("spectrum of V is not simple", SpectrumNotSimple, stacklevel=2)
    return krylov_rank(spec, tol)


@dataclass(frozen=True)
class AdmissibilityReport:
    in_v_plus: bool
    min_abs_beta: float
    spectrum_simple: bool
    independence: str  # independent-up-to-bound | dependent | inconclusive
    relation: tuple | None
    mixing_dim: int
    coeff_bound: int

    def to_dict(self):
        return {
            "in_v_plus": self.in_v_plus,
            "min_abs_beta": self.min_abs_beta,
            "spectrum_simple": self.spectrum_simple,
            "independence": self.independence,
            "relation": None if self.relation is None else list(self.relation),
            "mixing_dim": self.mixing_dim,
            "coeff_bound": self.coeff_bound,
        }


def find_integer_relation(values, tol=DEFAULT_TOL, coeff_bound=DEFAULT_COEFF_BOUND,
                          cap=SEARCH_CAP):
    """Exhaustive search for n != 0 with |sum n_k x_k| < tol * sum |n_k| x_k.

    Returns ``(status, relation)``. Among all hits the one with the smallest
    L1 norm wins, ties broken lexicographically; its first nonzero entry is
    made positive.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 1:
        return "independent-up-to-bound", None
    if (2 * coeff_bound + 1) ** n - 1 > cap:
        return "inconclusive", None
    rng_ = np.arange(-coeff_bound, coeff_bound + 1)
    tail = np.array(list(itertools.product(rng_, repeat=n - 1)), dtype=np.int64).reshape(-1, n - 1)
    tail_dot = tail @ x[1:]
    tail_abs = np.abs(tail) @ np.abs(x[1:])
    best = None
    # n_1 >= 0 covers every relation up to sign
    for first in range(0, coeff_bound + 1):
        dot = first * x[0] + tail_dot
        scale = first * abs(x[0]) + tail_abs
        hit = np.abs(dot) < tol * scale
        if first == 0:
            # with n_1 = 0 keep only tails whose first nonzero entry is positive
            nz = tail != 0
            lead = np.where(nz.any(axis=1), tail[np.arange(len(tail)), nz.argmax(axis=1)], 0)
            hit &= lead > 0
        for idx in np.flatnonzero(hit):
            cand = (first,) + tuple(int(t) for t in tail[idx])
            key = (sum(abs(c) for c in cand), cand)
            if best is None or key < best[0]:
                best = (key, cand)
    if best is None:
        return "independent-up-to-bound", None
    return "dependent", best[1]


def check_admissible(spec, tol=DEFAULT_TOL, coeff_bound=DEFAULT_COEFF_BOUND):
    """Membership in V+ and a bounded search for rational relations of omega^2."""
    simple = spectrum_is_simple(spec, tol)
    min_beta = float(np.min(np.abs(spec.beta)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SpectrumNotSimple)
        mdim = mixing_dimension(spec, tol)
    status, relation = find_integer_relation(spec.omega_sq, tol, coeff_bound)
    return AdmissibilityReport(
        in_v_plus=bool(simple and min_beta > tol),
        min_abs_beta=min_beta,
        spectrum_simple=simple,
        independence=status,
        relation=relation,
        mixing_dim=mdim,
        coeff_bound=coeff_bound,
    )
